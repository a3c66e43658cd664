//! Poisson random measures on `[0, T] x marks` and their controlled tilts.
//!
//! The base measure has per-bin intensity `mass_j * dt_i`. A control `g`
//! multiplies that intensity bin by bin; for piecewise-constant `g` the
//! thinned point count on bin `(i, j)` is exactly Poisson with mean
//! `g[i][j] * mass_j * dt_i`, which is how [`sample_controlled_prm`] draws
//! by default. The literal accept/reject construction (auxiliary uniform
//! coordinate under a global bound) is kept as [`ThinningMode::AcceptReject`]
//! for cross-checking.
//!
//! [`likelihood_ratio`] returns the Radon-Nikodym weight d(base)/d(tilted)
//! at a pattern, so averaging `F(pattern) * weight` over tilted samples
//! reproduces base-measure expectations.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::measure::{ControlFunction, MarkMeasure, TimeGrid};
use crate::{Error, Result};

/// Deterministic stream cipher RNG (ChaCha12) behind a 64-bit seed.
///
/// The same seed always yields the same draw sequence. Parallel workers use
/// disjoint streams from [`SeededRng::child_seed`]: worker `k` gets
/// `mix64(seed ^ (k + 1) * 0x9E3779B97F4A7C15)`, where `mix64` is the
/// SplitMix64 finalizer.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed for worker `index`, disjoint from the root stream and from other
    /// workers' streams.
    pub fn child_seed(seed: u64, index: u64) -> u64 {
        mix64(seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Child generator for worker `index`, derived from this stream's seed.
    pub fn child(&self, index: u64) -> SeededRng {
        SeededRng::new(Self::child_seed(self.seed, index))
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// One atom of a sampled point pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub cell: usize,
}

/// Finite point pattern on `[0, T] x marks`, time-sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct PointPattern {
    points: Vec<JumpEvent>,
}

impl PointPattern {
    /// Builds a pattern from events, sorting by time.
    pub fn new(mut points: Vec<JumpEvent>) -> Self {
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { points }
    }

    pub fn points(&self) -> &[JumpEvent] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points with time in `[a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.points.iter().filter(|p| p.t >= a && p.t < b).count()
    }

    pub fn count_in_cell(&self, cell: usize) -> usize {
        self.points.iter().filter(|p| p.cell == cell).count()
    }

    /// CSV rendering, one row per point in time order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cell\n");
        for p in &self.points {
            out.push_str(&format!("{:.16e},{}\n", p.t, p.cell));
        }
        out
    }
}

impl<'de> Deserialize<'de> for PointPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(PointPattern::new(Vec::<JumpEvent>::deserialize(d)?))
    }
}

/// How controlled patterns are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThinningMode {
    /// Per-bin Poisson with the thinned mean. Exact for piecewise-constant
    /// controls.
    #[default]
    ExactBinPoisson,
    /// Literal construction: dominating pattern under a global bound plus an
    /// auxiliary uniform coordinate, keeping points below the control level.
    AcceptReject,
}

pub(crate) fn poisson_count(mean: f64, rng: &mut SeededRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Draws per-bin counts with means `rate(i, j)` and uniform times within
/// each bin. Bins are visited step-major; the draw order is part of the
/// reproducibility contract.
fn sample_bins(
    grid: &TimeGrid,
    n_cells: usize,
    mut rate: impl FnMut(usize, usize) -> f64,
    rng: &mut SeededRng,
) -> PointPattern {
    let dt = grid.dt();
    let mut points = Vec::new();
    for i in 0..grid.n_steps() {
        let t0 = grid.t(i);
        for j in 0..n_cells {
            let mean = rate(i, j) * dt;
            for _ in 0..poisson_count(mean, rng) {
                points.push(JumpEvent {
                    t: t0 + rng.gen::<f64>() * dt,
                    cell: j,
                });
            }
        }
    }
    PointPattern::new(points)
}

/// Pattern of the base measure: bin `(i, j)` has mean `mass_j * dt`.
pub fn sample_prm(marks: &MarkMeasure, grid: &TimeGrid, rng: &mut SeededRng) -> PointPattern {
    sample_bins(grid, marks.n_cells(), |_, j| marks.mass(j), rng)
}

/// Pattern of the controlled measure: bin `(i, j)` has mean
/// `g[i][j] * mass_j * dt`.
pub fn sample_controlled_prm(
    g: &ControlFunction,
    mode: ThinningMode,
    rng: &mut SeededRng,
) -> PointPattern {
    sample_scaled_controlled_prm(g, 1.0, mode, rng).expect("unit scale is valid")
}

/// Small-noise pattern: the control is amplified by `1/epsilon`, so bin
/// `(i, j)` has mean `(g[i][j] / epsilon) * mass_j * dt`.
pub fn sample_small_noise_prm(
    epsilon: f64,
    g: &ControlFunction,
    rng: &mut SeededRng,
) -> Result<PointPattern> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::BadEpsilon(epsilon));
    }
    sample_scaled_controlled_prm(g, 1.0 / epsilon, ThinningMode::ExactBinPoisson, rng)
}

fn sample_scaled_controlled_prm(
    g: &ControlFunction,
    scale: f64,
    mode: ThinningMode,
    rng: &mut SeededRng,
) -> Result<PointPattern> {
    let marks = g.marks();
    match mode {
        ThinningMode::ExactBinPoisson => Ok(sample_bins(
            g.grid(),
            marks.n_cells(),
            |i, j| scale * g.value(i, j) * marks.mass(j),
            rng,
        )),
        ThinningMode::AcceptReject => {
            let bound = g.values().iter().cloned().fold(0.0f64, f64::max);
            if bound == 0.0 {
                return Ok(PointPattern::default());
            }
            // Dominating pattern with intensity bound * mass, then keep each
            // point iff its auxiliary coordinate lies below the control.
            let dominating = sample_bins(
                g.grid(),
                marks.n_cells(),
                |_, j| scale * bound * marks.mass(j),
                rng,
            );
            let kept = dominating
                .points()
                .iter()
                .filter(|p| {
                    let level = g.value_at(p.t, p.cell);
                    rng.gen::<f64>() * bound <= level
                })
                .cloned()
                .collect();
            Ok(PointPattern::new(kept))
        }
    }
}

/// Log of [`likelihood_ratio`].
pub fn log_likelihood_ratio(pattern: &PointPattern, g: &ControlFunction) -> Result<f64> {
    log_likelihood_ratio_scaled(pattern, g, 1.0)
}

/// Radon-Nikodym weight d(base)/d(tilted) at `pattern`, where the tilted
/// measure has bin means `g[i][j] * mass_j * dt` and the base has `g = 1`:
///
/// ```text
/// w = exp( sum_{i,j} (g[i][j] - 1) mass_j dt ) * prod_points 1 / g[bin]
/// ```
///
/// Averaging `F * w` over tilted samples reproduces base expectations.
pub fn likelihood_ratio(pattern: &PointPattern, g: &ControlFunction) -> Result<f64> {
    Ok(log_likelihood_ratio(pattern, g)?.exp())
}

/// Same weight with both intensities amplified by `scale` (small-noise
/// tilting uses `scale = 1/epsilon`): the compensator term scales, the
/// per-point factor does not.
pub fn likelihood_ratio_scaled(
    pattern: &PointPattern,
    g: &ControlFunction,
    scale: f64,
) -> Result<f64> {
    Ok(log_likelihood_ratio_scaled(pattern, g, scale)?.exp())
}

pub fn log_likelihood_ratio_scaled(
    pattern: &PointPattern,
    g: &ControlFunction,
    scale: f64,
) -> Result<f64> {
    let grid = g.grid();
    let marks = g.marks();
    let dt = grid.dt();
    let mut log_w = 0.0;
    for i in 0..grid.n_steps() {
        for j in 0..marks.n_cells() {
            log_w += scale * (g.value(i, j) - 1.0) * marks.mass(j) * dt;
        }
    }
    for p in pattern.points() {
        if !(0.0..=grid.horizon()).contains(&p.t) || p.cell >= marks.n_cells() {
            return Err(Error::PatternMismatch {
                time: p.t,
                cell: p.cell,
            });
        }
        let step = grid.step_of(p.t);
        let level = g.value(step, p.cell);
        if level <= 0.0 {
            return Err(Error::DegenerateWeight { step, cell: p.cell });
        }
        log_w -= level.ln();
    }
    Ok(log_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{ControlFunction, MarkMeasure, TimeGrid};

    // Frozen reference values, computed independently.
    const EXP_5: f64 = 148.413_159_102_576_6; // e^5
    const EXP_5_HALF: f64 = 74.206_579_551_288_3; // e^5 / 2

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(t, n).unwrap()
    }

    fn masses(m: &[f64]) -> MarkMeasure {
        MarkMeasure::from_masses(m).unwrap()
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn zero_mass_gives_empty_pattern() {
        let mut rng = SeededRng::new(1);
        let p = sample_prm(&masses(&[0.0, 0.0]), &grid(1.0, 8), &mut rng);
        assert!(p.is_empty());
    }

    #[test]
    fn zero_control_gives_empty_pattern() {
        let g = ControlFunction::constant(grid(1.0, 8), masses(&[3.0]), 0.0).unwrap();
        for mode in [ThinningMode::ExactBinPoisson, ThinningMode::AcceptReject] {
            let mut rng = SeededRng::new(2);
            assert!(sample_controlled_prm(&g, mode, &mut rng).is_empty());
        }
    }

    #[test]
    fn same_seed_reproduces_pattern_exactly() {
        let g = ControlFunction::constant(grid(2.0, 16), masses(&[1.5, 0.5]), 1.3).unwrap();
        let a = sample_controlled_prm(&g, ThinningMode::default(), &mut SeededRng::new(77));
        let b = sample_controlled_prm(&g, ThinningMode::default(), &mut SeededRng::new(77));
        let c = sample_controlled_prm(&g, ThinningMode::default(), &mut SeededRng::new(78));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn child_seeds_are_disjoint() {
        let s = 42u64;
        let children: Vec<u64> = (0..100).map(|k| SeededRng::child_seed(s, k)).collect();
        let mut dedup = children.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), children.len());
        assert!(!children.contains(&s));
    }

    #[test]
    fn points_sorted_and_inside_horizon() {
        let mut rng = SeededRng::new(5);
        let p = sample_prm(&masses(&[10.0]), &grid(3.0, 7), &mut rng);
        assert!(!p.is_empty());
        for w in p.points().windows(2) {
            assert!(w[0].t <= w[1].t);
        }
        assert!(p.points().iter().all(|e| e.t > 0.0 && e.t < 3.0));
    }

    #[test]
    fn base_mean_count_matches_total_mass() {
        // Mean count is total_mass * T = 5; 3 sigma band for 10^4 replicates.
        let marks = masses(&[5.0]);
        let g = grid(1.0, 10);
        let root = SeededRng::new(11);
        let counts: Vec<f64> = (0..10_000)
            .map(|k| sample_prm(&marks, &g, &mut root.child(k)).len() as f64)
            .collect();
        let (mean, _) = mean_and_se(&counts);
        assert!((mean - 5.0).abs() <= 3.0 * (5.0f64 / 10_000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn cells_are_independent() {
        let marks = masses(&[2.0, 3.0]);
        let g = grid(1.0, 4);
        let root = SeededRng::new(13);
        let pairs: Vec<(f64, f64)> = (0..10_000)
            .map(|k| {
                let p = sample_prm(&marks, &g, &mut root.child(k));
                (p.count_in_cell(0) as f64, p.count_in_cell(1) as f64)
            })
            .collect();
        let n = pairs.len() as f64;
        let (mx, my) = (
            pairs.iter().map(|p| p.0).sum::<f64>() / n,
            pairs.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n;
        let (vx, vy) = (
            pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>() / n,
            pairs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>() / n,
        );
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() <= 0.03, "corr {corr}");
    }

    #[test]
    fn controlled_mean_doubles_under_g_two() {
        let g = ControlFunction::constant(grid(1.0, 10), masses(&[5.0]), 2.0).unwrap();
        let root = SeededRng::new(17);
        let counts: Vec<f64> = (0..10_000)
            .map(|k| sample_controlled_prm(&g, ThinningMode::default(), &mut root.child(k)).len() as f64)
            .collect();
        let (mean, _) = mean_and_se(&counts);
        assert!((mean - 10.0).abs() <= 3.0 * (10.0f64 / 10_000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn time_localized_control_shifts_counts() {
        // g = 2 on [0, 1/2), 1 on [1/2, 1), mass 4.
        let marks = masses(&[4.0]);
        let tg = grid(1.0, 2);
        let g = ControlFunction::new(tg, marks, vec![2.0, 1.0]).unwrap();
        let root = SeededRng::new(19);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for k in 0..10_000 {
            let p = sample_controlled_prm(&g, ThinningMode::default(), &mut root.child(k));
            first.push(p.count_in(0.0, 0.5) as f64);
            second.push(p.count_in(0.5, 1.0) as f64);
        }
        let (m1, _) = mean_and_se(&first);
        let (m2, _) = mean_and_se(&second);
        assert!((m1 - 4.0).abs() <= 3.0 * (4.0f64 / 10_000.0).sqrt(), "m1 {m1}");
        assert!((m2 - 2.0).abs() <= 3.0 * (2.0f64 / 10_000.0).sqrt(), "m2 {m2}");
    }

    #[test]
    fn small_noise_amplifies_intensity() {
        let g1 = ControlFunction::constant(grid(1.0, 8), masses(&[2.0]), 1.0).unwrap();
        let root = SeededRng::new(23);
        let counts: Vec<f64> = (0..10_000)
            .map(|k| {
                sample_small_noise_prm(0.1, &g1, &mut root.child(k))
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let (mean, _) = mean_and_se(&counts);
        assert!((mean - 20.0).abs() <= 3.0 * (20.0f64 / 10_000.0).sqrt(), "mean {mean}");

        let g2 = ControlFunction::constant(grid(1.0, 8), masses(&[1.0]), 2.0).unwrap();
        let counts: Vec<f64> = (0..10_000)
            .map(|k| {
                sample_small_noise_prm(0.5, &g2, &mut root.child(100_000 + k))
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let (mean, _) = mean_and_se(&counts);
        assert!((mean - 4.0).abs() <= 3.0 * (4.0f64 / 10_000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn small_noise_rejects_bad_epsilon() {
        let g = ControlFunction::constant(grid(1.0, 2), masses(&[1.0]), 1.0).unwrap();
        assert!(sample_small_noise_prm(0.0, &g, &mut SeededRng::new(1)).is_err());
        assert!(sample_small_noise_prm(-1.0, &g, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn accept_reject_agrees_with_bin_poisson() {
        // Nonconstant control; compare means of both constructions.
        let marks = masses(&[3.0]);
        let tg = grid(1.0, 4);
        let g = ControlFunction::new(tg, marks, vec![0.5, 2.0, 1.0, 1.5]).unwrap();
        let expect = 0.25 * 3.0 * (0.5 + 2.0 + 1.0 + 1.5); // sum of bin means
        let n = 50_000u64;
        let root = SeededRng::new(29);
        for (salt, mode) in [(0u64, ThinningMode::ExactBinPoisson), (1, ThinningMode::AcceptReject)] {
            let counts: Vec<f64> = (0..n)
                .map(|k| {
                    sample_controlled_prm(&g, mode, &mut root.child(salt * 1_000_000 + k)).len()
                        as f64
                })
                .collect();
            let (mean, _) = mean_and_se(&counts);
            assert!(
                (mean - expect).abs() <= 3.0 * (expect / n as f64).sqrt(),
                "{mode:?}: mean {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn unit_control_has_unit_weight() {
        let g = ControlFunction::constant(grid(1.0, 4), masses(&[2.0]), 1.0).unwrap();
        let mut rng = SeededRng::new(31);
        let p = sample_prm(g.marks(), g.grid(), &mut rng);
        assert_eq!(likelihood_ratio(&p, &g).unwrap(), 1.0);
    }

    #[test]
    fn weight_on_empty_pattern() {
        // Base puts e^{-5} on the empty pattern, the g=2 tilt e^{-10}; the
        // base/tilted ratio is e^{+5}.
        let g = ControlFunction::constant(grid(1.0, 4), masses(&[5.0]), 2.0).unwrap();
        let w = likelihood_ratio(&PointPattern::default(), &g).unwrap();
        assert!((w - EXP_5).abs() < 1e-9 * EXP_5);
    }

    #[test]
    fn weight_with_one_point() {
        let g = ControlFunction::constant(grid(1.0, 4), masses(&[5.0]), 2.0).unwrap();
        let p = PointPattern::new(vec![JumpEvent { t: 0.3, cell: 0 }]);
        let w = likelihood_ratio(&p, &g).unwrap();
        assert!((w - EXP_5_HALF).abs() < 1e-9 * EXP_5_HALF);
    }

    #[test]
    fn weight_degenerates_on_zero_control_bin() {
        let tg = grid(1.0, 2);
        let g = ControlFunction::new(tg, masses(&[1.0]), vec![0.0, 1.0]).unwrap();
        let p = PointPattern::new(vec![JumpEvent { t: 0.25, cell: 0 }]);
        assert!(matches!(
            likelihood_ratio(&p, &g),
            Err(Error::DegenerateWeight { step: 0, cell: 0 })
        ));
    }

    #[test]
    fn weight_rejects_foreign_pattern() {
        let g = ControlFunction::constant(grid(1.0, 2), masses(&[1.0]), 1.0).unwrap();
        let late = PointPattern::new(vec![JumpEvent { t: 1.5, cell: 0 }]);
        assert!(likelihood_ratio(&late, &g).is_err());
        let off_cell = PointPattern::new(vec![JumpEvent { t: 0.5, cell: 3 }]);
        assert!(likelihood_ratio(&off_cell, &g).is_err());
    }

    #[test]
    fn scaled_weight_reduces_to_unit_scale() {
        let g = ControlFunction::constant(grid(1.0, 4), masses(&[5.0]), 2.0).unwrap();
        let p = PointPattern::new(vec![JumpEvent { t: 0.3, cell: 0 }]);
        let a = likelihood_ratio(&p, &g).unwrap();
        let b = likelihood_ratio_scaled(&p, &g, 1.0).unwrap();
        assert_eq!(a, b);
        // Doubling the intensity scale squares the compensator factor only.
        let c = likelihood_ratio_scaled(&p, &g, 2.0).unwrap();
        assert!((c - EXP_5 * EXP_5 / 2.0).abs() < 1e-6 * c);
    }

    #[test]
    fn reweighted_tilted_mean_recovers_base_mean() {
        // E_base[min(count, 5)] estimated two ways: crude, and reweighted
        // under a g=1.7 tilt. Agreement within 3 combined standard errors.
        let marks = masses(&[2.0]);
        let tg = grid(1.0, 4);
        let g = ControlFunction::constant(tg, marks.clone(), 1.7).unwrap();
        let n = 20_000u64;
        let root = SeededRng::new(37);
        let stat = |p: &PointPattern| (p.len() as f64).min(5.0);

        let crude: Vec<f64> = (0..n)
            .map(|k| stat(&sample_prm(&marks, &tg, &mut root.child(k))))
            .collect();
        let tilted: Vec<f64> = (0..n)
            .map(|k| {
                let p =
                    sample_controlled_prm(&g, ThinningMode::default(), &mut root.child(n + k));
                stat(&p) * likelihood_ratio(&p, &g).unwrap()
            })
            .collect();
        let (m0, s0) = mean_and_se(&crude);
        let (m1, s1) = mean_and_se(&tilted);
        let combined = (s0 * s0 + s1 * s1).sqrt();
        assert!(
            (m0 - m1).abs() <= 3.0 * combined,
            "crude {m0} +- {s0}, reweighted {m1} +- {s1}"
        );
    }

    #[test]
    fn superposition_of_disjoint_marks() {
        // Counts of the merged two-cell pattern match a single cell carrying
        // the summed mass.
        let root = SeededRng::new(41);
        let tg = grid(1.0, 4);
        let split = masses(&[2.0, 3.0]);
        let merged = masses(&[5.0]);
        let a: Vec<f64> = (0..10_000)
            .map(|k| sample_prm(&split, &tg, &mut root.child(k)).len() as f64)
            .collect();
        let b: Vec<f64> = (0..10_000)
            .map(|k| sample_prm(&merged, &tg, &mut root.child(500_000 + k)).len() as f64)
            .collect();
        let (ma, sa) = mean_and_se(&a);
        let (mb, sb) = mean_and_se(&b);
        assert!((ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn pattern_json_round_trip() {
        let p = PointPattern::new(vec![
            JumpEvent { t: 0.7, cell: 1 },
            JumpEvent { t: 0.2, cell: 0 },
        ]);
        let text = serde_json::to_string(&p).unwrap();
        let back: PointPattern = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
        // Deserialization restores time order.
        assert!(back.points()[0].t <= back.points()[1].t);
    }

    #[test]
    fn pattern_csv_lists_points_in_time_order() {
        let p = PointPattern::new(vec![
            JumpEvent { t: 0.75, cell: 1 },
            JumpEvent { t: 0.25, cell: 0 },
        ]);
        let csv = p.to_csv();
        assert_eq!(
            csv,
            "t,cell\n2.5000000000000000e-1,0\n7.5000000000000000e-1,1\n"
        );
        assert_eq!(PointPattern::default().to_csv(), "t,cell\n");
    }
}
