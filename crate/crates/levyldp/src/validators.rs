//! Structured verification suites: coefficient hypotheses, the zero-noise
//! limit of the jump dynamics, and the variational representation of
//! Poisson exponential moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    check_hypothesis3, check_semimonotone, estimate_g_norms, eval_drift, sample_states,
    SamplerConfig, HYPOTHESIS3_DELTAS,
};
use crate::measure::{entropy_l, ControlFunction};
use crate::prm::{poisson_count, SeededRng};
use crate::semigroup::{apply_semigroup, HilbertState};
use crate::solver::{solve_mild, solve_skeleton, SolverConfig};
use crate::system::SystemSpec;
use crate::{Error, Result};

/// One named measurement compared against its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Outcome of one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub suite: String,
    pub entries: Vec<CheckEntry>,
    pub overall_pass: bool,
}

impl ValidationReport {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            entries: Vec::new(),
            overall_pass: true,
        }
    }

    pub fn push(&mut self, name: &str, measured: f64, bound: f64, pass: bool) {
        self.entries.push(CheckEntry {
            name: name.to_string(),
            measured,
            bound,
            pass,
        });
        self.overall_pass &= pass;
    }
}

/// Checks the standing coefficient hypotheses on sampled states: drift
/// semimonotonicity and growth, declared jump-coefficient norms,
/// exponential integrability of the mark measure, and semigroup
/// contraction with square integrability.
pub fn validate_system(
    sys: &SystemSpec,
    sampler: &SamplerConfig,
    horizon: f64,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("system");
    let gen = sys.generator();

    let semi = check_semimonotone(&sys.drift, gen, sampler)?;
    report.push(
        "drift-semimonotone",
        semi.max_quotient,
        semi.declared_m,
        semi.pass,
    );

    let states = sample_states(sys.dim(), sampler);
    let mut growth = 0.0f64;
    for x in &states {
        let fx = eval_drift(&sys.drift, gen, x)?;
        growth = growth.max(fx.norm() / (1.0 + x.norm()));
    }
    let c = sys.drift.declared_c();
    report.push("drift-growth", growth, c, growth <= c * (1.0 + 1e-6) + 1e-12);

    for j in 0..sys.diffusion.n_cells() {
        let est = estimate_g_norms(&sys.diffusion, j, sampler)?;
        let d0 = sys.diffusion.declared_g0(j);
        let d1 = sys.diffusion.declared_g1(j);
        report.push(
            &format!("noise-g0-cell-{j}"),
            est.g0,
            d0,
            est.g0 <= d0 * (1.0 + 1e-9) + 1e-12,
        );
        report.push(
            &format!("noise-g1-cell-{j}"),
            est.g1,
            d1,
            est.g1 <= d1 * (1.0 + 1e-9) + 1e-12,
        );
    }

    let rows = check_hypothesis3(&sys.diffusion, &sys.marks, horizon, &HYPOTHESIS3_DELTAS)?;
    let worst = rows
        .iter()
        .map(|r| r.integral_g0.max(r.integral_g1))
        .fold(0.0, f64::max);
    report.push("exp-moment-finite", worst, f64::INFINITY, worst.is_finite());

    // Contraction of the semigroup on sampled differences at a few times.
    let mut contraction = 0.0f64;
    for (k, x) in states.iter().enumerate().take(40) {
        let y = &states[(k + 7) % states.len()];
        let diff = x.sub(y);
        let d0 = diff.norm();
        if d0 == 0.0 {
            continue;
        }
        for t in [0.1 * horizon, 0.5 * horizon, horizon] {
            let moved = apply_semigroup(gen, t, &diff)?;
            contraction = contraction.max(moved.norm() / d0);
        }
    }
    report.push(
        "semigroup-contraction",
        contraction,
        1.0,
        contraction <= 1.0 + 1e-12,
    );

    // Square-type integrability: a left-endpoint quadrature of
    // |S(s) u|^{2 theta} stays below T |u|^{2 theta} because the integrand
    // is nonincreasing from its initial value.
    let u = if sys.initial.norm() > 0.0 {
        sys.initial.clone()
    } else {
        HilbertState::new(vec![1.0 / (sys.dim() as f64).sqrt(); sys.dim()])?
    };
    for theta in [0.5, 2.0] {
        let n = 64;
        let dt = horizon / n as f64;
        let mut integral = 0.0;
        for k in 0..n {
            let s = apply_semigroup(gen, dt * k as f64, &u)?;
            integral += dt * s.norm().powf(2.0 * theta);
        }
        let bound = horizon * u.norm().powf(2.0 * theta);
        report.push(
            &format!("semigroup-integrability-theta-{theta}"),
            integral,
            bound,
            integral <= bound * (1.0 + 1e-9),
        );
    }

    Ok(report)
}

/// Median sup-distance between the noisy path and the zero-noise skeleton
/// at one noise scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakConvergenceRow {
    pub epsilon: f64,
    pub median_sup_distance: f64,
    pub n_seeds: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// For each noise scale, the median over seeds of the sup distance at grid
/// times between jump paths sampled under the tilt `g` and the
/// deterministic path the tilt steers them toward.
pub fn weak_convergence_rows(
    sys: &SystemSpec,
    g: &ControlFunction,
    epsilons: &[f64],
    cfg: &SolverConfig,
    n_seeds: usize,
    root: &SeededRng,
) -> Result<Vec<WeakConvergenceRow>> {
    if n_seeds == 0 {
        return Err(Error::BadCoefficient("weak convergence needs seeds".into()));
    }
    let limit = solve_skeleton(sys, g, cfg)?;
    let times: Vec<f64> = (0..=cfg.grid.n_steps()).map(|i| cfg.grid.t(i)).collect();
    let mut rows = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        let sub = root.child(i as u64);
        let mut distances: Vec<f64> = (0..n_seeds)
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let mut rng = sub.child(k as u64);
                let path = solve_mild(sys, eps, g, cfg, &mut rng)?;
                Ok(path.sup_distance_at(&limit.path, &times))
            })
            .collect::<Result<_>>()?;
        rows.push(WeakConvergenceRow {
            epsilon: eps,
            median_sup_distance: median(&mut distances),
            n_seeds,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln median` against `ln epsilon`.
pub fn log_log_slope(rows: &[WeakConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_sup_distance > 0.0 && r.epsilon > 0.0)
        .map(|r| (r.epsilon.ln(), r.median_sup_distance.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    sxy / sxx
}

/// Checks that the medians decrease with the noise scale and that the decay
/// slope on a log-log scale sits in the given window.
pub fn validate_weak_convergence(
    sys: &SystemSpec,
    epsilons: &[f64],
    cfg: &SolverConfig,
    n_seeds: usize,
    root: &SeededRng,
    slope_window: (f64, f64),
) -> Result<ValidationReport> {
    if epsilons.len() < 2 || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadCoefficient(
            "weak convergence needs strictly decreasing noise scales".into(),
        ));
    }
    let unit = ControlFunction::constant(cfg.grid.clone(), sys.marks.clone(), 1.0)?;
    let rows = weak_convergence_rows(sys, &unit, epsilons, cfg, n_seeds, root)?;
    let mut report = ValidationReport::new("weak-convergence");
    for w in rows.windows(2) {
        let ratio = w[1].median_sup_distance / w[0].median_sup_distance;
        report.push(
            &format!("median-shrinks-{}-to-{}", w[0].epsilon, w[1].epsilon),
            ratio,
            1.0,
            ratio < 1.0,
        );
    }
    let slope = log_log_slope(&rows);
    report.push(
        "log-log-slope-above",
        slope,
        slope_window.0,
        slope >= slope_window.0,
    );
    report.push(
        "log-log-slope-below",
        slope,
        slope_window.1,
        slope <= slope_window.1,
    );
    Ok(report)
}

/// Functional of the total arrival count used in the representation check.
#[derive(Debug, Clone, PartialEq)]
pub enum CountFunctional {
    Constant { value: f64 },
    /// `weight * min(count, cap)`: bounded and nondecreasing in the count.
    ClippedCount { cap: u64, weight: f64 },
}

impl CountFunctional {
    pub fn apply(&self, count: u64) -> f64 {
        match self {
            CountFunctional::Constant { value } => *value,
            CountFunctional::ClippedCount { cap, weight } => weight * count.min(*cap) as f64,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountFunctionalJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

impl Serialize for CountFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self {
            CountFunctional::Constant { value } => CountFunctionalJson {
                kind: "constant".into(),
                value: Some(*value),
                cap: None,
                weight: None,
            },
            CountFunctional::ClippedCount { cap, weight } => CountFunctionalJson {
                kind: "clipped-count".into(),
                value: None,
                cap: Some(*cap),
                weight: Some(*weight),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = CountFunctionalJson::deserialize(d)?;
        match raw.kind.as_str() {
            "constant" => {
                let value = raw.value.ok_or_else(|| DeError::missing_field("value"))?;
                if raw.cap.is_some() || raw.weight.is_some() || !value.is_finite() {
                    return Err(DeError::custom("constant uses exactly a finite value"));
                }
                Ok(CountFunctional::Constant { value })
            }
            "clipped-count" => {
                let cap = raw.cap.ok_or_else(|| DeError::missing_field("cap"))?;
                let weight = raw.weight.ok_or_else(|| DeError::missing_field("weight"))?;
                if raw.value.is_some() || !(weight.is_finite() && weight >= 0.0) {
                    return Err(DeError::custom(
                        "clipped-count uses exactly a cap and a nonnegative weight",
                    ));
                }
                Ok(CountFunctional::ClippedCount { cap, weight })
            }
            other => Err(DeError::custom(format!("unknown count functional kind {other:?}"))),
        }
    }
}

/// `-ln E[exp(-F(N))]` for a Poisson count `N` with the given mean, summed
/// until the series tail is negligible or `k_max` terms are used.
pub fn poisson_log_laplace(mean: f64, f: &CountFunctional, k_max: u64) -> Result<f64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::BadCoefficient(format!("Poisson mean {mean}")));
    }
    let mut log_pk = -mean;
    let mut total = 0.0;
    for k in 0..=k_max {
        if k > 0 {
            log_pk += mean.ln() - (k as f64).ln();
        }
        total += (-f.apply(k) + log_pk).exp();
    }
    Ok(-total.ln())
}

/// Both sides of the variational representation restricted to constant
/// tilts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarRepReport {
    /// Exact `-ln E[exp(-F(N))]` from the truncated series.
    pub left: f64,
    /// Best sampled `theta T m l(gamma) + mean F(N^{theta gamma})` over the
    /// gamma grid.
    pub right: f64,
    pub right_std_error: f64,
    pub gamma_star: f64,
    pub gap: f64,
}

/// Compares `-ln E[exp(-F(N))]` for a Poisson random measure of intensity
/// `theta * mass` on `[0, horizon]` against the constant-tilt relaxation of
/// its variational representation: tilting to `theta * gamma` costs
/// `theta * horizon * mass * l(gamma)` and the remaining expectation is
/// estimated by Monte Carlo. The minimum over the gamma grid upper-bounds
/// the left side and is tight for count functionals.
pub fn variational_representation_check(
    theta: f64,
    mass: f64,
    horizon: f64,
    f: &CountFunctional,
    gammas: &[f64],
    n_samples: usize,
    root: &SeededRng,
) -> Result<VarRepReport> {
    if !(theta > 0.0 && theta.is_finite() && mass > 0.0 && mass.is_finite()) {
        return Err(Error::BadCoefficient(format!(
            "intensity theta {theta}, mass {mass}"
        )));
    }
    if gammas.is_empty() || n_samples < 2 {
        return Err(Error::BadCoefficient(
            "variational check needs a gamma grid and samples".into(),
        ));
    }
    let base_mean = theta * mass * horizon;
    let left = poisson_log_laplace(base_mean, f, 200)?;

    let mut right = f64::INFINITY;
    let mut right_se = 0.0;
    let mut gamma_star = f64::NAN;
    for (i, &gamma) in gammas.iter().enumerate() {
        let cost = theta * mass * horizon * entropy_l(gamma)?;
        let sub = root.child(i as u64);
        let values: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = sub.child(k as u64);
                f.apply(poisson_count(base_mean * gamma, &mut rng))
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let candidate = cost + mean;
        if candidate < right {
            right = candidate;
            right_se = se;
            gamma_star = gamma;
        }
    }

    Ok(VarRepReport {
        left,
        right,
        right_std_error: right_se,
        gamma_star,
        gap: (right - left).abs(),
    })
}
