//! Path solvers for the controlled skeleton equation and the small-noise
//! jump dynamics, plus the pathwise monitors used to validate runs.
//!
//! Both solvers march the mild one-step map
//!
//! ```text
//! x_next = S(h) x + h S(h) b(t, x)
//! ```
//!
//! with the forcing frozen at the left endpoint. The skeleton forcing is
//! `f(x) + sum_j G(t, x, v_j) (g(t, j) - 1) mass_j`; the noisy dynamics use
//! the compensated drift `f(x) - sum_j G(t, x, v_j) mass_j` between events
//! and add `epsilon * G(t, x-, v_j)` at each point of the driving pattern.

use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_diffusion, eval_drift};
use crate::measure::{ControlFunction, TimeGrid};
use crate::prm::{sample_small_noise_prm, PointPattern, SeededRng};
use crate::semigroup::{HilbertState, SpectralGenerator};
use crate::system::SystemSpec;
use crate::{Error, Result};

/// Starting path for the fixed-point iteration.
///
/// `TimeStepped` builds the explicit left-point recursion, which is already
/// the exact fixed point of the discrete mild map, so the iteration stops
/// after one verification pass. `Flat` starts from the constant initial
/// state; the recorded distances then exhibit the contraction directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PicardInitial {
    #[default]
    TimeStepped,
    Flat,
}

/// Discretization and iteration settings shared by both solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grid: TimeGrid,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iters")]
    pub picard_max_iters: usize,
    /// Pathwise monitor tolerance; `None` means `10 dt (1 + sup^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_tol: Option<f64>,
    #[serde(default)]
    pub initial_guess: PicardInitial,
}

fn default_picard_tol() -> f64 {
    1e-10
}

fn default_picard_max_iters() -> usize {
    50
}

impl SolverConfig {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            picard_tol: default_picard_tol(),
            picard_max_iters: default_picard_max_iters(),
            monitor_tol: None,
            initial_guess: PicardInitial::TimeStepped,
        }
    }
}

/// One recorded instant of a path. At jump times `pre_jump` holds the state
/// just before the jump and `state` the state just after; `forcing` is the
/// drift term used on the segment that starts here (absent on the terminal
/// point).
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub state: HilbertState,
    pub pre_jump: Option<HilbertState>,
    pub forcing: Option<HilbertState>,
}

/// Time-sorted piecewise record of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    points: Vec<PathPoint>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
}

impl PathRecord {
    pub(crate) fn from_points(points: Vec<PathPoint>) -> Self {
        assert!(!points.is_empty(), "a path records at least its initial point");
        Self {
            points,
            epsilon: None,
            seed: None,
        }
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points[0].state.dim()
    }

    pub fn terminal(&self) -> &HilbertState {
        &self.points[self.points.len() - 1].state
    }

    pub fn jump_count(&self) -> usize {
        self.points.iter().filter(|p| p.pre_jump.is_some()).count()
    }

    pub fn has_jumps(&self) -> bool {
        self.points.iter().any(|p| p.pre_jump.is_some())
    }

    /// Right-continuous evaluation: the state at the last recorded point
    /// with time at most `t` (up to a relative rounding slack).
    pub fn state_at(&self, t: f64) -> &HilbertState {
        let cutoff = t + 1e-12 * (1.0 + t.abs());
        let idx = self.points.partition_point(|p| p.t <= cutoff);
        &self.points[idx.saturating_sub(1)].state
    }

    /// Largest norm along the path, pre-jump states included.
    pub fn sup_norm(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| {
                std::iter::once(p.state.norm()).chain(p.pre_jump.as_ref().map(|x| x.norm()))
            })
            .fold(0.0, f64::max)
    }

    /// Largest distance to `other` over the given comparison times.
    pub fn sup_distance_at(&self, other: &PathRecord, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| self.state_at(t).distance(other.state_at(t)))
            .fold(0.0, f64::max)
    }

    /// CSV rendering with one row per recorded state; jump times produce a
    /// pre-jump row followed by the post-jump row flagged `is_jump = 1`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("t");
        for k in 0..d {
            out.push_str(&format!(",c{k}"));
        }
        out.push_str(",is_jump\n");
        for p in &self.points {
            if let Some(pre) = &p.pre_jump {
                push_csv_row(&mut out, p.t, pre, false);
                push_csv_row(&mut out, p.t, &p.state, true);
            } else {
                push_csv_row(&mut out, p.t, &p.state, false);
            }
        }
        out
    }
}

fn push_csv_row(out: &mut String, t: f64, x: &HilbertState, jump: bool) {
    out.push_str(&format!("{t:.16e}"));
    for c in x.coeffs() {
        out.push_str(&format!(",{c:.16e}"));
    }
    out.push_str(if jump { ",1\n" } else { ",0\n" });
}

/// Skeleton solve output: the path together with the sup distances recorded
/// by successive fixed-point sweeps.
#[derive(Debug, Clone)]
pub struct SkeletonRun {
    pub path: PathRecord,
    pub picard_distances: Vec<f64>,
}

impl SkeletonRun {
    pub fn picard_iterations(&self) -> usize {
        self.picard_distances.len()
    }
}

/// `S(h) x + h S(h) b`, computed coefficientwise as `e^{lam h} (x + h b)`.
fn advance(gen: &SpectralGenerator, h: f64, x: &HilbertState, b: &HilbertState) -> Result<HilbertState> {
    let coeffs = gen
        .eigenvalues()
        .iter()
        .zip(x.coeffs().iter().zip(b.coeffs()))
        .map(|(&lam, (&xi, &bi))| (lam * h).exp() * (xi + h * bi))
        .collect();
    HilbertState::new(coeffs)
}

/// Uniform-step variant of [`advance`] with the decay factors cached.
struct StepOp {
    dt: f64,
    decay: Vec<f64>,
}

impl StepOp {
    fn new(gen: &SpectralGenerator, dt: f64) -> Self {
        Self {
            dt,
            decay: gen.eigenvalues().iter().map(|&lam| (lam * dt).exp()).collect(),
        }
    }

    fn apply(&self, x: &HilbertState, b: &HilbertState) -> Result<HilbertState> {
        let coeffs = self
            .decay
            .iter()
            .zip(x.coeffs().iter().zip(b.coeffs()))
            .map(|(&d, (&xi, &bi))| d * (xi + self.dt * bi))
            .collect();
        HilbertState::new(coeffs)
    }
}

/// Controlled forcing `f(x) + sum_j G(t, x, v_j) (g(t, j) - 1) mass_j`.
pub fn skeleton_forcing(
    sys: &SystemSpec,
    g: &ControlFunction,
    t: f64,
    x: &HilbertState,
) -> Result<HilbertState> {
    let mut a = eval_drift(&sys.drift, sys.generator(), x)?;
    for j in 0..sys.marks.n_cells() {
        let w = (g.value_at(t, j) - 1.0) * sys.marks.mass(j);
        if w != 0.0 {
            let gj = eval_diffusion(&sys.diffusion, t, x, j)?;
            a.add_scaled(w, &gj);
        }
    }
    Ok(a)
}

/// Drift with the noise compensator removed:
/// `f(x) - sum_j G(t, x, v_j) mass_j`.
pub fn compensated_drift(sys: &SystemSpec, t: f64, x: &HilbertState) -> Result<HilbertState> {
    let mut b = eval_drift(&sys.drift, sys.generator(), x)?;
    for j in 0..sys.marks.n_cells() {
        let m = sys.marks.mass(j);
        if m != 0.0 {
            let gj = eval_diffusion(&sys.diffusion, t, x, j)?;
            b.add_scaled(-m, &gj);
        }
    }
    Ok(b)
}

fn check_control_against_system(sys: &SystemSpec, g: &ControlFunction) -> Result<()> {
    let gm = g.marks();
    if gm.n_cells() != sys.marks.n_cells() {
        return Err(Error::DimensionMismatch {
            expected: sys.marks.n_cells(),
            actual: gm.n_cells(),
        });
    }
    for j in 0..gm.n_cells() {
        if gm.mass(j) != sys.marks.mass(j) {
            return Err(Error::BadCoefficient(format!(
                "control mark mass {} in cell {} differs from the system's {}",
                gm.mass(j),
                j,
                sys.marks.mass(j)
            )));
        }
    }
    Ok(())
}

fn check_grid_refines(solver: &TimeGrid, control: &TimeGrid) -> Result<()> {
    let same_horizon = (solver.horizon() - control.horizon()).abs()
        <= 1e-12 * solver.horizon().max(control.horizon());
    if !same_horizon || solver.n_steps() % control.n_steps() != 0 {
        return Err(Error::GridMismatch {
            solver: solver.n_steps(),
            control: control.n_steps(),
        });
    }
    Ok(())
}

/// One sweep of the discrete mild map: the recursion runs in the output
/// while the forcing is read from `source`, so a fixed point satisfies the
/// explicit left-point scheme.
fn picard_sweep(
    sys: &SystemSpec,
    g: &ControlFunction,
    grid: &TimeGrid,
    op: &StepOp,
    source: &[HilbertState],
) -> Result<Vec<HilbertState>> {
    let n = grid.n_steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(sys.initial.clone());
    for k in 0..n {
        let a = skeleton_forcing(sys, g, grid.t(k), &source[k])?;
        let next = op.apply(&out[k], &a)?;
        out.push(next);
    }
    Ok(out)
}

fn time_stepped_path(
    sys: &SystemSpec,
    g: &ControlFunction,
    grid: &TimeGrid,
    op: &StepOp,
) -> Result<Vec<HilbertState>> {
    let n = grid.n_steps();
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(sys.initial.clone());
    for k in 0..n {
        let a = skeleton_forcing(sys, g, grid.t(k), &xs[k])?;
        let next = op.apply(&xs[k], &a)?;
        xs.push(next);
    }
    Ok(xs)
}

fn sup_distance(a: &[HilbertState], b: &[HilbertState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}

/// Solves the controlled deterministic equation by fixed-point iteration of
/// the discrete mild map. The solver grid must refine the control's grid.
pub fn solve_skeleton(sys: &SystemSpec, g: &ControlFunction, cfg: &SolverConfig) -> Result<SkeletonRun> {
    check_control_against_system(sys, g)?;
    check_grid_refines(&cfg.grid, g.grid())?;
    let grid = &cfg.grid;
    let op = StepOp::new(sys.generator(), grid.dt());

    let mut current = match cfg.initial_guess {
        PicardInitial::TimeStepped => time_stepped_path(sys, g, grid, &op)?,
        PicardInitial::Flat => vec![sys.initial.clone(); grid.n_steps() + 1],
    };
    let mut distances = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.picard_max_iters.max(1) {
        let next = picard_sweep(sys, g, grid, &op, &current)?;
        let d = sup_distance(&next, &current);
        distances.push(d);
        current = next;
        if d <= cfg.picard_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PicardNonConvergence {
            iterations: distances.len(),
            last_distance: *distances.last().expect("at least one sweep ran"),
        });
    }

    let n = grid.n_steps();
    let mut points = Vec::with_capacity(n + 1);
    for (k, state) in current.into_iter().enumerate() {
        let forcing = if k < n {
            Some(skeleton_forcing(sys, g, grid.t(k), &state)?)
        } else {
            None
        };
        points.push(PathPoint {
            t: grid.t(k),
            state,
            pre_jump: None,
            forcing,
        });
    }
    Ok(SkeletonRun {
        path: PathRecord::from_points(points),
        picard_distances: distances,
    })
}

/// Integrates the small-noise dynamics along a fixed driving pattern. Grid
/// times and event times are merged, so no step straddles a jump.
pub fn solve_mild_with_pattern(
    sys: &SystemSpec,
    epsilon: f64,
    pattern: &PointPattern,
    cfg: &SolverConfig,
) -> Result<PathRecord> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let grid = &cfg.grid;
    let t_end = grid.horizon();

    let mut schedule: Vec<(f64, Option<usize>)> =
        Vec::with_capacity(grid.n_steps() + pattern.len());
    for ev in pattern.points() {
        if !(ev.t >= 0.0 && ev.t <= t_end) || ev.cell >= sys.marks.n_cells() {
            return Err(Error::PatternMismatch {
                time: ev.t,
                cell: ev.cell,
            });
        }
        schedule.push((ev.t, Some(ev.cell)));
    }
    for i in 1..=grid.n_steps() {
        schedule.push((grid.t(i), None));
    }
    schedule.sort_by(|a, b| a.0.total_cmp(&b.0));

    let gen = sys.generator();
    let mut x = sys.initial.clone();
    let mut t_cur = 0.0;
    let mut points = Vec::with_capacity(schedule.len() + 1);
    let mut forcing = compensated_drift(sys, t_cur, &x)?;
    points.push(PathPoint {
        t: t_cur,
        state: x.clone(),
        pre_jump: None,
        forcing: Some(forcing.clone()),
    });

    for (idx, &(t_next, event)) in schedule.iter().enumerate() {
        let h = t_next - t_cur;
        x = advance(gen, h, &x, &forcing)?;
        let pre_jump = if let Some(cell) = event {
            let pre = x.clone();
            let jump = eval_diffusion(&sys.diffusion, t_next, &pre, cell)?;
            x.add_scaled(epsilon, &jump);
            Some(pre)
        } else {
            None
        };
        let last = idx + 1 == schedule.len();
        let stored_forcing = if last {
            None
        } else {
            forcing = compensated_drift(sys, t_next, &x)?;
            Some(forcing.clone())
        };
        points.push(PathPoint {
            t: t_next,
            state: x.clone(),
            pre_jump,
            forcing: stored_forcing,
        });
        t_cur = t_next;
    }

    let mut record = PathRecord::from_points(points);
    record.epsilon = Some(epsilon);
    Ok(record)
}

/// Samples a driving pattern under the tilted intensity `g / epsilon` and
/// integrates along it.
pub fn solve_mild(
    sys: &SystemSpec,
    epsilon: f64,
    tilt: &ControlFunction,
    cfg: &SolverConfig,
    rng: &mut SeededRng,
) -> Result<PathRecord> {
    check_control_against_system(sys, tilt)?;
    check_grid_refines(&cfg.grid, tilt.grid())?;
    let seed = rng.seed();
    let pattern = sample_small_noise_prm(epsilon, tilt, rng)?;
    let mut record = solve_mild_with_pattern(sys, epsilon, &pattern, cfg)?;
    record.seed = Some(seed);
    Ok(record)
}

/// Largest signed defect of the pathwise energy balance
/// `|X_t|^2 - |X_0|^2 - 2 int <X_s, a(s, X_s)> ds` over recorded times
/// after zero. Negative values measure the dissipation margin; values above
/// the monitor tolerance indicate a broken run. Jump paths are rejected,
/// their balance includes jump terms handled by [`ito_monitor`].
pub fn energy_monitor<F>(path: &PathRecord, mut forcing: F) -> Result<f64>
where
    F: FnMut(f64, &HilbertState) -> Result<HilbertState>,
{
    if path.has_jumps() {
        return Err(Error::PathHasJumps);
    }
    let pts = path.points();
    let base = pts[0].state.norm().powi(2);
    let mut integral = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for m in 1..pts.len() {
        let prev = &pts[m - 1];
        let h = pts[m].t - prev.t;
        let a = forcing(prev.t, &prev.state)?;
        integral += 2.0 * h * prev.state.dot(&a);
        let v = pts[m].state.norm().powi(2) - base - integral;
        worst = worst.max(v);
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Largest signed defect of the jump-aware energy balance, using the
/// forcing stored on the path and the recorded pre-jump states:
/// `|X_t|^2 - |X_0|^2 - 2 int <X_s, b_s> ds - sum (2 <X_-, dx> + |dx|^2)`.
pub fn ito_monitor(path: &PathRecord) -> Result<f64> {
    let pts = path.points();
    let base = pts[0].state.norm().powi(2);
    let mut acc = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for m in 1..pts.len() {
        let prev = &pts[m - 1];
        let p = &pts[m];
        let h = p.t - prev.t;
        let b = prev.forcing.as_ref().ok_or(Error::MissingForcing)?;
        acc += 2.0 * h * prev.state.dot(b);
        if let Some(pre) = &p.pre_jump {
            let v_pre = pre.norm().powi(2) - base - acc;
            worst = worst.max(v_pre);
            let delta = p.state.sub(pre);
            acc += 2.0 * pre.dot(&delta) + delta.norm().powi(2);
        }
        let v = p.state.norm().powi(2) - base - acc;
        worst = worst.max(v);
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Default pathwise monitor tolerance, `10 dt (1 + sup |X|^2)`.
pub fn default_monitor_tol(path: &PathRecord, dt: f64) -> f64 {
    10.0 * dt * (1.0 + path.sup_norm().powi(2))
}

/// Discrete a priori bound on the skeleton path: with `C` the declared
/// drift growth constant and
/// `Q = sum_{i,j} g0_j |g[i][j] - 1| mass_j dt`, every state satisfies
/// `|X_k| <= (1 + |X_0|) exp(C T + Q) - 1`.
pub fn apriori_skeleton_bound(sys: &SystemSpec, g: &ControlFunction) -> f64 {
    let grid = g.grid();
    let dt = grid.dt();
    let mut q = 0.0;
    for i in 0..grid.n_steps() {
        for j in 0..sys.marks.n_cells() {
            q += sys.diffusion.declared_g0(j) * (g.value(i, j) - 1.0).abs() * sys.marks.mass(j) * dt;
        }
    }
    let total = sys.drift.declared_c() * grid.horizon() + q;
    (1.0 + sys.initial.norm()) * total.exp() - 1.0
}
