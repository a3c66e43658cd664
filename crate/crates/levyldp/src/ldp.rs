//! Rare-event machinery: event geometry, variational rate estimation over
//! piecewise-constant controls, plain and importance-sampled probability
//! estimators, the small-noise scan, and Laplace-functional checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{cost_lt, ControlFunction, TimeGrid};
use crate::prm::{likelihood_ratio_scaled, sample_small_noise_prm, SeededRng};
use crate::semigroup::HilbertState;
use crate::solver::{solve_mild_with_pattern, solve_skeleton, PathRecord, SolverConfig};
use crate::system::SystemSpec;
use crate::{Error, Result};

/// Pathwise rare event. `contains` is closed: boundary paths count as hits.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSpec {
    /// `<X_T, direction> >= threshold`, with a unit direction.
    TerminalHalfspace {
        direction: HilbertState,
        threshold: f64,
    },
    /// `|X_T - center| >= radius`.
    TerminalBallComplement { center: HilbertState, radius: f64 },
    /// `sup_t |X_t| >= radius`, pre-jump states included.
    SupnormExceedance { radius: f64 },
}

impl EventSpec {
    pub fn terminal_halfspace(direction: Vec<f64>, threshold: f64) -> Result<Self> {
        let dir = HilbertState::new(direction)?;
        let norm = dir.norm();
        if norm == 0.0 {
            return Err(Error::BadCoefficient("halfspace direction is zero".into()));
        }
        if !threshold.is_finite() {
            return Err(Error::BadCoefficient(format!("threshold {threshold}")));
        }
        let mut unit = dir;
        unit.scale(1.0 / norm);
        Ok(EventSpec::TerminalHalfspace {
            direction: unit,
            threshold,
        })
    }

    pub fn terminal_ball_complement(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::BadCoefficient(format!("radius {radius}")));
        }
        Ok(EventSpec::TerminalBallComplement {
            center: HilbertState::new(center)?,
            radius,
        })
    }

    pub fn supnorm_exceedance(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::BadCoefficient(format!("radius {radius}")));
        }
        Ok(EventSpec::SupnormExceedance { radius })
    }

    /// State-space dimension the event constrains, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            EventSpec::TerminalHalfspace { direction, .. } => Some(direction.dim()),
            EventSpec::TerminalBallComplement { center, .. } => Some(center.dim()),
            EventSpec::SupnormExceedance { .. } => None,
        }
    }

    /// Shortfall of the path: zero inside the event, otherwise how far the
    /// relevant statistic is from the boundary.
    pub fn distance(&self, path: &PathRecord) -> f64 {
        match self {
            EventSpec::TerminalHalfspace {
                direction,
                threshold,
            } => (threshold - path.terminal().dot(direction)).max(0.0),
            EventSpec::TerminalBallComplement { center, radius } => {
                (radius - path.terminal().distance(center)).max(0.0)
            }
            EventSpec::SupnormExceedance { radius } => (radius - path.sup_norm()).max(0.0),
        }
    }

    pub fn contains(&self, path: &PathRecord) -> bool {
        self.distance(path) == 0.0
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
}

impl Serialize for EventSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self {
            EventSpec::TerminalHalfspace {
                direction,
                threshold,
            } => EventJson {
                kind: "terminal-halfspace".into(),
                direction: Some(direction.coeffs().to_vec()),
                threshold: Some(*threshold),
                center: None,
                radius: None,
            },
            EventSpec::TerminalBallComplement { center, radius } => EventJson {
                kind: "terminal-ball-complement".into(),
                direction: None,
                threshold: None,
                center: Some(center.coeffs().to_vec()),
                radius: Some(*radius),
            },
            EventSpec::SupnormExceedance { radius } => EventJson {
                kind: "supnorm-exceedance".into(),
                direction: None,
                threshold: None,
                center: None,
                radius: Some(*radius),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EventSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = EventJson::deserialize(d)?;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(DeError::custom(format!(
                    "event kind {:?} uses exactly the fields {what}",
                    raw.kind
                )))
            }
        };
        match raw.kind.as_str() {
            "terminal-halfspace" => {
                need(
                    raw.direction.is_some()
                        && raw.threshold.is_some()
                        && raw.center.is_none()
                        && raw.radius.is_none(),
                    "direction, threshold",
                )?;
                EventSpec::terminal_halfspace(raw.direction.unwrap(), raw.threshold.unwrap())
                    .map_err(DeError::custom)
            }
            "terminal-ball-complement" => {
                need(
                    raw.center.is_some()
                        && raw.radius.is_some()
                        && raw.direction.is_none()
                        && raw.threshold.is_none(),
                    "center, radius",
                )?;
                EventSpec::terminal_ball_complement(raw.center.unwrap(), raw.radius.unwrap())
                    .map_err(DeError::custom)
            }
            "supnorm-exceedance" => {
                need(
                    raw.radius.is_some()
                        && raw.direction.is_none()
                        && raw.threshold.is_none()
                        && raw.center.is_none(),
                    "radius",
                )?;
                EventSpec::supnorm_exceedance(raw.radius.unwrap()).map_err(DeError::custom)
            }
            other => Err(DeError::custom(format!("unknown event kind {other:?}"))),
        }
    }
}

/// Controls are searched in the box `[0, G_CAP]`; the entropy cost grows
/// superlinearly, so real minimizers sit far from the cap.
const G_CAP: f64 = 64.0;

/// Settings for the variational rate search.
#[derive(Debug, Clone)]
pub struct RateOptions {
    /// Grid carrying the optimization variables, one value per step and cell.
    pub control_grid: TimeGrid,
    pub solver: SolverConfig,
    /// A control counts as feasible when its path's event shortfall is at
    /// most this.
    pub feasibility_tol: f64,
    /// Penalty weights sweep `rho_0 * growth^k` for `k < max_penalty_stages`.
    pub penalty_rho0: f64,
    pub penalty_growth: f64,
    pub max_penalty_stages: usize,
    /// Projected-gradient iterations per penalty stage.
    pub descent_iters: usize,
    /// Constant control levels used as starting points, tried in order.
    pub starts: Vec<f64>,
}

impl RateOptions {
    pub fn new(control_grid: TimeGrid, solver: SolverConfig) -> Self {
        Self {
            control_grid,
            solver,
            feasibility_tol: 1e-3,
            penalty_rho0: 1.0,
            penalty_growth: 10.0,
            max_penalty_stages: 6,
            descent_iters: 60,
            starts: vec![1.0, 0.5, 2.0, 4.0, 8.0],
        }
    }
}

/// One completed penalty stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTraceRow {
    pub rho: f64,
    pub cost: f64,
    pub distance: f64,
    pub objective: f64,
}

/// Result of the variational search. `value` is infinite when no feasible
/// control was found; the best control seen is still returned for
/// inspection together with its residual shortfall.
#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub feasible: bool,
    pub penalty_residual: f64,
    pub control: ControlFunction,
    pub trace: Vec<RateTraceRow>,
}

struct PenaltyOutcome {
    control: ControlFunction,
    cost: f64,
    distance: f64,
    trace: Vec<RateTraceRow>,
}

fn evaluate_control(
    sys: &SystemSpec,
    event: &EventSpec,
    solver: &SolverConfig,
    g: &ControlFunction,
) -> Result<(f64, f64)> {
    let run = solve_skeleton(sys, g, solver)?;
    Ok((cost_lt(g), event.distance(&run.path)))
}

/// Quadratic-penalty continuation from one starting control, minimizing
/// `cost + rho * distance^2` by projected gradient descent with forward
/// differences and backtracking.
fn penalty_descent(
    sys: &SystemSpec,
    event: &EventSpec,
    opts: &RateOptions,
    start_level: f64,
) -> Result<PenaltyOutcome> {
    let mut g = ControlFunction::constant(
        opts.control_grid.clone(),
        sys.marks.clone(),
        start_level.clamp(0.0, G_CAP),
    )?;
    let n_vars = opts.control_grid.n_steps() * sys.marks.n_cells();
    let cells = sys.marks.n_cells();
    let mut trace = Vec::with_capacity(opts.max_penalty_stages);

    let objective = |g: &ControlFunction, rho: f64| -> Result<(f64, f64, f64)> {
        let (cost, dist) = evaluate_control(sys, event, &opts.solver, g)?;
        Ok((cost + rho * dist * dist, cost, dist))
    };

    for stage in 0..opts.max_penalty_stages {
        let rho = opts.penalty_rho0 * opts.penalty_growth.powi(stage as i32);
        let mut step = 1.0;
        let (mut fval, mut cost, mut dist) = objective(&g, rho)?;
        for _ in 0..opts.descent_iters {
            // Forward-difference gradient in the flattened control values.
            let mut grad = vec![0.0; n_vars];
            for k in 0..n_vars {
                let (i, j) = (k / cells, k % cells);
                let base = g.value(i, j);
                let delta = 1e-5 * (1.0 + base.abs());
                let mut probe = g.clone();
                probe.set_value(i, j, (base + delta).min(G_CAP))?;
                let actual = probe.value(i, j) - base;
                if actual == 0.0 {
                    continue;
                }
                let (fp, _, _) = objective(&probe, rho)?;
                grad[k] = (fp - fval) / actual;
            }
            let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }

            step *= 2.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut candidate = g.clone();
                let mut moved = 0.0f64;
                for k in 0..n_vars {
                    let (i, j) = (k / cells, k % cells);
                    let target = (g.value(i, j) - step * grad[k]).clamp(0.0, G_CAP);
                    moved = moved.max((target - g.value(i, j)).abs());
                    candidate.set_value(i, j, target)?;
                }
                if moved < 1e-12 {
                    break;
                }
                let (fc, cc, dc) = objective(&candidate, rho)?;
                if fc < fval - 1e-14 {
                    g = candidate;
                    fval = fc;
                    cost = cc;
                    dist = dc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        trace.push(RateTraceRow {
            rho,
            cost,
            distance: dist,
            objective: fval,
        });
        if dist <= opts.feasibility_tol {
            // Tight enough; later stages would only polish the boundary.
            break;
        }
    }

    let (cost, dist) = evaluate_control(sys, event, &opts.solver, &g)?;
    Ok(PenaltyOutcome {
        control: g,
        cost,
        distance: dist,
        trace,
    })
}

/// Estimates the variational rate `inf { L_T(g) : skeleton(g) in event }`
/// over piecewise-constant controls on `opts.control_grid`.
///
/// The unit control is checked first: events already containing the
/// zero-effort path have rate zero. Each starting level then runs a
/// quadratic-penalty continuation; the cheapest feasible outcome wins. When
/// nothing feasible is found the estimate carries an infinite value and the
/// closest control seen.
pub fn estimate_rate(sys: &SystemSpec, event: &EventSpec, opts: &RateOptions) -> Result<RateEstimate> {
    if let Some(d) = event.dim() {
        if d != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                actual: d,
            });
        }
    }
    let unit = ControlFunction::constant(opts.control_grid.clone(), sys.marks.clone(), 1.0)?;
    let (_, unit_dist) = evaluate_control(sys, event, &opts.solver, &unit)?;
    if unit_dist <= opts.feasibility_tol {
        return Ok(RateEstimate {
            value: 0.0,
            feasible: true,
            penalty_residual: unit_dist,
            control: unit,
            trace: Vec::new(),
        });
    }

    let mut best_feasible: Option<PenaltyOutcome> = None;
    let mut closest: Option<PenaltyOutcome> = None;
    for &level in &opts.starts {
        let outcome = penalty_descent(sys, event, opts, level)?;
        if outcome.distance <= opts.feasibility_tol {
            let better = best_feasible
                .as_ref()
                .map_or(true, |b| outcome.cost < b.cost);
            if better {
                best_feasible = Some(outcome);
            }
        } else {
            let nearer = closest
                .as_ref()
                .map_or(true, |c| outcome.distance < c.distance);
            if nearer {
                closest = Some(outcome);
            }
        }
    }

    Ok(match (best_feasible, closest) {
        (Some(win), _) => RateEstimate {
            value: win.cost,
            feasible: true,
            penalty_residual: win.distance,
            control: win.control,
            trace: win.trace,
        },
        (None, Some(near)) => RateEstimate {
            value: f64::INFINITY,
            feasible: false,
            penalty_residual: near.distance,
            control: near.control,
            trace: near.trace,
        },
        (None, None) => RateEstimate {
            value: f64::INFINITY,
            feasible: false,
            penalty_residual: unit_dist,
            control: unit,
            trace: Vec::new(),
        },
    })
}

/// Probability estimate with its standard error and raw hit count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbEstimate {
    pub p_hat: f64,
    pub std_error: f64,
    pub hits: usize,
    pub n_samples: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Plain Monte Carlo estimate of `P(X^eps in event)` under the base
/// intensity. Samples are drawn from disjoint child streams of `root`, so
/// the result does not depend on the parallel schedule.
pub fn mc_probability(
    sys: &SystemSpec,
    event: &EventSpec,
    epsilon: f64,
    cfg: &SolverConfig,
    n_samples: usize,
    root: &SeededRng,
) -> Result<ProbEstimate> {
    let base = ControlFunction::constant(cfg.grid.clone(), sys.marks.clone(), 1.0)?;
    let indicators: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = root.child(k as u64);
            let pattern = sample_small_noise_prm(epsilon, &base, &mut rng)?;
            let path = solve_mild_with_pattern(sys, epsilon, &pattern, cfg)?;
            Ok(if event.contains(&path) { 1.0 } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let hits = indicators.iter().filter(|&&v| v > 0.0).count();
    let p = hits as f64 / n_samples as f64;
    let se = (p * (1.0 - p) / n_samples as f64).sqrt();
    Ok(ProbEstimate {
        p_hat: p,
        std_error: se,
        hits,
        n_samples,
    })
}

/// Importance-sampled estimate of the same probability: patterns are drawn
/// under the tilted intensity `tilt / epsilon` and hits are reweighted by
/// the exact likelihood ratio, so the estimator is unbiased for any
/// positive tilt.
pub fn is_probability(
    sys: &SystemSpec,
    event: &EventSpec,
    epsilon: f64,
    tilt: &ControlFunction,
    cfg: &SolverConfig,
    n_samples: usize,
    root: &SeededRng,
) -> Result<ProbEstimate> {
    let weighted: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = root.child(k as u64);
            let pattern = sample_small_noise_prm(epsilon, tilt, &mut rng)?;
            let path = solve_mild_with_pattern(sys, epsilon, &pattern, cfg)?;
            if event.contains(&path) {
                likelihood_ratio_scaled(&pattern, tilt, 1.0 / epsilon)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<_>>()?;
    let hits = weighted.iter().filter(|&&v| v > 0.0).count();
    let (p, se) = mean_and_se(&weighted);
    Ok(ProbEstimate {
        p_hat: p,
        std_error: se,
        hits,
        n_samples,
    })
}

/// One row of the small-noise scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub p_hat: f64,
    pub std_error: f64,
    pub hits: usize,
    pub n_samples: usize,
    /// `epsilon ln p_hat`, negative infinity when no hit was recorded. The
    /// tilt likelihood scales like `exp(-L_T(g)/epsilon)` for this noise
    /// family, so `epsilon` is the normalization under which the log
    /// probability is comparable to `minus_rate`.
    pub eps2_log_p: f64,
    /// Reference level `-I` from the variational estimate.
    pub minus_rate: f64,
}

/// Importance-sampled probabilities across a grid of noise scales, each
/// compared against the variational decay rate. Scale `epsilons[i]` uses
/// the child stream `root.child(i)` as its sampling root.
pub fn ldp_scan(
    sys: &SystemSpec,
    event: &EventSpec,
    rate: &RateEstimate,
    epsilons: &[f64],
    cfg: &SolverConfig,
    n_samples: usize,
    root: &SeededRng,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        let sub = root.child(i as u64);
        let est = is_probability(sys, event, eps, &rate.control, cfg, n_samples, &sub)?;
        rows.push(ScanRow {
            epsilon: eps,
            p_hat: est.p_hat,
            std_error: est.std_error,
            hits: est.hits,
            n_samples: est.n_samples,
            eps2_log_p: if est.p_hat > 0.0 {
                eps * est.p_hat.ln()
            } else {
                f64::NEG_INFINITY
            },
            minus_rate: -rate.value,
        });
    }
    Ok(rows)
}

/// CSV rendering of a scan, one row per noise scale. The header names the
/// decay comparison columns: `eps2_log_p` should approach `minus_I`.
pub fn scan_rows_to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("epsilon,p_hat,se,eps2_log_p,minus_I\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.epsilon, r.p_hat, r.std_error, r.eps2_log_p, r.minus_rate
        ));
    }
    out
}

/// Bounded path functionals for Laplace-principle checks.
#[derive(Debug, Clone, PartialEq)]
pub enum PathFunctional {
    Constant { value: f64 },
    /// `weight` charged when the path misses the event, nothing inside.
    EventPenalty { event: EventSpec, weight: f64 },
    /// `weight * max(0, cap - sup_t |X_t|)`: charges paths that stay small.
    SupNormShortfall { cap: f64, weight: f64 },
}

impl PathFunctional {
    pub fn evaluate(&self, path: &PathRecord) -> f64 {
        match self {
            PathFunctional::Constant { value } => *value,
            PathFunctional::EventPenalty { event, weight } => {
                if event.contains(path) {
                    0.0
                } else {
                    *weight
                }
            }
            PathFunctional::SupNormShortfall { cap, weight } => {
                weight * (cap - path.sup_norm()).max(0.0)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    event: Option<EventSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<f64>,
}

impl Serialize for PathFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self {
            PathFunctional::Constant { value } => FunctionalJson {
                kind: "constant".into(),
                value: Some(*value),
                event: None,
                weight: None,
                cap: None,
            },
            PathFunctional::EventPenalty { event, weight } => FunctionalJson {
                kind: "event-penalty".into(),
                value: None,
                event: Some(event.clone()),
                weight: Some(*weight),
                cap: None,
            },
            PathFunctional::SupNormShortfall { cap, weight } => FunctionalJson {
                kind: "supnorm-shortfall".into(),
                value: None,
                event: None,
                weight: Some(*weight),
                cap: Some(*cap),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PathFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = FunctionalJson::deserialize(d)?;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(DeError::custom(format!(
                    "functional kind {:?} uses exactly the fields {what}",
                    raw.kind
                )))
            }
        };
        let finite_pos = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(DeError::custom(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        match raw.kind.as_str() {
            "constant" => {
                check(
                    raw.value.is_some() && raw.event.is_none() && raw.weight.is_none() && raw.cap.is_none(),
                    "value",
                )?;
                let value = raw.value.unwrap();
                if !value.is_finite() {
                    return Err(DeError::custom(format!("constant value {value}")));
                }
                Ok(PathFunctional::Constant { value })
            }
            "event-penalty" => {
                check(
                    raw.event.is_some() && raw.weight.is_some() && raw.value.is_none() && raw.cap.is_none(),
                    "event, weight",
                )?;
                Ok(PathFunctional::EventPenalty {
                    event: raw.event.unwrap(),
                    weight: finite_pos(raw.weight.unwrap(), "weight")?,
                })
            }
            "supnorm-shortfall" => {
                check(
                    raw.cap.is_some() && raw.weight.is_some() && raw.value.is_none() && raw.event.is_none(),
                    "cap, weight",
                )?;
                Ok(PathFunctional::SupNormShortfall {
                    cap: finite_pos(raw.cap.unwrap(), "cap")?,
                    weight: finite_pos(raw.weight.unwrap(), "weight")?,
                })
            }
            other => Err(DeError::custom(format!("unknown functional kind {other:?}"))),
        }
    }
}

/// Sampled side of the Laplace principle, `-eps ln E[exp(-h/eps)]`,
/// estimated under the tilted intensity with exact reweighting. The
/// normalization matches the decay speed of the noise family, the same
/// `epsilon` that scales the tilt likelihood. Returns the value and its
/// delta-method standard error.
pub fn laplace_lhs(
    sys: &SystemSpec,
    h: &PathFunctional,
    epsilon: f64,
    tilt: &ControlFunction,
    cfg: &SolverConfig,
    n_samples: usize,
    root: &SeededRng,
) -> Result<(f64, f64)> {
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = root.child(k as u64);
            let pattern = sample_small_noise_prm(epsilon, tilt, &mut rng)?;
            let path = solve_mild_with_pattern(sys, epsilon, &pattern, cfg)?;
            let w = likelihood_ratio_scaled(&pattern, tilt, 1.0 / epsilon)?;
            Ok(w * (-h.evaluate(&path) / epsilon).exp())
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&samples);
    if mean <= 0.0 {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    Ok((-epsilon * mean.ln(), epsilon * se / mean))
}

/// Variational side of the Laplace principle, `inf { h + I }` over the
/// functional's catalog structure. `levels` is the search grid of sup-norm
/// targets used by the shortfall functional; the grid should start at zero.
pub fn laplace_rhs(
    sys: &SystemSpec,
    h: &PathFunctional,
    opts: &RateOptions,
    levels: &[f64],
) -> Result<f64> {
    match h {
        PathFunctional::Constant { value } => Ok(*value),
        PathFunctional::EventPenalty { event, weight } => {
            // Inside the event the functional vanishes, so that branch costs
            // the event's rate; missing the event costs `weight` and the
            // zero-effort path already does so.
            let rate = estimate_rate(sys, event, opts)?;
            Ok(rate.value.min(*weight))
        }
        PathFunctional::SupNormShortfall { cap, weight } => {
            let mut best = f64::INFINITY;
            for &r in levels {
                let attained = if r <= 0.0 {
                    0.0
                } else {
                    estimate_rate(sys, &EventSpec::supnorm_exceedance(r)?, opts)?.value
                };
                best = best.min(weight * (cap - r).max(0.0) + attained);
            }
            Ok(best)
        }
    }
}

/// Both sides of the Laplace principle at one noise scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn laplace_check(
    sys: &SystemSpec,
    h: &PathFunctional,
    epsilon: f64,
    tilt: &ControlFunction,
    cfg: &SolverConfig,
    n_samples: usize,
    root: &SeededRng,
    opts: &RateOptions,
    levels: &[f64],
) -> Result<LaplaceReport> {
    let (lhs, lhs_se) = laplace_lhs(sys, h, epsilon, tilt, cfg, n_samples, root)?;
    let rhs = laplace_rhs(sys, h, opts, levels)?;
    Ok(LaplaceReport {
        epsilon,
        lhs,
        lhs_std_error: lhs_se,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
