//! Drift and jump-diffusion coefficient catalogs with their declared
//! regularity constants.
//!
//! Drifts come from a small semimonotone family evaluated pointwise:
//! `zero`, `linear` (`f(u) = c u`), and `tanh-monotone`
//! (`f(u) = -a u - b tanh(u)`). On the sine basis, pointwise maps act
//! through the collocation grid (evaluate, map, project back); linear maps
//! commute with the projection and act on coefficients directly.
//!
//! Jump coefficients are rank-one per mark cell, `G(t, x, v_j) =
//! sigma v_j dir_j h(x)`, with `h = 1` (additive) or the bounded affine
//! modulation `h(x) = 1 + kappa s / (1 + |s|)`, `s = <x, dir_j>`. Each
//! catalog entry carries closed-form bounds for the growth norm (sup of
//! `||G|| / (1 + ||x||)`) and the Lipschitz norm used by the hypothesis
//! checks; the samplers here estimate both empirically so declared and
//! measured values can be compared.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::measure::MarkMeasure;
use crate::prm::SeededRng;
use crate::semigroup::{coeffs_to_field, field_to_coeffs, Basis, HilbertState, SpectralGenerator};
use crate::{Error, Result};

/// Pointwise drift family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftKind {
    Zero,
    /// `f(u) = slope * u`. Dissipative for `slope <= 0`; positive slopes are
    /// constructible so validators have a real violation to catch.
    Linear { slope: f64 },
    /// `f(u) = -a u - b tanh(u)`, `a, b >= 0`.
    TanhMonotone { a: f64, b: f64 },
}

/// Drift with declared semimonotonicity and growth constants.
///
/// The declared values are claims to be checked, not guarantees: the whole
/// catalog declares `M = 0` (dissipativity), which a `linear` drift with
/// positive slope deliberately fails.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    kind: DriftKind,
    declared_m: f64,
    declared_c: f64,
}

impl DriftSpec {
    pub fn zero() -> Self {
        Self {
            kind: DriftKind::Zero,
            declared_m: 0.0,
            declared_c: 0.0,
        }
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !slope.is_finite() {
            return Err(Error::BadCoefficient(format!("linear slope {slope}")));
        }
        Ok(Self {
            kind: DriftKind::Linear { slope },
            declared_m: 0.0,
            declared_c: slope.abs(),
        })
    }

    pub fn tanh_monotone(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(Error::BadCoefficient(format!("tanh-monotone a={a}, b={b}")));
        }
        Ok(Self {
            kind: DriftKind::TanhMonotone { a, b },
            declared_m: 0.0,
            declared_c: a.max(b),
        })
    }

    /// Overrides the declared constants.
    pub fn with_declared(mut self, m: f64, c: f64) -> Result<Self> {
        if !(m.is_finite() && c.is_finite() && m >= 0.0 && c >= 0.0) {
            return Err(Error::BadCoefficient(format!("declared M={m}, C={c}")));
        }
        self.declared_m = m;
        self.declared_c = c;
        Ok(self)
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn declared_m(&self) -> f64 {
        self.declared_m
    }

    pub fn declared_c(&self) -> f64 {
        self.declared_c
    }

    pub fn pointwise(&self, u: f64) -> f64 {
        match self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Linear { slope } => slope * u,
            DriftKind::TanhMonotone { a, b } => -a * u - b * u.tanh(),
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self.kind, DriftKind::Zero | DriftKind::Linear { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    declared_m: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    declared_c: Option<f64>,
}

impl Serialize for DriftSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut raw = DriftJson {
            kind: String::new(),
            slope: None,
            a: None,
            b: None,
            declared_m: Some(self.declared_m),
            declared_c: Some(self.declared_c),
        };
        match self.kind {
            DriftKind::Zero => raw.kind = "zero".into(),
            DriftKind::Linear { slope } => {
                raw.kind = "linear".into();
                raw.slope = Some(slope);
            }
            DriftKind::TanhMonotone { a, b } => {
                raw.kind = "tanh-monotone".into();
                raw.a = Some(a);
                raw.b = Some(b);
            }
        }
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DriftSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = DriftJson::deserialize(d)?;
        let stray = |field: &str| DeError::custom(format!("field {field:?} not valid for drift kind {:?}", raw.kind));
        let need = |field: &str| DeError::custom(format!("drift kind {:?} needs field {field:?}", raw.kind));
        let base = match raw.kind.as_str() {
            "zero" => {
                if raw.slope.is_some() || raw.a.is_some() || raw.b.is_some() {
                    return Err(stray("slope/a/b"));
                }
                Ok(DriftSpec::zero())
            }
            "linear" => {
                if raw.a.is_some() || raw.b.is_some() {
                    return Err(stray("a/b"));
                }
                DriftSpec::linear(raw.slope.ok_or_else(|| need("slope"))?)
            }
            "tanh-monotone" => {
                if raw.slope.is_some() {
                    return Err(stray("slope"));
                }
                DriftSpec::tanh_monotone(
                    raw.a.ok_or_else(|| need("a"))?,
                    raw.b.ok_or_else(|| need("b"))?,
                )
            }
            other => return Err(DeError::custom(format!("unknown drift kind {other:?}"))),
        }
        .map_err(DeError::custom)?;
        let m = raw.declared_m.unwrap_or(base.declared_m);
        let c = raw.declared_c.unwrap_or(base.declared_c);
        base.with_declared(m, c).map_err(DeError::custom)
    }
}

/// Number of collocation points used for pointwise evaluation on the sine
/// basis. Oversampling by 4 keeps aliasing far below solver error for the
/// smooth states the dynamics produce.
pub fn default_collocation(modes: usize) -> usize {
    4 * modes
}

/// Drift evaluation in coefficient space at the default resolution.
pub fn eval_drift(spec: &DriftSpec, gen: &SpectralGenerator, x: &HilbertState) -> Result<HilbertState> {
    eval_drift_at_resolution(spec, gen, x, default_collocation(gen.dim()))
}

/// Drift evaluation with an explicit collocation resolution (sine basis
/// only; the identity basis is already pointwise).
pub fn eval_drift_at_resolution(
    spec: &DriftSpec,
    gen: &SpectralGenerator,
    x: &HilbertState,
    n_points: usize,
) -> Result<HilbertState> {
    if x.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: x.dim(),
        });
    }
    // Linear maps commute with the basis projection: acting on coefficients
    // is exact and skips the transform entirely.
    if spec.is_linear() || gen.basis() == Basis::Identity {
        let coeffs = x.coeffs().iter().map(|&u| spec.pointwise(u)).collect();
        return HilbertState::new(coeffs);
    }
    let samples = coeffs_to_field(gen, x, n_points)?;
    let mapped: Vec<f64> = samples.iter().map(|&u| spec.pointwise(u)).collect();
    field_to_coeffs(gen, &mapped)
}

/// How the rank-one jump coefficient depends on the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    Additive,
    /// Factor `1 + kappa s / (1 + |s|)` with `s = <x, dir>`; bounded, with
    /// Lipschitz constant `kappa` along the cell direction.
    AffineBounded { kappa: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModulationJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
}

impl Serialize for Modulation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self {
            Modulation::Additive => ModulationJson {
                kind: "additive".into(),
                kappa: None,
            },
            Modulation::AffineBounded { kappa } => ModulationJson {
                kind: "affine-bounded".into(),
                kappa: Some(*kappa),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Modulation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = ModulationJson::deserialize(d)?;
        match raw.kind.as_str() {
            "additive" => {
                if raw.kappa.is_some() {
                    return Err(DeError::custom("field \"kappa\" not valid for additive modulation"));
                }
                Ok(Modulation::Additive)
            }
            "affine-bounded" => {
                let kappa = raw
                    .kappa
                    .ok_or_else(|| DeError::custom("affine-bounded modulation needs \"kappa\""))?;
                if !kappa.is_finite() || kappa < 0.0 {
                    return Err(DeError::custom(format!(
                        "kappa must be a finite nonnegative number, got {kappa}"
                    )));
                }
                Ok(Modulation::AffineBounded { kappa })
            }
            other => Err(DeError::custom(format!("unknown modulation kind {other:?}"))),
        }
    }
}

/// One mark cell's jump direction and weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCell {
    pub weight: f64,
    /// Unit vector; normalized at construction.
    pub direction: HilbertState,
}

impl<'de> Deserialize<'de> for NoiseCell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            weight: f64,
            direction: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        NoiseCell::new(raw.weight, raw.direction).map_err(serde::de::Error::custom)
    }
}

impl NoiseCell {
    pub fn new(weight: f64, direction: Vec<f64>) -> Result<Self> {
        if !weight.is_finite() {
            return Err(Error::BadCoefficient(format!("cell weight {weight}")));
        }
        let mut dir = HilbertState::new(direction)?;
        let n = dir.norm();
        if n == 0.0 {
            return Err(Error::BadCoefficient("zero noise direction".into()));
        }
        dir.scale(1.0 / n);
        Ok(Self {
            weight,
            direction: dir,
        })
    }
}

/// Jump coefficient `G`: global amplitude, per-cell rank-one structure, and
/// a shared modulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSpec {
    sigma: f64,
    modulation: Modulation,
    cells: Vec<NoiseCell>,
}

impl<'de> Deserialize<'de> for DiffusionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            sigma: f64,
            modulation: Modulation,
            cells: Vec<NoiseCell>,
        }
        let raw = Raw::deserialize(d)?;
        DiffusionSpec::new(raw.sigma, raw.modulation, raw.cells).map_err(serde::de::Error::custom)
    }
}

impl DiffusionSpec {
    pub fn new(sigma: f64, modulation: Modulation, cells: Vec<NoiseCell>) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::BadCoefficient(format!("sigma {sigma}")));
        }
        if let Modulation::AffineBounded { kappa } = modulation {
            if !kappa.is_finite() || kappa < 0.0 {
                return Err(Error::BadCoefficient(format!("kappa {kappa}")));
            }
        }
        if cells.is_empty() {
            return Err(Error::BadCoefficient("diffusion needs at least one cell".into()));
        }
        let dim = cells[0].direction.dim();
        if cells.iter().any(|c| c.direction.dim() != dim) {
            return Err(Error::BadCoefficient(
                "noise cell directions have mixed dimensions".into(),
            ));
        }
        Ok(Self {
            sigma,
            modulation,
            cells,
        })
    }

    /// Additive rank-one noise with the given per-cell weights along unit
    /// coordinate directions `e_0, e_1, ...` of an R^d state space.
    pub fn additive_on_axes(sigma: f64, dim: usize, weights: &[f64]) -> Result<Self> {
        let cells = weights
            .iter()
            .enumerate()
            .map(|(j, &w)| NoiseCell::new(w, HilbertState::unit(dim, j % dim).coeffs().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigma, Modulation::Additive, cells)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    pub fn cells(&self) -> &[NoiseCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn dim(&self) -> usize {
        self.cells[0].direction.dim()
    }

    /// Closed-form bound for the growth norm of cell `j`: the sup over `x`
    /// of `||G(t, x, v_j)|| / (1 + ||x||)`.
    pub fn declared_g0(&self, j: usize) -> f64 {
        let amp = (self.sigma * self.cells[j].weight).abs();
        match self.modulation {
            Modulation::Additive => amp,
            Modulation::AffineBounded { kappa } => amp * (1.0 + kappa),
        }
    }

    /// Closed-form bound for the Lipschitz norm of cell `j`.
    pub fn declared_g1(&self, j: usize) -> f64 {
        let amp = (self.sigma * self.cells[j].weight).abs();
        match self.modulation {
            Modulation::Additive => 0.0,
            Modulation::AffineBounded { kappa } => amp * kappa,
        }
    }
}

/// `G(t, x, v_j)` for mark cell `j`. The catalog is time-homogeneous; `t`
/// is accepted for interface stability.
pub fn eval_diffusion(
    spec: &DiffusionSpec,
    _t: f64,
    x: &HilbertState,
    j: usize,
) -> Result<HilbertState> {
    if j >= spec.cells.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.cells.len(),
            actual: j,
        });
    }
    let cell = &spec.cells[j];
    if x.dim() != cell.direction.dim() {
        return Err(Error::DimensionMismatch {
            expected: cell.direction.dim(),
            actual: x.dim(),
        });
    }
    let factor = match spec.modulation {
        Modulation::Additive => 1.0,
        Modulation::AffineBounded { kappa } => {
            let s = x.dot(&cell.direction);
            1.0 + kappa * s / (1.0 + s.abs())
        }
    };
    let mut out = cell.direction.clone();
    out.scale(spec.sigma * cell.weight * factor);
    Ok(out)
}

/// State sampler for the empirical checks: uniform draws from the centered
/// box of the given halfwidth, plus the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub count: usize,
    pub halfwidth: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 200,
            halfwidth: 4.0,
            seed: 0x5eed,
        }
    }
}

pub(crate) fn sample_states(dim: usize, cfg: &SamplerConfig) -> Vec<HilbertState> {
    let mut rng = SeededRng::new(cfg.seed);
    let mut out = vec![HilbertState::zeros(dim)];
    for _ in 0..cfg.count {
        let coeffs = (0..dim)
            .map(|_| rng.gen_range(-cfg.halfwidth..cfg.halfwidth))
            .collect();
        out.push(HilbertState::new(coeffs).expect("finite box sample"));
    }
    out
}

/// Result of the sampled semimonotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemimonotoneReport {
    /// Largest sampled `<f(x) - f(y), x - y> / ||x - y||^2`.
    pub max_quotient: f64,
    pub declared_m: f64,
    pub pass: bool,
}

/// Samples state pairs and compares the semimonotonicity quotient with the
/// declared constant (slack 1e-9 for rounding).
pub fn check_semimonotone(
    spec: &DriftSpec,
    gen: &SpectralGenerator,
    cfg: &SamplerConfig,
) -> Result<SemimonotoneReport> {
    let states = sample_states(gen.dim(), cfg);
    let images: Vec<HilbertState> = states
        .iter()
        .map(|x| eval_drift(spec, gen, x))
        .collect::<Result<_>>()?;
    let mut max_quotient = f64::NEG_INFINITY;
    for i in 0..states.len() {
        for k in (i + 1)..states.len() {
            let dx = states[i].sub(&states[k]);
            let n2 = dx.dot(&dx);
            if n2 < 1e-12 {
                continue;
            }
            let df = images[i].sub(&images[k]);
            max_quotient = max_quotient.max(df.dot(&dx) / n2);
        }
    }
    Ok(SemimonotoneReport {
        max_quotient,
        declared_m: spec.declared_m(),
        pass: max_quotient <= spec.declared_m() + 1e-9,
    })
}

/// Empirical growth and Lipschitz norms of one mark cell's coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GNormEstimate {
    pub g0: f64,
    pub g1: f64,
}

/// Sampled estimates of `||G||_0` and `||G||_1` for cell `j`. Estimates
/// approach the declared bounds from below; exceeding them is a defect.
pub fn estimate_g_norms(
    spec: &DiffusionSpec,
    j: usize,
    cfg: &SamplerConfig,
) -> Result<GNormEstimate> {
    let states = sample_states(spec.dim(), cfg);
    let images: Vec<HilbertState> = states
        .iter()
        .map(|x| eval_diffusion(spec, 0.0, x, j))
        .collect::<Result<_>>()?;
    let mut g0 = 0.0f64;
    let mut g1 = 0.0f64;
    for (i, x) in states.iter().enumerate() {
        g0 = g0.max(images[i].norm() / (1.0 + x.norm()));
        for k in (i + 1)..states.len() {
            let dist = x.distance(&states[k]);
            if dist < 1e-9 {
                continue;
            }
            g1 = g1.max(images[i].distance(&images[k]) / dist);
        }
    }
    Ok(GNormEstimate { g0, g1 })
}

/// One exponential-integrability row: the integrals of
/// `exp(delta ||G||^2)` over `[0, T] x marks` for both declared norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypothesis3Row {
    pub delta: f64,
    pub integral_g0: f64,
    pub integral_g1: f64,
}

/// Exponential integrability report. With finitely many atoms the integrals
/// are direct sums `T * sum_j mass_j exp(delta * norm_j^2)`; the report
/// records their values so configurations with runaway constants are
/// visible.
pub fn check_hypothesis3(
    spec: &DiffusionSpec,
    marks: &MarkMeasure,
    horizon: f64,
    deltas: &[f64],
) -> Result<Vec<Hypothesis3Row>> {
    if marks.n_cells() != spec.n_cells() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_cells(),
            actual: marks.n_cells(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::BadHorizon(horizon));
    }
    Ok(deltas
        .iter()
        .map(|&delta| {
            let mut integral_g0 = 0.0;
            let mut integral_g1 = 0.0;
            for j in 0..marks.n_cells() {
                let mass = marks.mass(j);
                integral_g0 += mass * (delta * spec.declared_g0(j).powi(2)).exp();
                integral_g1 += mass * (delta * spec.declared_g1(j).powi(2)).exp();
            }
            Hypothesis3Row {
                delta,
                integral_g0: horizon * integral_g0,
                integral_g1: horizon * integral_g1,
            }
        })
        .collect())
}

/// Default exponents for [`check_hypothesis3`].
pub const HYPOTHESIS3_DELTAS: [f64; 3] = [0.5, 1.0, 2.0];
