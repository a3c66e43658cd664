//! Diagonal contraction semigroups and their Yosida approximations.
//!
//! A generator is a nonpositive eigenvalue sequence over an orthonormal
//! basis: either the coordinate basis of R^d or the Dirichlet sine basis
//! `sqrt(2) sin(k pi x)` on (0, 1) with eigenvalues `-(k pi)^2`. The
//! semigroup acts coefficientwise, `(S(t) x)_k = e^{lambda_k t} x_k`, so
//! semigroup identities hold to rounding and the Yosida approximation is a
//! plain eigenvalue map `lambda -> lambda m / (m - lambda)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coefficient vector of a state in the chosen orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HilbertState {
    coeffs: Vec<f64>,
}

impl HilbertState {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadState);
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    /// Unit coordinate vector `e_k` (0-indexed).
    pub fn unit(dim: usize, k: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }
}

impl<'de> Deserialize<'de> for HilbertState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        HilbertState::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Orthonormal basis the coefficients refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Coordinate basis of R^d; states are their own point samples.
    Identity,
    /// `sqrt(2) sin(k pi x)` on (0, 1), k = 1..d.
    DirichletSine,
}

/// Diagonal generator: nonpositive eigenvalues over a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGenerator {
    eigenvalues: Vec<f64>,
    basis: Basis,
}

impl SpectralGenerator {
    /// Diagonal generator on R^d with the given eigenvalues.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::BadState);
        }
        for &l in &eigenvalues {
            if !l.is_finite() || l > 0.0 {
                return Err(Error::PositiveEigenvalue(l));
            }
        }
        Ok(Self {
            eigenvalues,
            basis: Basis::Identity,
        })
    }

    /// Dirichlet Laplacian on (0, 1) truncated to `modes` sine modes:
    /// eigenvalues `-(k pi)^2`, k = 1..modes.
    pub fn heat1d(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::BadState);
        }
        let eigenvalues = (1..=modes)
            .map(|k| {
                let kpi = k as f64 * std::f64::consts::PI;
                -kpi * kpi
            })
            .collect();
        Ok(Self {
            eigenvalues,
            basis: Basis::DirichletSine,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// In-place `x <- S(t) x`; `t` must be validated nonnegative by the caller.
    pub(crate) fn decay_in_place(&self, t: f64, x: &mut HilbertState) {
        debug_assert!(t >= 0.0);
        debug_assert_eq!(x.dim(), self.dim());
        for (c, &l) in x.coeffs_mut().iter_mut().zip(&self.eigenvalues) {
            *c *= (l * t).exp();
        }
    }
}

/// `S(t) x`: coefficientwise decay by `e^{lambda_k t}`.
pub fn apply_semigroup(gen: &SpectralGenerator, t: f64, x: &HilbertState) -> Result<HilbertState> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    if x.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: x.dim(),
        });
    }
    let mut out = x.clone();
    gen.decay_in_place(t, &mut out);
    Ok(out)
}

/// Yosida approximation of index `m`: eigenvalues map to
/// `lambda m / (m - lambda)`, again a diagonal contraction generator.
pub fn yosida(gen: &SpectralGenerator, m: u32) -> Result<SpectralGenerator> {
    if m == 0 {
        return Err(Error::BadYosidaIndex);
    }
    let mf = m as f64;
    let eigenvalues = gen
        .eigenvalues
        .iter()
        .map(|&l| l * mf / (mf - l))
        .collect();
    Ok(SpectralGenerator {
        eigenvalues,
        basis: gen.basis,
    })
}

/// One row of [`yosida_convergence_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YosidaErrorRow {
    pub m: u32,
    pub error: f64,
}

/// Errors `|| (e^{t A_m} - S(t)) x ||` for each index in `ms`.
pub fn yosida_convergence_report(
    gen: &SpectralGenerator,
    x: &HilbertState,
    t: f64,
    ms: &[u32],
) -> Result<Vec<YosidaErrorRow>> {
    let exact = apply_semigroup(gen, t, x)?;
    ms.iter()
        .map(|&m| {
            let approx = apply_semigroup(&yosida(gen, m)?, t, x)?;
            Ok(YosidaErrorRow {
                m,
                error: approx.distance(&exact),
            })
        })
        .collect()
}

/// Uniform interior collocation grid `i / (n + 1)`, i = 1..n.
pub fn collocation_grid(n_points: usize) -> Vec<f64> {
    (1..=n_points)
        .map(|i| i as f64 / (n_points + 1) as f64)
        .collect()
}

/// Projects point samples on the uniform interior grid onto the generator's
/// basis. For the sine basis this is the discrete sine transform (exact for
/// fields with at most as many modes as sample points); for the identity
/// basis samples are the coefficients.
pub fn field_to_coeffs(gen: &SpectralGenerator, samples: &[f64]) -> Result<HilbertState> {
    let d = gen.dim();
    let n = samples.len();
    match gen.basis {
        Basis::Identity => {
            if n != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: n,
                });
            }
            HilbertState::new(samples.to_vec())
        }
        Basis::DirichletSine => {
            if n < d {
                return Err(Error::CollocationTooCoarse { points: n, modes: d });
            }
            let scale = std::f64::consts::SQRT_2 / (n as f64 + 1.0);
            let coeffs = (1..=d)
                .map(|k| {
                    scale
                        * samples
                            .iter()
                            .enumerate()
                            .map(|(i, &f)| {
                                let xi = (i + 1) as f64 / (n as f64 + 1.0);
                                f * (k as f64 * std::f64::consts::PI * xi).sin()
                            })
                            .sum::<f64>()
                })
                .collect();
            HilbertState::new(coeffs)
        }
    }
}

/// Evaluates the state as point samples on the uniform interior grid with
/// `n_points` nodes.
pub fn coeffs_to_field(
    gen: &SpectralGenerator,
    x: &HilbertState,
    n_points: usize,
) -> Result<Vec<f64>> {
    if x.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: x.dim(),
        });
    }
    match gen.basis {
        Basis::Identity => {
            if n_points != gen.dim() {
                return Err(Error::DimensionMismatch {
                    expected: gen.dim(),
                    actual: n_points,
                });
            }
            Ok(x.coeffs().to_vec())
        }
        Basis::DirichletSine => {
            let grid = collocation_grid(n_points);
            Ok(grid
                .iter()
                .map(|&xi| {
                    x.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| {
                            c * std::f64::consts::SQRT_2
                                * ((k + 1) as f64 * std::f64::consts::PI * xi).sin()
                        })
                        .sum()
                })
                .collect())
        }
    }
}
