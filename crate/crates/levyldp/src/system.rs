//! A complete problem instance: generator, coefficients, mark measure, and
//! initial state, cross-validated at construction.

use serde::{Deserialize, Serialize};

use crate::coefficients::{DiffusionSpec, DriftSpec};
use crate::measure::MarkMeasure;
use crate::semigroup::{HilbertState, SpectralGenerator};
use crate::{Error, Result};

/// Generator description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorConfig {
    /// Diagonal generator on R^d with explicit nonpositive eigenvalues.
    Diagonal { eigenvalues: Vec<f64> },
    /// Dirichlet Laplacian on (0, 1), truncated to `modes` sine modes.
    Heat1d { modes: usize },
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<SpectralGenerator> {
        match self {
            GeneratorConfig::Diagonal { eigenvalues } => {
                SpectralGenerator::diagonal(eigenvalues.clone())
            }
            GeneratorConfig::Heat1d { modes } => SpectralGenerator::heat1d(*modes),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<usize>,
}

impl Serialize for GeneratorConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self {
            GeneratorConfig::Diagonal { eigenvalues } => GeneratorJson {
                kind: "diagonal".into(),
                eigenvalues: Some(eigenvalues.clone()),
                modes: None,
            },
            GeneratorConfig::Heat1d { modes } => GeneratorJson {
                kind: "heat1d".into(),
                eigenvalues: None,
                modes: Some(*modes),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratorConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = GeneratorJson::deserialize(d)?;
        let cfg = match raw.kind.as_str() {
            "diagonal" => {
                if raw.modes.is_some() {
                    return Err(DeError::custom("field \"modes\" not valid for diagonal generator"));
                }
                GeneratorConfig::Diagonal {
                    eigenvalues: raw
                        .eigenvalues
                        .ok_or_else(|| DeError::custom("diagonal generator needs \"eigenvalues\""))?,
                }
            }
            "heat1d" => {
                if raw.eigenvalues.is_some() {
                    return Err(DeError::custom("field \"eigenvalues\" not valid for heat1d generator"));
                }
                GeneratorConfig::Heat1d {
                    modes: raw
                        .modes
                        .ok_or_else(|| DeError::custom("heat1d generator needs \"modes\""))?,
                }
            }
            other => return Err(DeError::custom(format!("unknown generator kind {other:?}"))),
        };
        cfg.build().map_err(DeError::custom)?;
        Ok(cfg)
    }
}

/// Problem instance with consistent dimensions: the diffusion acts on the
/// generator's space and pairs one noise cell with each mark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    generator_config: GeneratorConfig,
    generator: SpectralGenerator,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub marks: MarkMeasure,
    pub initial: HilbertState,
}

impl SystemSpec {
    pub fn new(
        generator_config: GeneratorConfig,
        drift: DriftSpec,
        diffusion: DiffusionSpec,
        marks: MarkMeasure,
        initial: Option<HilbertState>,
    ) -> Result<Self> {
        let generator = generator_config.build()?;
        let initial = initial.unwrap_or_else(|| HilbertState::zeros(generator.dim()));
        if diffusion.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                actual: diffusion.dim(),
            });
        }
        if diffusion.n_cells() != marks.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: diffusion.n_cells(),
                actual: marks.n_cells(),
            });
        }
        if initial.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                actual: initial.dim(),
            });
        }
        Ok(Self {
            generator_config,
            generator,
            drift,
            diffusion,
            marks,
            initial,
        })
    }

    pub fn generator(&self) -> &SpectralGenerator {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemJson {
    generator: GeneratorConfig,
    drift: DriftSpec,
    diffusion: DiffusionSpec,
    marks: MarkMeasure,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<HilbertState>,
}

impl Serialize for SystemSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemJson {
            generator: self.generator_config.clone(),
            drift: self.drift.clone(),
            diffusion: self.diffusion.clone(),
            marks: self.marks.clone(),
            initial: Some(self.initial.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SystemJson::deserialize(d)?;
        SystemSpec::new(raw.generator, raw.drift, raw.diffusion, raw.marks, raw.initial)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Modulation, NoiseCell};

    fn scalar_system_json() -> String {
        r#"{
            "generator": {"kind": "diagonal", "eigenvalues": [-1.0]},
            "drift": {"kind": "zero"},
            "diffusion": {"sigma": 1.0, "modulation": {"kind": "additive"},
                          "cells": [{"weight": 1.0, "direction": [1.0]}]},
            "marks": [{"label": "unit", "mass": 1.0}]
        }"#
        .to_string()
    }

    #[test]
    fn parses_scalar_system() {
        let sys: SystemSpec = serde_json::from_str(&scalar_system_json()).unwrap();
        assert_eq!(sys.dim(), 1);
        assert_eq!(sys.initial, HilbertState::zeros(1));
        assert_eq!(sys.generator().eigenvalues(), &[-1.0]);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        let with_extra = scalar_system_json().replace(
            "\"marks\"",
            "\"surprise\": 1, \"marks\"",
        );
        assert!(serde_json::from_str::<SystemSpec>(&with_extra).is_err());

        let bad_gen = scalar_system_json()
            .replace("\"eigenvalues\": [-1.0]", "\"eigenvalues\": [-1.0], \"x\": 2");
        assert!(serde_json::from_str::<SystemSpec>(&bad_gen).is_err());

        let bad_modulation = scalar_system_json()
            .replace("{\"kind\": \"additive\"}", "{\"kind\": \"additive\", \"y\": 3}");
        assert!(serde_json::from_str::<SystemSpec>(&bad_modulation).is_err());
    }

    #[test]
    fn rejects_positive_eigenvalue_in_config() {
        let bad = scalar_system_json().replace("[-1.0]", "[0.1]");
        assert!(serde_json::from_str::<SystemSpec>(&bad).is_err());
    }

    #[test]
    fn rejects_dimension_mismatches() {
        // Diffusion direction lives in R^2 but the generator is scalar.
        let gen = GeneratorConfig::Diagonal { eigenvalues: vec![-1.0] };
        let drift = DriftSpec::zero();
        let diff2 = DiffusionSpec::new(
            1.0,
            Modulation::Additive,
            vec![NoiseCell::new(1.0, vec![1.0, 0.0]).unwrap()],
        )
        .unwrap();
        let marks = MarkMeasure::from_masses(&[1.0]).unwrap();
        assert!(SystemSpec::new(gen.clone(), drift.clone(), diff2, marks.clone(), None).is_err());

        // One noise cell but two mark cells.
        let diff1 = DiffusionSpec::additive_on_axes(1.0, 1, &[1.0]).unwrap();
        let marks2 = MarkMeasure::from_masses(&[1.0, 1.0]).unwrap();
        assert!(SystemSpec::new(gen, drift, diff1, marks2, None).is_err());
    }

    #[test]
    fn round_trip_preserves_system() {
        let sys: SystemSpec = serde_json::from_str(&scalar_system_json()).unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        let back: SystemSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn heat_generator_config_builds() {
        let text = r#"{"kind": "heat1d", "modes": 8}"#;
        let cfg: GeneratorConfig = serde_json::from_str(text).unwrap();
        let gen = cfg.build().unwrap();
        assert_eq!(gen.dim(), 8);
        assert!(serde_json::from_str::<GeneratorConfig>(r#"{"kind": "heat1d"}"#).is_err());
        assert!(serde_json::from_str::<GeneratorConfig>(
            r#"{"kind": "heat1d", "modes": 8, "eigenvalues": [-1.0]}"#
        )
        .is_err());
    }
}
