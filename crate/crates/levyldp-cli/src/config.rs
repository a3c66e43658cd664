//! Experiment configuration: one JSON document fully determines one run.
//!
//! Unknown keys are rejected everywhere. A config carries the system, the
//! solver settings, a seed, an output directory, and exactly one action
//! section naming the pipeline to run.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use levyldp::coefficients::SamplerConfig;
use levyldp::ldp::{EventSpec, PathFunctional, RateOptions};
use levyldp::measure::{ControlFunction, TimeGrid};
use levyldp::solver::SolverConfig;
use levyldp::system::SystemSpec;
use levyldp::validators::CountFunctional;

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Root of the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub solver: SolverConfig,
    pub action: ActionConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

/// The single action section, keyed by pipeline name.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionConfig {
    Simulate(SimulateSection),
    Skeleton(SkeletonSection),
    Rate(RateSection),
    LdpScan(LdpScanSection),
    Laplace(LaplaceSection),
    Validate(ValidateSection),
}

impl ActionConfig {
    /// The subcommand this section belongs to.
    pub fn name(&self) -> &'static str {
        match self {
            ActionConfig::Simulate(_) => "simulate",
            ActionConfig::Skeleton(_) => "skeleton",
            ActionConfig::Rate(_) => "rate",
            ActionConfig::LdpScan(_) => "ldp-scan",
            ActionConfig::Laplace(_) => "laplace",
            ActionConfig::Validate(_) => "validate",
        }
    }
}

/// A control given either as a constant level on its own grid or written
/// out in full.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlSection {
    Constant(ConstantControl),
    Explicit(ControlFunction),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantControl {
    pub level: f64,
    pub n_steps: usize,
}

impl ControlSection {
    /// Builds the control on the system's marks over the solver horizon.
    pub fn resolve(&self, sys: &SystemSpec, horizon: f64) -> Result<ControlFunction> {
        let g = match self {
            ControlSection::Constant(c) => ControlFunction::constant(
                TimeGrid::new(horizon, c.n_steps)?,
                sys.marks.clone(),
                c.level,
            )?,
            ControlSection::Explicit(g) => g.clone(),
        };
        let t = g.grid().horizon();
        if (t - horizon).abs() > 1e-12 * (1.0 + horizon.abs()) {
            bail!("control horizon {t} does not match the solver horizon {horizon}");
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub epsilon: f64,
    pub n_paths: usize,
    /// Sampling intensity tilt; paths are drawn under it without
    /// reweighting, and the summary records each path's log likelihood
    /// ratio. Defaults to the unit tilt.
    #[serde(default)]
    pub tilt: Option<ControlSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonSection {
    pub control: ControlSection,
}

/// Event plus optimizer knobs; unset knobs keep the library defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub event: EventSpec,
    /// Steps of the piecewise-constant control being optimized; the solver
    /// grid must refine it.
    pub control_steps: usize,
    #[serde(default)]
    pub feasibility_tol: Option<f64>,
    #[serde(default)]
    pub descent_iters: Option<usize>,
    #[serde(default)]
    pub penalty_stages: Option<usize>,
    #[serde(default)]
    pub starts: Option<Vec<f64>>,
}

impl RateSection {
    pub fn options(&self, solver: &SolverConfig) -> Result<RateOptions> {
        let grid = TimeGrid::new(solver.grid.horizon(), self.control_steps)
            .context("building the control grid")?;
        let mut opts = RateOptions::new(grid, solver.clone());
        if let Some(tol) = self.feasibility_tol {
            opts.feasibility_tol = tol;
        }
        if let Some(iters) = self.descent_iters {
            opts.descent_iters = iters;
        }
        if let Some(stages) = self.penalty_stages {
            opts.max_penalty_stages = stages;
        }
        if let Some(starts) = &self.starts {
            opts.starts = starts.clone();
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpScanSection {
    pub rate: RateSection,
    /// Noise scales, strictly decreasing.
    pub epsilons: Vec<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceSection {
    pub functional: PathFunctional,
    pub epsilon: f64,
    pub n_samples: usize,
    /// Control resolution for the variational side.
    pub control_steps: usize,
    /// Sup-norm levels searched by the shortfall functional's variational
    /// side; defaults to a short grid up to one and a half times the cap.
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    /// Sampling tilt; defaults to the rate-optimal control for event
    /// penalties and to the unit tilt otherwise.
    #[serde(default)]
    pub tilt: Option<ControlSection>,
}

fn default_slope_min() -> f64 {
    0.3
}

fn default_slope_max() -> f64 {
    0.7
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakConvergenceSection {
    /// Noise scales, strictly decreasing.
    pub epsilons: Vec<f64>,
    pub n_seeds: usize,
    #[serde(default = "default_slope_min")]
    pub slope_min: f64,
    #[serde(default = "default_slope_max")]
    pub slope_max: f64,
}

fn default_gap_tol() -> f64 {
    0.05
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Mark-space mass of the counting measure; defaults to the system's
    /// total mass.
    #[serde(default)]
    pub mass: Option<f64>,
    pub functional: CountFunctional,
    pub gammas: Vec<f64>,
    pub n_samples: usize,
    /// The check passes when `|left - right|` is at most this plus three
    /// standard errors.
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
}

/// The hypothesis suite always runs; the empirical suites run when their
/// sections are present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub weak_convergence: Option<WeakConvergenceSection>,
    #[serde(default)]
    pub variational: Option<VariationalSection>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_config_json(action: &str) -> String {
        format!(
            r#"{{
              "system": {{
                "generator": {{"kind": "diagonal", "eigenvalues": [-1.0]}},
                "drift": {{"kind": "zero"}},
                "diffusion": {{"sigma": 1.0, "modulation": {{"kind": "additive"}},
                              "cells": [{{"weight": 1.0, "direction": [1.0]}}]}},
                "marks": [{{"label": "unit", "mass": 1.0}}]
              }},
              "solver": {{"grid": {{"T": 1.0, "n_steps": 32}}}},
              "seed": 5,
              "action": {{{action}}}
            }}"#
        )
    }

    #[test]
    fn parses_each_action_section() {
        let cases = [
            (r#""simulate": {"epsilon": 0.2, "n_paths": 3}"#, "simulate"),
            (
                r#""skeleton": {"control": {"constant": {"level": 2.0, "n_steps": 8}}}"#,
                "skeleton",
            ),
            (
                r#""rate": {"event": {"kind": "terminal-halfspace", "direction": [1.0], "threshold": 0.5}, "control_steps": 8}"#,
                "rate",
            ),
            (
                r#""ldp-scan": {"rate": {"event": {"kind": "supnorm-exceedance", "radius": 0.5}, "control_steps": 4}, "epsilons": [0.4, 0.2], "n_samples": 100}"#,
                "ldp-scan",
            ),
            (
                r#""laplace": {"functional": {"kind": "constant", "value": 0.3}, "epsilon": 0.3, "n_samples": 50, "control_steps": 4}"#,
                "laplace",
            ),
            (r#""validate": {}"#, "validate"),
        ];
        for (section, name) in cases {
            let cfg: ExperimentConfig =
                serde_json::from_str(&scalar_config_json(section)).unwrap();
            assert_eq!(cfg.action.name(), name);
            assert_eq!(cfg.seed, 5);
            assert_eq!(cfg.out_dir, PathBuf::from("out"));
        }
    }

    #[test]
    fn rejects_unknown_keys_at_each_level() {
        let top = scalar_config_json(r#""simulate": {"epsilon": 0.2, "n_paths": 3}"#)
            .replace(r#""seed": 5"#, r#""seed": 5, "extra": 1"#);
        assert!(serde_json::from_str::<ExperimentConfig>(&top).is_err());

        let section =
            scalar_config_json(r#""simulate": {"epsilon": 0.2, "n_paths": 3, "paths": 9}"#);
        assert!(serde_json::from_str::<ExperimentConfig>(&section).is_err());

        let solver = scalar_config_json(r#""simulate": {"epsilon": 0.2, "n_paths": 3}"#)
            .replace(r#""n_steps": 32}"#, r#""n_steps": 32}, "tol": 0.1"#);
        assert!(serde_json::from_str::<ExperimentConfig>(&solver).is_err());
    }

    #[test]
    fn rejects_a_second_action_section() {
        let two = scalar_config_json(
            r#""simulate": {"epsilon": 0.2, "n_paths": 3}, "validate": {}"#,
        );
        assert!(serde_json::from_str::<ExperimentConfig>(&two).is_err());
    }

    #[test]
    fn constant_control_resolves_on_the_system_marks() {
        let cfg: ExperimentConfig = serde_json::from_str(&scalar_config_json(
            r#""skeleton": {"control": {"constant": {"level": 2.0, "n_steps": 8}}}"#,
        ))
        .unwrap();
        let ActionConfig::Skeleton(s) = &cfg.action else {
            panic!("expected skeleton");
        };
        let g = s.control.resolve(&cfg.system, 1.0).unwrap();
        assert_eq!(g.grid().n_steps(), 8);
        assert_eq!(g.marks().n_cells(), 1);
        assert_eq!(g.value(3, 0), 2.0);
        // An explicit control carries its own horizon, which must match.
        let explicit = ControlSection::Explicit(g);
        assert!(explicit.resolve(&cfg.system, 1.0).is_ok());
        assert!(explicit.resolve(&cfg.system, 2.0).is_err());
    }

    #[test]
    fn rate_section_applies_optimizer_overrides() {
        let cfg: ExperimentConfig = serde_json::from_str(&scalar_config_json(
            r#""rate": {"event": {"kind": "supnorm-exceedance", "radius": 0.5},
                        "control_steps": 4, "descent_iters": 7, "starts": [1.5]}"#,
        ))
        .unwrap();
        let ActionConfig::Rate(r) = &cfg.action else {
            panic!("expected rate");
        };
        let opts = r.options(&cfg.solver).unwrap();
        assert_eq!(opts.control_grid.n_steps(), 4);
        assert_eq!(opts.descent_iters, 7);
        assert_eq!(opts.starts, vec![1.5]);
        assert_eq!(opts.max_penalty_stages, 6);
    }
}
