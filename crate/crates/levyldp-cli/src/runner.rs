//! Pipeline execution and artifact writing.
//!
//! Every run writes its files into the output directory and finishes with a
//! `manifest.json` recording the config hash, the effective seed, and the
//! produced files. With a fixed config, seed, and worker count, every file
//! except the manifest's timestamp is byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use levyldp::ldp::{estimate_rate, ldp_scan, laplace_check, scan_rows_to_csv, PathFunctional, RateOptions};
use levyldp::measure::{cost_lt, ControlFunction, TimeGrid};
use levyldp::prm::{log_likelihood_ratio_scaled, sample_small_noise_prm, SeededRng};
use levyldp::solver::{
    apriori_skeleton_bound, default_monitor_tol, energy_monitor, ito_monitor, skeleton_forcing,
    solve_mild_with_pattern, solve_skeleton,
};
use levyldp::validators::{
    validate_system, validate_weak_convergence, variational_representation_check,
    ValidationReport,
};

use crate::config::{
    ActionConfig, ExperimentConfig, LaplaceSection, LdpScanSection, RateSection, SimulateSection,
    SkeletonSection, ValidateSection,
};

/// Everything one invocation needs: the parsed config plus the effective
/// command-line overrides.
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub config_source: String,
    pub config_sha256: String,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub dump_path: bool,
    pub dump_points: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_source: &'a str,
    config_sha256: &'a str,
    seed: u64,
    jobs: Option<usize>,
    tool: ToolInfo,
    timestamp_unix_s: u64,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

fn write_artifact(out: &Path, name: &str, text: &str, written: &mut Vec<String>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(name.to_string());
    Ok(())
}

fn write_json<T: Serialize>(
    out: &Path,
    name: &str,
    value: &T,
    written: &mut Vec<String>,
) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_artifact(out, name, &text, written)
}

fn unit_control(cfg: &ExperimentConfig) -> Result<ControlFunction> {
    Ok(ControlFunction::constant(
        cfg.solver.grid.clone(),
        cfg.system.marks.clone(),
        1.0,
    )?)
}

/// Runs the configured pipeline and writes its artifacts. Returns the
/// process exit code: zero except for failed validation suites.
pub fn execute(ctx: &RunContext) -> Result<ExitCode> {
    fs::create_dir_all(&ctx.out)
        .with_context(|| format!("creating output directory {}", ctx.out.display()))?;
    let mut written = Vec::new();
    let code = match &ctx.cfg.action {
        ActionConfig::Simulate(s) => run_simulate(ctx, s, &mut written)?,
        ActionConfig::Skeleton(s) => run_skeleton(ctx, s, &mut written)?,
        ActionConfig::Rate(s) => run_rate(ctx, s, &mut written)?,
        ActionConfig::LdpScan(s) => run_ldp_scan(ctx, s, &mut written)?,
        ActionConfig::Laplace(s) => run_laplace(ctx, s, &mut written)?,
        ActionConfig::Validate(s) => run_validate(ctx, s, &mut written)?,
    };

    let manifest = Manifest {
        command: ctx.cfg.action.name(),
        config_source: &ctx.config_source,
        config_sha256: &ctx.config_sha256,
        seed: ctx.seed,
        jobs: ctx.jobs,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        timestamp_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: written.clone(),
    };
    let mut dummy = Vec::new();
    write_json(&ctx.out, "manifest.json", &manifest, &mut dummy)?;
    println!(
        "wrote {} file(s) and manifest.json to {}",
        written.len(),
        ctx.out.display()
    );
    Ok(code)
}

struct PathRow {
    seed: u64,
    terminal: Vec<f64>,
    terminal_norm: f64,
    sup_norm: f64,
    jumps: usize,
    log_lr: f64,
    ito_defect: f64,
    monitor_tol: f64,
    path_csv: Option<String>,
    points_csv: Option<String>,
}

fn run_simulate(
    ctx: &RunContext,
    s: &SimulateSection,
    written: &mut Vec<String>,
) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let horizon = cfg.solver.grid.horizon();
    let tilt = match &s.tilt {
        Some(c) => c.resolve(&cfg.system, horizon)?,
        None => unit_control(cfg)?,
    };
    if s.n_paths == 0 {
        bail!("simulate needs at least one path");
    }
    let root = SeededRng::new(ctx.seed);
    let rows: Vec<PathRow> = (0..s.n_paths)
        .into_par_iter()
        .map(|i| -> Result<PathRow> {
            let mut rng = root.child(i as u64);
            let seed = rng.seed();
            let pattern = sample_small_noise_prm(s.epsilon, &tilt, &mut rng)?;
            let path = solve_mild_with_pattern(&cfg.system, s.epsilon, &pattern, &cfg.solver)?;
            let log_lr = log_likelihood_ratio_scaled(&pattern, &tilt, 1.0 / s.epsilon)?;
            let ito_defect = ito_monitor(&path)?;
            let monitor_tol = cfg
                .solver
                .monitor_tol
                .unwrap_or_else(|| default_monitor_tol(&path, cfg.solver.grid.dt()));
            Ok(PathRow {
                seed,
                terminal: path.terminal().coeffs().to_vec(),
                terminal_norm: path.terminal().norm(),
                sup_norm: path.sup_norm(),
                jumps: path.jump_count(),
                log_lr,
                ito_defect,
                monitor_tol,
                path_csv: ctx.dump_path.then(|| path.to_csv()),
                points_csv: ctx.dump_points.then(|| pattern.to_csv()),
            })
        })
        .collect::<Result<_>>()?;

    let dim = cfg.system.dim();
    let mut summary = String::from("path,seed");
    for k in 0..dim {
        summary.push_str(&format!(",c{k}"));
    }
    summary.push_str(",terminal_norm,sup_norm,jumps,log_lr,ito_defect,monitor_tol,monitor_pass\n");
    let mut monitor_failures = 0usize;
    for (i, row) in rows.iter().enumerate() {
        let pass = row.ito_defect <= row.monitor_tol;
        if !pass {
            monitor_failures += 1;
        }
        summary.push_str(&format!("{i},{}", row.seed));
        for c in &row.terminal {
            summary.push_str(&format!(",{c:.16e}"));
        }
        summary.push_str(&format!(
            ",{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{}\n",
            row.terminal_norm,
            row.sup_norm,
            row.jumps,
            row.log_lr,
            row.ito_defect,
            row.monitor_tol,
            if pass { 1 } else { 0 }
        ));
    }
    write_artifact(&ctx.out, "paths.csv", &summary, written)?;
    for (i, row) in rows.iter().enumerate() {
        if let Some(csv) = &row.path_csv {
            write_artifact(&ctx.out, &format!("path_{i:03}.csv"), csv, written)?;
        }
        if let Some(csv) = &row.points_csv {
            write_artifact(&ctx.out, &format!("points_{i:03}.csv"), csv, written)?;
        }
    }
    println!(
        "simulated {} path(s) at epsilon {} ({} jump(s) total)",
        rows.len(),
        s.epsilon,
        rows.iter().map(|r| r.jumps).sum::<usize>()
    );
    if monitor_failures > 0 {
        eprintln!("warning: {monitor_failures} path(s) exceeded the energy monitor tolerance");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SkeletonSummary {
    control_cost: f64,
    picard_iterations: usize,
    picard_distances: Vec<f64>,
    energy_margin: f64,
    monitor_tol: f64,
    sup_norm: f64,
    apriori_bound: f64,
    within_apriori_bound: bool,
    terminal: Vec<f64>,
}

fn run_skeleton(
    ctx: &RunContext,
    s: &SkeletonSection,
    written: &mut Vec<String>,
) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let horizon = cfg.solver.grid.horizon();
    let g = s.control.resolve(&cfg.system, horizon)?;
    let run = solve_skeleton(&cfg.system, &g, &cfg.solver)?;
    let energy = energy_monitor(&run.path, |t, x| skeleton_forcing(&cfg.system, &g, t, x))?;
    let monitor_tol = cfg
        .solver
        .monitor_tol
        .unwrap_or_else(|| default_monitor_tol(&run.path, cfg.solver.grid.dt()));
    let bound = apriori_skeleton_bound(&cfg.system, &g);
    let summary = SkeletonSummary {
        control_cost: cost_lt(&g),
        picard_iterations: run.picard_iterations(),
        picard_distances: run.picard_distances.clone(),
        energy_margin: energy,
        monitor_tol,
        sup_norm: run.path.sup_norm(),
        apriori_bound: bound,
        within_apriori_bound: run.path.sup_norm() <= bound * (1.0 + 1e-12),
        terminal: run.path.terminal().coeffs().to_vec(),
    };
    write_artifact(&ctx.out, "skeleton.csv", &run.path.to_csv(), written)?;
    write_artifact(&ctx.out, "control.csv", &g.to_csv(), written)?;
    write_json(&ctx.out, "skeleton.json", &summary, written)?;
    println!(
        "skeleton solved in {} sweep(s), control cost {:.6}, terminal norm {:.6}",
        summary.picard_iterations,
        summary.control_cost,
        run.path.terminal().norm()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_rate(ctx: &RunContext, s: &RateSection, written: &mut Vec<String>) -> Result<ExitCode> {
    let opts = s.options(&ctx.cfg.solver)?;
    let est = estimate_rate(&ctx.cfg.system, &s.event, &opts)?;
    write_json(&ctx.out, "rate.json", &est, written)?;
    write_artifact(&ctx.out, "optimal_control.csv", &est.control.to_csv(), written)?;
    if est.feasible {
        println!(
            "rate estimate {:.6} (feasible, residual {:.2e})",
            est.value, est.penalty_residual
        );
    } else {
        println!(
            "no feasible control found (best residual {:.2e}); rate is unbounded from this search",
            est.penalty_residual
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_ldp_scan(
    ctx: &RunContext,
    s: &LdpScanSection,
    written: &mut Vec<String>,
) -> Result<ExitCode> {
    if s.epsilons.is_empty() || s.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        bail!("ldp-scan needs positive finite noise scales");
    }
    let opts = s.rate.options(&ctx.cfg.solver)?;
    let est = estimate_rate(&ctx.cfg.system, &s.rate.event, &opts)?;
    let rows = ldp_scan(
        &ctx.cfg.system,
        &s.rate.event,
        &est,
        &s.epsilons,
        &ctx.cfg.solver,
        s.n_samples,
        &SeededRng::new(ctx.seed),
    )?;
    write_json(&ctx.out, "rate.json", &est, written)?;
    write_artifact(&ctx.out, "optimal_control.csv", &est.control.to_csv(), written)?;
    write_artifact(&ctx.out, "scan.csv", &scan_rows_to_csv(&rows), written)?;
    write_json(&ctx.out, "scan.json", &rows, written)?;
    for r in &rows {
        println!(
            "epsilon {:>8}: p_hat {:.3e} ({} of {} hits), eps2 log p {:.4} vs -I {:.4}",
            r.epsilon, r.p_hat, r.hits, r.n_samples, r.eps2_log_p, r.minus_rate
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct LaplaceSummary {
    epsilon: f64,
    lhs: f64,
    lhs_std_error: f64,
    rhs: f64,
    gap: f64,
    tilt_source: &'static str,
    n_samples: usize,
}

fn run_laplace(
    ctx: &RunContext,
    s: &LaplaceSection,
    written: &mut Vec<String>,
) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let horizon = cfg.solver.grid.horizon();
    let grid = TimeGrid::new(horizon, s.control_steps)?;
    let opts = RateOptions::new(grid, cfg.solver.clone());
    let (tilt, tilt_source) = match (&s.tilt, &s.functional) {
        (Some(c), _) => (c.resolve(&cfg.system, horizon)?, "explicit"),
        (None, PathFunctional::EventPenalty { event, .. }) => {
            let est = estimate_rate(&cfg.system, event, &opts)?;
            if est.feasible {
                (est.control, "rate-optimal")
            } else {
                (unit_control(cfg)?, "unit")
            }
        }
        (None, _) => (unit_control(cfg)?, "unit"),
    };
    let levels = match (&s.levels, &s.functional) {
        (Some(l), _) => l.clone(),
        (None, PathFunctional::SupNormShortfall { cap, .. }) => {
            (0..=6).map(|k| cap * k as f64 / 4.0).collect()
        }
        (None, _) => vec![0.0],
    };
    let report = laplace_check(
        &cfg.system,
        &s.functional,
        s.epsilon,
        &tilt,
        &cfg.solver,
        s.n_samples,
        &SeededRng::new(ctx.seed),
        &opts,
        &levels,
    )?;
    let summary = LaplaceSummary {
        epsilon: report.epsilon,
        lhs: report.lhs,
        lhs_std_error: report.lhs_std_error,
        rhs: report.rhs,
        gap: report.gap,
        tilt_source,
        n_samples: s.n_samples,
    };
    write_json(&ctx.out, "laplace.json", &summary, written)?;
    write_artifact(&ctx.out, "tilt_control.csv", &tilt.to_csv(), written)?;
    println!(
        "laplace check at epsilon {}: sampled side {:.4} (se {:.1e}), variational side {:.4}, gap {:.4}",
        report.epsilon, report.lhs, report.lhs_std_error, report.rhs, report.gap
    );
    Ok(ExitCode::SUCCESS)
}

fn run_validate(
    ctx: &RunContext,
    s: &ValidateSection,
    written: &mut Vec<String>,
) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let horizon = cfg.solver.grid.horizon();
    let root = SeededRng::new(ctx.seed);
    let mut reports = vec![validate_system(&cfg.system, &s.sampler, horizon)?];
    if let Some(w) = &s.weak_convergence {
        reports.push(validate_weak_convergence(
            &cfg.system,
            &w.epsilons,
            &cfg.solver,
            w.n_seeds,
            &root.child(0),
            (w.slope_min, w.slope_max),
        )?);
    }
    if let Some(v) = &s.variational {
        let mass = v.mass.unwrap_or_else(|| cfg.system.marks.total_mass());
        let rep = variational_representation_check(
            v.theta,
            mass,
            horizon,
            &v.functional,
            &v.gammas,
            v.n_samples,
            &root.child(1),
        )?;
        let mut report = ValidationReport::new("variational");
        let tol = v.gap_tol + 3.0 * rep.right_std_error;
        report.push("series-side", rep.left, f64::INFINITY, rep.left.is_finite());
        report.push("tilted-side", rep.right, f64::INFINITY, rep.right.is_finite());
        report.push("laplace-gap", rep.gap, tol, rep.gap <= tol);
        reports.push(report);
    }
    write_json(&ctx.out, "validation.json", &reports, written)?;
    let mut all_pass = true;
    for report in &reports {
        for e in &report.entries {
            println!(
                "[{}] {}: measured {:.6e} bound {:.6e} {}",
                report.suite,
                e.name,
                e.measured,
                e.bound,
                if e.pass { "PASS" } else { "FAIL" }
            );
        }
        all_pass &= report.overall_pass;
    }
    if all_pass {
        println!("all validation suites passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("validation failed");
        Ok(ExitCode::from(2))
    }
}
