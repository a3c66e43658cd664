//! `levyldp`: config-driven runner for small-noise jump-path simulation,
//! controlled skeleton solves, entropy rate estimation, and the empirical
//! large-deviation checks, all from one strict JSON config.

mod config;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use runner::RunContext;

/// Bundled example configs, shipped inside the binary and listed in
/// lexicographic order.
const EXAMPLES: [(&str, &str, &str); 2] = [
    (
        "heat1d-dirichlet",
        include_str!("../configs/heat1d-dirichlet.json"),
        "controlled skeleton of a heat segment with clamped ends and saturating reaction",
    ),
    (
        "scalar-additive",
        include_str!("../configs/scalar-additive.json"),
        "small-noise jump paths of the scalar additive benchmark",
    ),
];

#[derive(Parser)]
#[command(
    name = "levyldp",
    version,
    about = "Simulation and rate estimation for jump-driven semilinear evolution equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample small-noise jump paths and their pathwise diagnostics.
    Simulate(RunArgs),
    /// Solve the deterministic controlled path for a given tilt.
    Skeleton(RunArgs),
    /// Estimate the entropy rate of an event by penalized descent.
    Rate(RunArgs),
    /// Importance-sampled event probabilities across noise scales.
    LdpScan(RunArgs),
    /// Compare both sides of the Laplace principle for a path functional.
    Laplace(RunArgs),
    /// Run the model hypothesis and consistency suites.
    Validate(RunArgs),
    /// List the bundled example configs.
    ListExamples,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Skeleton(_) => "skeleton",
            Command::Rate(_) => "rate",
            Command::LdpScan(_) => "ldp-scan",
            Command::Laplace(_) => "laplace",
            Command::Validate(_) => "validate",
            Command::ListExamples => "list-examples",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON experiment config, or the name of a bundled example.
    #[arg(long)]
    config: String,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sweeps; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one full CSV per simulated path.
    #[arg(long)]
    dump_path: bool,
    /// Also write the sampled jump points per simulated path.
    #[arg(long)]
    dump_points: bool,
}

fn load_config(source: &str) -> Result<(ExperimentConfig, String, String)> {
    let (text, label) = if Path::new(source).exists() {
        let text = fs::read_to_string(source)
            .with_context(|| format!("reading config file {source}"))?;
        (text, source.to_string())
    } else if let Some((name, text, _)) = EXAMPLES.iter().find(|(n, _, _)| n == &source) {
        (text.to_string(), format!("bundled:{name}"))
    } else {
        bail!("config {source:?} is neither a file nor a bundled example; run list-examples");
    };
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {label}"))?;
    let sha = hex_digest(text.as_bytes());
    Ok((cfg, label, sha))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode> {
    let command = cli.command.name();
    let args = match cli.command {
        Command::ListExamples => {
            for (name, _, description) in EXAMPLES {
                println!("{name}  {description}");
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Simulate(a)
        | Command::Skeleton(a)
        | Command::Rate(a)
        | Command::LdpScan(a)
        | Command::Laplace(a)
        | Command::Validate(a) => a,
    };

    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let (cfg, config_source, config_sha256) = load_config(&args.config)?;
    if cfg.action.name() != command {
        bail!(
            "config {config_source} declares the action {:?} but the {command:?} subcommand was invoked",
            cfg.action.name()
        );
    }
    let ctx = RunContext {
        seed: args.seed.unwrap_or(cfg.seed),
        out: args.out.clone().unwrap_or_else(|| cfg.out_dir.clone()),
        jobs: args.jobs,
        dump_path: args.dump_path,
        dump_points: args.dump_points,
        cfg,
        config_source,
        config_sha256,
    };
    runner::execute(&ctx)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
