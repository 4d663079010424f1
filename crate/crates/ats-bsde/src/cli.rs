//! Command-line surface. Every flag has an `ATS_BSDE_*` environment
//! counterpart; flags win over the environment, which wins over the config.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{self, Run};
use crate::config::ExperimentConfig;
use crate::output::{sha256_hex, Artifacts, Manifest, Seeds};
use crate::{ConfigError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "ats-bsde", version, about = "Adapted time-step BSDE experiments")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, env = "ATS_BSDE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, env = "ATS_BSDE_OUT")]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo transitions and driver validation.
    #[arg(long, global = true, env = "ATS_BSDE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; the rayon default when absent.
    #[arg(long, global = true, env = "ATS_BSDE_THREADS")]
    pub threads: Option<usize>,
    /// Transition probabilities: exact Gaussian cells or Monte Carlo.
    #[arg(long, global = true, env = "ATS_BSDE_MODE")]
    pub mode: Option<Mode>,
    /// Samples per source node in Monte Carlo mode.
    #[arg(long, global = true, env = "ATS_BSDE_MC_SAMPLES")]
    pub mc_samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build the time grid and print its diagnostics.
    Grid,
    /// Run one backward sweep.
    Solve,
    /// Check the solution against its stability envelope.
    Stability,
    /// Check that ordered terminal values give ordered solutions.
    Compare,
    /// Error at (0, x0) against a reference, over several resolutions.
    Convergence,
    /// Spot-check the declared driver constants.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Grid => "grid",
            Command::Solve => "solve",
            Command::Stability => "stability",
            Command::Compare => "compare",
            Command::Convergence => "convergence",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Mc,
}

/// Applies the command-line overrides, so the resolved config alone
/// reproduces the run.
pub fn resolve(args: &Args) -> Result<ExperimentConfig, ConfigError> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| ConfigError("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(out) = &args.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = args.seed {
        config.quantize.seed = seed;
        if let Some(v) = config.validate.as_mut() {
            v.seed = Some(seed);
        }
    }
    if let Some(mode) = args.mode {
        config.quantize.mode = match mode {
            Mode::Analytic => "analytic".into(),
            Mode::Mc => "mc".into(),
        };
    }
    if let Some(samples) = args.mc_samples {
        config.quantize.samples = samples;
    }
    Ok(config)
}

pub fn run(args: &Args) -> Result<Outcome> {
    let config = resolve(args)?;
    let pool = match args.threads {
        Some(0) => return Err(ConfigError("--threads must be at least 1".into()).into()),
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build()?,
        None => rayon::ThreadPoolBuilder::new().build()?,
    };
    pool.install(|| execute(args.command, &config, args.threads))
}

pub fn execute(command: Command, config: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome> {
    let resolved = config.to_toml();
    let mut artifacts = Artifacts::new(std::path::Path::new(&config.output.dir))?;
    let validate_seed = config.validate.as_ref().map(|v| v.seed.unwrap_or(config.quantize.seed));
    let mut run = Run {
        config,
        artifacts: &mut artifacts,
        timings: Vec::new(),
    };
    let (summary, outcome) = match command {
        Command::Grid => commands::grid(&mut run)?,
        Command::Solve => commands::solve(&mut run)?,
        Command::Stability => commands::stability(&mut run)?,
        Command::Compare => commands::compare(&mut run)?,
        Command::Convergence => commands::convergence(&mut run)?,
        Command::Validate => commands::validate(&mut run, validate_seed.unwrap_or(config.quantize.seed))?,
    };
    let timings = std::mem::take(&mut run.timings);
    let mut summary = summary;
    summary["subcommand"] = serde_json::json!(command.name());
    artifacts.json("summary.json", &summary)?;
    artifacts.text("resolved_config.toml", &resolved)?;
    let mut files = artifacts.files().to_vec();
    files.push("manifest.json".into());
    let manifest = Manifest {
        subcommand: command.name().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        core_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: sha256_hex(&resolved),
        resolved_config: resolved,
        seeds: Seeds {
            quantize: config.quantize.seed,
            validate: validate_seed,
        },
        threads,
        timings,
        files,
    };
    artifacts.json("manifest.json", &manifest)?;
    let verdict = if outcome == Outcome::Pass { "PASS" } else { "FAIL" };
    println!("{}: {verdict} ({})", command.name(), artifacts.dir().display());
    Ok(outcome)
}
