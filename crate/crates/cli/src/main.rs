//! `lattice-kinetic`: run solvers and verification sweeps from a config file.
//!
//! Exit status: 0 on success or PASS, 1 when a verification check FAILs, 2 on
//! usage, configuration or runtime errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::{parse_config, RunConfig};
use crate::output::{Manifest, OutputDir};

#[derive(Parser)]
#[command(name = "lattice-kinetic", version, about = "Harmonic chain with conservative noise: simulation, kinetic and OU limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (`[section]` + `key = value`); defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Kernel identity, dispersion table and resonance scan.
    ModelCheck,
    /// Ensemble of chain trajectories: mean mode energies and total energy.
    Simulate,
    /// Linear Boltzmann solution and scattering rate on the lattice modes.
    Kinetic,
    /// Limiting OU processes of the followed modes (localized data).
    Ou,
    /// Exact second moments of the finite chain.
    Oracle,
    /// ε-sweep verification selected by `sweep.test`.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::ModelCheck => "model-check",
            Self::Simulate => "simulate",
            Self::Kinetic => "kinetic",
            Self::Ou => "ou",
            Self::Oracle => "oracle",
            Self::Sweep => "sweep",
        }
    }

    fn run(self, cfg: &RunConfig) -> Result<CommandOutput> {
        match self {
            Self::ModelCheck => commands::model_check(cfg),
            Self::Simulate => commands::simulate(cfg),
            Self::Kinetic => commands::kinetic(cfg),
            Self::Ou => commands::ou(cfg),
            Self::Oracle => commands::oracle(cfg),
            Self::Sweep => commands::sweep(cfg),
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<bool> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let result = cli.command.run(cfg)?;
    print!("{}", result.summary);
    let failed = result.failed();
    let mut dir = OutputDir::new(&cfg.output.directory);
    for (name, bytes) in result.files {
        dir.add(name, bytes);
    }
    dir.add("config.toml", cfg.to_toml().into_bytes());
    let manifest = Manifest {
        subcommand: cli.command.name().into(),
        config: serde_json::to_value(cfg)?,
        seed: cfg.run.seed,
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        started_at,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    let path = dir.finish(manifest)?;
    println!("wrote {}", path.display());
    Ok(failed)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
