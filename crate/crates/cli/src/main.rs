//! `qdtele`: runs one experiment and writes histograms and a summary.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, ValueEnum};

use config::Config;
use qdtele::protocol::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Qubit,
    Hom,
    Entangle,
    Teleport,
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Analytic,
    Mc,
}

#[derive(Debug, Parser)]
#[command(name = "qdtele", version, about = "Photon-to-spin teleportation simulator")]
struct Args {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `protocol.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `protocol.trials`.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum, default_value = "analytic")]
    mode: ModeArg,
}

fn run(args: &Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.protocol.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.protocol.trials = trials;
    }
    cfg.check()?;
    let mode = match args.mode {
        ModeArg::Analytic => Mode::Analytic,
        ModeArg::Mc => Mode::MonteCarlo,
    };
    let files = match args.experiment {
        Experiment::Teleport => output::teleport(&cfg, mode)?,
        Experiment::Hom => output::hom(&cfg, mode)?,
        Experiment::Entangle => output::entangle(&cfg, mode)?,
        Experiment::Qubit => output::qubit(&cfg, mode)?,
        Experiment::G2 => output::g2(&cfg, mode)?,
    };
    files.write_to(&args.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("qdtele: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
