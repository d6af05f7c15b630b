use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bats_cli::{Command, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bats", version, about = "BATS code experiments: rank analysis, degree optimization, density evolution, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank and effective rank distributions, expected-rank sweep.
    Analyze(Common),
    /// Degree distribution from one of the four programs.
    Optimize(Common),
    /// Density evolution curve.
    Evolve(Common),
    /// Inner-code simulation; writes a per-batch trace.
    Simulate(Common),
    /// Precode, encode, simulate and decode; overhead report.
    Endtoend(Common),
    /// Repeat another command over a parameter range.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Optimize(c) => (Command::Optimize, c),
        Cmd::Evolve(c) => (Command::Evolve, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Endtoend(c) => (Command::EndToEnd, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.trials {
        cfg.trials = n;
    }
    if common.out.is_some() {
        cfg.out = common.out;
    }
    let out = bats_cli::run(cmd, &cfg)?;
    out.write(cfg.out.as_deref())?;
    if let Some(p) = &cfg.out {
        eprintln!("{}: {}", p.display(), out.summary);
    }
    Ok(())
}
