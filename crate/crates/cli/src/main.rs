//! `lojasgd`: runs one named experiment from a TOML config and writes its
//! artifacts to an output directory.
//!
//! Exit status is 0 when every check passes, 1 when a check fails, 2 for an
//! invalid config or arguments and 3 when the run itself errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lojasgd::config::parse_config;
use lojasgd::experiments::{run_command, Command};
use lojasgd::{with_workers, Error, Execution};

#[derive(Parser)]
#[command(name = "lojasgd", version, about = "SGD under a local Lojasiewicz condition")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the landscape constants and check the seed condition.
    CheckSeed(Common),
    /// Constant-step ensemble: contraction, survival, path length, convergence.
    RunEnsemble(Common),
    /// Robbins-Monro ensemble with i.i.d. noise: fit the algebraic rate.
    RateFit(Common),
    /// Robbins-Monro ensemble with adversarial noise: escape fraction.
    Escape(Common),
    /// Iterate the deterministic recursion and compare with its limit.
    Chung(Common),
    /// Certify the quadratic lower bound and seed condition on a network.
    CertifyNet(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `run.horizon`.
    #[arg(long)]
    horizon_override: Option<usize>,
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::CheckSeed(c) => (Command::CheckSeed, c),
            Cmd::RunEnsemble(c) => (Command::RunEnsemble, c),
            Cmd::RateFit(c) => (Command::RateFit, c),
            Cmd::Escape(c) => (Command::Escape, c),
            Cmd::Chung(c) => (Command::Chung, c),
            Cmd::CertifyNet(c) => (Command::CertifyNet, c),
        }
    }
}

fn main() -> ExitCode {
    let (command, args) = Cli::parse().command.split();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.run.base_seed = seed;
    }
    if let Some(h) = args.horizon_override {
        cfg.run.horizon = h;
    }
    let exec = if args.workers == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match with_workers(args.workers, || run_command(command, &cfg, &args.out, exec)) {
        Ok(summary) => {
            for c in &summary.checks {
                println!(
                    "{} {}: measured {:.6e}, threshold {:.6e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.threshold
                );
            }
            println!("failed: [{}]", summary.failed.join(","));
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
