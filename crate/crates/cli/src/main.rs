use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use maflow_cli::{exit_code, run};
use maflow_core::config::{parse_config, Mode};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Flow,
    Elliptic,
    Functionals,
    Verify,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Flow => Mode::Flow,
            ModeArg::Elliptic => Mode::Elliptic,
            ModeArg::Functionals => Mode::Functionals,
            ModeArg::Verify => Mode::Verify,
        }
    }
}

/// Finite-difference runs of the parabolic complex Monge-Ampère flow.
#[derive(Debug, Parser)]
#[command(name = "maflow", version)]
struct Args {
    mode: ModeArg,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out` from the config, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the verify suites (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("maflow: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let out = args
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(args.mode.into(), &config, &out, args.seed);
    if outcome.status == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("maflow: {}", outcome.message);
    }
    ExitCode::from(outcome.status as u8)
}
