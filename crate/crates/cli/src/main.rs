//! `nslab <experiment> --config FILE [--seed N] [--out DIR]`
//!
//! Exit status: 0 on success, 1 when a run fails after starting (the
//! manifest then has `"status": "partial"`), 2 for an unusable config, in
//! which case nothing is written.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Kind;

#[derive(Parser)]
#[command(name = "nslab", version, about = "Stochastic 2D Navier-Stokes Galerkin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate sample paths; writes trajectories, norms and coefficients.
    Simulate(Args),
    /// Smallest-eigenvalue statistics of the Malliavin matrix.
    Malliavin(Args),
    /// Reachability of the forcing geometry and the generation criterion.
    Lattice(Args),
    /// Monte Carlo frequencies of the quadratic-variation events.
    Quadvar(Args),
    /// Adjoint-gradient search for a control hitting a projected target.
    Control(Args),
    /// Bracket decomposition of the adjoint and its pairing identities.
    Bracket(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::Malliavin(a) => (Kind::Malliavin, a),
        Command::Lattice(a) => (Kind::Lattice, a),
        Command::Quadvar(a) => (Kind::Quadvar, a),
        Command::Control(a) => (Kind::Control, a),
        Command::Bracket(a) => (Kind::Bracket, a),
    };
    let resolved = std::fs::read_to_string(&args.config)
        .map_err(|e| config::ConfigError {
            file: args.config.clone(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })
        .and_then(|text| {
            let loaded = config::parse(&args.config, &text)?;
            let c = config::resolve(&args.config, &text, loaded.config, kind, args.seed)?;
            Ok((c, loaded.raw))
        });
    let (cfg, raw) = match resolved {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = args.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("nslab-out"));
    let mut sink = match run::Sink::new(&out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", out.display());
            return ExitCode::from(1);
        }
    };
    match run::run(&cfg, &raw, &mut sink) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {kind} failed: {e}");
            ExitCode::from(1)
        }
    }
}
