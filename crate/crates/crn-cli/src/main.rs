//! `crn`: command-line front end for the reaction network toolkit.
//!
//! Exit codes: 0 success or affirmative verdict, 2 usage or precondition
//! error, 3 negative verdict, 4 numerical failure, 5 inconclusive trials.

mod commands;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "crn", version, about = "Mass-action reaction network analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural report: species, complexes, linkage classes, deficiency
    Analyze(commands::AnalyzeArgs),
    /// Complex-balancing verdict for one rate assignment
    #[command(name = "check-cb")]
    CheckCb(commands::CheckCbArgs),
    /// Integrate the mass-action dynamics from one initial state
    Simulate(commands::SimulateArgs),
    /// Seeded rate-perturbation probe: attractor uniqueness and permanence
    Perturb(commands::PerturbArgs),
    /// Steady-state scan of the bistable birth-death ladder
    Bifurcate(commands::BifurcateArgs),
    /// Dynamical equivalence: pairwise check, region probe, or sweep
    Equiv(commands::EquivArgs),
}

/// CRN_THREADS caps the rayon pool that runs perturbation trials.
fn init_threads() -> Result<(), util::Failure> {
    let Ok(raw) = std::env::var("CRN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| util::Failure::usage(format!("CRN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| util::Failure::usage(format!("cannot configure thread pool: {e}")))
}

fn main() {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Analyze(args) => commands::run_analyze(args),
        Command::CheckCb(args) => commands::run_check_cb(args),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Perturb(args) => commands::run_perturb(args),
        Command::Bifurcate(args) => commands::run_bifurcate(args),
        Command::Equiv(args) => commands::run_equiv(args),
    });
    match result {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}
