//! `unfold`: fit, diagnose and compare unfolding models of roll-call votes.

mod config;
mod fit;
mod report;
mod tools;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::UsageError;

#[derive(Parser, Debug)]
#[command(name = "unfold", version, about = "Bayesian unfolding models for binary choice data")]
struct Cli {
    /// Worker threads for the sampler (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a Gaussian-mixture approximation to the Gumbel distribution.
    ApproxGumbel(tools::ApproxArgs),
    /// Run the Gibbs sampler and write a draws directory.
    Fit(fit::FitArgs),
    /// WAIC, effective sample sizes, ranks and response curves from draws.
    Diagnostics(report::DiagnosticsArgs),
    /// WAIC difference and rank agreement of two fits.
    Compare(report::CompareArgs),
    /// Draw a synthetic vote matrix from the logit model.
    Simulate(tools::SimulateArgs),
    /// Sample the prior-implied yea probability.
    PriorTheta(tools::PriorThetaArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::ApproxGumbel(args) => tools::approx_gumbel(args),
        Command::Fit(args) => fit::run(args),
        Command::Diagnostics(args) => report::diagnostics(args),
        Command::Compare(args) => report::compare(args),
        Command::Simulate(args) => tools::simulate(args),
        Command::PriorTheta(args) => tools::prior_theta(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
