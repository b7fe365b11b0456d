use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unfolding::distributions::RngStream;
use unfolding::io::report::write_prior_theta;
use unfolding::io::{simulate_votes, write_roster, write_truth, write_votes, SimulationOptions};
use unfolding::mixture::{builtin_table, fit_sequence, FitOptions, QuadratureGrid};
use unfolding::model::sample_prior_theta;

use crate::config::{create_dir, load_toml, required, usage, write_echo, HyperArgs};

fn load_file<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => load_toml(p),
        None => Ok(T::default()),
    }
}

/// `<stem>.config.toml` next to a single output file.
fn echo_path(out: &Path) -> PathBuf {
    out.with_extension("config.toml")
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of mixture components.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Mixture file to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Minimise the KL divergence numerically (K = 1..k, warm-started).
    #[arg(long, conflicts_with = "table")]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub fit: bool,
    /// Write the published table for k = 6 or 10.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub table: bool,
    /// Random starts per K [default: 5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Optimiser iterations per start [default: 2000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Seed for the random starts [default: 20240601].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Quadrature panels over [-10, 40] [default: 100].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    /// Gauss-Legendre nodes per panel [default: 20].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

pub fn approx_gumbel(args: ApproxArgs) -> Result<()> {
    let file: ApproxArgs = load_file(&args.config)?;
    let defaults = FitOptions::default();
    let args = ApproxArgs {
        config: None,
        k: args.k.or(file.k),
        out: args.out.or(file.out),
        fit: args.fit || (file.fit && !args.table),
        table: args.table || (file.table && !args.fit),
        restarts: Some(args.restarts.or(file.restarts).unwrap_or(defaults.restarts)),
        max_iter: Some(args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter)),
        seed: Some(args.seed.or(file.seed).unwrap_or(defaults.seed)),
        panels: Some(args.panels.or(file.panels).unwrap_or(100)),
        order: Some(args.order.or(file.order).unwrap_or(20)),
    };
    let k = required(&args.k, "k")?;
    let out = required(&args.out, "out")?;
    if args.fit == args.table {
        return Err(usage("choose exactly one of --fit and --table"));
    }
    let (panels, order) = (args.panels.unwrap_or(100), args.order.unwrap_or(20));
    if panels == 0 || order == 0 {
        return Err(usage("--panels and --order must be positive"));
    }
    let grid = QuadratureGrid::new(-10.0, 40.0, panels, order);
    let (mixture, kl) = if args.table {
        if k != 6 && k != 10 {
            return Err(usage(format!("no published table for K = {k} (available: 6, 10)")));
        }
        let mix = builtin_table(k)?;
        let kl = unfolding::mixture::kl_divergence(&mix, &grid);
        (mix, kl)
    } else {
        if k == 0 {
            return Err(usage("--k must be at least 1"));
        }
        let options = FitOptions {
            restarts: args.restarts.unwrap_or(defaults.restarts),
            max_iter: args.max_iter.unwrap_or(defaults.max_iter),
            seed: args.seed.unwrap_or(defaults.seed),
            ..defaults
        };
        let fits = fit_sequence(k, &grid, &options).context("fitting the mixture")?;
        for f in &fits {
            eprintln!(
                "K = {:>2}: KL {:.6e} ({} iterations{})",
                f.mixture.k(),
                f.kl,
                f.iterations,
                if f.converged { "" } else { ", not converged" }
            );
        }
        let last = fits.into_iter().last().expect("k >= 1");
        if !last.kl.is_finite() {
            bail!("optimiser failed: KL = {}", last.kl);
        }
        if !last.converged {
            eprintln!("warning: gradient tolerance not reached; writing the best iterate");
        }
        (last.mixture, last.kl)
    };
    mixture
        .save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("K = {k}  KL = {kl:.6e}");
    write_echo(&echo_path(&out), &args)
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of legislators before filtering.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    /// Number of items before filtering.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Probability that a cell is hidden [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_rate: Option<f64>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateArgs = load_file(&args.config)?;
    let hyper_args = args.hyper.or(file.hyper);
    let hyper = hyper_args.resolve()?;
    let args = SimulateArgs {
        config: None,
        i: args.i.or(file.i),
        j: args.j.or(file.j),
        seed: Some(args.seed.or(file.seed).unwrap_or(1)),
        out: args.out.or(file.out),
        missing_rate: Some(args.missing_rate.or(file.missing_rate).unwrap_or(0.0)),
        hyper: HyperArgs::echo(&hyper),
    };
    let (i, j) = (required(&args.i, "i")?, required(&args.j, "j")?);
    let out = required(&args.out, "out")?;
    if i < 2 || j < 2 {
        return Err(usage(format!("need at least 2 legislators and 2 items, got {i} x {j}")));
    }
    let missing_rate = args.missing_rate.unwrap_or(0.0);
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(usage("--missing-rate must lie in [0, 1)"));
    }
    let options = SimulationOptions {
        hyper,
        missing_rate,
        ..SimulationOptions::new(i, j, args.seed.unwrap_or(1))
    };
    let sim = simulate_votes(&options)?;
    create_dir(&out)?;
    write_votes(&out.join("votes.csv"), &sim.votes)?;
    write_roster(&out.join("legislators.csv"), &sim.votes)?;
    write_truth(&out, &sim)?;
    println!("filter: {}", sim.report);
    println!("{} observed votes", sim.votes.n_observed());
    if sim.seed != options.seed {
        eprintln!(
            "note: seed {} gave a degenerate matrix; used derived seed {}",
            options.seed, sim.seed
        );
    }
    write_echo(&out.join("config.toml"), &args)
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorThetaArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of prior draws [default: 100000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// CSV file to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

pub fn prior_theta(args: PriorThetaArgs) -> Result<()> {
    let file: PriorThetaArgs = load_file(&args.config)?;
    let hyper = args.hyper.or(file.hyper).resolve()?;
    let args = PriorThetaArgs {
        config: None,
        n: Some(args.n.or(file.n).unwrap_or(100_000)),
        seed: Some(args.seed.or(file.seed).unwrap_or(1)),
        out: args.out.or(file.out),
        hyper: HyperArgs::echo(&hyper),
    };
    let out = required(&args.out, "out")?;
    let n = args.n.unwrap_or(100_000);
    if n == 0 {
        return Err(usage("--n must be positive"));
    }
    let mut rng = RngStream::new(args.seed.unwrap_or(1), 0);
    let theta = sample_prior_theta(&hyper, n, &mut rng);
    write_prior_theta(&out, &theta)?;
    let share = |f: &dyn Fn(f64) -> bool| theta.iter().filter(|t| f(**t)).count() as f64 / n as f64;
    println!(
        "P(theta < 0.05) = {:.4}  P(theta > 0.95) = {:.4}  mean = {:.4}",
        share(&|t| t < 0.05),
        share(&|t| t > 0.95),
        theta.iter().sum::<f64>() / n as f64
    );
    write_echo(&echo_path(&out), &args)
}
