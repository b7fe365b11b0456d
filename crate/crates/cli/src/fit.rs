use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use unfolding::io::{load_votes, DrawWriter};
use unfolding::mixture::GaussianMixture;
use unfolding::model::{Hyperparams, Link, VoteMatrix};
use unfolding::sampler::{run_chain_into, InitMode, Progress, RunControl, SamplerConfig};

use crate::config::{create_dir, load_toml, parse_toml, required, to_toml, usage, CodeArgs, HyperArgs};

static STOP: AtomicBool = AtomicBool::new(false);

pub const PROGRESS_EVERY: u64 = 1000;
pub const PROGRESS_HEADER: &str = "iteration,total,loglik,elapsed_seconds,seconds_per_1000";

pub fn parse_link(s: &str) -> Result<Link, String> {
    s.parse()
}

pub fn parse_init(s: &str) -> Result<InitMode, String> {
    match s {
        "random" => Ok(InitMode::Random),
        "party-signed" => Ok(InitMode::PartySigned),
        other => Err(format!("unknown init mode {other:?} (expected random or party-signed)")),
    }
}

/// `[sampler]` section.
#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerArgs {
    /// Iterations discarded before the first retained draw [default: 5000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    /// Number of retained draws [default: 2000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_keep: Option<u64>,
    /// Keep every thin-th iteration after burn-in [default: 5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    /// Iterations between orthant-flip proposals [default: 5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_every: Option<u64>,
    /// Probability that a flip proposal restarts the item from its prior [default: 0.1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_sign_prob: Option<f64>,
    /// Master seed [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// random or party-signed [default: random].
    #[arg(long, value_parser = parse_init)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_mode: Option<InitMode>,
    /// Fraction of items started in the reflected orthant [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_fraction: Option<f64>,
}

impl SamplerArgs {
    fn or(self, file: SamplerArgs) -> Self {
        Self {
            burn_in: self.burn_in.or(file.burn_in),
            n_keep: self.n_keep.or(file.n_keep),
            thin: self.thin.or(file.thin),
            flip_every: self.flip_every.or(file.flip_every),
            flip_sign_prob: self.flip_sign_prob.or(file.flip_sign_prob),
            seed: self.seed.or(file.seed),
            init_mode: self.init_mode.or(file.init_mode),
            mirror_fraction: self.mirror_fraction.or(file.mirror_fraction),
        }
    }

    fn apply(&self, config: &mut SamplerConfig) {
        let set = |slot: &mut u64, v: Option<u64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut config.burn_in, self.burn_in);
        set(&mut config.n_keep, self.n_keep);
        set(&mut config.thin, self.thin);
        set(&mut config.flip_every, self.flip_every);
        set(&mut config.seed, self.seed);
        if let Some(p) = self.flip_sign_prob {
            config.flip_sign_prob = p;
        }
        if let Some(m) = self.init_mode {
            config.init_mode = m;
        }
        if let Some(f) = self.mirror_fraction {
            config.mirror_fraction = f;
        }
    }

    fn echo(config: &SamplerConfig) -> Self {
        Self {
            burn_in: Some(config.burn_in),
            n_keep: Some(config.n_keep),
            thin: Some(config.thin),
            flip_every: Some(config.flip_every),
            flip_sign_prob: Some(config.flip_sign_prob),
            seed: Some(config.seed),
            init_mode: Some(config.init_mode),
            mirror_fraction: Some(config.mirror_fraction),
        }
    }
}

/// Inline `[mixture]` table, same keys as a mixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    #[serde(rename = "K")]
    pub k: usize,
    pub pi: Vec<f64>,
    pub m: Vec<f64>,
    pub s: Vec<f64>,
}

impl MixtureSection {
    fn of(mix: &GaussianMixture) -> Self {
        Self {
            k: mix.k(),
            pi: mix.weights().to_vec(),
            m: mix.means().to_vec(),
            s: mix.sds().to_vec(),
        }
    }

    fn mixture(&self) -> Result<GaussianMixture> {
        if self.k != self.pi.len() {
            return Err(usage(format!(
                "[mixture] K = {} but {} weights given",
                self.k,
                self.pi.len()
            )));
        }
        GaussianMixture::new(self.pi.clone(), self.m.clone(), self.s.clone())
            .map_err(|e| usage(format!("[mixture] {e}")))
    }
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Vote records CSV (legislator_id,item_id,cast_code).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<PathBuf>,
    /// Roster CSV (legislator_id,name,party).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legislators: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// logit or probit [default: logit].
    #[arg(long, value_parser = parse_link)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Link>,
    /// Mixture file replacing the built-in six-component table.
    #[arg(long = "mixture")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture_file: Option<PathBuf>,
    /// Start from burn-in 500000, thin 50, 20000 kept draws.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub long_schedule: bool,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub codes: CodeArgs,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSection>,
}

/// Everything a fit needs after merging defaults, config file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub votes: PathBuf,
    pub legislators: Option<PathBuf>,
    pub out: PathBuf,
    pub hyper: Hyperparams,
    pub sampler: SamplerConfig,
    pub codes: CodeArgs,
}

impl Resolved {
    /// Fully explicit config that reproduces this run.
    pub fn echo(&self) -> FitArgs {
        FitArgs {
            config: None,
            votes: Some(self.votes.clone()),
            legislators: self.legislators.clone(),
            out: Some(self.out.clone()),
            model: Some(self.sampler.link),
            mixture_file: None,
            long_schedule: false,
            hyper: HyperArgs::echo(&self.hyper),
            sampler: SamplerArgs::echo(&self.sampler),
            codes: self.codes.filled(),
            mixture: Some(MixtureSection::of(&self.sampler.mixture)),
        }
    }
}

impl FitArgs {
    pub fn resolve(self) -> Result<Resolved> {
        let file = match &self.config {
            Some(path) => load_toml::<FitArgs>(path)?,
            None => FitArgs::default(),
        };
        let mixture = match (&self.mixture_file, &file.mixture, &file.mixture_file) {
            (Some(path), _, _) | (None, None, Some(path)) => {
                Some(GaussianMixture::load(path).map_err(|e| usage(format!("mixture {}: {e}", path.display())))?)
            }
            (None, Some(section), _) => Some(section.mixture()?),
            (None, None, None) => None,
        };
        let link = self.model.or(file.model).unwrap_or(Link::Logit);
        let mut sampler = SamplerConfig::for_link(link);
        if self.long_schedule || file.long_schedule {
            sampler = sampler.long_schedule();
        }
        self.sampler.or(file.sampler).apply(&mut sampler);
        if let Some(mix) = mixture {
            if link == Link::Probit && mix != GaussianMixture::standard_normal() {
                return Err(usage(
                    "the probit model uses the single N(0, 1) component; drop the mixture",
                ));
            }
            sampler.mixture = mix;
        }
        sampler.validate().map_err(|e| usage(e.to_string()))?;
        Ok(Resolved {
            votes: required(&self.votes.or(file.votes), "votes")?,
            legislators: self.legislators.or(file.legislators),
            out: required(&self.out.or(file.out), "out")?,
            hyper: self.hyper.or(file.hyper).resolve()?,
            sampler,
            codes: self.codes.or(file.codes),
        })
    }
}

/// Parse a config echo left in a draws directory.
pub fn parse_echo(text: &str) -> Result<FitArgs> {
    parse_toml(text).map_err(|e| anyhow!("unreadable config echo: {e}"))
}

pub fn load_fit_votes(votes: &Path, legislators: Option<&Path>, codes: &CodeArgs) -> Result<VoteMatrix> {
    let (matrix, report) = load_votes(votes, &codes.resolve()?, legislators)
        .with_context(|| format!("loading votes from {}", votes.display()))?;
    eprintln!("filter: {report}");
    Ok(matrix)
}

pub fn run(args: FitArgs) -> Result<()> {
    let run = args.resolve()?;
    let votes = load_fit_votes(&run.votes, run.legislators.as_deref(), &run.codes)?;
    create_dir(&run.out)?;
    let echo = to_toml(&run.echo())?;
    let mut writer = DrawWriter::create(&run.out.join("draws"), &votes, &echo)?;

    let log_path = run.out.join("progress.log");
    let mut log = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    writeln!(log, "{PROGRESS_HEADER}")?;
    let start = Instant::now();
    let mut last = 0.0;
    let mut log_error = None;
    let mut report = |p: &Progress| {
        let elapsed = start.elapsed().as_secs_f64();
        let line = format!(
            "{},{},{:?},{:.3},{:.3}",
            p.iteration,
            p.total,
            p.loglik,
            elapsed,
            elapsed - last
        );
        last = elapsed;
        if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
            log_error.get_or_insert(e);
        }
    };

    // A second install only happens in tests that call `run` twice.
    let _ = ctrlc::set_handler(|| STOP.store(true, Ordering::Relaxed));
    STOP.store(false, Ordering::Relaxed);
    let outcome = run_chain_into(
        &votes,
        &run.hyper,
        &run.sampler,
        &mut writer,
        RunControl {
            stop: Some(&STOP),
            progress: Some(&mut report),
            progress_every: PROGRESS_EVERY,
        },
    )?;
    if let Some(e) = log_error {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    eprintln!(
        "{} model: {} iterations, {} draws written to {} ({:.1} s)",
        run.sampler.link,
        outcome.iterations,
        outcome.draws,
        run.out.join("draws").display(),
        start.elapsed().as_secs_f64()
    );
    if outcome.interrupted {
        bail!(
            "interrupted after {} iterations; draws directory marked truncated",
            outcome.iterations
        );
    }
    Ok(())
}
