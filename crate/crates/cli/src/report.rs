use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unfolding::diagnostics::{
    compare_models, ess_by_legislator, rank_summary, recompute_loglik, response_curve, waic, waic_per_cell, ModelDraws,
    RankAggregation,
};
use unfolding::io::report::{
    curve_file_name, write_comparison, write_curve, write_ess, write_ranks, write_trace, write_waic,
};
use unfolding::io::{read_draws, DrawsDir, Roster, RunStatus};
use unfolding::model::{Link, Vote, VoteMatrix};

use crate::config::{create_dir, load_toml, required, usage, write_echo, CodeArgs};
use crate::fit::{load_fit_votes, parse_echo, parse_link, FitArgs};

/// Draws directory plus the model and cast codes it was fitted with.
struct Fitted {
    dir: DrawsDir,
    link: Link,
    codes: CodeArgs,
}

fn open_draws(path: &Path, model: Option<Link>, codes: &CodeArgs) -> Result<Fitted> {
    let dir = read_draws(path).with_context(|| format!("reading draws from {}", path.display()))?;
    if let Some(note) = &dir.truncation {
        eprintln!("warning: {note}");
    }
    if dir.manifest.status != RunStatus::Complete {
        eprintln!(
            "warning: {} is marked {:?}; using {} draws",
            path.display(),
            dir.manifest.status,
            dir.store.len()
        );
    }
    let echo: FitArgs = parse_echo(&dir.config_echo).unwrap_or_default();
    let Some(link) = model.or(echo.model) else {
        bail!("{}: config echo names no model; pass --model", path.display());
    };
    let codes = codes.clone().or(echo.codes);
    Ok(Fitted { dir, link, codes })
}

fn check_roster(path: &Path, dir: &DrawsDir, votes: &VoteMatrix) -> Result<()> {
    let expected = Roster::of(votes);
    if dir.roster.legislators != expected.legislators {
        bail!(
            "{}: legislators do not match the filtered votes ({} in draws, {} in votes)",
            path.display(),
            dir.roster.legislators.len(),
            expected.legislators.len()
        );
    }
    if dir.roster.items != expected.items {
        bail!(
            "{}: items do not match the filtered votes ({} in draws, {} in votes)",
            path.display(),
            dir.roster.items.len(),
            expected.items.len()
        );
    }
    Ok(())
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Draws directory written by `fit`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<PathBuf>,
    /// Vote records the draws were fitted to.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<PathBuf>,
    /// Roster CSV supplying party labels for ranks.csv.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legislators: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Override the model named in the draws' config echo.
    #[arg(long, value_parser = parse_link)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Link>,
    /// Item ids that get a response-curve file.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<String>>,
    /// Lowest ideal point on the curve grid [default: -3].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    /// Highest ideal point on the curve grid [default: 3].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    /// Number of grid points [default: 121].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Rank legislators by posterior mean ideal point instead of mean rank.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub rank_of_mean: bool,
    /// One WAIC unit per observed vote instead of per legislator.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub per_cell: bool,
    #[command(flatten)]
    pub codes: CodeArgs,
}

impl DiagnosticsArgs {
    fn merged(self) -> Result<Self> {
        let file = match &self.config {
            Some(path) => load_toml::<DiagnosticsArgs>(path)?,
            None => Self::default(),
        };
        Ok(Self {
            config: None,
            draws: self.draws.or(file.draws),
            votes: self.votes.or(file.votes),
            legislators: self.legislators.or(file.legislators),
            out: self.out.or(file.out),
            model: self.model.or(file.model),
            items: self.items.or(file.items),
            grid_min: self.grid_min.or(file.grid_min),
            grid_max: self.grid_max.or(file.grid_max),
            grid_points: self.grid_points.or(file.grid_points),
            rank_of_mean: self.rank_of_mean || file.rank_of_mean,
            per_cell: self.per_cell || file.per_cell,
            codes: self.codes.or(file.codes),
        })
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || points < 2 {
        return Err(usage(
            "curve grid needs finite grid-min < grid-max and at least 2 points",
        ));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|k| lo + k as f64 * step).collect())
}

pub fn diagnostics(args: DiagnosticsArgs) -> Result<()> {
    let args = args.merged()?;
    let draws_path = required(&args.draws, "draws")?;
    let votes_path = required(&args.votes, "votes")?;
    let out = required(&args.out, "out")?;
    let grid = grid(
        args.grid_min.unwrap_or(-3.0),
        args.grid_max.unwrap_or(3.0),
        args.grid_points.unwrap_or(121),
    )?;

    let fitted = open_draws(&draws_path, args.model, &args.codes)?;
    let votes = load_fit_votes(&votes_path, args.legislators.as_deref(), &fitted.codes)?;
    check_roster(&draws_path, &fitted.dir, &votes)?;
    let store = &fitted.dir.store;
    if store.is_empty() {
        bail!("{}: no retained draws", draws_path.display());
    }
    let item_index: Vec<(String, usize)> = args
        .items
        .iter()
        .flatten()
        .map(|id| {
            fitted
                .dir
                .roster
                .items
                .iter()
                .position(|x| x == id)
                .map(|j| (id.clone(), j))
                .ok_or_else(|| {
                    usage(format!(
                        "item {id:?} is not among the {} fitted items",
                        fitted.dir.roster.items.len()
                    ))
                })
        })
        .collect::<Result<_>>()?;

    create_dir(&out)?;
    let legislators = &fitted.dir.roster.legislators;
    let (units, report) = if args.per_cell {
        let units = observed_cells(&votes);
        (units, waic_per_cell(store, &votes, fitted.link)?)
    } else {
        (
            legislators.clone(),
            waic(&recompute_loglik(store, &votes, fitted.link)?)?,
        )
    };
    write_waic(&out.join("waic.csv"), &units, &report)?;

    let ess = ess_by_legislator(store)?;
    write_ess(&out.join("ess.csv"), legislators, &ess)?;
    let degenerate = ess.iter().filter(|e| e.rank.is_none() || e.beta.is_none()).count();
    if degenerate > 0 {
        eprintln!(
            "warning: effective sample size undefined for {degenerate} of {} legislators ({} draws)",
            legislators.len(),
            store.len()
        );
    }

    let aggregation = if args.rank_of_mean {
        RankAggregation::RankOfMean
    } else {
        RankAggregation::MeanOfRanks
    };
    let ranks = rank_summary(store.beta(), aggregation)?;
    let n = store.len() as f64;
    let beta_mean: Vec<f64> = (0..store.n_legislators())
        .map(|i| store.beta().iter().map(|b| b[i]).sum::<f64>() / n)
        .collect();
    let parties: Vec<Option<String>> = votes.legislators().iter().map(|l| l.party.clone()).collect();
    write_ranks(&out.join("ranks.csv"), legislators, &parties, &ranks, &beta_mean)?;
    write_trace(&out.join("loglik_trace.csv"), store.iterations(), &store.total_loglik())?;
    for (id, j) in &item_index {
        let curve = response_curve(store, *j, &grid, fitted.link)?;
        write_curve(&out.join(curve_file_name(id)), &curve)?;
    }

    let mut summary = String::new();
    writeln!(summary, "model            {}", fitted.link)?;
    writeln!(summary, "draws            {}", store.len())?;
    writeln!(summary, "legislators      {}", legislators.len())?;
    writeln!(summary, "items            {}", fitted.dir.roster.items.len())?;
    writeln!(summary, "waic             {:.3}", report.waic)?;
    writeln!(summary, "lppd             {:.3}", report.lppd)?;
    writeln!(summary, "penalty          {:.3}", report.penalty)?;
    let ok: Vec<f64> = ess.iter().filter_map(|e| e.rank).collect();
    if !ok.is_empty() {
        let min = ok.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        writeln!(summary, "rank ess         min {min:.1}, mean {mean:.1}")?;
    }
    writeln!(summary, "degenerate ess   {degenerate}")?;
    std::fs::write(out.join("summary.txt"), &summary).context("writing summary.txt")?;
    print!("{summary}");

    let echo = DiagnosticsArgs {
        model: Some(fitted.link),
        items: Some(item_index.into_iter().map(|(id, _)| id).collect()),
        grid_min: Some(grid[0]),
        grid_max: Some(grid[grid.len() - 1]),
        grid_points: Some(grid.len()),
        codes: fitted.codes.filled(),
        ..args
    };
    write_echo(&out.join("config.toml"), &echo)
}

/// `legislator_id:item_id` for each observed vote, row-major.
fn observed_cells(votes: &VoteMatrix) -> Vec<String> {
    let mut units = Vec::with_capacity(votes.n_observed());
    for (i, leg) in votes.legislators().iter().enumerate() {
        for (j, item) in votes.items().iter().enumerate() {
            if votes.get(i, j) != Vote::Missing {
                units.push(format!("{}:{}", leg.id, item.id));
            }
        }
    }
    units
}

#[derive(clap::Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// First draws directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_a: Option<PathBuf>,
    /// Second draws directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_b: Option<PathBuf>,
    /// Vote records both fits used.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub codes: CodeArgs,
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => load_toml::<CompareArgs>(path)?,
        None => CompareArgs::default(),
    };
    let args = CompareArgs {
        config: None,
        draws_a: args.draws_a.or(file.draws_a),
        draws_b: args.draws_b.or(file.draws_b),
        votes: args.votes.or(file.votes),
        out: args.out.or(file.out),
        codes: args.codes.or(file.codes),
    };
    let path_a = required(&args.draws_a, "draws-a")?;
    let path_b = required(&args.draws_b, "draws-b")?;
    let votes_path = required(&args.votes, "votes")?;
    let out = required(&args.out, "out")?;

    let a = open_draws(&path_a, None, &args.codes)?;
    let b = open_draws(&path_b, None, &args.codes)?;
    if a.codes.filled() != b.codes.filled() {
        bail!("the two fits read the vote file with different cast codes");
    }
    let votes = load_fit_votes(&votes_path, None, &a.codes)?;
    check_roster(&path_a, &a.dir, &votes)?;
    check_roster(&path_b, &b.dir, &votes)?;
    let cmp = compare_models(
        ModelDraws {
            store: &a.dir.store,
            legislators: &a.dir.roster.legislators,
            link: a.link,
        },
        ModelDraws {
            store: &b.dir.store,
            legislators: &b.dir.roster.legislators,
            link: b.link,
        },
        &votes,
    )?;

    create_dir(&out)?;
    write_comparison(&out, &cmp)?;
    let mut summary = String::new();
    writeln!(
        summary,
        "a: {} ({}, {} draws)",
        path_a.display(),
        a.link,
        a.dir.store.len()
    )?;
    writeln!(
        summary,
        "b: {} ({}, {} draws)",
        path_b.display(),
        b.link,
        b.dir.store.len()
    )?;
    writeln!(
        summary,
        "{:<24} {:>14} {:>26}",
        "", "WAIC(a)-WAIC(b)", "Spearman rho [90% int.]"
    )?;
    writeln!(
        summary,
        "{:<24} {:>14.3} {:>10.3} [{:.3}, {:.3}]",
        format!("{} vs {}", a.link, b.link),
        cmp.waic_difference,
        cmp.spearman_mean,
        cmp.spearman_lower,
        cmp.spearman_upper
    )?;
    writeln!(summary, "posterior rank correlation {:.4}", cmp.spearman_posterior)?;
    std::fs::write(out.join("summary.txt"), &summary).context("writing summary.txt")?;
    print!("{summary}");

    write_echo(
        &out.join("config.toml"),
        &CompareArgs {
            codes: a.codes.filled(),
            ..args
        },
    )
}
