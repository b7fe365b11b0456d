//! CSV reports produced from retained draws.
//!
//! | file              | columns                                                            |
//! |-------------------|--------------------------------------------------------------------|
//! | `waic.csv`        | `unit,lppd,penalty,waic` (first row `total`, then one per unit)     |
//! | `ess.csv`         | `legislator_id,ess_rank,ess_beta,status`                          |
//! | `ranks.csv`       | `legislator_id,party,posterior_rank,beta_mean`                    |
//! | `loglik_trace.csv`| `iter,total`                                                      |
//! | `curve_<id>.csv`  | `beta,mean,lower,upper`                                           |
//! | `spearman.csv`    | `draw,spearman`                                                   |
//! | `comparison.csv`  | `waic_a,waic_b,waic_difference,spearman_posterior,spearman_mean,spearman_lower,spearman_upper` |
//! | `prior_theta.csv` | `theta`                                                           |

use std::path::Path;

use crate::diagnostics::{Comparison, CurvePoint, EssEntry, RankSummary, WaicReport};
use crate::error::IoError;

pub const WAIC_HEADER: [&str; 4] = ["unit", "lppd", "penalty", "waic"];
pub const ESS_HEADER: [&str; 4] = ["legislator_id", "ess_rank", "ess_beta", "status"];
pub const RANKS_HEADER: [&str; 4] = ["legislator_id", "party", "posterior_rank", "beta_mean"];
pub const TRACE_HEADER: [&str; 2] = ["iter", "total"];
pub const CURVE_HEADER: [&str; 4] = ["beta", "mean", "lower", "upper"];
pub const SPEARMAN_HEADER: [&str; 2] = ["draw", "spearman"];
pub const COMPARISON_HEADER: [&str; 7] = [
    "waic_a",
    "waic_b",
    "waic_difference",
    "spearman_posterior",
    "spearman_mean",
    "spearman_lower",
    "spearman_upper",
];
pub const PRIOR_THETA_HEADER: [&str; 1] = ["theta"];

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::file(path, io),
        other => IoError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_waic(path: &Path, units: &[String], report: &WaicReport) -> Result<(), IoError> {
    let total = vec![
        "total".to_string(),
        num(report.lppd),
        num(report.penalty),
        num(report.waic),
    ];
    let rows = units.iter().enumerate().map(|(u, id)| {
        vec![
            id.clone(),
            num(report.per_unit_lppd[u]),
            num(report.per_unit_penalty[u]),
            num(report.per_unit[u]),
        ]
    });
    write_rows(path, &WAIC_HEADER, std::iter::once(total).chain(rows))
}

pub fn write_ess(path: &Path, legislators: &[String], entries: &[EssEntry]) -> Result<(), IoError> {
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    write_rows(
        path,
        &ESS_HEADER,
        legislators.iter().zip(entries).map(|(id, e)| {
            let status = if e.rank.is_some() && e.beta.is_some() {
                "ok"
            } else {
                "degenerate"
            };
            vec![id.clone(), opt(e.rank), opt(e.beta), status.to_string()]
        }),
    )
}

pub fn write_ranks(
    path: &Path,
    legislators: &[String],
    parties: &[Option<String>],
    summary: &RankSummary,
    beta_mean: &[f64],
) -> Result<(), IoError> {
    write_rows(
        path,
        &RANKS_HEADER,
        legislators.iter().enumerate().map(|(i, id)| {
            vec![
                id.clone(),
                parties.get(i).cloned().flatten().unwrap_or_default(),
                num(summary.posterior_rank[i]),
                num(beta_mean[i]),
            ]
        }),
    )
}

pub fn write_trace(path: &Path, iterations: &[u64], totals: &[f64]) -> Result<(), IoError> {
    write_rows(
        path,
        &TRACE_HEADER,
        iterations
            .iter()
            .zip(totals)
            .map(|(it, t)| vec![it.to_string(), num(*t)]),
    )
}

pub fn write_curve(path: &Path, points: &[CurvePoint]) -> Result<(), IoError> {
    write_rows(
        path,
        &CURVE_HEADER,
        points
            .iter()
            .map(|p| vec![num(p.beta), num(p.mean), num(p.lower), num(p.upper)]),
    )
}

/// `curve_<id>.csv`, with characters outside `[A-Za-z0-9_.-]` replaced by
/// `_`.
pub fn curve_file_name(item_id: &str) -> String {
    let safe: String = item_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("curve_{safe}.csv")
}

/// `comparison.csv` and `spearman.csv` in `dir`.
pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<(), IoError> {
    write_rows(
        &dir.join("comparison.csv"),
        &COMPARISON_HEADER,
        [vec![
            num(cmp.waic_a.waic),
            num(cmp.waic_b.waic),
            num(cmp.waic_difference),
            num(cmp.spearman_posterior),
            num(cmp.spearman_mean),
            num(cmp.spearman_lower),
            num(cmp.spearman_upper),
        ]],
    )?;
    write_rows(
        &dir.join("spearman.csv"),
        &SPEARMAN_HEADER,
        cmp.spearman_draws
            .iter()
            .enumerate()
            .map(|(d, r)| vec![(d + 1).to_string(), num(*r)]),
    )
}

pub fn write_prior_theta(path: &Path, theta: &[f64]) -> Result<(), IoError> {
    write_rows(path, &PRIOR_THETA_HEADER, theta.iter().map(|t| vec![num(*t)]))
}

/// Rows of a report CSV after checking its header.
pub fn read_report(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    super::votes::check_header(path, &found, header)?;
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| csv_error(path, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_names_are_filesystem_safe() {
        assert_eq!(curve_file_name("V12"), "curve_V12.csv");
        assert_eq!(curve_file_name("HR 1/2"), "curve_HR_1_2.csv");
    }
}
