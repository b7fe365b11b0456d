//! Posterior summaries: WAIC, Spearman rank correlation, ideological ranks,
//! effective sample size, response curves and two-model comparison.

use crate::distributions::logsumexp;
use crate::error::DiagnosticsError;
use crate::model::{legislator_log_likelihoods, Link, Vote, VoteMatrix};
use crate::sampler::DrawStore;

#[derive(Debug, Clone, PartialEq)]
pub struct WaicReport {
    /// Σ over units of log(mean over draws of exp(ℓ)).
    pub lppd: f64,
    /// Σ over units of the sample variance over draws of ℓ.
    pub penalty: f64,
    pub waic: f64,
    /// lppd minus penalty for each unit.
    pub per_unit: Vec<f64>,
    pub per_unit_lppd: Vec<f64>,
    pub per_unit_penalty: Vec<f64>,
}

/// WAIC from a draws × units matrix of log-likelihoods. The variance uses
/// the n - 1 denominator and is zero for a single draw.
pub fn waic(loglik: &[Vec<f64>]) -> Result<WaicReport, DiagnosticsError> {
    let n = loglik.len();
    if n == 0 {
        return Err(DiagnosticsError::NoDraws);
    }
    let units = loglik[0].len();
    if let Some(bad) = loglik.iter().find(|r| r.len() != units) {
        return Err(DiagnosticsError::LengthMismatch(units, bad.len()));
    }
    let ln_n = (n as f64).ln();
    let mut lppd = 0.0;
    let mut penalty = 0.0;
    let mut per_unit = Vec::with_capacity(units);
    let mut per_unit_lppd = Vec::with_capacity(units);
    let mut per_unit_penalty = Vec::with_capacity(units);
    let mut column = vec![0.0; n];
    for u in 0..units {
        for (c, row) in column.iter_mut().zip(loglik) {
            *c = row[u];
        }
        let l = logsumexp(&column) - ln_n;
        let p = sample_variance(&column);
        lppd += l;
        penalty += p;
        per_unit.push(l - p);
        per_unit_lppd.push(l);
        per_unit_penalty.push(p);
    }
    Ok(WaicReport {
        lppd,
        penalty,
        waic: lppd - penalty,
        per_unit,
        per_unit_lppd,
        per_unit_penalty,
    })
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Per-legislator log-likelihood of every draw, recomputed from the stored
/// parameters.
pub fn recompute_loglik(store: &DrawStore, votes: &VoteMatrix, link: Link) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    (0..store.len())
        .map(|d| {
            Ok(legislator_log_likelihoods(
                link,
                votes,
                &store.beta()[d],
                &store.items()[d],
            )?)
        })
        .collect()
}

/// WAIC with one unit per observed vote instead of per legislator.
pub fn waic_per_cell(store: &DrawStore, votes: &VoteMatrix, link: Link) -> Result<WaicReport, DiagnosticsError> {
    if store.n_legislators() != votes.n_legislators() {
        return Err(DiagnosticsError::LengthMismatch(
            votes.n_legislators(),
            store.n_legislators(),
        ));
    }
    if store.n_items() != votes.n_items() {
        return Err(DiagnosticsError::LengthMismatch(votes.n_items(), store.n_items()));
    }
    let cells: Vec<(usize, usize, bool)> = (0..votes.n_legislators())
        .flat_map(|i| (0..votes.n_items()).map(move |j| (i, j)))
        .filter_map(|(i, j)| match votes.get(i, j) {
            Vote::Missing => None,
            v => Some((i, j, v == Vote::Yea)),
        })
        .collect();
    let loglik: Vec<Vec<f64>> = (0..store.len())
        .map(|d| {
            let beta = &store.beta()[d];
            let items = &store.items()[d];
            cells
                .iter()
                .map(|&(i, j, yea)| link.log_prob(yea, beta[i], items[j].alpha(), items[j].delta()))
                .collect()
        })
        .collect();
    waic(&loglik)
}

/// 1 - 6 Σ d² / (n (n² - 1)) for two rank vectors, each a permutation of
/// 1..=n.
pub fn spearman(a: &[usize], b: &[usize]) -> Result<f64, DiagnosticsError> {
    if a.len() != b.len() {
        return Err(DiagnosticsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(DiagnosticsError::TooShort { needed: 2, got: n });
    }
    check_permutation(a)?;
    check_permutation(b)?;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

fn check_permutation(r: &[usize]) -> Result<(), DiagnosticsError> {
    let n = r.len();
    let mut seen = vec![false; n];
    for &k in r {
        if k == 0 || k > n || seen[k - 1] {
            return Err(DiagnosticsError::NotPermutation(n));
        }
        seen[k - 1] = true;
    }
    Ok(())
}

/// Ascending ranks 1..=n; equal values are ranked by position.
pub fn ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        out[i] = rank + 1;
    }
    out
}

/// How per-draw ranks become one posterior rank per legislator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankAggregation {
    /// Average of the per-draw ranks.
    #[default]
    MeanOfRanks,
    /// Rank of the posterior mean of β.
    RankOfMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub per_draw: Vec<Vec<usize>>,
    pub posterior_rank: Vec<f64>,
}

impl RankSummary {
    /// The posterior ranks turned back into a permutation (ties by index).
    pub fn ordering(&self) -> Vec<usize> {
        ranks(&self.posterior_rank)
    }
}

pub fn rank_summary(beta_draws: &[Vec<f64>], aggregation: RankAggregation) -> Result<RankSummary, DiagnosticsError> {
    let n = beta_draws.len();
    if n == 0 {
        return Err(DiagnosticsError::NoDraws);
    }
    let width = beta_draws[0].len();
    if let Some(bad) = beta_draws.iter().find(|r| r.len() != width) {
        return Err(DiagnosticsError::LengthMismatch(width, bad.len()));
    }
    let per_draw: Vec<Vec<usize>> = beta_draws.iter().map(|b| ranks(b)).collect();
    let posterior_rank = match aggregation {
        RankAggregation::MeanOfRanks => (0..width)
            .map(|i| per_draw.iter().map(|r| r[i] as f64).sum::<f64>() / n as f64)
            .collect(),
        RankAggregation::RankOfMean => {
            let mean: Vec<f64> = (0..width)
                .map(|i| beta_draws.iter().map(|b| b[i]).sum::<f64>() / n as f64)
                .collect();
            ranks(&mean).into_iter().map(|r| r as f64).collect()
        }
    };
    Ok(RankSummary {
        per_draw,
        posterior_rank,
    })
}

/// Effective sample size of a single chain: n / (1 + 2 Σ ρ_t), with the
/// autocorrelation sum truncated by Geyer's initial positive sequence and
/// made monotone. Capped at n.
pub fn ess(series: &[f64]) -> Result<f64, DiagnosticsError> {
    let n = series.len();
    if n < 10 {
        return Err(DiagnosticsError::TooShort { needed: 10, got: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma0 = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(gamma0 > 0.0) || gamma0 < 1e-300 || centred.iter().all(|x| *x == centred[0]) {
        return Err(DiagnosticsError::Degenerate);
    }
    let rho = |t: usize| -> f64 {
        centred[..n - t]
            .iter()
            .zip(&centred[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
            / gamma0
    };
    let mut sum_pairs = 0.0;
    let mut previous = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum_pairs += pair;
        previous = pair;
        k += 1;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    Ok((n as f64 / tau).min(n as f64))
}

/// Effective sample sizes of one legislator's rank and β series; `None`
/// when the series is too short or constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEntry {
    pub rank: Option<f64>,
    pub beta: Option<f64>,
}

pub fn ess_by_legislator(store: &DrawStore) -> Result<Vec<EssEntry>, DiagnosticsError> {
    let summary = rank_summary(store.beta(), RankAggregation::MeanOfRanks)?;
    Ok((0..store.n_legislators())
        .map(|i| {
            let rank: Vec<f64> = summary.per_draw.iter().map(|r| r[i] as f64).collect();
            let beta: Vec<f64> = store.beta().iter().map(|b| b[i]).collect();
            EssEntry {
                rank: ess(&rank).ok(),
                beta: ess(&beta).ok(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub beta: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sample quantile by linear interpolation between order statistics
/// (R type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean and central 90% band of the yea probability of item `j`
/// at each grid point. The band is widened to contain the mean when a
/// skewed posterior puts the mean outside the quantiles.
pub fn response_curve(
    store: &DrawStore,
    j: usize,
    grid: &[f64],
    link: Link,
) -> Result<Vec<CurvePoint>, DiagnosticsError> {
    if store.is_empty() {
        return Err(DiagnosticsError::NoDraws);
    }
    if j >= store.n_items() {
        return Err(DiagnosticsError::NoSuchItem(j));
    }
    let mut values = vec![0.0; store.len()];
    Ok(grid
        .iter()
        .map(|&beta| {
            for (v, draw) in values.iter_mut().zip(store.items()) {
                *v = link.prob_yea(beta, draw[j].alpha(), draw[j].delta());
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.sort_by(f64::total_cmp);
            CurvePoint {
                beta,
                mean,
                lower: quantile(&values, 0.05).min(mean),
                upper: quantile(&values, 0.95).max(mean),
            }
        })
        .collect())
}

/// A fitted model's draws with the legislator ids they refer to and the
/// response function they were fitted under.
#[derive(Debug, Clone, Copy)]
pub struct ModelDraws<'a> {
    pub store: &'a DrawStore,
    pub legislators: &'a [String],
    pub link: Link,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub waic_a: WaicReport,
    pub waic_b: WaicReport,
    /// WAIC(a) - WAIC(b).
    pub waic_difference: f64,
    /// Spearman correlation of the two posterior-mean rankings.
    pub spearman_posterior: f64,
    /// Spearman correlation of each pair of draws with the same index.
    pub spearman_draws: Vec<f64>,
    pub spearman_mean: f64,
    pub spearman_lower: f64,
    pub spearman_upper: f64,
}

/// WAIC difference and rank agreement of two fits to the same votes. Each
/// model's log-likelihood is recomputed from its draws under its own
/// response function.
pub fn compare_models(
    a: ModelDraws<'_>,
    b: ModelDraws<'_>,
    votes: &VoteMatrix,
) -> Result<Comparison, DiagnosticsError> {
    let ids: Vec<&str> = votes.legislators().iter().map(|l| l.id.as_str()).collect();
    for (name, m) in [("first", &a), ("second", &b)] {
        let theirs: Vec<&str> = m.legislators.iter().map(String::as_str).collect();
        if theirs != ids {
            return Err(DiagnosticsError::Roster(format!(
                "{name} model's legislators do not match the vote matrix ({} vs {})",
                theirs.len(),
                ids.len()
            )));
        }
    }
    let waic_a = waic(&recompute_loglik(a.store, votes, a.link)?)?;
    let waic_b = waic(&recompute_loglik(b.store, votes, b.link)?)?;
    let ranks_a = rank_summary(a.store.beta(), RankAggregation::MeanOfRanks)?;
    let ranks_b = rank_summary(b.store.beta(), RankAggregation::MeanOfRanks)?;
    let spearman_posterior = spearman(&ranks_a.ordering(), &ranks_b.ordering())?;
    let paired = a.store.len().min(b.store.len());
    let spearman_draws: Vec<f64> = (0..paired)
        .map(|d| spearman(&ranks_a.per_draw[d], &ranks_b.per_draw[d]))
        .collect::<Result<_, _>>()?;
    let mut sorted = spearman_draws.clone();
    sorted.sort_by(f64::total_cmp);
    let spearman_mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(Comparison {
        waic_difference: waic_a.waic - waic_b.waic,
        waic_a,
        waic_b,
        spearman_posterior,
        spearman_lower: quantile(&sorted, 0.05),
        spearman_upper: quantile(&sorted, 0.95),
        spearman_mean,
        spearman_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use proptest::prelude::*;

    #[test]
    fn waic_repeated_draw_has_no_penalty() {
        let row = vec![-1.5, -2.0, -0.3];
        let report = waic(&[row.clone(), row.clone()]).unwrap();
        assert_eq!(report.penalty, 0.0);
        assert!((report.waic - row.iter().sum::<f64>()).abs() < 1e-12);
        assert!(matches!(waic(&[]), Err(DiagnosticsError::NoDraws)));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1, 2, 3, 4], &[1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(spearman(&[1, 2, 3, 4], &[4, 3, 2, 1]).unwrap(), -1.0);
        assert!((spearman(&[1, 2, 3, 4], &[1, 3, 2, 4]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(
            spearman(&[1, 2], &[1, 2, 3]),
            Err(DiagnosticsError::LengthMismatch(2, 3))
        ));
        assert!(matches!(
            spearman(&[1, 1, 3], &[1, 2, 3]),
            Err(DiagnosticsError::NotPermutation(3))
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ranks(&[0.3, -1.2, 2.0]), vec![2, 1, 3]);
        assert_eq!(ranks(&[5.0]), vec![1]);
        assert_eq!(ranks(&[1.0, 1.0, 0.0]), vec![2, 3, 1]);
        let draws = vec![vec![0.3, -1.2, 2.0], vec![-0.5, 0.2, 1.0]];
        let s = rank_summary(&draws, RankAggregation::MeanOfRanks).unwrap();
        assert_eq!(s.posterior_rank, vec![1.5, 1.5, 3.0]);
        let s = rank_summary(&draws, RankAggregation::RankOfMean).unwrap();
        assert_eq!(s.posterior_rank, vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn ess_of_white_noise_and_ar1() {
        let mut rng = RngStream::new(5, 0);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        let e = ess(&iid).unwrap();
        assert!((e / 10_000.0 - 1.0).abs() < 0.1, "{e}");
        let mut x = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.9 * x + rng.standard_normal();
                x
            })
            .collect();
        let expected = 100_000.0 * 0.1 / 1.9;
        let e = ess(&ar).unwrap();
        assert!((e / expected - 1.0).abs() < 0.1, "{e} vs {expected}");
        assert!(matches!(ess(&[2.0; 50]), Err(DiagnosticsError::Degenerate)));
        assert!(matches!(ess(&[1.0; 5]), Err(DiagnosticsError::TooShort { .. })));
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-15);
        assert!((quantile(&v, 0.95) - 4.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn spearman_is_symmetric_and_self_is_one(seed in any::<u64>(), n in 2usize..40) {
            let mut rng = RngStream::new(seed, 0);
            let a = ranks(&(0..n).map(|_| rng.standard_normal()).collect::<Vec<_>>());
            let b = ranks(&(0..n).map(|_| rng.standard_normal()).collect::<Vec<_>>());
            prop_assert_eq!(spearman(&a, &a).unwrap(), 1.0);
            let ab = spearman(&a, &b).unwrap();
            prop_assert_eq!(ab, spearman(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn ranks_survive_monotone_transforms(values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
            let mapped: Vec<f64> = values.iter().map(|v| v.exp() + 3.0 * v).collect();
            prop_assert_eq!(ranks(&values), ranks(&mapped));
        }

        #[test]
        fn reflection_reverses_ranks(values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
            let n = values.len();
            let distinct = {
                let mut s = values.clone();
                s.sort_by(f64::total_cmp);
                s.windows(2).all(|w| w[0] < w[1])
            };
            prop_assume!(distinct);
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            for (r, s) in ranks(&values).into_iter().zip(ranks(&neg)) {
                prop_assert_eq!(s, n + 1 - r);
            }
        }

        #[test]
        fn waic_ignores_draw_order(seed in any::<u64>(), n in 2usize..30) {
            let mut rng = RngStream::new(seed, 0);
            let draws: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| -rng.uniform() * 5.0).collect()).collect();
            let mut rev = draws.clone();
            rev.reverse();
            let a = waic(&draws).unwrap();
            let b = waic(&rev).unwrap();
            prop_assert!((a.waic - b.waic).abs() < 1e-10);
            prop_assert!(a.penalty >= 0.0);
        }

        #[test]
        fn ess_stays_below_length(seed in any::<u64>(), n in 10usize..500) {
            let mut rng = RngStream::new(seed, 0);
            let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            prop_assert!(ess(&x).unwrap() <= 1.05 * n as f64);
        }
    }
}
