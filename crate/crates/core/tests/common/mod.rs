//! Shared fixtures, statistical tests and brute-force oracles for the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};
use unfolding::diagnostics::ess;
use unfolding::distributions::RngStream;
use unfolding::mixture::{builtin_table, GaussianMixture};
use unfolding::model::{sample_item_prior, Hyperparams, ItemParams, Orthant, Vote, VoteMatrix};
use unfolding::quadrature::composite_gauss_legendre;
use unfolding::sampler::{Cell, ChainState, Sampler, SamplerConfig};

// ---- statistical tests ----------------------------------------------------

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    ks_p(d, na * nb / (na + nb))
}

pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x.iter().enumerate().fold(0.0f64, |d, (k, v)| {
        let f = cdf(*v);
        d.max(f - k as f64 / n).max((k + 1) as f64 / n - f)
    });
    ks_p(d, n)
}

/// Pearson goodness of fit, with bins whose expected count is below 5
/// pooled into one.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            pooled_obs += *c as f64;
            pooled_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        if pooled_exp >= 5.0 {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            bins += 1;
        } else if pooled_obs > 20.0 {
            return 0.0;
        }
    }
    if bins < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Largest |sample moment - target| in units of its Monte Carlo standard
/// error, over the mean and the variance.
pub fn moment_z(x: &[f64], mean: f64, var: f64) -> f64 {
    let n = x.len() as f64;
    let (m, v) = mean_var(x);
    let z_mean = (m - mean) / (var / n).sqrt();
    let m4 = x.iter().map(|t| (t - m).powi(4)).sum::<f64>() / n;
    let z_var = (v - var) / ((m4 - var * var) / n).sqrt();
    z_mean.abs().max(z_var.abs())
}

// ---- independent model pieces ----------------------------------------------

pub fn log_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Yea probability written out directly from the three-option logit.
pub fn direct_yea_probability(beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> f64 {
    let e1 = (-alpha[0] * (beta - delta[0])).exp();
    let e3 = (-alpha[1] * (beta - delta[1])).exp();
    1.0 / (1.0 + e1 + e3)
}

/// Log probability of a vote under the three-option logit, stable for
/// large exponents.
pub fn direct_log_prob(yea: bool, beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> f64 {
    let a = [0.0, -alpha[0] * (beta - delta[0]), -alpha[1] * (beta - delta[1])];
    let lse = |xs: &[f64]| {
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    let all = lse(&a);
    if yea {
        -all
    } else {
        lse(&a[1..]) - all
    }
}

/// Means of the three utilities before the shock's own component mean.
pub fn locations(beta: f64, item: &ItemParams) -> [f64; 3] {
    let [a1, a2] = item.alpha();
    let [d1, d2] = item.delta();
    [-a1 * (beta - d1), 0.0, -a2 * (beta - d2)]
}

pub fn item(alpha: [f64; 2], delta: [f64; 2]) -> ItemParams {
    let z = Orthant::of(alpha).expect("alpha in an orthant");
    ItemParams::new(alpha, delta, z).unwrap()
}

// ---- fixtures ---------------------------------------------------------------

/// Three legislators, two items, one missing vote.
pub fn small_votes() -> VoteMatrix {
    use Vote::*;
    VoteMatrix::from_rows(&[vec![Yea, Nay], vec![Nay, Yea], vec![Yea, Missing]]).unwrap()
}

pub fn small_beta() -> Vec<f64> {
    vec![-0.8, 0.4, 1.3]
}

pub fn small_items() -> Vec<ItemParams> {
    vec![item([1.5, -0.7], [-1.2, 2.0]), item([-0.9, 1.1], [0.5, -1.5])]
}

/// A consistent chain state at the fixture parameters with latent
/// variables settled by a few sweeps.
pub fn settled_state(sampler: &Sampler, beta: Vec<f64>, items: Vec<ItemParams>) -> ChainState {
    let mut state = sampler.init_state().unwrap();
    state.beta = beta;
    state.items = items;
    for it in 1..=20 {
        sampler.step_lambda(&mut state, it).unwrap();
        sampler.step_utilities(&mut state, it).unwrap();
    }
    state
}

pub fn logit_sampler(votes: &VoteMatrix) -> Sampler {
    Sampler::new(votes, Hyperparams::default(), SamplerConfig::logit()).unwrap()
}

// ---- kernel oracles ---------------------------------------------------------

/// Smallest chi-square p-value over the three shocks of one cell when its
/// components are drawn `n` times with utilities held fixed.
pub fn lambda_oracle(n: usize) -> f64 {
    let votes = small_votes();
    let sampler = logit_sampler(&votes);
    let mix = builtin_table(6).unwrap();
    let beta = 0.4;
    let it = small_items()[0];
    let cell0 = Cell {
        utility: [0.7, 1.9, -0.4],
        component: [0; 3],
    };
    let loc = locations(beta, &it);
    let mut counts = [[0u64; 6]; 3];
    let mut rng = RngStream::new(101, 0);
    for _ in 0..n {
        let mut cell = cell0;
        sampler.draw_components_cell(&mut cell, beta, &it, &mut rng).unwrap();
        for l in 0..3 {
            counts[l][cell.component[l] as usize] += 1;
        }
    }
    (0..3)
        .map(|l| {
            let w: Vec<f64> = (0..6)
                .map(|k| mix.weights()[k] * log_normal(cell0.utility[l], mix.means()[k] + loc[l], mix.sds()[k]).exp())
                .collect();
            let total: f64 = w.iter().sum();
            let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
            chi_square(&counts[l], &probs)
        })
        .fold(1.0, f64::min)
}

/// Smallest two-sample KS p-value, over the three utilities and both vote
/// values, between repeated truncated sweeps and rejection sampling from
/// the unconstrained Gaussian conditioned on the vote.
pub fn utilities_oracle(n: usize, thin: usize) -> f64 {
    let votes = small_votes();
    let sampler = logit_sampler(&votes);
    let mix = builtin_table(6).unwrap();
    let beta = 0.4;
    let it = small_items()[0];
    let components = [2u8, 0, 4];
    let loc = locations(beta, &it);
    let mean: Vec<f64> = (0..3).map(|l| mix.means()[components[l] as usize] + loc[l]).collect();
    let sd: Vec<f64> = (0..3).map(|l| mix.sds()[components[l] as usize]).collect();
    let mut worst = 1.0f64;
    for yea in [true, false] {
        let mut cell = Cell {
            utility: if yea { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] },
            component: components,
        };
        let mut rng = RngStream::new(202, yea as u64);
        let mut gibbs: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
        for _ in 0..200 {
            sampler
                .sweep_utilities_cell(&mut cell, yea, beta, &it, &mut rng)
                .unwrap();
        }
        for _ in 0..n {
            for _ in 0..thin {
                sampler
                    .sweep_utilities_cell(&mut cell, yea, beta, &it, &mut rng)
                    .unwrap();
            }
            assert!(cell.consistent_with(yea));
            for (series, u) in gibbs.iter_mut().zip(cell.utility) {
                series.push(u);
            }
        }
        let mut rng = RngStream::new(303, yea as u64);
        let mut exact: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
        while exact[0].len() < n {
            let u: Vec<f64> = (0..3).map(|l| mean[l] + sd[l] * rng.standard_normal()).collect();
            if (u[1] > u[0].max(u[2])) == yea {
                for l in 0..3 {
                    exact[l].push(u[l]);
                }
            }
        }
        for l in 0..3 {
            worst = worst.min(ks_two_sample(&gibbs[l], &exact[l]));
        }
    }
    worst
}

/// Conditional posterior of β_i on a grid, from the augmented regression
/// written out directly.
fn beta_log_posterior(state: &ChainState, votes: &VoteMatrix, mix: &GaussianMixture, i: usize, b: f64) -> f64 {
    let mut lp = log_normal(b, 0.0, 1.0);
    for j in 0..votes.n_items() {
        if !votes.get(i, j).is_observed() {
            continue;
        }
        let cell = state.latent.get(i, j);
        let loc = locations(b, &state.items[j]);
        for l in [0, 2] {
            let k = cell.component[l] as usize;
            lp += log_normal(cell.utility[l], mix.means()[k] + loc[l], mix.sds()[k]);
        }
    }
    lp
}

/// Posterior mean and variance of a 1-D log density by quadrature.
pub fn grid_moments(lo: f64, hi: f64, log_density: impl Fn(f64) -> f64) -> (f64, f64) {
    let (x, w) = composite_gauss_legendre(lo, hi, 800, 16);
    let lp: Vec<f64> = x.iter().map(|v| log_density(*v)).collect();
    let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lp.iter().zip(&w).map(|(l, w)| (l - max).exp() * w).collect();
    let z: f64 = dens.iter().sum();
    let m = x.iter().zip(&dens).map(|(x, d)| x * d).sum::<f64>() / z;
    let v = x.iter().zip(&dens).map(|(x, d)| (x - m).powi(2) * d).sum::<f64>() / z;
    (m, v)
}

/// Largest |Δ| between the analytic β conditional and the grid posterior,
/// plus the largest moment z-score of `n` repeated draws of legislator 0.
pub fn beta_oracle(n: usize) -> (f64, f64) {
    let votes = small_votes();
    let sampler = logit_sampler(&votes);
    let mix = builtin_table(6).unwrap();
    let mut state = settled_state(&sampler, small_beta(), small_items());
    let mut worst = 0.0f64;
    for i in 0..3 {
        let (mean, var) = sampler.beta_conditional(&state, i);
        let (gm, gv) = grid_moments(-30.0, 30.0, |b| beta_log_posterior(&state, &votes, &mix, i, b));
        worst = worst.max((mean - gm).abs()).max((var - gv).abs());
    }
    let (mean, var) = sampler.beta_conditional(&state, 0);
    let draws: Vec<f64> = (0..n as u64)
        .map(|it| {
            sampler.step_beta(&mut state, 1000 + it).unwrap();
            state.beta[0]
        })
        .collect();
    (worst, moment_z(&draws, mean, var))
}

/// Unnormalised log weight of orthant `z` for item `j`: the δ prior
/// times the prior-weighted likelihood integrated over the orthant on a
/// 2-D product grid.
fn orthant_log_weight(
    state: &ChainState,
    votes: &VoteMatrix,
    mix: &GaussianMixture,
    hyper: &Hyperparams,
    j: usize,
    z: f64,
) -> f64 {
    let delta = state.items[j].delta();
    let kappa = hyper.kappa_sq.sqrt();
    let omega = hyper.omega_sq.sqrt();
    let log_delta =
        log_normal(delta[0], z * hyper.vartheta[0], kappa) + log_normal(delta[1], z * hyper.vartheta[1], kappa);
    let observed: Vec<usize> = (0..votes.n_legislators())
        .filter(|&i| votes.get(i, j).is_observed())
        .collect();
    let term = |a: f64, slot: usize, i: usize| {
        let cell = state.latent.get(i, j);
        let k = cell.component[slot] as usize;
        let b = state.beta[i];
        let loc = -a * (b - delta[slot / 2]);
        log_normal(cell.utility[slot], mix.means()[k] + loc, mix.sds()[k])
    };
    let (x, w) = composite_gauss_legendre(0.0, 8.0 * omega, 160, 12);
    let (a1s, a2s): (Vec<f64>, Vec<f64>) = x.iter().map(|t| (z * t, -z * t)).unzip();
    let part1: Vec<f64> = a1s
        .iter()
        .map(|a| log_normal(*a, 0.0, omega) + observed.iter().map(|&i| term(*a, 0, i)).sum::<f64>())
        .collect();
    let part2: Vec<f64> = a2s
        .iter()
        .map(|a| log_normal(*a, 0.0, omega) + observed.iter().map(|&i| term(*a, 2, i)).sum::<f64>())
        .collect();
    let mut logs = Vec::with_capacity(x.len() * x.len());
    for p in 0..x.len() {
        for q in 0..x.len() {
            logs.push(part1[p] + part2[q] + (w[p] * w[q]).ln());
        }
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    log_delta + max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Largest |Δ| between the sampler's P(z = +1) and 2-D quadrature, over
/// both fixture items.
pub fn orthant_oracle() -> f64 {
    let votes = small_votes();
    let sampler = logit_sampler(&votes);
    let mix = builtin_table(6).unwrap();
    let hyper = Hyperparams::default();
    let state = settled_state(&sampler, small_beta(), small_items());
    (0..2)
        .map(|j| {
            let lp = orthant_log_weight(&state, &votes, &mix, &hyper, j, 1.0);
            let ln = orthant_log_weight(&state, &votes, &mix, &hyper, j, -1.0);
            let oracle = 1.0 / (1.0 + (ln - lp).exp());
            (sampler.item_conditional(&state, j).prob_positive() - oracle).abs()
        })
        .fold(0.0, f64::max)
}

/// One item, two legislators: the smallest KS p-value of `n` δ draws
/// against the grid posterior CDF, and the largest moment z-score against
/// the analytic conditional.
pub fn delta_oracle(n: usize) -> (f64, f64) {
    use Vote::*;
    let votes = VoteMatrix::from_rows(&[vec![Yea], vec![Nay]]).unwrap();
    let sampler = logit_sampler(&votes);
    let mix = builtin_table(6).unwrap();
    let hyper = Hyperparams::default();
    let current = item([1.3, -0.6], [-0.5, 1.5]);
    let state = settled_state(&sampler, vec![-0.7, 0.9], vec![current]);
    let kappa = hyper.kappa_sq.sqrt();
    let z = current.z().sign();
    let log_post = |slot: usize, d: f64| {
        let a = current.alpha()[slot];
        let mut lp = log_normal(d, z * hyper.vartheta[slot], kappa);
        for i in 0..2 {
            let cell = state.latent.get(i, 0);
            let k = cell.component[2 * slot] as usize;
            let loc = -a * (state.beta[i] - d);
            lp += log_normal(cell.utility[2 * slot], mix.means()[k] + loc, mix.sds()[k]);
        }
        lp
    };
    let mut rng = RngStream::new(404, 0);
    let draws: Vec<[f64; 2]> = (0..n)
        .map(|_| sampler.draw_delta(&state, 0, &current, &mut rng).unwrap().delta())
        .collect();
    let (mean, var) = sampler.delta_conditional(&state, 0, &current);
    let mut min_p = 1.0f64;
    let mut max_z = 0.0f64;
    for slot in 0..2 {
        let xs: Vec<f64> = draws.iter().map(|d| d[slot]).collect();
        let (gm, gv) = grid_moments(-80.0, 80.0, |d| log_post(slot, d));
        let cdf = grid_cdf(gm - 12.0 * gv.sqrt(), gm + 12.0 * gv.sqrt(), |d| log_post(slot, d));
        min_p = min_p.min(ks_one_sample(&xs, cdf));
        max_z = max_z.max(moment_z(&xs, mean[slot], var[slot]));
    }
    (min_p, max_z)
}

/// CDF of a 1-D log density tabulated by the trapezoid rule and linearly
/// interpolated.
pub fn grid_cdf(lo: f64, hi: f64, log_density: impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 {
    let m = 200_000;
    let h = (hi - lo) / m as f64;
    let xs: Vec<f64> = (0..=m).map(|k| lo + h * k as f64).collect();
    let lp: Vec<f64> = xs.iter().map(|x| log_density(*x)).collect();
    let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lp.iter().map(|l| (l - max).exp()).collect();
    let mut cum = vec![0.0; m + 1];
    for k in 1..=m {
        cum[k] = cum[k - 1] + 0.5 * h * (dens[k - 1] + dens[k]);
    }
    let total = cum[m];
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (x - lo) / h;
        let k = (t.floor() as usize).min(m - 1);
        let f = t - k as f64;
        (cum[k] + f * (cum[k + 1] - cum[k])) / total
    }
}

/// Largest |Δ| between the flip acceptance and the likelihood ratio
/// recomputed from the response function, over both proposal kinds and
/// both fixture items.
pub fn flip_oracle() -> f64 {
    let votes = small_votes();
    let sampler = logit_sampler(&votes);
    let state = settled_state(&sampler, small_beta(), small_items());
    let mut rng = RngStream::new(505, 0);
    let mut worst = 0.0f64;
    for j in 0..2 {
        let current = state.items[j];
        let restart =
            unfolding::model::sample_item_given_orthant(current.z().flipped(), &Hyperparams::default(), &mut rng);
        for proposal in [current.reflected(), restart] {
            let mut direct = 0.0;
            for i in 0..3 {
                let v = votes.get(i, j);
                if !v.is_observed() {
                    continue;
                }
                let yea = v == Vote::Yea;
                direct += direct_log_prob(yea, state.beta[i], proposal.alpha(), proposal.delta())
                    - direct_log_prob(yea, state.beta[i], current.alpha(), current.delta());
            }
            worst = worst.max((sampler.flip_log_acceptance(&state, j, &proposal) - direct).abs());
        }
    }
    worst
}

// ---- Geweke --------------------------------------------------------------------

/// Components and utilities of every cell drawn from the augmented model,
/// and the votes they imply.
fn simulate_augmented(
    beta: &[f64],
    items: &[ItemParams],
    mix: &GaussianMixture,
    rng: &mut RngStream,
) -> (VoteMatrix, Vec<Cell>) {
    let mut rows = Vec::with_capacity(beta.len());
    let mut cells = Vec::with_capacity(beta.len() * items.len());
    for b in beta {
        let mut row = Vec::with_capacity(items.len());
        for it in items {
            let loc = locations(*b, it);
            let mut cell = Cell::default();
            for (l, offset) in loc.iter().enumerate() {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut k = mix.k() - 1;
                for (idx, w) in mix.weights().iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = idx;
                        break;
                    }
                }
                cell.component[l] = k as u8;
                cell.utility[l] = mix.means()[k] + offset + mix.sds()[k] * rng.standard_normal();
            }
            row.push(Vote::from_yea(cell.utility[1] > cell.utility[0].max(cell.utility[2])));
            cells.push(cell);
        }
        rows.push(row);
    }
    (VoteMatrix::from_rows(&rows).unwrap(), cells)
}

fn geweke_stats(beta: &[f64], items: &[ItemParams]) -> Vec<f64> {
    let mut out = Vec::new();
    for b in beta {
        out.push(*b);
        out.push(b * b);
    }
    for it in items {
        for v in it.alpha().into_iter().chain(it.delta()) {
            out.push(v);
            out.push(v * v);
        }
    }
    out
}

pub struct GewekeResult {
    pub max_abs_z: f64,
    pub z_scores: Vec<f64>,
}

/// Successive-conditional test: forward draws from the prior against a
/// path that alternates one full sampler iteration with regenerating the
/// votes and augmentation variables given the parameters. Uses the
/// single-normal mixture and the probit response so that every kernel,
/// the flip move included, targets the same joint distribution.
pub fn geweke(cycles: usize, seed: u64) -> GewekeResult {
    let (n_leg, n_items) = (3, 2);
    let hyper = Hyperparams::default();
    let mut config = SamplerConfig::probit();
    config.seed = seed;
    let mix = config.mixture.clone();
    let mut rng = RngStream::new(seed, 1);

    let forward: Vec<Vec<f64>> = (0..cycles)
        .map(|_| {
            let beta: Vec<f64> = (0..n_leg).map(|_| rng.standard_normal()).collect();
            let items: Vec<ItemParams> = (0..n_items).map(|_| sample_item_prior(&hyper, &mut rng)).collect();
            geweke_stats(&beta, &items)
        })
        .collect();

    let beta: Vec<f64> = (0..n_leg).map(|_| rng.standard_normal()).collect();
    let items: Vec<ItemParams> = (0..n_items).map(|_| sample_item_prior(&hyper, &mut rng)).collect();
    let (mut votes, mut cells) = simulate_augmented(&beta, &items, &mix, &mut rng);
    let mut state = Sampler::new(&votes, hyper, config.clone())
        .unwrap()
        .init_state()
        .unwrap();
    state.beta = beta;
    state.items = items;
    let mut path = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        for i in 0..n_leg {
            for j in 0..n_items {
                *state.latent.get_mut(i, j) = cells[i * n_items + j];
            }
        }
        let sampler = Sampler::new(&votes, hyper, config.clone()).unwrap();
        sampler.iterate(&mut state).unwrap();
        path.push(geweke_stats(&state.beta, &state.items));
        (votes, cells) = simulate_augmented(&state.beta, &state.items, &mix, &mut rng);
    }

    let n_stats = forward[0].len();
    let z_scores: Vec<f64> = (0..n_stats)
        .map(|s| {
            let f: Vec<f64> = forward.iter().map(|r| r[s]).collect();
            let g: Vec<f64> = path.iter().map(|r| r[s]).collect();
            let (mf, vf) = mean_var(&f);
            let (mg, vg) = mean_var(&g);
            let neff = ess(&g).unwrap_or(1.0).max(1.0);
            (mf - mg) / (vf / f.len() as f64 + vg / neff).sqrt()
        })
        .collect();
    GewekeResult {
        max_abs_z: z_scores.iter().fold(0.0, |m, z| m.max(z.abs())),
        z_scores,
    }
}

// ---- augmentation fidelity ----------------------------------------------------

/// Largest |Monte Carlo yea frequency - logit probability| over a 5 × 5
/// grid of legislator positions and item configurations, with shocks drawn
/// from `mix`.
pub fn augmentation_fidelity(mix: &GaussianMixture, draws_per_point: usize, seed: u64) -> f64 {
    let betas = [-2.0, -0.75, 0.0, 0.6, 1.8];
    let items = [
        item([1.0, -1.0], [-0.5, 0.5]),
        item([2.5, -0.4], [-1.0, 1.5]),
        item([-0.8, 1.7], [0.3, -0.9]),
        item([0.2, -3.0], [-2.0, 0.0]),
        item([-1.5, 0.5], [1.0, -2.5]),
    ];
    let cum: Vec<f64> = mix
        .weights()
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut stream = 0;
    for b in betas {
        for it in &items {
            stream += 1;
            let mut rng = RngStream::new(seed, stream);
            let loc = locations(b, it);
            let mut yea = 0usize;
            for _ in 0..draws_per_point {
                let mut u = [0.0; 3];
                for l in 0..3 {
                    let r = rng.uniform();
                    let k = cum.iter().position(|c| r < *c).unwrap_or(cum.len() - 1);
                    u[l] = loc[l] + mix.means()[k] + mix.sds()[k] * rng.standard_normal();
                }
                if u[1] > u[0].max(u[2]) {
                    yea += 1;
                }
            }
            let freq = yea as f64 / draws_per_point as f64;
            worst = worst.max((freq - direct_yea_probability(b, it.alpha(), it.delta())).abs());
        }
    }
    worst
}
