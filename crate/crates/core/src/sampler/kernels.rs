//! The Gibbs kernels and the orthant-flip Metropolis move.
//!
//! Each pass draws from streams addressed by `(seed, iteration, kernel tag,
//! entity)`, so results do not depend on how rayon schedules the work.

use rayon::prelude::*;

use crate::distributions::{
    log_normal_cdf, normal_log_pdf, sample_categorical_log, sample_truncated_normal, RngStream,
};
use crate::error::{DistError, SamplerError};
use crate::mixture::GaussianMixture;
use crate::model::{
    sample_item_given_orthant, sample_item_prior, utility_offsets, Hyperparams, ItemParams, Orthant, VoteMatrix,
};

use super::config::{InitMode, SamplerConfig};
use super::state::{Cell, ChainState, LatentState, ObservedIndex};

pub(crate) mod tag {
    pub const LAMBDA: u8 = 1;
    pub const UTILITY: u8 = 2;
    pub const BETA: u8 = 3;
    pub const ITEM: u8 = 4;
    pub const DELTA: u8 = 5;
    pub const FLIP: u8 = 6;
    pub const INIT: u8 = 7;
}

/// An accepted flip: the new item and its refreshed column of cells.
type FlipUpdate = (ItemParams, Vec<(usize, Cell)>);

#[derive(Debug, Clone)]
struct Components {
    log_coef: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    half_precision: Vec<f64>,
}

impl Components {
    fn new(mix: &GaussianMixture) -> Self {
        Self {
            log_coef: mix
                .weights()
                .iter()
                .zip(mix.sds())
                .map(|(w, s)| w.ln() - s.ln())
                .collect(),
            means: mix.means().to_vec(),
            sds: mix.sds().to_vec(),
            half_precision: mix.sds().iter().map(|s| 0.5 / (s * s)).collect(),
        }
    }

    #[inline]
    fn var(&self, k: u8) -> f64 {
        let s = self.sds[k as usize];
        s * s
    }

    #[inline]
    fn mean(&self, k: u8) -> f64 {
        self.means[k as usize]
    }
}

/// Full conditional of (z, α) for one item after integrating α out for z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemConditional {
    /// Mean and variance of the untruncated Gaussian conditional of α.
    pub mean: [f64; 2],
    pub var: [f64; 2],
    /// Unnormalised log probabilities of z = +1 and z = -1.
    pub log_weight_positive: f64,
    pub log_weight_negative: f64,
}

impl ItemConditional {
    pub fn prob_positive(&self) -> f64 {
        let d = self.log_weight_negative - self.log_weight_positive;
        1.0 / (1.0 + d.exp())
    }
}

/// Kernel set for one data set, prior and configuration.
#[derive(Debug, Clone)]
pub struct Sampler {
    index: ObservedIndex,
    parties: Vec<Option<String>>,
    comps: Components,
    hyper: Hyperparams,
    config: SamplerConfig,
}

#[inline]
fn offsets(beta: f64, item: &ItemParams) -> [f64; 3] {
    let [a1, a3] = utility_offsets(beta, item.alpha(), item.delta());
    [a1, 0.0, a3]
}

impl Sampler {
    pub fn new(votes: &VoteMatrix, hyper: Hyperparams, config: SamplerConfig) -> Result<Self, SamplerError> {
        config.validate()?;
        hyper.validate()?;
        Ok(Self {
            index: ObservedIndex::new(votes),
            parties: votes.legislators().iter().map(|l| l.party.clone()).collect(),
            comps: Components::new(&config.mixture),
            hyper,
            config,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn index(&self) -> &ObservedIndex {
        &self.index
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn n_items(&self) -> usize {
        self.index.n_items()
    }

    // ---- cell level -------------------------------------------------------

    /// Log weights of each mixture component for a shock whose utility is
    /// `utility` and whose systematic part is `location`.
    pub fn component_log_weights(&self, utility: f64, location: f64) -> Vec<f64> {
        let c = &self.comps;
        (0..c.means.len())
            .map(|k| {
                let d = utility - c.means[k] - location;
                c.log_coef[k] - d * d * c.half_precision[k]
            })
            .collect()
    }

    fn draw_components(&self, cell: &mut Cell, loc: [f64; 3], rng: &mut RngStream) -> Result<(), DistError> {
        let c = &self.comps;
        let k = c.means.len();
        let mut stack = [0.0f64; 16];
        let mut heap = Vec::new();
        let w: &mut [f64] = if k <= stack.len() {
            &mut stack[..k]
        } else {
            heap.resize(k, 0.0);
            &mut heap
        };
        for (l, offset) in loc.iter().enumerate() {
            for (kk, slot) in w.iter_mut().enumerate() {
                let d = cell.utility[l] - c.means[kk] - offset;
                *slot = c.log_coef[kk] - d * d * c.half_precision[kk];
            }
            cell.component[l] = sample_categorical_log(w, rng)? as u8;
        }
        Ok(())
    }

    /// One sequential sweep over the three utilities of a cell, each drawn
    /// from its normal full conditional truncated to agree with the vote.
    fn draw_utilities(&self, cell: &mut Cell, yea: bool, loc: [f64; 3], rng: &mut RngStream) -> Result<(), DistError> {
        let c = &self.comps;
        let mean = |l: usize| c.mean(cell.component[l]) + loc[l];
        let sd = |l: usize| c.sds[cell.component[l] as usize];
        let inf = f64::INFINITY;
        let [m1, m2, m3] = [mean(0), mean(1), mean(2)];
        let [s1, s2, s3] = [sd(0), sd(1), sd(2)];
        let u = &mut cell.utility;
        if yea {
            u[0] = sample_truncated_normal(m1, s1, -inf, u[1], rng)?;
            u[1] = sample_truncated_normal(m2, s2, u[0].max(u[2]), inf, rng)?;
            u[2] = sample_truncated_normal(m3, s3, -inf, u[1], rng)?;
        } else {
            u[0] = if u[2] < u[1] {
                sample_truncated_normal(m1, s1, u[1], inf, rng)?
            } else {
                rng.normal(m1, s1)
            };
            u[1] = sample_truncated_normal(m2, s2, -inf, u[0].max(u[2]), rng)?;
            u[2] = if u[0] < u[1] {
                sample_truncated_normal(m3, s3, u[1], inf, rng)?
            } else {
                rng.normal(m3, s3)
            };
        }
        Ok(())
    }

    /// Draw components then utilities for one cell, as in a full sweep.
    pub fn refresh_cell(
        &self,
        cell: &mut Cell,
        yea: bool,
        beta: f64,
        item: &ItemParams,
        rng: &mut RngStream,
    ) -> Result<(), DistError> {
        let loc = offsets(beta, item);
        self.draw_components(cell, loc, rng)?;
        self.draw_utilities(cell, yea, loc, rng)
    }

    /// Utilities-only sweep for one cell with components held fixed.
    pub fn sweep_utilities_cell(
        &self,
        cell: &mut Cell,
        yea: bool,
        beta: f64,
        item: &ItemParams,
        rng: &mut RngStream,
    ) -> Result<(), DistError> {
        self.draw_utilities(cell, yea, offsets(beta, item), rng)
    }

    /// Component draw for one cell with utilities held fixed.
    pub fn draw_components_cell(
        &self,
        cell: &mut Cell,
        beta: f64,
        item: &ItemParams,
        rng: &mut RngStream,
    ) -> Result<(), DistError> {
        self.draw_components(cell, offsets(beta, item), rng)
    }

    // ---- passes over rows -------------------------------------------------

    fn row_pass(
        &self,
        state: &mut ChainState,
        iteration: u64,
        kernel: u8,
        f: impl Fn(&Self, &mut Cell, bool, [f64; 3], &mut RngStream) -> Result<(), DistError> + Sync,
    ) -> Result<(), SamplerError> {
        let n = self.n_items();
        if n == 0 {
            return Ok(());
        }
        let ChainState {
            beta, items, latent, ..
        } = state;
        let items = &*items;
        let beta = &*beta;
        latent
            .cells_mut()
            .par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(i, row)| {
                let mut rng = RngStream::for_entity(self.seed(), iteration, kernel, i as u64);
                for &(j, yea) in self.index.row(i) {
                    let loc = offsets(beta[i], &items[j as usize]);
                    f(self, &mut row[j as usize], yea, loc, &mut rng)?;
                }
                Ok::<(), DistError>(())
            })?;
        Ok(())
    }

    /// Resample every observed cell's mixture components given utilities.
    pub fn step_lambda(&self, state: &mut ChainState, iteration: u64) -> Result<(), SamplerError> {
        self.row_pass(state, iteration, tag::LAMBDA, |s, cell, _, loc, rng| {
            s.draw_components(cell, loc, rng)
        })
    }

    /// One truncated-normal sweep over the utilities of every observed cell.
    pub fn step_utilities(&self, state: &mut ChainState, iteration: u64) -> Result<(), SamplerError> {
        self.row_pass(state, iteration, tag::UTILITY, |s, cell, yea, loc, rng| {
            s.draw_utilities(cell, yea, loc, rng)
        })
    }

    /// Mean and variance of the Gaussian full conditional of β_i.
    pub fn beta_conditional(&self, state: &ChainState, i: usize) -> (f64, f64) {
        let mut precision = 1.0;
        let mut linear = 0.0;
        for &(j, _) in self.index.row(i) {
            let item = &state.items[j as usize];
            let [a1, a2] = item.alpha();
            let [d1, d2] = item.delta();
            let cell = state.latent.get(i, j as usize);
            let (v1, v3) = (self.comps.var(cell.component[0]), self.comps.var(cell.component[2]));
            let r1 = cell.utility[0] - self.comps.mean(cell.component[0]) - a1 * d1;
            let r3 = cell.utility[2] - self.comps.mean(cell.component[2]) - a2 * d2;
            precision += a1 * a1 / v1 + a2 * a2 / v3;
            linear -= a1 * r1 / v1 + a2 * r3 / v3;
        }
        (linear / precision, 1.0 / precision)
    }

    pub fn step_beta(&self, state: &mut ChainState, iteration: u64) -> Result<(), SamplerError> {
        let draws: Vec<f64> = (0..state.beta.len())
            .into_par_iter()
            .map(|i| {
                let (mean, var) = self.beta_conditional(state, i);
                let mut rng = RngStream::for_entity(self.seed(), iteration, tag::BETA, i as u64);
                rng.normal(mean, var.sqrt())
            })
            .collect();
        state.beta = draws;
        Ok(())
    }

    // ---- passes over items ------------------------------------------------

    /// Full conditional of (z_j, α_j) given δ_j, β and the latent state.
    pub fn item_conditional(&self, state: &ChainState, j: usize) -> ItemConditional {
        let item = &state.items[j];
        let [d1, d2] = item.delta();
        let prior_precision = 1.0 / self.hyper.omega_sq;
        let mut precision = [prior_precision; 2];
        let mut linear = [0.0; 2];
        for &(i, _) in self.index.col(j) {
            let beta = state.beta[i as usize];
            let cell = state.latent.get(i as usize, j);
            let (x1, x2) = (beta - d1, beta - d2);
            let (v1, v3) = (self.comps.var(cell.component[0]), self.comps.var(cell.component[2]));
            precision[0] += x1 * x1 / v1;
            precision[1] += x2 * x2 / v3;
            linear[0] -= x1 * (cell.utility[0] - self.comps.mean(cell.component[0])) / v1;
            linear[1] -= x2 * (cell.utility[2] - self.comps.mean(cell.component[2])) / v3;
        }
        let mean = [linear[0] / precision[0], linear[1] / precision[1]];
        let var = [1.0 / precision[0], 1.0 / precision[1]];
        let t1 = mean[0] / var[0].sqrt();
        let t2 = mean[1] / var[1].sqrt();
        let kappa = self.hyper.kappa_sq.sqrt();
        let [th1, th2] = self.hyper.vartheta;
        let log_prior_delta = |s: f64| normal_log_pdf(d1, s * th1, kappa) + normal_log_pdf(d2, s * th2, kappa);
        ItemConditional {
            mean,
            var,
            log_weight_positive: log_prior_delta(1.0) + log_normal_cdf(t1) + log_normal_cdf(-t2),
            log_weight_negative: log_prior_delta(-1.0) + log_normal_cdf(-t1) + log_normal_cdf(t2),
        }
    }

    /// Draw z_j with α_j integrated out, then α_j from its Gaussian
    /// conditional truncated to the chosen orthant. δ_j is unchanged.
    pub fn draw_item(&self, state: &ChainState, j: usize, rng: &mut RngStream) -> Result<ItemParams, SamplerError> {
        let cond = self.item_conditional(state, j);
        let pick = sample_categorical_log(&[cond.log_weight_positive, cond.log_weight_negative], rng)?;
        let z = if pick == 0 {
            Orthant::Positive
        } else {
            Orthant::Negative
        };
        let s = z.sign();
        let inf = f64::INFINITY;
        let (lo1, hi1) = if s > 0.0 { (0.0, inf) } else { (-inf, 0.0) };
        let a1 = sample_truncated_normal(cond.mean[0], cond.var[0].sqrt(), lo1, hi1, rng)?;
        let a2 = sample_truncated_normal(cond.mean[1], cond.var[1].sqrt(), -hi1, -lo1, rng)?;
        Ok(ItemParams::new([a1, a2], state.items[j].delta(), z)?)
    }

    /// Mean and variance of the Gaussian full conditional of δ_j given the
    /// item's α and z.
    pub fn delta_conditional(&self, state: &ChainState, j: usize, item: &ItemParams) -> ([f64; 2], [f64; 2]) {
        let [a1, a2] = item.alpha();
        let prior_precision = 1.0 / self.hyper.kappa_sq;
        let s = item.z().sign();
        let mut precision = [prior_precision; 2];
        let mut linear = [
            s * self.hyper.vartheta[0] * prior_precision,
            s * self.hyper.vartheta[1] * prior_precision,
        ];
        for &(i, _) in self.index.col(j) {
            let beta = state.beta[i as usize];
            let cell = state.latent.get(i as usize, j);
            let (v1, v3) = (self.comps.var(cell.component[0]), self.comps.var(cell.component[2]));
            precision[0] += a1 * a1 / v1;
            precision[1] += a2 * a2 / v3;
            linear[0] += a1 * (cell.utility[0] - self.comps.mean(cell.component[0]) + a1 * beta) / v1;
            linear[1] += a2 * (cell.utility[2] - self.comps.mean(cell.component[2]) + a2 * beta) / v3;
        }
        (
            [linear[0] / precision[0], linear[1] / precision[1]],
            [1.0 / precision[0], 1.0 / precision[1]],
        )
    }

    pub fn draw_delta(
        &self,
        state: &ChainState,
        j: usize,
        item: &ItemParams,
        rng: &mut RngStream,
    ) -> Result<ItemParams, SamplerError> {
        let (mean, var) = self.delta_conditional(state, j, item);
        let delta = [rng.normal(mean[0], var[0].sqrt()), rng.normal(mean[1], var[1].sqrt())];
        Ok(ItemParams::new(item.alpha(), delta, item.z())?)
    }

    /// (z, α) then δ for every item. The items are conditionally independent
    /// given β and the latent state, so one pass per item equals running
    /// all (z, α) draws before all δ draws.
    pub fn step_items(&self, state: &mut ChainState, iteration: u64) -> Result<(), SamplerError> {
        let updated: Vec<ItemParams> = (0..state.items.len())
            .into_par_iter()
            .map(|j| {
                let mut rng = RngStream::for_entity(self.seed(), iteration, tag::ITEM, j as u64);
                let with_alpha = self.draw_item(state, j, &mut rng)?;
                let mut rng = RngStream::for_entity(self.seed(), iteration, tag::DELTA, j as u64);
                self.draw_delta(state, j, &with_alpha, &mut rng)
            })
            .collect::<Result<_, _>>()?;
        state.items = updated;
        Ok(())
    }

    /// Log Metropolis–Hastings ratio for replacing item `j` by `proposal`:
    /// the likelihood ratio of item `j`'s observed votes under the chain's
    /// response function. Prior and proposal densities cancel for both
    /// proposal types.
    pub fn flip_log_acceptance(&self, state: &ChainState, j: usize, proposal: &ItemParams) -> f64 {
        let link = self.config.link;
        let current = &state.items[j];
        self.index
            .col(j)
            .iter()
            .map(|&(i, yea)| {
                let beta = state.beta[i as usize];
                link.log_prob(yea, beta, proposal.alpha(), proposal.delta())
                    - link.log_prob(yea, beta, current.alpha(), current.delta())
            })
            .sum()
    }

    /// Either the reflection (-z, -α, -δ) or a fresh prior draw in the
    /// opposite orthant.
    pub fn propose_flip(&self, item: &ItemParams, rng: &mut RngStream) -> ItemParams {
        if rng.bernoulli(self.config.flip_sign_prob) {
            item.reflected()
        } else {
            sample_item_given_orthant(item.z().flipped(), &self.hyper, rng)
        }
    }

    /// Propose and accept/reject an orthant flip for every item. Accepted
    /// items get their column's components and utilities redrawn before
    /// anything else reads them. Returns the number of accepted flips.
    pub fn step_flip(&self, state: &mut ChainState, iteration: u64) -> Result<usize, SamplerError> {
        let outcomes: Vec<Option<FlipUpdate>> = (0..state.items.len())
            .into_par_iter()
            .map(|j| {
                let mut rng = RngStream::for_entity(self.seed(), iteration, tag::FLIP, j as u64);
                let proposal = self.propose_flip(&state.items[j], &mut rng);
                let log_accept = self.flip_log_acceptance(state, j, &proposal);
                if rng.uniform().ln() >= log_accept {
                    return Ok(None);
                }
                let mut column = Vec::with_capacity(self.index.col(j).len());
                for &(i, yea) in self.index.col(j) {
                    let i = i as usize;
                    let mut cell = *state.latent.get(i, j);
                    self.refresh_cell(&mut cell, yea, state.beta[i], &proposal, &mut rng)?;
                    column.push((i, cell));
                }
                Ok(Some((proposal, column)))
            })
            .collect::<Result<_, DistError>>()?;
        let mut accepted = 0;
        for (j, outcome) in outcomes.into_iter().enumerate() {
            if let Some((item, column)) = outcome {
                state.items[j] = item;
                for (i, cell) in column {
                    *state.latent.get_mut(i, j) = cell;
                }
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    /// One full iteration: components, utilities, β, items, and the flip
    /// move when the iteration number is a multiple of `flip_every`.
    pub fn iterate(&self, state: &mut ChainState) -> Result<(), SamplerError> {
        state.iteration += 1;
        let it = state.iteration;
        self.step_lambda(state, it)?;
        self.step_utilities(state, it)?;
        self.step_beta(state, it)?;
        self.step_items(state, it)?;
        if it.is_multiple_of(self.config.flip_every) {
            self.step_flip(state, it)?;
        }
        Ok(())
    }

    // ---- initialisation and likelihood -------------------------------------

    /// β by the configured mode, items from the prior (a configured fraction
    /// reflected), components uniform, and utilities from one sweep starting
    /// at zero so every cell agrees with its vote.
    pub fn init_state(&self) -> Result<ChainState, SamplerError> {
        let n_leg = self.index.n_legislators();
        let n_items = self.n_items();
        let mut rng = RngStream::for_entity(self.seed(), 0, tag::INIT, 0);
        let beta = match self.config.init_mode {
            InitMode::Random => (0..n_leg).map(|_| rng.standard_normal()).collect(),
            InitMode::PartySigned => {
                let mut labels: Vec<&str> = self.parties.iter().flatten().map(String::as_str).collect();
                labels.sort_unstable();
                labels.dedup();
                if labels.len() < 2 {
                    return Err(SamplerError::MissingParties);
                }
                let first = labels[0];
                self.parties
                    .iter()
                    .map(|p| {
                        let centre = match p.as_deref() {
                            Some(l) if l == first => -1.0,
                            Some(_) => 1.0,
                            None => 0.0,
                        };
                        centre + 0.25 * rng.standard_normal()
                    })
                    .collect()
            }
        };
        let mut items: Vec<ItemParams> = (0..n_items).map(|_| sample_item_prior(&self.hyper, &mut rng)).collect();
        let n_mirror = (self.config.mirror_fraction * n_items as f64).round() as usize;
        let mut order: Vec<usize> = (0..n_items).collect();
        for k in 0..n_mirror.min(n_items) {
            let pick = k + ((rng.uniform() * (n_items - k) as f64) as usize).min(n_items - k - 1);
            order.swap(k, pick);
            items[order[k]] = items[order[k]].reflected();
        }
        let k = self.comps.means.len();
        let mut latent = LatentState::new(n_leg, n_items);
        for i in 0..n_leg {
            let mut row_rng = RngStream::for_entity(self.seed(), 0, tag::INIT, 1 + i as u64);
            for &(j, _) in self.index.row(i) {
                let cell = latent.get_mut(i, j as usize);
                for c in cell.component.iter_mut() {
                    *c = ((row_rng.uniform() * k as f64) as usize).min(k - 1) as u8;
                }
            }
        }
        let mut state = ChainState {
            beta,
            items,
            latent,
            iteration: 0,
        };
        self.step_utilities(&mut state, 0)?;
        Ok(state)
    }

    /// Per-legislator log-likelihood of the observed votes under the chain's
    /// response function.
    pub fn legislator_log_likelihoods(&self, state: &ChainState) -> Vec<f64> {
        let link = self.config.link;
        (0..self.index.n_legislators())
            .into_par_iter()
            .map(|i| {
                self.index
                    .row(i)
                    .iter()
                    .map(|&(j, yea)| {
                        let item = &state.items[j as usize];
                        link.log_prob(yea, state.beta[i], item.alpha(), item.delta())
                    })
                    .sum()
            })
            .collect()
    }
}
