use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::SamplerError;
use crate::model::{Hyperparams, ItemParams, Orthant, VoteMatrix};

use super::config::SamplerConfig;
use super::kernels::Sampler;

/// One retained state as handed to a [`DrawSink`].
#[derive(Debug, Clone, Copy)]
pub struct Draw<'a> {
    pub iteration: u64,
    pub beta: &'a [f64],
    pub items: &'a [ItemParams],
    /// Per-legislator log-likelihood.
    pub loglik: &'a [f64],
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub iterations: u64,
    pub draws: u64,
    pub interrupted: bool,
}

pub trait DrawSink {
    fn record(&mut self, draw: &Draw<'_>) -> Result<(), SamplerError>;

    fn finish(&mut self, _outcome: &RunOutcome) -> Result<(), SamplerError> {
        Ok(())
    }
}

/// Snapshot handed to the progress hook.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: u64,
    pub total: u64,
    /// Log-likelihood of the current state.
    pub loglik: f64,
}

/// Stop flag and progress hook for a run.
#[derive(Default)]
pub struct RunControl<'a> {
    pub stop: Option<&'a AtomicBool>,
    /// Called every `progress_every` iterations.
    pub progress: Option<&'a mut dyn FnMut(&Progress)>,
    pub progress_every: u64,
}

/// Retained draws held in memory, in iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrawStore {
    iterations: Vec<u64>,
    beta: Vec<Vec<f64>>,
    items: Vec<Vec<ItemParams>>,
    loglik: Vec<Vec<f64>>,
}

impl DrawStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assemble a store from per-draw rows; every row must have the same
    /// legislator and item counts.
    pub fn from_parts(
        iterations: Vec<u64>,
        beta: Vec<Vec<f64>>,
        items: Vec<Vec<ItemParams>>,
        loglik: Vec<Vec<f64>>,
    ) -> Result<Self, SamplerError> {
        let n = iterations.len();
        if beta.len() != n || items.len() != n || loglik.len() != n {
            return Err(SamplerError::Config(format!(
                "draw tables disagree on the number of draws: {n} iterations, {} beta, {} item, {} loglik rows",
                beta.len(),
                items.len(),
                loglik.len()
            )));
        }
        let width = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
        let (n_leg, n_items) = (width(&beta), items.first().map_or(0, Vec::len));
        if beta.iter().chain(&loglik).any(|r| r.len() != n_leg) || items.iter().any(|r| r.len() != n_items) {
            return Err(SamplerError::Config("ragged draw rows".into()));
        }
        Ok(Self {
            iterations,
            beta,
            items,
            loglik,
        })
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    /// β per draw, each of length I.
    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn items(&self) -> &[Vec<ItemParams>] {
        &self.items
    }

    /// Per-legislator log-likelihood per draw.
    pub fn loglik(&self) -> &[Vec<f64>] {
        &self.loglik
    }

    pub fn total_loglik(&self) -> Vec<f64> {
        self.loglik.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn n_legislators(&self) -> usize {
        self.beta.first().map_or(0, Vec::len)
    }

    pub fn n_items(&self) -> usize {
        self.items.first().map_or(0, Vec::len)
    }

    /// Fraction of draws with z_j = +1, per item.
    pub fn prob_positive_orthant(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        (0..self.n_items())
            .map(|j| self.items.iter().filter(|d| d[j].z() == Orthant::Positive).count() as f64 / n)
            .collect()
    }

    /// Every draw reflected: β → -β and each item → (-α, -δ, -z).
    pub fn reflected(&self) -> Self {
        Self {
            iterations: self.iterations.clone(),
            beta: self.beta.iter().map(|r| r.iter().map(|b| -b).collect()).collect(),
            items: self
                .items
                .iter()
                .map(|r| r.iter().map(ItemParams::reflected).collect())
                .collect(),
            loglik: self.loglik.clone(),
        }
    }
}

impl DrawSink for DrawStore {
    fn record(&mut self, draw: &Draw<'_>) -> Result<(), SamplerError> {
        self.iterations.push(draw.iteration);
        self.beta.push(draw.beta.to_vec());
        self.items.push(draw.items.to_vec());
        self.loglik.push(draw.loglik.to_vec());
        Ok(())
    }
}

/// Run the chain and keep the retained draws in memory.
pub fn run_chain(votes: &VoteMatrix, hyper: &Hyperparams, config: &SamplerConfig) -> Result<DrawStore, SamplerError> {
    let mut store = DrawStore::new();
    run_chain_into(votes, hyper, config, &mut store, RunControl::default())?;
    Ok(store)
}

/// Run `burn_in + n_keep * thin` iterations, passing every `thin`-th state
/// after burn-in to `sink`. Stops early, still calling `finish`, when the
/// stop flag is raised.
pub fn run_chain_into(
    votes: &VoteMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    sink: &mut dyn DrawSink,
    mut control: RunControl<'_>,
) -> Result<RunOutcome, SamplerError> {
    let sampler = Sampler::new(votes, *hyper, config.clone())?;
    let total = config.total_iterations();
    let mut outcome = RunOutcome {
        iterations: 0,
        draws: 0,
        interrupted: false,
    };
    if config.n_keep == 0 {
        sink.finish(&outcome)?;
        return Ok(outcome);
    }
    let mut state = sampler.init_state()?;
    while state.iteration < total {
        if control.stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            outcome.interrupted = true;
            break;
        }
        sampler.iterate(&mut state)?;
        let it = state.iteration;
        outcome.iterations = it;
        if it > config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            let loglik = sampler.legislator_log_likelihoods(&state);
            sink.record(&Draw {
                iteration: it,
                beta: &state.beta,
                items: &state.items,
                loglik: &loglik,
            })?;
            outcome.draws += 1;
        }
        if control.progress_every > 0 && it % control.progress_every == 0 {
            if let Some(report) = control.progress.as_mut() {
                report(&Progress {
                    iteration: it,
                    total,
                    loglik: sampler.legislator_log_likelihoods(&state).iter().sum(),
                });
            }
        }
    }
    sink.finish(&outcome)?;
    Ok(outcome)
}
