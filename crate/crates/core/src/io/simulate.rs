//! Synthetic roll calls drawn from the logit model.

use std::path::Path;

use crate::distributions::{splitmix64, RngStream};
use crate::error::IoError;
use crate::model::{sample_item_prior, Hyperparams, ItemParams, Vote, VoteMatrix};

use super::votes::{csv_field, filter_votes, FilterReport};

const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub n_legislators: usize,
    pub n_items: usize,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Probability that a cell is hidden, independently of everything else.
    pub missing_rate: f64,
}

impl SimulationOptions {
    pub fn new(n_legislators: usize, n_items: usize, seed: u64) -> Self {
        Self {
            n_legislators,
            n_items,
            hyper: Hyperparams::default(),
            seed,
            missing_rate: 0.0,
        }
    }
}

/// Filtered votes together with the parameters that generated them,
/// restricted to the legislators and items that survived filtering.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub votes: VoteMatrix,
    pub beta: Vec<f64>,
    pub items: Vec<ItemParams>,
    pub report: FilterReport,
    /// Seed actually used; differs from the requested one after retries.
    pub seed: u64,
}

/// β ~ N(0, 1), items from the prior, each vote Bernoulli with the logit
/// response probability. Legislators get party label "A" when their true β
/// is negative and "B" otherwise. If filtering leaves fewer than two
/// legislators or items, retries with a derived seed.
pub fn simulate_votes(options: &SimulationOptions) -> Result<Simulated, IoError> {
    if options.n_legislators < 2 || options.n_items < 2 {
        return Err(IoError::Config(
            "simulation needs at least 2 legislators and 2 items".into(),
        ));
    }
    if !(0.0..1.0).contains(&options.missing_rate) {
        return Err(IoError::Config("missing rate must lie in [0, 1)".into()));
    }
    options.hyper.validate().map_err(|e| IoError::Config(e.to_string()))?;
    let mut seed = options.seed;
    for _ in 0..MAX_ATTEMPTS {
        if let Some(sim) = attempt(options, seed)? {
            return Ok(sim);
        }
        seed = splitmix64(seed);
    }
    Err(IoError::DegenerateSimulation { attempts: MAX_ATTEMPTS })
}

fn attempt(options: &SimulationOptions, seed: u64) -> Result<Option<Simulated>, IoError> {
    let (n_leg, n_items) = (options.n_legislators, options.n_items);
    let mut rng = RngStream::new(seed, 0);
    let beta: Vec<f64> = (0..n_leg).map(|_| rng.standard_normal()).collect();
    let items: Vec<ItemParams> = (0..n_items)
        .map(|_| sample_item_prior(&options.hyper, &mut rng))
        .collect();
    let mut rows = Vec::with_capacity(n_leg);
    for &b in &beta {
        let row: Vec<Vote> = items
            .iter()
            .map(|item| {
                let yea = rng.bernoulli(item.response_probability(b));
                let hidden = options.missing_rate > 0.0 && rng.bernoulli(options.missing_rate);
                if hidden {
                    Vote::Missing
                } else {
                    Vote::from_yea(yea)
                }
            })
            .collect();
        rows.push(row);
    }
    let mut raw = VoteMatrix::from_rows(&rows).expect("rectangular");
    for (leg, b) in raw.legislators_mut().iter_mut().zip(&beta) {
        leg.party = Some(if *b < 0.0 { "A" } else { "B" }.to_string());
    }
    let (votes, report) = match filter_votes(&raw) {
        Ok(out) => out,
        Err(IoError::EmptyAfterFilter { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if votes.n_legislators() < 2 || votes.n_items() < 2 {
        return Ok(None);
    }
    let index_of = |id: &str| id[1..].parse::<usize>().expect("generated id") - 1;
    let beta = votes.legislators().iter().map(|l| beta[index_of(&l.id)]).collect();
    let items = votes.items().iter().map(|it| items[index_of(&it.id)]).collect();
    Ok(Some(Simulated {
        votes,
        beta,
        items,
        report,
        seed,
    }))
}

/// `legislator_id,beta,party` and `item_id,z,alpha1,alpha2,delta1,delta2`.
pub fn write_truth(dir: &Path, sim: &Simulated) -> Result<(), IoError> {
    let mut legs = String::from("legislator_id,beta,party\n");
    for (leg, b) in sim.votes.legislators().iter().zip(&sim.beta) {
        legs.push_str(&format!(
            "{},{:?},{}\n",
            csv_field(&leg.id),
            b,
            csv_field(leg.party.as_deref().unwrap_or(""))
        ));
    }
    let mut items = String::from("item_id,z,alpha1,alpha2,delta1,delta2\n");
    for (item, p) in sim.votes.items().iter().zip(&sim.items) {
        let [a1, a2] = p.alpha();
        let [d1, d2] = p.delta();
        items.push_str(&format!(
            "{},{},{a1:?},{a2:?},{d1:?},{d2:?}\n",
            csv_field(&item.id),
            p.z().as_i8()
        ));
    }
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| IoError::file(path, e))
    };
    write("truth_legislators.csv", &legs)?;
    write("truth_items.csv", &items)
}
