//! Votes, item and legislator parameters, the three-option response
//! function, the item prior and likelihood evaluation.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::distributions::{bvn_upper_half_corr, log_gauss_cdf_product_integral, log_normal_cdf, logaddexp, RngStream};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vote {
    Yea,
    Nay,
    Missing,
}

impl Vote {
    pub fn is_observed(self) -> bool {
        self != Vote::Missing
    }

    pub fn from_yea(yea: bool) -> Self {
        if yea {
            Vote::Yea
        } else {
            Vote::Nay
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Legislator {
    pub id: String,
    pub name: Option<String>,
    pub party: Option<String>,
}

impl Legislator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: None,
            party: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: String,
    pub description: Option<String>,
}

impl Item {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: None,
        }
    }
}

/// Legislators × items matrix of votes, stored row-major.
///
/// The "no unanimous item" and "at most 40% missing per legislator"
/// properties are established by [`crate::io::votes::filter_votes`], not by
/// this constructor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    legislators: Vec<Legislator>,
    items: Vec<Item>,
    cells: Vec<Vote>,
}

impl VoteMatrix {
    pub fn new(legislators: Vec<Legislator>, items: Vec<Item>, cells: Vec<Vote>) -> Result<Self, ModelError> {
        let expected = legislators.len() * items.len();
        if cells.len() != expected {
            return Err(ModelError::Dimension {
                what: "vote cells",
                expected,
                got: cells.len(),
            });
        }
        Ok(Self {
            legislators,
            items,
            cells,
        })
    }

    /// Matrix with generated ids `L1..` and `V1..`, rows given as vectors.
    pub fn from_rows(rows: &[Vec<Vote>]) -> Result<Self, ModelError> {
        let n_items = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_items) {
            return Err(ModelError::Dimension {
                what: "row length",
                expected: n_items,
                got: bad.len(),
            });
        }
        let legislators = (1..=rows.len()).map(|i| Legislator::new(format!("L{i}"))).collect();
        let items = (1..=n_items).map(|j| Item::new(format!("V{j}"))).collect();
        Self::new(legislators, items, rows.concat())
    }

    #[inline]
    pub fn n_legislators(&self) -> usize {
        self.legislators.len()
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vote {
        self.cells[i * self.items.len() + j]
    }

    pub fn row(&self, i: usize) -> &[Vote] {
        let n = self.items.len();
        &self.cells[i * n..(i + 1) * n]
    }

    pub fn cells(&self) -> &[Vote] {
        &self.cells
    }

    pub fn legislators(&self) -> &[Legislator] {
        &self.legislators
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn legislators_mut(&mut self) -> &mut [Legislator] {
        &mut self.legislators
    }

    pub fn n_observed(&self) -> usize {
        self.cells.iter().filter(|v| v.is_observed()).count()
    }

    /// Keep only the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let legislators = rows.iter().map(|&i| self.legislators[i].clone()).collect();
        let items = cols.iter().map(|&j| self.items[j].clone()).collect();
        let mut cells = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                cells.push(self.get(i, j));
            }
        }
        Self {
            legislators,
            items,
            cells,
        }
    }
}

/// Prior constants for the item parameters: location `vartheta` of δ under
/// `z = +1` (mirrored under `z = -1`), variance `omega_sq` of each α
/// component and variance `kappa_sq` of each δ component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub vartheta: [f64; 2],
    pub omega_sq: f64,
    pub kappa_sq: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            vartheta: [-2.0, 10.0],
            omega_sq: 25.0,
            kappa_sq: 10.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega_sq > 0.0 && self.omega_sq.is_finite()) {
            return Err(ModelError::Hyper("omega_sq"));
        }
        if !(self.kappa_sq > 0.0 && self.kappa_sq.is_finite()) {
            return Err(ModelError::Hyper("kappa_sq"));
        }
        if !self.vartheta.iter().all(|v| v.is_finite()) {
            return Err(ModelError::Hyper("vartheta"));
        }
        Ok(())
    }
}

/// Which of the two admissible sign patterns α takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orthant {
    /// α₁ > 0 > α₂
    Positive,
    /// α₁ < 0 < α₂
    Negative,
}

impl Orthant {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Orthant::Positive => 1.0,
            Orthant::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Orthant::Positive => 1,
            Orthant::Negative => -1,
        }
    }

    pub fn from_i8(z: i8) -> Option<Self> {
        match z {
            1 => Some(Orthant::Positive),
            -1 => Some(Orthant::Negative),
            _ => None,
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Orthant::Positive => Orthant::Negative,
            Orthant::Negative => Orthant::Positive,
        }
    }

    /// Orthant containing `alpha`, if any.
    pub fn of(alpha: [f64; 2]) -> Option<Self> {
        if alpha[0] > 0.0 && alpha[1] < 0.0 {
            Some(Orthant::Positive)
        } else if alpha[0] < 0.0 && alpha[1] > 0.0 {
            Some(Orthant::Negative)
        } else {
            None
        }
    }
}

/// Per-item parameters: slopes α, midpoints δ and the orthant indicator z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemParams {
    alpha: [f64; 2],
    delta: [f64; 2],
    z: Orthant,
}

impl ItemParams {
    pub fn new(alpha: [f64; 2], delta: [f64; 2], z: Orthant) -> Result<Self, ModelError> {
        if !alpha.iter().chain(&delta).all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite("item parameters"));
        }
        if Orthant::of(alpha) != Some(z) {
            return Err(ModelError::Orthant { alpha, z });
        }
        Ok(Self { alpha, delta, z })
    }

    #[inline]
    pub fn alpha(&self) -> [f64; 2] {
        self.alpha
    }

    #[inline]
    pub fn delta(&self) -> [f64; 2] {
        self.delta
    }

    #[inline]
    pub fn z(&self) -> Orthant {
        self.z
    }

    /// The reflected item (−α, −δ, −z).
    pub fn reflected(&self) -> Self {
        Self {
            alpha: [-self.alpha[0], -self.alpha[1]],
            delta: [-self.delta[0], -self.delta[1]],
            z: self.z.flipped(),
        }
    }

    pub fn response_probability(&self, beta: f64) -> f64 {
        response_probability(beta, self.alpha, self.delta)
    }

    pub fn log_prior(&self, hyper: &Hyperparams) -> f64 {
        log_prior_item(self.alpha, self.delta, hyper)
    }
}

/// Systematic utility offsets of the two "nay" options relative to the
/// "yea" option: `-α₁(β-δ₁)` and `-α₂(β-δ₂)`.
#[inline]
pub fn utility_offsets(beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> [f64; 2] {
    [-alpha[0] * (beta - delta[0]), -alpha[1] * (beta - delta[1])]
}

/// `(log θ, log(1-θ))` for the logit response
/// `θ = 1 / (1 + exp(-α₁(β-δ₁)) + exp(-α₂(β-δ₂)))`.
#[inline]
pub fn logit_log_probs(beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> (f64, f64) {
    let [a1, a3] = utility_offsets(beta, alpha, delta);
    let nay = logaddexp(a1, a3);
    let all = logaddexp(0.0, nay);
    (-all, nay - all)
}

/// Probability of a "yea" under the logit unfolding response.
pub fn response_probability(beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> f64 {
    logit_log_probs(beta, alpha, delta).0.exp()
}

/// `(log P(yea), log P(nay))` when the three utility shocks are independent
/// standard normals instead of Gumbel.
pub fn probit_log_probs(beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> (f64, f64) {
    let [a1, a3] = utility_offsets(beta, alpha, delta);
    (probit_log_yea(a1, a3), probit_log_nay(a1, a3))
}

const BVN_FLOOR: f64 = 1e-280;

fn probit_log_yea(a1: f64, a3: f64) -> f64 {
    let p = bvn_upper_half_corr(a1 / SQRT_2, a3 / SQRT_2);
    if p > BVN_FLOOR {
        p.ln()
    } else {
        log_gauss_cdf_product_integral(1.0, -a1, 1.0, -a3)
    }
}

fn probit_log_nay(a1: f64, a3: f64) -> f64 {
    let (h, k) = (a1 / SQRT_2, a3 / SQRT_2);
    let p_yea = bvn_upper_half_corr(h, k);
    if p_yea < 0.5 {
        return (-p_yea).ln_1p();
    }
    // Inclusion-exclusion over the two ways of preferring a "nay" option.
    let l1 = log_normal_cdf(h);
    let l3 = log_normal_cdf(k);
    let both = bvn_upper_half_corr(-h, -k);
    let l_both = if both > BVN_FLOOR {
        both.ln()
    } else {
        log_gauss_cdf_product_integral(-1.0, a1, -1.0, a3)
    };
    let m = l1.max(l3);
    let inner = (l1 - m).exp() + (l3 - m).exp() - (l_both - m).exp();
    m + inner.max(f64::MIN_POSITIVE).ln()
}

/// Shock distribution of the fitted model, which fixes the exact response
/// function used for likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Gumbel shocks: the closed-form logit unfolding response.
    Logit,
    /// Standard normal shocks: the probit unfolding response.
    Probit,
}

impl Link {
    #[inline]
    pub fn log_probs(self, beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> (f64, f64) {
        match self {
            Link::Logit => logit_log_probs(beta, alpha, delta),
            Link::Probit => probit_log_probs(beta, alpha, delta),
        }
    }

    /// Log probability of a single observed vote; `yea` selects the outcome.
    #[inline]
    pub fn log_prob(self, yea: bool, beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> f64 {
        match self {
            Link::Logit => {
                let (y, n) = logit_log_probs(beta, alpha, delta);
                if yea {
                    y
                } else {
                    n
                }
            }
            Link::Probit => {
                let [a1, a3] = utility_offsets(beta, alpha, delta);
                if yea {
                    probit_log_yea(a1, a3)
                } else {
                    probit_log_nay(a1, a3)
                }
            }
        }
    }

    pub fn prob_yea(self, beta: f64, alpha: [f64; 2], delta: [f64; 2]) -> f64 {
        self.log_prob(true, beta, alpha, delta).exp()
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
        }
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            other => Err(format!("unknown model {other:?} (expected logit or probit)")),
        }
    }
}

fn check_dims(votes: &VoteMatrix, beta: &[f64], items: &[ItemParams]) -> Result<(), ModelError> {
    if beta.len() != votes.n_legislators() {
        return Err(ModelError::Dimension {
            what: "ideal points",
            expected: votes.n_legislators(),
            got: beta.len(),
        });
    }
    if items.len() != votes.n_items() {
        return Err(ModelError::Dimension {
            what: "item parameters",
            expected: votes.n_items(),
            got: items.len(),
        });
    }
    Ok(())
}

/// Bernoulli log-likelihood of the observed votes under the logit response.
/// Missing cells contribute nothing.
pub fn log_likelihood(votes: &VoteMatrix, beta: &[f64], items: &[ItemParams]) -> Result<f64, ModelError> {
    log_likelihood_with(Link::Logit, votes, beta, items)
}

pub fn log_likelihood_with(
    link: Link,
    votes: &VoteMatrix,
    beta: &[f64],
    items: &[ItemParams],
) -> Result<f64, ModelError> {
    Ok(legislator_log_likelihoods(link, votes, beta, items)?.iter().sum())
}

/// Per-legislator sums of the observed-cell log-likelihood terms.
pub fn legislator_log_likelihoods(
    link: Link,
    votes: &VoteMatrix,
    beta: &[f64],
    items: &[ItemParams],
) -> Result<Vec<f64>, ModelError> {
    check_dims(votes, beta, items)?;
    Ok((0..votes.n_legislators())
        .map(|i| {
            votes
                .row(i)
                .iter()
                .zip(items)
                .filter(|(v, _)| v.is_observed())
                .map(|(v, item)| link.log_prob(*v == Vote::Yea, beta[i], item.alpha, item.delta))
                .sum()
        })
        .collect())
}

/// Log density of the two-orthant truncated Gaussian item prior.
///
/// Each orthant component integrates to 1/2, so the normalising constant is
/// `1 / (2π² ω² κ²)`. Returns `-inf` when α lies in neither orthant.
pub fn log_prior_item(alpha: [f64; 2], delta: [f64; 2], hyper: &Hyperparams) -> f64 {
    let Some(z) = Orthant::of(alpha) else {
        return f64::NEG_INFINITY;
    };
    let s = z.sign();
    let log_norm = -(2.0f64.ln() + 2.0 * PI.ln() + hyper.omega_sq.ln() + hyper.kappa_sq.ln());
    let a2 = alpha[0] * alpha[0] + alpha[1] * alpha[1];
    let d1 = delta[0] - s * hyper.vartheta[0];
    let d2 = delta[1] - s * hyper.vartheta[1];
    log_norm - 0.5 * (a2 / hyper.omega_sq + (d1 * d1 + d2 * d2) / hyper.kappa_sq)
}

/// Draw (α, δ, z) from the item prior conditional on the orthant.
pub fn sample_item_given_orthant(z: Orthant, hyper: &Hyperparams, rng: &mut RngStream) -> ItemParams {
    let sd = hyper.omega_sq.sqrt();
    let s = z.sign();
    let a1 = s * positive_half_normal(sd, rng);
    let a2 = -s * positive_half_normal(sd, rng);
    let kappa = hyper.kappa_sq.sqrt();
    let delta = [
        rng.normal(s * hyper.vartheta[0], kappa),
        rng.normal(s * hyper.vartheta[1], kappa),
    ];
    ItemParams {
        alpha: [a1, a2],
        delta,
        z,
    }
}

fn positive_half_normal(sd: f64, rng: &mut RngStream) -> f64 {
    loop {
        let x = (sd * rng.standard_normal()).abs();
        if x > 0.0 {
            return x;
        }
    }
}

/// Draw (α, δ, z) from the item prior.
pub fn sample_item_prior(hyper: &Hyperparams, rng: &mut RngStream) -> ItemParams {
    let z = if rng.bernoulli(0.5) {
        Orthant::Positive
    } else {
        Orthant::Negative
    };
    sample_item_given_orthant(z, hyper, rng)
}

/// Draws of the prior-implied yea probability: β ~ N(0, 1), item from its
/// prior, θ from the logit response.
pub fn sample_prior_theta(hyper: &Hyperparams, count: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let beta = rng.standard_normal();
            let item = sample_item_prior(hyper, rng);
            item.response_probability(beta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal_cdf;
    use crate::quadrature::composite_gauss_legendre;
    use proptest::prelude::*;

    fn item(alpha: [f64; 2], delta: [f64; 2]) -> ItemParams {
        ItemParams::new(alpha, delta, Orthant::of(alpha).unwrap()).unwrap()
    }

    #[test]
    fn response_probability_examples() {
        assert!((response_probability(0.7, [0.0, 0.0], [3.0, -1.0]) - 1.0 / 3.0).abs() < 1e-15);
        let direct = 1.0 / (1.0 + (-6.0f64).exp() + (-4.0f64).exp());
        let got = response_probability(3.0, [2.0, -2.0], [0.0, 5.0]);
        assert!((got - direct).abs() < 1e-15);
        assert!((got - 0.9796).abs() < 1e-4);
        let got = response_probability(0.0, [1.0, -1.0], [0.0, 10.0]);
        assert!((got - 1.0 / (2.0 + (-10.0f64).exp())).abs() < 1e-15);
        assert!((got - 0.49999).abs() < 1e-5);
    }

    #[test]
    fn extreme_exponents_do_not_overflow() {
        let (ly, ln) = logit_log_probs(5.0, [300.0, -300.0], [-5.0, 0.0]);
        assert!(ly.is_finite() && ln.is_finite());
        assert!((ly - (-1500.0)).abs() < 1e-9, "{ly}");
        assert!(ln.abs() < 1e-300);
    }

    #[test]
    fn inconsistent_orthant_is_rejected() {
        assert!(ItemParams::new([1.0, 1.0], [0.0, 0.0], Orthant::Positive).is_err());
        assert!(ItemParams::new([1.0, -1.0], [0.0, 0.0], Orthant::Negative).is_err());
        assert!(ItemParams::new([-1.0, 1.0], [0.0, 0.0], Orthant::Negative).is_ok());
        assert!(ItemParams::new([0.0, 0.0], [0.0, 0.0], Orthant::Positive).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        let all_missing = VoteMatrix::from_rows(&vec![vec![Vote::Missing; 2]; 2]).unwrap();
        let items = [item([1.0, -1.0], [0.0, 1.0]), item([-2.0, 2.0], [1.0, 0.0])];
        assert_eq!(log_likelihood(&all_missing, &[0.1, 0.2], &items).unwrap(), 0.0);

        // 2×2 instance cross-checked cell by cell with the direct formula.
        let votes = VoteMatrix::from_rows(&[vec![Vote::Yea, Vote::Nay], vec![Vote::Nay, Vote::Yea]]).unwrap();
        let beta = [3.0, 0.0];
        let items = [item([2.0, -2.0], [0.0, 5.0]), item([1.0, -1.0], [0.0, 10.0])];
        let theta =
            |b: f64, a: [f64; 2], d: [f64; 2]| 1.0 / (1.0 + (-a[0] * (b - d[0])).exp() + (-a[1] * (b - d[1])).exp());
        let t00 = theta(3.0, [2.0, -2.0], [0.0, 5.0]);
        let t01 = theta(3.0, [1.0, -1.0], [0.0, 10.0]);
        let t10 = theta(0.0, [2.0, -2.0], [0.0, 5.0]);
        let t11 = theta(0.0, [1.0, -1.0], [0.0, 10.0]);
        let expected = t00.ln() + (1.0 - t01).ln() + (1.0 - t10).ln() + t11.ln();
        let got = log_likelihood(&votes, &beta, &items).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");

        assert!(matches!(
            log_likelihood(&votes, &[0.0], &items),
            Err(ModelError::Dimension { .. })
        ));
    }

    #[test]
    fn single_yea_cell_at_alpha_zero() {
        // α = 0 is outside both orthants, so evaluate the cell directly.
        let (ly, _) = logit_log_probs(1.3, [0.0, 0.0], [0.0, 0.0]);
        assert!((ly - (1.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn prior_examples() {
        let h = Hyperparams::default();
        assert_eq!(log_prior_item([1.0, 1.0], [0.3, 0.2], &h), f64::NEG_INFINITY);
        let a = log_prior_item([1.5, -0.5], [0.3, 7.0], &h);
        let b = log_prior_item([-1.5, 0.5], [-0.3, -7.0], &h);
        assert_eq!(a, b);
    }

    #[test]
    fn prior_integrates_to_one() {
        // Grid quadrature over [-20, 20]^4. The density factorises, but the
        // oracle sums the full four-dimensional grid on purpose.
        let h = Hyperparams::default();
        let (x, w) = composite_gauss_legendre(-20.0, 20.0, 16, 8);
        let split = |lo: f64, hi: f64| composite_gauss_legendre(lo, hi, 8, 8);
        let (ap, awp) = split(0.0, 20.0);
        let (an, awn) = split(-20.0, 0.0);
        let mut total = 0.0;
        for (a1s, w1s, a2s, w2s) in [(&ap, &awp, &an, &awn), (&an, &awn, &ap, &awp)] {
            for (a1, w1) in a1s.iter().zip(w1s.iter()) {
                for (a2, w2) in a2s.iter().zip(w2s.iter()) {
                    for (d1, v1) in x.iter().zip(&w) {
                        for (d2, v2) in x.iter().zip(&w) {
                            total += w1 * w2 * v1 * v2 * log_prior_item([*a1, *a2], [*d1, *d2], &h).exp();
                        }
                    }
                }
            }
        }
        // δ₂ has prior mean ±10 with sd √10, so [-20,20] clips ~0.07% of it
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn prior_theta_shape() {
        let mut rng = RngStream::new(2024, 0);
        let theta = sample_prior_theta(&Hyperparams::default(), 100_000, &mut rng);
        assert_eq!(theta.len(), 100_000);
        // θ is interior mathematically but can round to 0 or 1
        assert!(theta.iter().all(|&t| (0.0..=1.0).contains(&t)));
        let frac = |lo: f64, hi: f64| theta.iter().filter(|&&t| t > lo && t < hi).count() as f64;
        let low = frac(0.0, 0.1);
        let high = frac(0.9, 1.0);
        let middle = frac(0.45, 0.55);
        assert!(high > low, "{high} vs {low}");
        assert!(low + high > middle);
    }

    #[test]
    fn probit_response_matches_direct_integral() {
        // P(yea) = ∫ φ(t) Φ(t - a1) Φ(t - a3) dt by brute-force quadrature
        let (x, w) = composite_gauss_legendre(-12.0, 12.0, 96, 10);
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        for &(beta, alpha, delta) in &[
            (0.3, [1.2, -0.7], [0.0, 2.0]),
            (-1.0, [-2.0, 3.0], [0.5, -1.0]),
            (2.0, [4.0, -4.0], [-1.0, 3.0]),
            (0.0, [0.2, -0.1], [0.0, 0.0]),
        ] {
            let [a1, a3] = utility_offsets(beta, alpha, delta);
            let direct: f64 = x
                .iter()
                .zip(&w)
                .map(|(t, w)| w * phi(*t) * normal_cdf(t - a1) * normal_cdf(t - a3))
                .sum();
            let (ly, ln) = probit_log_probs(beta, alpha, delta);
            assert!((ly.exp() - direct).abs() < 1e-12, "{} vs {direct}", ly.exp());
            assert!((ln.exp() - (1.0 - direct)).abs() < 1e-12);
        }
    }

    #[test]
    fn probit_tails_stay_finite() {
        let (ly, ln) = probit_log_probs(10.0, [30.0, -30.0], [-10.0, 0.0]);
        assert!(ly.is_finite() && ln.is_finite(), "{ly} {ln}");
        assert!(ly < -1e3 && ln > -1e-300);
        let (ly, ln) = probit_log_probs(0.0, [30.0, -30.0], [-10.0, 10.0]);
        assert!(ly > -1e-300 && ln < -1e3 && ln.is_finite(), "{ly} {ln}");
    }

    proptest! {
        #[test]
        fn response_in_open_unit_interval(
            beta in -10.0f64..10.0,
            a1 in -10.0f64..10.0, a2 in -10.0f64..10.0,
            d1 in -10.0f64..10.0, d2 in -10.0f64..10.0,
        ) {
            let (ly, ln) = logit_log_probs(beta, [a1, a2], [d1, d2]);
            prop_assert!(ly < 0.0 && ly.is_finite());
            prop_assert!(ln.is_finite());
            prop_assert!((ly.exp() + ln.exp() - 1.0).abs() < 1e-12);
            // reflection (β, δ, α) -> (-β, -δ, -α)
            let r = response_probability(-beta, [-a1, -a2], [-d1, -d2]);
            prop_assert!((r - ly.exp()).abs() < 1e-14);
        }

        #[test]
        fn probit_probabilities_sum_to_one(
            beta in -3.0f64..3.0,
            a1 in -5.0f64..5.0, a2 in -5.0f64..5.0,
            d1 in -3.0f64..3.0, d2 in -3.0f64..3.0,
        ) {
            let (ly, ln) = probit_log_probs(beta, [a1, a2], [d1, d2]);
            prop_assert!((ly.exp() + ln.exp() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn third_option_receding_gives_two_option_logistic(
            beta in -3.0f64..3.0, a1 in 0.1f64..5.0, d1 in -3.0f64..3.0,
        ) {
            let theta = response_probability(beta, [a1, -1.0], [d1, 1e6]);
            let logistic = 1.0 / (1.0 + (-a1 * (beta - d1)).exp());
            prop_assert!((theta - logistic).abs() < 1e-12);
        }

        #[test]
        fn likelihood_is_additive_over_cells(
            seed in any::<u64>(), drop_i in 0usize..4, drop_j in 0usize..3,
        ) {
            let mut rng = RngStream::new(seed, 0);
            let h = Hyperparams::default();
            let items: Vec<_> = (0..3).map(|_| sample_item_prior(&h, &mut rng)).collect();
            let beta: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
            let rows: Vec<Vec<Vote>> = (0..4)
                .map(|_| (0..3).map(|_| Vote::from_yea(rng.bernoulli(0.5))).collect())
                .collect();
            let full = VoteMatrix::from_rows(&rows).unwrap();
            let mut removed = rows.clone();
            let v = removed[drop_i][drop_j];
            removed[drop_i][drop_j] = Vote::Missing;
            let partial = VoteMatrix::from_rows(&removed).unwrap();
            let term = Link::Logit.log_prob(v == Vote::Yea, beta[drop_i], items[drop_j].alpha(), items[drop_j].delta());
            let diff = log_likelihood(&full, &beta, &items).unwrap() - log_likelihood(&partial, &beta, &items).unwrap();
            prop_assert!((diff - term).abs() < 1e-10);
        }
    }
}
