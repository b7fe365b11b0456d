//! Gaussian-mixture approximation of the standard Gumbel density, fitted by
//! minimising the KL divergence from the Gumbel on a fixed quadrature grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::{gumbel_log_pdf, logsumexp, normal_log_pdf, RngStream};
use crate::error::MixtureError;
use crate::quadrature::composite_gauss_legendre;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self, MixtureError> {
        if weights.len() != means.len() || weights.len() != sds.len() {
            return Err(MixtureError::LengthMismatch {
                weights: weights.len(),
                means: means.len(),
                sds: sds.len(),
            });
        }
        if weights.is_empty() {
            return Err(MixtureError::Empty);
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !((total - 1.0).abs() <= WEIGHT_TOL) {
            return Err(MixtureError::BadWeights(total));
        }
        for (index, &sd) in sds.iter().enumerate() {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(MixtureError::BadScale { index, sd });
            }
        }
        if let Some(index) = means.iter().position(|m| !m.is_finite()) {
            return Err(MixtureError::BadMean { index });
        }
        Ok(Self { weights, means, sds })
    }

    /// Like [`GaussianMixture::new`] but rescales the weights to sum to one
    /// first. Used for published tables whose rounded weights do not.
    pub fn normalized(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self, MixtureError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MixtureError::BadWeights(total));
        }
        Self::new(weights.iter().map(|w| w / total).collect(), means, sds)
    }

    /// The single standard normal component.
    pub fn standard_normal() -> Self {
        Self {
            weights: vec![1.0],
            means: vec![0.0],
            sds: vec![1.0],
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.k())
            .map(|k| self.weights[k].ln() + normal_log_pdf(x, self.means[k], self.sds[k]))
            .collect();
        logsumexp(&terms)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        (0..self.k())
            .map(|k| self.weights[k] * (self.sds[k] * self.sds[k] + (self.means[k] - mu).powi(2)))
            .sum()
    }

    /// Components sorted by descending weight; ties by ascending mean.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| {
            self.weights[b]
                .total_cmp(&self.weights[a])
                .then(self.means[a].total_cmp(&self.means[b]))
                .then(self.sds[a].total_cmp(&self.sds[b]))
        });
        Self {
            weights: order.iter().map(|&k| self.weights[k]).collect(),
            means: order.iter().map(|&k| self.means[k]).collect(),
            sds: order.iter().map(|&k| self.sds[k]).collect(),
        }
    }

    /// Warm start for a fit with one more component: the heaviest component
    /// is cloned, the two copies share its weight and their means move apart
    /// by `offset` standard deviations.
    pub fn split_heaviest(&self, offset: f64) -> Self {
        let h = (0..self.k())
            .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
            .unwrap_or(0);
        let mut out = self.clone();
        let (w, m, s) = (self.weights[h], self.means[h], self.sds[h]);
        out.weights[h] = 0.5 * w;
        out.means[h] = m - offset * s;
        out.weights.push(0.5 * w);
        out.means.push(m + offset * s);
        out.sds.push(s);
        out
    }

    pub fn to_toml_string(&self) -> String {
        let file = MixtureFile {
            k: self.k(),
            pi: self.weights.clone(),
            m: self.means.clone(),
            s: self.sds.clone(),
        };
        toml::to_string(&file).expect("mixture serialises")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, MixtureError> {
        let file: MixtureFile = toml::from_str(text).map_err(|e| MixtureError::Format(e.to_string()))?;
        if file.k != file.pi.len() {
            return Err(MixtureError::Format(format!(
                "K = {} but {} weights given",
                file.k,
                file.pi.len()
            )));
        }
        Self::new(file.pi, file.m, file.s)
    }

    pub fn save(&self, path: &Path) -> Result<(), MixtureError> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MixtureError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    #[serde(rename = "K")]
    k: usize,
    pi: Vec<f64>,
    m: Vec<f64>,
    s: Vec<f64>,
}

const TABLE6_M: [f64; 6] = [0.455, -0.354, 1.497, 2.275, -1.016, 4.270];
const TABLE6_S: [f64; 6] = [0.649, 0.516, 0.768, 1.297, 0.397, 1.948];
const TABLE6_PI: [f64; 6] = [0.365, 0.279, 0.160, 0.123, 0.061, 0.012];

const TABLE10_M: [f64; 10] = [-0.117, 2.062, 1.310, -0.896, 0.679, 0.885, -0.243, 0.551, 1.565, 4.087];
const TABLE10_S: [f64; 10] = [0.529, 1.265, 0.733, 0.427, 0.448, 0.678, 0.456, 0.603, 0.693, 1.914];
const TABLE10_PI: [f64; 10] = [0.307, 0.156, 0.123, 0.116, 0.090, 0.073, 0.058, 0.035, 0.024, 0.016];

/// Weights, means and sds as separate vectors.
pub type MixtureColumns = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Published constants `(π, m, s)` exactly as printed, for K = 6 or 10.
pub fn published_table(k: usize) -> Result<MixtureColumns, MixtureError> {
    match k {
        6 => Ok((TABLE6_PI.to_vec(), TABLE6_M.to_vec(), TABLE6_S.to_vec())),
        10 => Ok((TABLE10_PI.to_vec(), TABLE10_M.to_vec(), TABLE10_S.to_vec())),
        other => Err(MixtureError::UnsupportedTable(other)),
    }
}

/// Published mixture for K = 6 or 10. The K = 10 weights are printed to
/// three decimals and sum to 0.998, so they are rescaled to sum to one.
pub fn builtin_table(k: usize) -> Result<GaussianMixture, MixtureError> {
    let (pi, m, s) = published_table(k)?;
    GaussianMixture::normalized(pi, m, s)
}

/// Quadrature nodes and weights for integrals against the Gumbel density,
/// with the Gumbel log density cached at each node.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    range: (f64, f64),
    target_log: Vec<f64>,
    target_mass: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(lo: f64, hi: f64, panels: usize, order: usize) -> Self {
        let (nodes, weights) = composite_gauss_legendre(lo, hi, panels, order);
        let target_log: Vec<f64> = nodes.iter().map(|&x| gumbel_log_pdf(x)).collect();
        let target_mass = weights.iter().zip(&target_log).map(|(w, l)| w * l.exp()).collect();
        Self {
            nodes,
            weights,
            range: (lo, hi),
            target_log,
            target_mass,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same range and panel order with twice as many panels.
    pub fn refined(&self, panels: usize, order: usize) -> Self {
        Self::new(self.range.0, self.range.1, 2 * panels, order)
    }
}

impl Default for QuadratureGrid {
    /// 100 panels of 20 nodes over [-10, 40]; the Gumbel mass outside is
    /// below 1e-17.
    fn default() -> Self {
        Self::new(-10.0, 40.0, 100, 20)
    }
}

/// KL(g ‖ mix) for the standard Gumbel g. Quadrature noise below zero is
/// clipped; returns `+inf` if the mixture has no support where g has mass.
pub fn kl_divergence(mix: &GaussianMixture, grid: &QuadratureGrid) -> f64 {
    let mut total = 0.0;
    for ((&x, &mass), &lg) in grid.nodes.iter().zip(&grid.target_mass).zip(&grid.target_log) {
        if mass == 0.0 {
            continue;
        }
        let lm = mix.log_density(x);
        if lm == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        total += mass * (lg - lm);
    }
    total.max(0.0)
}

/// Unconstrained coordinates: softmax logits, means, log sds.
fn pack(mix: &GaussianMixture) -> Vec<f64> {
    let mut x = Vec::with_capacity(3 * mix.k());
    x.extend(mix.weights.iter().map(|w| w.ln()));
    x.extend_from_slice(&mix.means);
    x.extend(mix.sds.iter().map(|s| s.ln()));
    x
}

fn unpack(x: &[f64]) -> GaussianMixture {
    let k = x.len() / 3;
    let logits = &x[..k];
    let norm = logsumexp(logits);
    GaussianMixture {
        weights: logits.iter().map(|l| (l - norm).exp()).collect(),
        means: x[k..2 * k].to_vec(),
        sds: x[2 * k..].iter().map(|l| l.exp()).collect(),
    }
}

/// Objective in unconstrained coordinates, omitting the constant
/// `∫ g log g`, with its analytic gradient written into `grad`.
fn cross_entropy_and_gradient(x: &[f64], grid: &QuadratureGrid, grad: &mut [f64]) -> f64 {
    let k = x.len() / 3;
    let mix = unpack(x);
    let log_w: Vec<f64> = mix.weights.iter().map(|w| w.ln()).collect();
    let inv_var: Vec<f64> = mix.sds.iter().map(|s| 1.0 / (s * s)).collect();
    let log_norm: Vec<f64> = mix
        .sds
        .iter()
        .map(|s| -s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
        .collect();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    let mut comp = vec![0.0; k];
    for (&node, &mass) in grid.nodes.iter().zip(&grid.target_mass) {
        if mass == 0.0 {
            continue;
        }
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            let d = node - mix.means[c];
            comp[c] = log_w[c] + log_norm[c] - 0.5 * d * d * inv_var[c];
            max = max.max(comp[c]);
        }
        let sum: f64 = comp.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        value -= mass * lse;
        for c in 0..k {
            let r = (comp[c] - lse).exp();
            let d = node - mix.means[c];
            grad[c] -= mass * (r - mix.weights[c]);
            grad[k + c] -= mass * r * d * inv_var[c];
            grad[2 * k + c] -= mass * r * (d * d * inv_var[c] - 1.0);
        }
    }
    if !value.is_finite() {
        return f64::INFINITY;
    }
    value
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Number of starting points tried per K.
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest gradient component.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 2000,
            grad_tol: 1e-9,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best mixture found, in canonical order.
    pub mixture: GaussianMixture,
    pub kl: f64,
    /// False when no start met the gradient tolerance within the budget;
    /// the best iterate is still returned.
    pub converged: bool,
    pub iterations: usize,
}

/// Minimise KL(Gumbel ‖ mixture) over K-component mixtures.
///
/// With `init` of K-1 components, starts include the heaviest component
/// split at ±0.5 sd and an unperturbed split (which reproduces the K-1 fit
/// exactly, so the result is never worse than `init`). With `init` of K
/// components it is used as the first start.
pub fn fit_mixture(
    k: usize,
    init: Option<&GaussianMixture>,
    grid: &QuadratureGrid,
    options: &FitOptions,
) -> Result<FitResult, MixtureError> {
    if k == 0 {
        return Err(MixtureError::ZeroComponents);
    }
    if let Some(init) = init {
        if init.k() != k && init.k() + 1 != k {
            return Err(MixtureError::BadWarmStart { init: init.k(), k });
        }
    }
    let mut rng = RngStream::new(options.seed, k as u64);
    let base = match init {
        Some(m) if m.k() == k => m.clone(),
        Some(m) => m.split_heaviest(0.5),
        None => spread_start(k),
    };
    let mut starts = vec![pack(&base)];
    if let Some(m) = init.filter(|m| m.k() + 1 == k) {
        starts.push(pack(&m.split_heaviest(0.0)));
    }
    while starts.len() < options.restarts.max(1) {
        let mut x = pack(&base);
        for (i, v) in x.iter_mut().enumerate() {
            let scale = if i < 2 * k { 0.3 } else { 0.15 };
            *v += scale * rng.standard_normal();
        }
        starts.push(x);
    }

    let target_entropy: f64 = grid
        .target_mass
        .iter()
        .zip(&grid.target_log)
        .map(|(m, l)| if *m == 0.0 { 0.0 } else { m * l })
        .sum();
    let mut best: Option<FitResult> = None;
    let mut any_converged = false;
    let mut iterations = 0;
    for start in starts {
        let outcome = bfgs(
            |x, g| cross_entropy_and_gradient(x, grid, g),
            start,
            options.max_iter,
            options.grad_tol,
        );
        iterations += outcome.iterations;
        any_converged |= outcome.converged;
        let mixture = unpack(&outcome.x);
        if GaussianMixture::new(mixture.weights.clone(), mixture.means.clone(), mixture.sds.clone()).is_err() {
            continue;
        }
        let kl = (target_entropy + outcome.value).max(0.0);
        if best.as_ref().is_none_or(|b| kl < b.kl) {
            best = Some(FitResult {
                mixture: mixture.canonical(),
                kl,
                converged: outcome.converged,
                iterations: 0,
            });
        }
    }
    let mut best = best.ok_or(MixtureError::BadWeights(f64::NAN))?;
    best.kl = kl_divergence(&best.mixture, grid);
    best.converged = best.converged || any_converged;
    best.iterations = iterations;
    Ok(best)
}

/// Warm-started fits for K = 1..=max_k.
pub fn fit_sequence(max_k: usize, grid: &QuadratureGrid, options: &FitOptions) -> Result<Vec<FitResult>, MixtureError> {
    let mut out: Vec<FitResult> = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        let init = out.last().map(|r| r.mixture.clone());
        out.push(fit_mixture(k, init.as_ref(), grid, options)?);
    }
    Ok(out)
}

fn spread_start(k: usize) -> GaussianMixture {
    // Components centred on Gumbel quantiles.
    let sd = if k == 1 { 1.2 } else { 1.2 / (k as f64).sqrt() };
    GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means: (0..k)
            .map(|c| {
                let p = (c as f64 + 0.5) / k as f64;
                -(-p.ln()).ln()
            })
            .collect(),
        sds: vec![sd; k],
    }
}

struct BfgsOutcome {
    x: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

/// BFGS on the inverse Hessian with a backtracking Armijo line search.
fn bfgs(mut f: impl FnMut(&[f64], &mut [f64]) -> f64, x0: Vec<f64>, max_iter: usize, grad_tol: f64) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut h = identity(n);
    let mut first = true;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stalled = 0;
    for it in 0..max_iter {
        if max_abs(&g) < grad_tol {
            return BfgsOutcome {
                x,
                value: fx,
                converged: true,
                iterations: it,
            };
        }
        let mut p = mat_vec(&h, &g);
        p.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let cap = max_abs(&p);
        let mut step = if cap > 2.0 { 2.0 / cap } else { 1.0 };
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * p[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if first {
                break;
            }
            h = identity(n);
            first = true;
            stalled += 1;
            if stalled > 2 {
                break;
            }
            continue;
        }
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if first {
                let yy = dot(&y, &y);
                let scale = sy / yy;
                h = identity(n);
                h.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let improvement = fx - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if improvement <= 1e-16 * fx.abs().max(1.0) {
            stalled += 1;
            if stalled > 5 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    let converged = max_abs(&g) < grad_tol;
    BfgsOutcome {
        x,
        value: fx,
        converged,
        iterations: max_iter,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ with ρ = 1 / yᵀs.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
