//! Primitive densities and samplers shared by the mixture fit, the Gibbs
//! kernels and the diagnostics.
//!
//! Every sampler takes an explicit [`RngStream`]. Streams are ChaCha8
//! generators keyed by a 64-bit seed and addressed by a 64-bit stream id, so
//! a given `(seed, stream_id)` pair always yields the same sequence no matter
//! which thread consumes it.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use libm::erfc;
use rand::distr::{Distribution, Open01};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc_inv;

use crate::error::DistError;
use crate::quadrature::{composite_gauss_legendre, gauss_legendre};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Beyond this many standard deviations the truncated normal sampler switches
/// from inversion to exponential rejection.
const TAIL_CUTOFF: f64 = 4.0;

/// A reproducible random stream: ChaCha8 keyed by `seed`, positioned on
/// stream `stream_id`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    /// Stream for one `(iteration, kernel, entity)` triple of a chain run by
    /// `seed`. The iteration is folded into the key, the kernel tag and
    /// entity index into the stream id.
    pub fn for_entity(seed: u64, iteration: u64, kernel: u8, index: u64) -> Self {
        let key = splitmix64(seed ^ splitmix64(iteration.wrapping_add(0x5851_f42d_4c95_7f2d)));
        let stream = ((kernel as u64) << 56) | (index & ((1u64 << 56) - 1));
        Self::new(key, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        Open01.sample(&mut self.inner)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Log density of the standard Gumbel (maximum) distribution,
/// `-x - exp(-x)`.
pub fn gumbel_log_density(x: f64) -> Result<f64, DistError> {
    if !x.is_finite() {
        return Err(DistError::NonFinite(x));
    }
    Ok(gumbel_log_pdf(x))
}

#[inline]
pub(crate) fn gumbel_log_pdf(x: f64) -> f64 {
    -x - (-x).exp()
}

#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile, accurate in both tails.
#[inline]
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 8.0 {
        (x * x).exp() * erfc(x)
    } else {
        // Laplace continued fraction, evaluated bottom-up.
        let mut f = x;
        for n in (1..=60).rev() {
            f = x + (n as f64 * 0.5) / f;
        }
        1.0 / (PI.sqrt() * f)
    }
}

/// `log Φ(x)`, accurate deep into the left tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x > -5.0 {
        (0.5 * erfc(-x * FRAC_1_SQRT_2)).ln()
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let t = -x * FRAC_1_SQRT_2;
        (0.5 * erfcx(t)).ln() - t * t
    }
}

/// Numerically stable `log Σ exp(v)`; `-inf` for an empty or all `-inf`
/// input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[inline]
pub(crate) fn logaddexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Draw from N(mean, sd²) restricted to the open interval (lower, upper).
///
/// Inversion is used unless the interval lies entirely beyond
/// [`TAIL_CUTOFF`] standard deviations on one side, in which case a
/// translated-exponential rejection sampler takes over.
pub fn sample_truncated_normal(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut RngStream,
) -> Result<f64, DistError> {
    if !mean.is_finite() {
        return Err(DistError::NonFinite(mean));
    }
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(DistError::NonPositiveScale(sd));
    }
    if lower.is_nan() || upper.is_nan() || !(lower < upper) {
        return Err(DistError::EmptyInterval { lower, upper });
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    for _ in 0..64 {
        let z = standard_truncated(a, b, rng);
        let x = mean + sd * z;
        if x > lower && x < upper {
            return Ok(x);
        }
    }
    // Only reachable for intervals a few ulps wide, or far tails where
    // rounding lands on the bound.
    let mid = match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower.next_up(),
        _ => upper.next_down(),
    };
    if mid > lower && mid < upper {
        Ok(mid)
    } else {
        Err(DistError::EmptyInterval { lower, upper })
    }
}

fn standard_truncated(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    if a >= TAIL_CUTOFF {
        exponential_tail(a, b, rng)
    } else if b <= -TAIL_CUTOFF {
        -exponential_tail(-b, -a, rng)
    } else if a > 0.0 {
        // Work with upper-tail probabilities to keep precision.
        let qa = normal_cdf(-a);
        let qb = normal_cdf(-b);
        let q = qb + rng.uniform() * (qa - qb);
        -normal_quantile(q)
    } else {
        let pa = normal_cdf(a);
        let pb = normal_cdf(b);
        let p = pa + rng.uniform() * (pb - pa);
        normal_quantile(p)
    }
}

/// Rejection sampler for the standard normal on (a, b) with a >= 0, using a
/// translated exponential proposal (rate chosen as in Robert, 1995) truncated
/// to the same interval.
fn exponential_tail(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let span_mass = if b.is_finite() {
        -(-rate * (b - a)).exp_m1()
    } else {
        1.0
    };
    loop {
        let u = rng.uniform();
        let x = a - (-u * span_mass).ln_1p() / rate;
        let d = x - rate;
        if rng.uniform().ln() <= -0.5 * d * d && x < b {
            return x;
        }
    }
}

/// Draw index `k` (0-based) with probability proportional to
/// `exp(log_weights[k])`. Consumes exactly one uniform.
pub fn sample_categorical_log(log_weights: &[f64], rng: &mut RngStream) -> Result<usize, DistError> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| !w.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(DistError::NoMass);
    }
    let mut stack = [0.0f64; 32];
    let mut heap = Vec::new();
    let rel: &mut [f64] = if log_weights.len() <= stack.len() {
        &mut stack[..log_weights.len()]
    } else {
        heap.resize(log_weights.len(), 0.0);
        &mut heap
    };
    let mut total = 0.0;
    for (r, w) in rel.iter_mut().zip(log_weights) {
        *r = relative_weight(*w, max);
        total += *r;
    }
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in rel.iter().enumerate() {
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if target < acc {
                return Ok(k);
            }
        }
    }
    Ok(last_positive)
}

#[inline]
fn relative_weight(w: f64, max: f64) -> f64 {
    if w.is_nan() {
        0.0
    } else {
        (w - max).exp()
    }
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation 1/2.
///
/// Drezner–Wesolowsky form as refined by Genz: the integrand of the
/// correction term is positive for positive correlation, so the result keeps
/// relative accuracy until it underflows.
pub(crate) fn bvn_upper_half_corr(h: f64, k: f64) -> f64 {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| gauss_legendre(20));
    let asr = 0.5f64.asin();
    let hk = h * k;
    let hs = 0.5 * (h * h + k * k);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let sn = (0.5 * asr * (1.0 + x)).sin();
        sum += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
    }
    0.5 * sum * asr / (2.0 * PI) + normal_cdf(-h) * normal_cdf(-k)
}

/// `log ∫ φ(t) Φ(s1·t + c1) Φ(s3·t + c3) dt` with `|s1| = |s3| = 1`.
///
/// The integrand is log-concave with curvature at most -1, so a window of
/// ±9 around its mode carries all but `exp(-40)` of the mass. Works entirely
/// in log space; slower than [`bvn_upper_half_corr`] but never underflows.
pub(crate) fn log_gauss_cdf_product_integral(s1: f64, c1: f64, s3: f64, c3: f64) -> f64 {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (unit_nodes, unit_weights) = RULE.get_or_init(|| composite_gauss_legendre(-9.0, 9.0, 8, 16));
    let log_integrand = |t: f64| -0.5 * t * t - LN_SQRT_2PI + log_normal_cdf(s1 * t + c1) + log_normal_cdf(s3 * t + c3);
    // Newton on the concave log integrand.
    let mut t = 0.0f64;
    for _ in 0..100 {
        let (g, h) = log_integrand_derivatives(t, s1, c1, s3, c3);
        let step = g / h;
        t -= step.clamp(-5.0, 5.0);
        if step.abs() < 1e-10 {
            break;
        }
    }
    let terms: Vec<f64> = unit_nodes
        .iter()
        .zip(unit_weights)
        .map(|(x, w)| w.ln() + log_integrand(t + x))
        .collect();
    logsumexp(&terms)
}

fn log_integrand_derivatives(t: f64, s1: f64, c1: f64, s3: f64, c3: f64) -> (f64, f64) {
    let (r1, d1) = mills_terms(s1 * t + c1);
    let (r3, d3) = mills_terms(s3 * t + c3);
    let grad = -t + s1 * r1 + s3 * r3;
    let hess = -1.0 + s1 * s1 * d1 + s3 * s3 * d3;
    (grad, hess)
}

/// `(φ/Φ)(x)` and its derivative.
fn mills_terms(x: f64) -> (f64, f64) {
    let log_ratio = -0.5 * x * x - LN_SQRT_2PI - log_normal_cdf(x);
    let r = log_ratio.exp();
    (r, -r * (x + r))
}
