//! Gumbel noise, the exact relaxed transition and the Fréchet factorization.
//!
//! A Fréchet variable with shape `σ²` is `exp(G/σ²)` for standard Gumbel
//! `G`. It splits into independent positive factors `a · b` with
//!
//! * `a = 2^{-1/(2σ²)} φ^{1/2}`, `φ ~ Fréchet(σ²)`
//! * `b = η^{-1/σ²}`, `η` standard half-normal
//!
//! which is what lets per-point noise and per-walker noise be drawn apart.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{positive, Error, Result};
use crate::igraph::{PointCloud, WeightFunction};

/// Smallest uniform variate handed to `ln`; keeps samples finite.
const U_FLOOR: f64 = 1e-300;

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    u.clamp(U_FLOOR, 1.0 - f64::EPSILON / 2.0)
}

/// Standard Gumbel(0, 1) via `-ln(-ln U)`.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(-open_uniform(rng).ln()).ln()
}

/// `argmax_i (ln w_i + τ_i)` over the strictly positive weights.
pub fn gumbel_max_select(weights: &[f64], noise: &[f64]) -> Result<usize> {
    if weights.len() != noise.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), found: noise.len() });
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    weights
        .iter()
        .zip(noise)
        .enumerate()
        .filter(|(_, (&w, _))| w > 0.0)
        .map(|(i, (&w, &t))| (i, w.ln() + t))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::EmptySupport)
}

/// Output of [`relaxed_transition_exact`].
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedTransition {
    pub location: Vec<f64>,
    /// Softmax weights over the cloud; nonnegative and summing to one.
    pub coefficients: Vec<f64>,
}

/// Gumbel-softmax step: the convex combination of cloud points with
/// coefficients `∝ exp((ln f(p_j - x) + τ_j) / σ²)`.
pub fn relaxed_transition_exact(
    cloud: &PointCloud,
    f: &WeightFunction,
    x: &[f64],
    sigma2: f64,
    noise: &[f64],
) -> Result<RelaxedTransition> {
    positive("sigma2", sigma2)?;
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), found: x.len() });
    }
    if noise.len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: noise.len() });
    }
    let logits: Vec<f64> = cloud
        .iter()
        .zip(noise)
        .map(|(p, &t)| (f.ln_between(p, x) + t) / sigma2)
        .collect();
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    let mut coefficients: Vec<f64> = logits.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = coefficients.iter().sum();
    coefficients.iter_mut().for_each(|c| *c /= total);

    let mut location = vec![0.0; cloud.dim()];
    for (p, &c) in cloud.iter().zip(&coefficients) {
        if c > 0.0 {
            for (l, v) in location.iter_mut().zip(p) {
                *l += c * v;
            }
        }
    }
    Ok(RelaxedTransition { location, coefficients })
}

/// Fréchet with shape `σ²` and unit scale: CDF `exp(-y^{-σ²})`.
pub fn sample_frechet<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> f64 {
    (sample_gumbel(rng) / sigma2).exp()
}

/// Per-point factor `a ~ P_a`.
pub fn sample_pa<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> f64 {
    (-std::f64::consts::LN_2 / (2.0 * sigma2)).exp() * sample_frechet(sigma2, rng).sqrt()
}

/// Per-walker factor `b ~ P_b`.
///
/// The `2^{-1/(2σ²)}` normalization appears once in the product `a · b`,
/// on the point side; `b` itself is the bare power of a half-normal.
pub fn sample_pb<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> f64 {
    let mut eta: f64 = StandardNormal.sample(rng);
    eta = eta.abs().max(U_FLOOR);
    eta.powf(-1.0 / sigma2)
}

/// Density of `P_a`: `σ² y^{-1-2σ²} exp(-1 / (2 y^{2σ²}))`.
pub fn pa_density(sigma2: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    sigma2 * y.powf(-1.0 - 2.0 * sigma2) * (-0.5 * y.powf(-2.0 * sigma2)).exp()
}

/// Density of `P_b`: `σ² √(2/π) y^{-1-σ²} exp(-y^{-2σ²} / 2)`.
pub fn pb_density(sigma2: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let c = (2.0 / std::f64::consts::PI).sqrt();
    sigma2 * c * y.powf(-1.0 - sigma2) * (-0.5 * y.powf(-2.0 * sigma2)).exp()
}
