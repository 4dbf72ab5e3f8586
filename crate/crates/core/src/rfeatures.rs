//! Random feature maps `η₁(x)ᵀη₂(y) ≈ h(x - y)`.
//!
//! Feature vectors are returned with a separate natural-log scale so that
//! positive features of far-away points stay representable: the true vector
//! is `exp(scale) * values`. Everything downstream only needs ratios or dot
//! products, where the scales add.
//!
//! Complex Fourier features are stored as interleaved `(cos θ, sin θ)` pairs
//! of `η₂`; the real dot product of two such vectors is `Re(η₁ᵀ(x) η₂(y))`
//! because `η₁ = conj(η₂)` for shared frequencies.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{positive, Error, Result};
use crate::igraph::{norm_sq, PointCloud, WeightFunction};

/// Default number of random features.
pub const DEFAULT_FEATURES: usize = 128;

pub trait FeatureMap: Send + Sync + std::fmt::Debug {
    fn input_dim(&self) -> usize;

    /// Length of the real storage vector.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the `η₁` side scaled by `exp(-s)` and returns `s`.
    fn point_features(&self, u: &[f64], out: &mut [f64]) -> f64;

    /// Writes the `η₂` side scaled by `exp(-s)` and returns `s`.
    fn query_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        self.point_features(u, out)
    }
}

/// `η₁(x)ᵀη₂(y)` with the scales folded back in.
pub fn kernel_estimate(map: &dyn FeatureMap, x: &[f64], y: &[f64]) -> f64 {
    let mut a = vec![0.0; map.len()];
    let mut b = vec![0.0; map.len()];
    let sa = map.point_features(x, &mut a);
    let sb = map.query_features(y, &mut b);
    let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    if dot == 0.0 {
        0.0
    } else {
        dot * (sa + sb).exp()
    }
}

/// Point features of a whole cloud, rows brought to one common scale.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub log_scale: f64,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// `Σ_i rows`, in the same scale.
    pub fn column_sums(&self) -> Array1<f64> {
        self.values.sum_axis(ndarray::Axis(0))
    }
}

pub fn point_feature_matrix(map: &dyn FeatureMap, cloud: &PointCloud) -> FeatureMatrix {
    let n = cloud.len();
    let len = map.len();
    let rows: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; len];
            let s = map.point_features(cloud.point(i), &mut out);
            (s, out)
        })
        .collect();
    let log_scale = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let mut values = Array2::zeros((n, len));
    for (i, (s, row)) in rows.into_iter().enumerate() {
        let c = (s - log_scale).exp();
        for (dst, v) in values.row_mut(i).iter_mut().zip(row) {
            // Subnormals carry no usable precision and slow every later product
            let x = v * c;
            *dst = if x.abs() < f64::MIN_POSITIVE { 0.0 } else { x };
        }
    }
    FeatureMatrix { values, log_scale }
}

/// `exp(x)` with results that would be subnormal flushed to zero.
fn exp_normal(x: f64) -> f64 {
    let y = x.exp();
    if y < f64::MIN_POSITIVE {
        0.0
    } else {
        y
    }
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Block-orthogonal Gaussian frequencies, one per row.
///
/// Each block of `min(d, remaining)` rows is a set of orthonormal directions
/// with independent chi(d) lengths, so every row is marginally `N(0, I_d)`.
pub fn orthogonal_ensemble<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((r, d));
    let mut row = 0;
    while row < r {
        let block = d.min(r - row);
        let dirs = orthonormal_directions(d, block, rng);
        for (k, dir) in dirs.into_iter().enumerate() {
            let len = norm_sq(&gaussian_vector(d, rng)).sqrt();
            for (dst, v) in out.row_mut(row + k).iter_mut().zip(dir) {
                *dst = v * len;
            }
        }
        row += block;
    }
    out
}

/// `count ≤ d` uniformly random orthonormal vectors.
fn orthonormal_directions<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vector(d, rng);
        // Two passes of modified Gram-Schmidt keep the dot products near 1e-16.
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let n = norm_sq(&v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

/// Complex Fourier features `√(C/r) exp(±2πi ωᵀv)`, optionally signed on
/// the point side for transforms that change sign.
#[derive(Debug, Clone)]
pub struct FourierFeatureMap {
    /// Frequencies in cycles per unit, one per row.
    frequencies: Array2<f64>,
    normalizer: f64,
    signs: Option<Vec<f64>>,
}

/// Which side of a feature pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Phase `-2π ωᵀv`.
    First,
    /// Phase `+2π ωᵀv`.
    Second,
}

impl FourierFeatureMap {
    pub fn from_frequencies(frequencies: Array2<f64>, normalizer: f64) -> Result<Self> {
        if frequencies.nrows() == 0 {
            return Err(Error::InvalidParameter { name: "r", reason: "need at least one frequency".into() });
        }
        positive("normalizer", normalizer)?;
        Ok(Self { frequencies, normalizer, signs: None })
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.frequencies
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn r(&self) -> usize {
        self.frequencies.nrows()
    }

    fn phases<'a>(&'a self, u: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let u = ArrayView1::from(u);
        self.frequencies.rows().into_iter().map(move |w| 2.0 * PI * w.dot(&u))
    }

    /// The complex features as `[re, im]` pairs.
    pub fn complex_features(&self, u: &[f64], side: Side) -> Vec<[f64; 2]> {
        let amp = (self.normalizer / self.r() as f64).sqrt();
        self.phases(u)
            .enumerate()
            .map(|(j, theta)| {
                let s = match (side, &self.signs) {
                    (Side::First, Some(signs)) => signs[j],
                    _ => 1.0,
                };
                let im = match side {
                    Side::First => -theta.sin(),
                    Side::Second => theta.sin(),
                };
                [s * amp * theta.cos(), s * amp * im]
            })
            .collect()
    }

    fn write(&self, u: &[f64], out: &mut [f64], signed: bool) {
        let amp = (self.normalizer / self.r() as f64).sqrt();
        for (j, theta) in self.phases(u).enumerate() {
            let s = match (&self.signs, signed) {
                (Some(signs), true) => signs[j] * amp,
                _ => amp,
            };
            out[2 * j] = s * theta.cos();
            out[2 * j + 1] = s * theta.sin();
        }
    }
}

impl FeatureMap for FourierFeatureMap {
    fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    fn len(&self) -> usize {
        2 * self.r()
    }

    fn point_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        self.write(u, out, true);
        0.0
    }

    fn query_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        self.write(u, out, false);
        0.0
    }
}

/// Fourier features for `exp(-‖z‖² / (2σ²))`: frequencies `N(0, I/(2πσ)²)`, `C = 1`.
pub fn sample_gaussian_fourier<R: Rng + ?Sized>(sigma: f64, d: usize, r: usize, rng: &mut R) -> Result<FourierFeatureMap> {
    positive("sigma", sigma)?;
    check_counts(d, r)?;
    let scale = 1.0 / (2.0 * PI * sigma);
    let freqs = Array2::from_shape_fn((r, d), |_| {
        let g: f64 = StandardNormal.sample(rng);
        g * scale
    });
    FourierFeatureMap::from_frequencies(freqs, 1.0)
}

fn check_counts(d: usize, r: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter { name: "d", reason: "must be at least 1".into() });
    }
    if r == 0 {
        return Err(Error::InvalidParameter { name: "r", reason: "must be at least 1".into() });
    }
    Ok(())
}

/// `Π_i sin(2ε v_i) / v_i`, with `2ε` at `v_i = 0`.
pub fn step_l1_transform(eps: f64, v: &[f64]) -> f64 {
    v.iter()
        .map(|&t| if t == 0.0 { 2.0 * eps } else { (2.0 * eps * t).sin() / t })
        .product()
}

/// Default band limit for step-function features, in units of `1/ε`.
pub const DEFAULT_STEP_BAND: f64 = 40.0;

/// Signed Fourier features for the box indicator `1(‖z‖_∞ ≤ ε)`.
///
/// The transform `Π sin(εω_i)/(πω_i)` (angular frequencies) is
/// `step_l1_transform(ε/2, ω) / π^d`. Its absolute value is not integrable,
/// so frequencies are restricted to `|ω_i| ≤ band/ε` and drawn from
/// `|τ|` by rejection; `sign(τ)` rides on the point side. In one dimension
/// the box and the L1 ball coincide.
pub fn sample_step_fourier<R: Rng + ?Sized>(eps: f64, band: f64, d: usize, r: usize, rng: &mut R) -> Result<FourierFeatureMap> {
    positive("eps", eps)?;
    if !(band > 1.0) || !band.is_finite() {
        return Err(Error::InvalidParameter { name: "band", reason: format!("must exceed 1, got {band}") });
    }
    check_counts(d, r)?;
    let cutoff = band / eps;
    let log_band = band.ln();
    let inner_mass = 1.0 / (1.0 + log_band);
    let mut freqs = Array2::zeros((r, d));
    let mut signs = vec![1.0; r];
    for j in 0..r {
        for i in 0..d {
            // Envelope min(ε/π, 1/(π|ω|)) on |ω| ≤ cutoff.
            let w = loop {
                let u: f64 = rng.random();
                let a = if u < inner_mass {
                    rng.random::<f64>() / eps
                } else {
                    (rng.random::<f64>() * log_band).exp() / eps
                };
                let env = if a * eps <= 1.0 { eps / PI } else { 1.0 / (PI * a) };
                let target = if a == 0.0 { eps / PI } else { ((eps * a).sin() / (PI * a)).abs() };
                if rng.random::<f64>() * env <= target && a <= cutoff {
                    break a;
                }
            };
            let w = if rng.random::<bool>() { w } else { -w };
            if w != 0.0 && (eps * w).sin() / w < 0.0 {
                signs[j] = -signs[j];
            }
            freqs[[j, i]] = w / (2.0 * PI);
        }
    }
    let per_dim = abs_sinc_integral(band);
    let mut map = FourierFeatureMap::from_frequencies(freqs, per_dim.powi(d as i32))?;
    map.signs = Some(signs);
    Ok(map)
}

/// `∫_{-c/ε}^{c/ε} |sin(εω)/(πω)| dω = (2/π) ∫_0^c |sin t|/t dt`.
fn abs_sinc_integral(c: f64) -> f64 {
    let n = ((c * 2000.0).ceil() as usize).max(2000) * 2;
    let h = c / n as f64;
    let g = |t: f64| if t == 0.0 { 1.0 } else { (t.sin() / t).abs() };
    let mut s = g(0.0) + g(c);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    2.0 / PI * s * h / 3.0
}

/// Frequency proposal for positive features.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    StandardNormal,
    /// Uniform direction, radius `N(mean_radius, 1)` truncated to `> 0`.
    Shell { mean_radius: f64 },
    /// Equal-weight mixture of `N(c_i, spread² I)`.
    DataMixture { centers: Array2<f64>, spread: f64 },
}

impl Proposal {
    fn sample<R: Rng + ?Sized>(&self, d: usize, r: usize, orthogonal: bool, rng: &mut R) -> Array2<f64> {
        match self {
            Proposal::StandardNormal => {
                if orthogonal {
                    orthogonal_ensemble(d, r, rng)
                } else {
                    Array2::from_shape_fn((r, d), |_| StandardNormal.sample(rng))
                }
            }
            Proposal::Shell { mean_radius } => {
                let mut dirs = if orthogonal {
                    orthogonal_ensemble(d, r, rng)
                } else {
                    Array2::from_shape_fn((r, d), |_| StandardNormal.sample(rng))
                };
                for mut row in dirs.rows_mut() {
                    let n = row.dot(&row).sqrt();
                    let radius = loop {
                        let g: f64 = StandardNormal.sample(rng);
                        if mean_radius + g > 0.0 {
                            break mean_radius + g;
                        }
                    };
                    row.mapv_inplace(|v| v / n * radius);
                }
                dirs
            }
            Proposal::DataMixture { centers, spread } => {
                let mut out = Array2::zeros((r, d));
                for mut row in out.rows_mut() {
                    let c = centers.row(rng.random_range(0..centers.nrows()));
                    for (dst, &m) in row.iter_mut().zip(c) {
                        let g: f64 = StandardNormal.sample(rng);
                        *dst = m + spread * g;
                    }
                }
                out
            }
        }
    }

    /// Natural log of the proposal density.
    pub fn log_density(&self, w: &[f64]) -> f64 {
        let d = w.len() as f64;
        let log_norm = -0.5 * d * (2.0 * PI).ln();
        match self {
            Proposal::StandardNormal => log_norm - 0.5 * norm_sq(w),
            Proposal::Shell { mean_radius } => {
                let rho = norm_sq(w).sqrt();
                let z = rho - mean_radius;
                // S_{d-1} = 2π^{d/2}/Γ(d/2) is the area of the unit sphere in R^d.
                let log_area = 2f64.ln() + 0.5 * d * PI.ln() - ln_gamma(0.5 * d);
                let log_mass = (0.5 * erfc(-mean_radius / 2f64.sqrt())).ln();
                -0.5 * z * z - 0.5 * (2.0 * PI).ln() - log_mass - log_area - (d - 1.0) * rho.ln()
            }
            Proposal::DataMixture { centers, spread } => {
                let inv = 1.0 / (spread * spread);
                let logs: Vec<f64> = centers
                    .rows()
                    .into_iter()
                    .map(|c| -0.5 * inv * w.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
                log_norm - d * spread.ln() + top + sum.ln() - (centers.nrows() as f64).ln()
            }
        }
    }
}

/// Positive random features for `exp(-‖x - y‖² / (2σ²))`:
/// `η₊(u)_j = r^{-1/2} √ι_j exp(-‖u‖²/σ² + ω_jᵀu/σ)`.
#[derive(Debug, Clone)]
pub struct PositiveFeatureMap {
    frequencies: Array2<f64>,
    bandwidth: f64,
    /// `ln ι_j`, the log density ratio standard normal over proposal.
    log_weights: Vec<f64>,
    orthogonal: bool,
}

impl PositiveFeatureMap {
    pub fn new<R: Rng + ?Sized>(
        bandwidth: f64,
        d: usize,
        r: usize,
        orthogonal: bool,
        proposal: &Proposal,
        rng: &mut R,
    ) -> Result<Self> {
        positive("bandwidth", bandwidth)?;
        check_counts(d, r)?;
        let frequencies = proposal.sample(d, r, orthogonal, rng);
        let log_weights = match proposal {
            Proposal::StandardNormal => vec![0.0; r],
            _ => frequencies
                .rows()
                .into_iter()
                .map(|w| {
                    let w = w.as_slice().expect("row-major");
                    Proposal::StandardNormal.log_density(w) - proposal.log_density(w)
                })
                .collect(),
        };
        Ok(Self { frequencies, bandwidth, log_weights, orthogonal })
    }

    /// Plain positive features from fixed frequencies, `ι ≡ 1`.
    pub fn from_frequencies(frequencies: Array2<f64>, bandwidth: f64) -> Result<Self> {
        positive("bandwidth", bandwidth)?;
        check_counts(frequencies.ncols(), frequencies.nrows())?;
        let r = frequencies.nrows();
        Ok(Self { frequencies, bandwidth, log_weights: vec![0.0; r], orthogonal: false })
    }

    /// Same frequencies with explicit log importance weights.
    pub fn with_log_weights(mut self, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != self.r() {
            return Err(Error::DimensionMismatch { expected: self.r(), found: log_weights.len() });
        }
        self.log_weights = log_weights;
        Ok(self)
    }

    pub fn r(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.frequencies
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// Importance weights `ι_j`.
    pub fn importance_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Fully exponentiated features; may underflow far from the origin.
    pub fn positive_features(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.r()];
        let s = self.point_features(u, &mut out);
        out.iter().map(|v| v * s.exp()).collect()
    }
}

impl FeatureMap for PositiveFeatureMap {
    fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    fn len(&self) -> usize {
        self.r()
    }

    fn point_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let s = self.bandwidth;
        let base = -norm_sq(u) / (s * s) - 0.5 * (self.r() as f64).ln();
        let uv = ArrayView1::from(u);
        let mut top = f64::NEG_INFINITY;
        for ((o, w), lw) in out.iter_mut().zip(self.frequencies.rows()).zip(&self.log_weights) {
            *o = 0.5 * lw + w.dot(&uv) / s;
            top = top.max(*o);
        }
        out.iter_mut().for_each(|o| *o = exp_normal(*o - top));
        base + top
    }
}

/// Positive features with the isotropic shell proposal of mean radius
/// `α μ`, `μ` the median of `‖p_i / σ‖`.
pub fn importance_proposal<R: Rng + ?Sized>(
    cloud: &PointCloud,
    sigma: f64,
    alpha: f64,
    r: usize,
    orthogonal: bool,
    rng: &mut R,
) -> Result<PositiveFeatureMap> {
    positive("alpha", alpha)?;
    positive("sigma", sigma)?;
    let mu = cloud.median_norm(sigma);
    PositiveFeatureMap::new(sigma, cloud.dim(), r, orthogonal, &Proposal::Shell { mean_radius: alpha * mu }, rng)
}

/// Positive features with the mixture proposal `N(α p_i / σ, spread² I)`.
///
/// For a pair `x, y` the zero-variance proposal is `N((x + y)/σ, I)`, so
/// `α ≈ 2` puts a component on every near-diagonal pair. A spread above one
/// trades a constant factor of variance for coverage between centers.
pub fn data_mixture_proposal<R: Rng + ?Sized>(
    cloud: &PointCloud,
    sigma: f64,
    alpha: f64,
    spread: f64,
    r: usize,
    rng: &mut R,
) -> Result<PositiveFeatureMap> {
    positive("alpha", alpha)?;
    positive("sigma", sigma)?;
    positive("spread", spread)?;
    let centers = cloud.points().mapv(|v| alpha * v / sigma);
    PositiveFeatureMap::new(sigma, cloud.dim(), r, false, &Proposal::DataMixture { centers, spread }, rng)
}

/// Feature family used when building maps from a weight function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Positive,
    Fourier,
    /// [`ExactCloudMap`]; `r` is ignored.
    Exact,
}

/// Exact features of `h` restricted to a finite cloud.
///
/// Cloud points map to indicator vectors and any other input `x` maps to
/// `[h(x - p_j)]_j`, so `η₁(p_k)ᵀη₂(x) = h(x - p_k)` with no sampling error.
/// This is the infinite-feature limit for every computation that pairs a
/// cloud point with an arbitrary location. Point features of locations off
/// the cloud are the same as their query features, which is only exact
/// against cloud points.
#[derive(Debug, Clone)]
pub struct ExactCloudMap {
    cloud: PointCloud,
    h: WeightFunction,
}

impl ExactCloudMap {
    pub fn new(h: WeightFunction, cloud: &PointCloud) -> Result<Self> {
        h.validate()?;
        if cloud.is_empty() {
            return Err(Error::InvalidInput("empty cloud".into()));
        }
        Ok(Self { cloud: cloud.clone(), h })
    }

    fn index_of(&self, u: &[f64]) -> Option<usize> {
        self.cloud.iter().position(|p| p == u)
    }
}

impl FeatureMap for ExactCloudMap {
    fn input_dim(&self) -> usize {
        self.cloud.dim()
    }

    fn len(&self) -> usize {
        self.cloud.len()
    }

    fn point_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        match self.index_of(u) {
            Some(k) => {
                out.fill(0.0);
                out[k] = 1.0;
                0.0
            }
            None => self.query_features(u, out),
        }
    }

    fn query_features(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let logs: Vec<f64> = self.cloud.iter().map(|p| self.h.ln_between(u, p)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = if top.is_finite() { top } else { 0.0 };
        for (o, l) in out.iter_mut().zip(&logs) {
            *o = exp_normal(l - top);
        }
        top
    }
}

/// How positive-feature frequencies are proposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalSpec {
    StandardNormal,
    Shell { alpha: f64 },
    DataMixture { alpha: f64, spread: f64 },
}

/// Recipe for a feature map, independent of the randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub r: usize,
    pub orthogonal: bool,
    pub proposal: ProposalSpec,
    /// Band limit for step-function features, in units of `1/ε`.
    pub step_band: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Positive,
            r: DEFAULT_FEATURES,
            orthogonal: false,
            proposal: ProposalSpec::StandardNormal,
            step_band: DEFAULT_STEP_BAND,
        }
    }
}

impl FeatureSpec {
    pub fn positive(r: usize) -> Self {
        Self { r, ..Self::default() }
    }

    pub fn with_proposal(mut self, proposal: ProposalSpec) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn with_orthogonal(mut self, orthogonal: bool) -> Self {
        self.orthogonal = orthogonal;
        self
    }

    /// Builds a map for `h` over `cloud`'s dimension. Importance proposals
    /// are fitted to the cloud.
    pub fn build<R: Rng + ?Sized>(&self, h: &WeightFunction, cloud: &PointCloud, rng: &mut R) -> Result<Arc<dyn FeatureMap>> {
        h.validate()?;
        let d = cloud.dim();
        if self.kind == FeatureKind::Exact {
            return Ok(Arc::new(ExactCloudMap::new(*h, cloud)?));
        }
        match (*h, self.kind) {
            (WeightFunction::GaussianRbf { bandwidth }, FeatureKind::Positive) => {
                let map = match self.proposal {
                    ProposalSpec::StandardNormal => {
                        PositiveFeatureMap::new(bandwidth, d, self.r, self.orthogonal, &Proposal::StandardNormal, rng)?
                    }
                    ProposalSpec::Shell { alpha } => importance_proposal(cloud, bandwidth, alpha, self.r, self.orthogonal, rng)?,
                    ProposalSpec::DataMixture { alpha, spread } => {
                        data_mixture_proposal(cloud, bandwidth, alpha, spread, self.r, rng)?
                    }
                };
                Ok(Arc::new(map))
            }
            (WeightFunction::GaussianRbf { bandwidth }, FeatureKind::Fourier) => {
                Ok(Arc::new(sample_gaussian_fourier(bandwidth, d, self.r, rng)?))
            }
            (WeightFunction::StepL1 { eps }, FeatureKind::Fourier) => {
                Ok(Arc::new(sample_step_fourier(eps, self.step_band, d, self.r, rng)?))
            }
            (WeightFunction::StepL1 { .. }, FeatureKind::Positive) => Err(Error::InvalidParameter {
                name: "kind",
                reason: "step functions have a signed transform; use Fourier features".into(),
            }),
            (_, FeatureKind::Exact) => unreachable!("handled above"),
            (WeightFunction::StepL2 { .. }, _) => Err(Error::InvalidParameter {
                name: "weight",
                reason: "no random feature sampler for the L2 step function".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn fourier_self_product_is_exactly_one() {
        let map = sample_gaussian_fourier(0.7, 3, 64, &mut stream(1, &[])).unwrap();
        let x = [0.3, -1.2, 4.0];
        assert_relative_eq!(kernel_estimate(&map, &x, &x), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_frequency_gives_constant_estimate() {
        let map = FourierFeatureMap::from_frequencies(Array2::zeros((1, 2)), 1.0).unwrap();
        assert_eq!(kernel_estimate(&map, &[0.0, 0.0], &[5.0, -3.0]), 1.0);
    }

    #[test]
    fn fourier_estimate_vanishes_far_away() {
        let r = 10_000;
        let map = sample_gaussian_fourier(1.0, 2, r, &mut stream(2, &[])).unwrap();
        let est = kernel_estimate(&map, &[0.0, 0.0], &[40.0, 25.0]);
        assert!(est.abs() < 3.0 / (r as f64).sqrt(), "{est}");
    }

    #[test]
    fn phases_are_conjugate() {
        let map = sample_gaussian_fourier(1.0, 2, 5, &mut stream(3, &[])).unwrap();
        let a = map.complex_features(&[0.4, 0.1], Side::First);
        let b = map.complex_features(&[0.4, 0.1], Side::Second);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x[0], y[0]);
            assert_eq!(x[1], -y[1]);
        }
    }

    #[test]
    fn positive_features_at_origin() {
        let r = 16;
        let map = PositiveFeatureMap::new(1.3, 3, r, false, &Proposal::StandardNormal, &mut stream(4, &[])).unwrap();
        for v in map.positive_features(&[0.0; 3]) {
            assert_relative_eq!(v, 1.0 / (r as f64).sqrt(), max_relative = 1e-14);
        }
        assert_relative_eq!(kernel_estimate(&map, &[0.0; 3], &[0.0; 3]), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn positive_features_survive_far_from_origin() {
        let map = PositiveFeatureMap::new(1.0, 3, 64, false, &Proposal::StandardNormal, &mut stream(5, &[])).unwrap();
        let x = [30.0, -20.0, 25.0];
        let direct = map.positive_features(&x);
        assert!(direct.iter().all(|&v| v == 0.0), "plain exponentiation should underflow here");
        let mut scaled = vec![0.0; 64];
        let s = map.point_features(&x, &mut scaled);
        assert!(s.is_finite() && scaled.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn unit_weights_are_neutral() {
        let mut rng = stream(6, &[]);
        let plain = PositiveFeatureMap::new(0.8, 2, 32, false, &Proposal::StandardNormal, &mut rng).unwrap();
        let weighted = PositiveFeatureMap::from_frequencies(plain.frequencies().clone(), 0.8)
            .unwrap()
            .with_log_weights(vec![0.0; 32])
            .unwrap();
        let u = [0.9, -0.4];
        assert_eq!(plain.positive_features(&u), weighted.positive_features(&u));
    }

    #[test]
    fn centered_one_dimensional_shell_is_standard_normal() {
        let cloud = PointCloud::new(vec![vec![0.0]; 3]).unwrap();
        let map = importance_proposal(&cloud, 1.0, 2.0, 50, false, &mut stream(7, &[])).unwrap();
        for w in map.importance_weights() {
            assert_relative_eq!(w, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn shell_density_integrates_to_one_in_two_dimensions() {
        let q = Proposal::Shell { mean_radius: 2.5 };
        let (lim, n) = (10.0, 800);
        let h = 2.0 * lim / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = [-lim + (i as f64 + 0.5) * h, -lim + (j as f64 + 0.5) * h];
                total += q.log_density(&w).exp() * h * h;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn orthogonal_rows_within_blocks() {
        let w = orthogonal_ensemble(3, 7, &mut stream(8, &[]));
        for block in [0..3, 3..6] {
            for i in block.clone() {
                for j in block.clone() {
                    if i != j {
                        assert_abs_diff_eq!(w.row(i).dot(&w.row(j)), 0.0, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn step_transform_values() {
        assert_relative_eq!(step_l1_transform(0.3, &[0.0, 0.0]), 0.36, max_relative = 1e-15);
        assert_relative_eq!(step_l1_transform(PI / 4.0, &[1.0]), 1.0, max_relative = 1e-15);
        let v = step_l1_transform(1.0, &[2.0]);
        assert_relative_eq!(v, 4f64.sin() / 2.0);
        assert!(v < 0.0);
    }

    #[test]
    fn abs_sinc_integral_matches_series() {
        // On [0, π] the integrand is positive: ∫ sin t / t = Si(π) ≈ 1.851937.
        assert_relative_eq!(abs_sinc_integral(PI), 2.0 / PI * 1.851_937_051_982_466, max_relative = 1e-8);
    }

    #[test]
    fn step_features_recover_the_indicator_in_one_dimension() {
        let eps = 1.0;
        let mut inside = 0.0;
        let mut outside = 0.0;
        let reps = 40;
        for k in 0..reps {
            let map = sample_step_fourier(eps, DEFAULT_STEP_BAND, 1, 4000, &mut stream(9, &[k])).unwrap();
            inside += kernel_estimate(&map, &[0.0], &[0.4]);
            outside += kernel_estimate(&map, &[0.0], &[1.8]);
        }
        inside /= reps as f64;
        outside /= reps as f64;
        assert!((inside - 1.0).abs() < 0.1, "{inside}");
        assert!(outside.abs() < 0.1, "{outside}");
    }

    #[test]
    fn positive_step_features_are_rejected() {
        let cloud = PointCloud::new(vec![vec![0.0]]).unwrap();
        let spec = FeatureSpec::positive(8);
        assert!(spec.build(&WeightFunction::StepL1 { eps: 1.0 }, &cloud, &mut stream(0, &[])).is_err());
    }
}
