//! Implicit graphs and their brute-force oracles.
//!
//! Everything in here is quadratic or cubic in the number of points and is
//! meant for validation: materializing `W`, summing the kernel series
//! `K = Σ α_k W^k`, and scoring approximations with the relative Frobenius
//! error. The one exception is [`deconvolve_modulation`], which every walk
//! based estimator needs.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{positive, Error, Result};

/// Largest point count for which dense oracles are allowed.
pub const ORACLE_CAP: usize = 20_000;

/// Default truncation of the kernel series.
pub const DEFAULT_K_MAX: usize = 30;

/// Relative magnitude of the last series term accepted by [`exact_kernel`].
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-12;

/// The node set of an implicit graph: `N` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput("point cloud must contain at least one point".into()));
        }
        let d = points[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
            flat.extend_from_slice(p);
        }
        let arr = Array2::from_shape_vec((n, d), flat).expect("shape checked above");
        Self::from_array(arr)
    }

    pub fn from_array(points: Array2<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::InvalidInput("point cloud must contain at least one point".into()));
        }
        if d == 0 {
            return Err(Error::InvalidInput("points must have dimension at least 1".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        // Rows are handed out as slices, so force a contiguous row-major layout.
        let points = if points.is_standard_layout() {
            points
        } else {
            points.as_standard_layout().into_owned()
        };
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.as_slice().expect("standard layout").chunks_exact(self.dim())
    }

    /// Median Euclidean norm of `p_i / scale`.
    pub fn median_norm(&self, scale: f64) -> f64 {
        let mut norms: Vec<f64> = self.iter().map(|p| norm(p) / scale).collect();
        norms.sort_by(|a, b| a.total_cmp(b));
        let n = norms.len();
        if n % 2 == 1 {
            norms[n / 2]
        } else {
            0.5 * (norms[n / 2 - 1] + norms[n / 2])
        }
    }

    /// Parses the whitespace separated text format: one point per line,
    /// blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("invalid number `{tok}`: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected {d} coordinates, found {}", row.len()),
                    })
                }
                _ => {}
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Parse { line: lineno + 1, message: format!("non-finite coordinate {bad}") });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 0, message: "no points found".into() });
        }
        Self::new(rows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in self.iter() {
            let mut first = true;
            for v in p {
                if !first {
                    out.push(' ');
                }
                first = false;
                // `{:?}` on f64 prints the shortest representation that round-trips.
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bivariate edge-weight generator `w_ij = f(p_i - p_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// `exp(-‖z‖² / (2 bandwidth²))`
    GaussianRbf { bandwidth: f64 },
    /// `1(‖z‖₁ ≤ eps)`
    StepL1 { eps: f64 },
    /// `1(‖z‖₂ ≤ eps)`
    StepL2 { eps: f64 },
}

impl WeightFunction {
    pub fn gaussian(bandwidth: f64) -> Self {
        WeightFunction::GaussianRbf { bandwidth }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightFunction::GaussianRbf { bandwidth } => positive("bandwidth", bandwidth),
            WeightFunction::StepL1 { eps } | WeightFunction::StepL2 { eps } => positive("eps", eps),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match *self {
            WeightFunction::GaussianRbf { bandwidth } => (-norm_sq(z) / (2.0 * bandwidth * bandwidth)).exp(),
            WeightFunction::StepL1 { eps } => {
                let l1: f64 = z.iter().map(|v| v.abs()).sum();
                if l1 <= eps {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::StepL2 { eps } => {
                if norm_sq(z) <= eps * eps {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f(a - b)` without allocating the difference.
    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            WeightFunction::GaussianRbf { bandwidth } => (-dist_sq(a, b) / (2.0 * bandwidth * bandwidth)).exp(),
            WeightFunction::StepL1 { eps } => {
                let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                if l1 <= eps {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::StepL2 { eps } => {
                if dist_sq(a, b) <= eps * eps {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Natural log of `f(a - b)`; `-inf` outside the support.
    pub fn ln_between(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            WeightFunction::GaussianRbf { bandwidth } => -dist_sq(a, b) / (2.0 * bandwidth * bandwidth),
            _ => self.between(a, b).ln(),
        }
    }

    /// The same family raised to the power `1/temperature`. Step functions
    /// are idempotent under powers; Gaussians widen or narrow.
    pub fn tempered(&self, temperature: f64) -> Self {
        match *self {
            WeightFunction::GaussianRbf { bandwidth } => WeightFunction::GaussianRbf {
                bandwidth: bandwidth * temperature.sqrt(),
            },
            other => other,
        }
    }
}

/// Options for [`materialize_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MaterializeOptions {
    /// Keep `w_ii = f(0)` instead of zeroing the diagonal.
    pub include_diagonal: bool,
    /// Replace `W` by `D^{-1/2} W D^{-1/2}`.
    pub degree_normalize: bool,
}

impl MaterializeOptions {
    pub fn with_diagonal() -> Self {
        Self { include_diagonal: true, degree_normalize: false }
    }
}

/// Dense `W[i, j] = f(p_i - p_j)`.
pub fn materialize_weights(cloud: &PointCloud, f: &WeightFunction, opts: MaterializeOptions) -> Result<Array2<f64>> {
    f.validate()?;
    let n = cloud.len();
    if n > ORACLE_CAP {
        return Err(Error::OracleCap { n, cap: ORACLE_CAP });
    }
    let mut w = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let pi = cloud.point(i);
        for j in (i + 1)..n {
            let v = f.between(pi, cloud.point(j));
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
        if opts.include_diagonal {
            w[[i, i]] = f.between(pi, pi);
        }
    }
    if opts.degree_normalize {
        let inv_sqrt: Vec<f64> = degrees(&w)
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        for ((i, j), v) in w.indexed_iter_mut() {
            *v *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(w)
}

/// Weighted degrees `deg(i) = Σ_j W[i, j]`.
pub fn degrees(w: &Array2<f64>) -> Array1<f64> {
    w.sum_axis(Axis(1))
}

/// Kernel families expressible as `Σ α_k W^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `exp(λW)`: `α_k = λ^k / k!`
    Diffusion { lambda: f64 },
    /// `(aI + W)^p`: `α_k = C(p, k) a^{p-k}` for `k ≤ p`
    PStepRandomWalk { p: u32, a: f64 },
    /// `(I - γW)^{-1}`: `α_k = γ^k`
    RegularizedLaplacian { gamma: f64 },
    /// Explicit coefficients, zero beyond the end of the vector.
    Custom(Vec<f64>),
}

impl KernelFamily {
    pub fn coefficient(&self, k: usize) -> f64 {
        match self {
            KernelFamily::Diffusion { lambda } => {
                let mut c = 1.0;
                for j in 1..=k {
                    c *= lambda / j as f64;
                }
                c
            }
            KernelFamily::PStepRandomWalk { p, a } => {
                let p = *p as usize;
                if k > p {
                    0.0
                } else {
                    binomial(p, k) * a.powi((p - k) as i32)
                }
            }
            KernelFamily::RegularizedLaplacian { gamma } => gamma.powi(k as i32),
            KernelFamily::Custom(c) => c.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Diffusion { .. } => "diffusion",
            KernelFamily::PStepRandomWalk { .. } => "p-step",
            KernelFamily::RegularizedLaplacian { .. } => "reg-laplacian",
            KernelFamily::Custom(_) => "custom",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            KernelFamily::Diffusion { lambda } if !lambda.is_finite() || *lambda <= 0.0 => {
                Err(Error::InvalidKernel(format!("diffusion rate must be positive, got {lambda}")))
            }
            KernelFamily::PStepRandomWalk { p, a } if *p == 0 || !a.is_finite() => {
                Err(Error::InvalidKernel(format!("p-step kernel needs p ≥ 1 and finite a, got p={p}, a={a}")))
            }
            KernelFamily::RegularizedLaplacian { gamma } if !gamma.is_finite() || *gamma <= 0.0 => {
                Err(Error::InvalidKernel(format!("regularization must be positive, got {gamma}")))
            }
            KernelFamily::Custom(c) if c.is_empty() || c.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidKernel("custom coefficients must be non-empty and finite".into()))
            }
            _ => Ok(()),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// A kernel family truncated after `k_max` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub k_max: usize,
    coefficients: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, k_max: usize) -> Result<Self> {
        family.validate()?;
        if k_max == 0 {
            return Err(Error::InvalidParameter { name: "k_max", reason: "must be at least 1".into() });
        }
        let coefficients = (0..=k_max).map(|k| family.coefficient(k)).collect();
        Ok(Self { family, k_max, coefficients })
    }

    pub fn with_default_truncation(family: KernelFamily) -> Result<Self> {
        Self::new(family, DEFAULT_K_MAX)
    }

    /// Smallest truncation whose last term, at spectral radius `radius`, is
    /// below [`SERIES_TAIL_TOLERANCE`] relative to the largest term. Never
    /// returns less than [`DEFAULT_K_MAX`].
    pub fn for_radius(family: KernelFamily, radius: f64, limit: usize) -> Result<Self> {
        family.validate()?;
        let mut k_max = DEFAULT_K_MAX;
        while k_max < limit && series_tail(&family, k_max, radius) > SERIES_TAIL_TOLERANCE {
            k_max += 1;
        }
        Self::new(family, k_max)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// `|α_K| r^K / max_k |α_k| r^k`, the relative size of the final term.
fn series_tail(family: &KernelFamily, k_max: usize, radius: f64) -> f64 {
    let mut largest = 0.0f64;
    let mut last = 0.0;
    let mut pow = 1.0;
    for k in 0..=k_max {
        let term = family.coefficient(k).abs() * pow;
        largest = largest.max(term);
        last = term;
        pow *= radius;
    }
    if largest == 0.0 {
        0.0
    } else {
        last / largest
    }
}

/// Upper estimate of the spectral radius: power iteration on `|W|` for
/// symmetric input, otherwise the smaller of the 1- and ∞-norms.
pub fn spectral_radius_estimate(w: &Array2<f64>) -> f64 {
    let n = w.nrows();
    if n == 0 {
        return 0.0;
    }
    let abs = w.mapv(f64::abs);
    let symmetric = w.nrows() == w.ncols() && w.indexed_iter().all(|((i, j), &v)| v == w[[j, i]]);
    let row_norm = abs.sum_axis(Axis(1)).iter().cloned().fold(0.0, f64::max);
    let col_norm = abs.sum_axis(Axis(0)).iter().cloned().fold(0.0, f64::max);
    if !symmetric {
        return row_norm.min(col_norm);
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..500 {
        let next = abs.dot(&v);
        let nrm = next.dot(&next).sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        let new_lambda = v.dot(&next);
        v = next / nrm;
        if (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs() {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    // Rayleigh quotients approach the Perron root from below.
    lambda * (1.0 + 1e-9)
}

/// `K = Σ_{k=0}^{K_max} α_k W^k`, evaluated by Horner's rule.
pub fn exact_kernel(w: &Array2<f64>, spec: &KernelSpec) -> Result<Array2<f64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.ncols() });
    }
    if n > ORACLE_CAP {
        return Err(Error::OracleCap { n, cap: ORACLE_CAP });
    }
    let radius = spectral_radius_estimate(w);
    let tail = series_tail(&spec.family, spec.k_max, radius);
    if tail > SERIES_TAIL_TOLERANCE {
        return Err(Error::Divergent { k_max: spec.k_max, tail });
    }
    let alpha = spec.coefficients();
    let mut k = Array2::<f64>::eye(n) * alpha[spec.k_max];
    for &a in alpha[..spec.k_max].iter().rev() {
        k = k.dot(w);
        if a != 0.0 {
            k.diag_mut().mapv_inplace(|v| v + a);
        }
    }
    Ok(k)
}

/// A modulation sequence `ρ` whose self-convolution reproduces `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulation {
    values: Vec<f64>,
}

impl Modulation {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// `ρ(t)`, zero past the computed horizon.
    #[inline]
    pub fn get(&self, t: usize) -> f64 {
        self.values.get(t).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `Σ_{p=0}^{k} ρ(k-p) ρ(p)` for `k = 0..=horizon`.
    pub fn self_convolution(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n)
            .map(|k| (0..=k).map(|p| self.values[k - p] * self.values[p]).sum())
            .collect()
    }
}

/// Square root of the power series `Σ α_k x^k`, up to `x^{t_max}`.
pub fn deconvolve_modulation(spec: &KernelSpec, t_max: usize) -> Result<Modulation> {
    let alpha: Vec<f64> = (0..=t_max).map(|k| spec.family.coefficient(k)).collect();
    if alpha[0] <= 0.0 {
        return Err(Error::InvalidKernel(format!(
            "leading coefficient must be positive for a real modulation, got {}",
            alpha[0]
        )));
    }
    let mut rho = vec![0.0; t_max + 1];
    rho[0] = alpha[0].sqrt();
    for k in 1..=t_max {
        let cross: f64 = (1..k).map(|p| rho[p] * rho[k - p]).sum();
        rho[k] = (alpha[k] - cross) / (2.0 * rho[0]);
    }
    Ok(Modulation { values: rho })
}

/// Relative Frobenius error `‖K - K̂‖_F / ‖K‖_F`.
pub fn fne(k: &Array2<f64>, k_hat: &Array2<f64>) -> Result<f64> {
    if k.dim() != k_hat.dim() {
        return Err(Error::InvalidInput(format!("shape mismatch: {:?} vs {:?}", k.dim(), k_hat.dim())));
    }
    let reference = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    if reference == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = k.iter().zip(k_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(diff / reference)
}
