//! Vertex-normal interpolation on meshes.
//!
//! A fraction of the vertices is masked and their normals are predicted as
//! `F_i = Σ_{j unmasked} K(i, j) F_j` with `K = exp(λW)` and
//! `W = exp(-‖x_i - x_j‖² / σ²)` over all vertex pairs. The score is the
//! mean cosine between prediction and truth over the masked vertices.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use swing_core::grf::{grf_factorize, grf_matvec, WalkConfig};
use swing_core::igraph::{
    deconvolve_modulation, degrees, exact_kernel, materialize_weights, spectral_radius_estimate, KernelFamily, KernelSpec,
    MaterializeOptions, WeightFunction,
};
use swing_core::rng::stream;
use swing_core::swing::swing_factorize;

use crate::mesh::Mesh;
use crate::sweep::{SwingSettings, K_MAX_LIMIT, MODULATION_HORIZON};
use crate::BenchError;

const MASK_TAG: u64 = 0x6d_61_73_6b;

/// Grids for the brute-force hyperparameter search.
pub const SIGMA_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
pub const LAMBDA_GRID: [f64; 4] = [0.1, 0.3, 1.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormalMethod {
    Bf,
    Grf,
    Swing,
}

impl NormalMethod {
    pub const ALL: [NormalMethod; 3] = [NormalMethod::Bf, NormalMethod::Grf, NormalMethod::Swing];

    pub fn name(self) -> &'static str {
        match self {
            NormalMethod::Bf => "bf",
            NormalMethod::Grf => "grf",
            NormalMethod::Swing => "swing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalsConfig {
    pub mask_fraction: f64,
    /// Diffusion rate.
    pub lambda: f64,
    /// Length scale of `W = exp(-‖Δ‖²/σ²)`.
    pub sigma: f64,
    pub p_halt: f64,
    pub m: usize,
    pub r: usize,
    pub seed: u64,
    pub methods: Vec<NormalMethod>,
    pub swing: SwingSettings,
}

impl Default for NormalsConfig {
    fn default() -> Self {
        Self {
            mask_fraction: 0.8,
            lambda: 1.0,
            sigma: 1.0,
            p_halt: 0.1,
            m: 200,
            r: 256,
            seed: 0,
            methods: NormalMethod::ALL.to_vec(),
            swing: SwingSettings::default(),
        }
    }
}

impl NormalsConfig {
    /// `W = exp(-‖Δ‖²/σ²)` as a Gaussian of bandwidth `σ/√2`.
    pub fn weight_function(&self) -> WeightFunction {
        WeightFunction::GaussianRbf { bandwidth: self.sigma / std::f64::consts::SQRT_2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalsRow {
    pub method: String,
    pub n: usize,
    pub mask_fraction: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub m: usize,
    pub r: usize,
    pub p_halt: f64,
    pub cosine: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

/// `⌈fraction · n⌉` distinct vertices, as a membership mask.
pub fn sample_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<bool>, BenchError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(BenchError::Config(format!("mask fraction {fraction} is not in (0, 1)")));
    }
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    let mut mask = vec![false; n];
    for i in sample(&mut stream(seed, &[MASK_TAG]), n, k) {
        mask[i] = true;
    }
    Ok(mask)
}

/// Mean cosine over the masked rows. Zero predictions score 0.
pub fn mean_masked_cosine(pred: &Array2<f64>, truth: &Array2<f64>, mask: &[bool]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (p, t) = (pred.row(i), truth.row(i));
        let den = p.dot(&p).sqrt() * t.dot(&t).sqrt();
        sum += if den > 0.0 { p.dot(&t) / den } else { 0.0 };
        count += 1;
    }
    sum / count as f64
}

/// Applies `apply` to each coordinate of the unmasked normals.
fn predict(
    mesh: &Mesh,
    mask: &[bool],
    mut apply: impl FnMut(&Array1<f64>) -> Result<Array1<f64>, BenchError>,
) -> Result<Array2<f64>, BenchError> {
    let mut out = Array2::zeros((mesh.len(), 3));
    for c in 0..3 {
        let v = Array1::from_iter((0..mesh.len()).map(|j| if mask[j] { 0.0 } else { mesh.normals[[j, c]] }));
        out.column_mut(c).assign(&apply(&v)?);
    }
    Ok(out)
}

/// Scores every configured method on one mesh.
pub fn normal_prediction_experiment(mesh: &Mesh, cfg: &NormalsConfig) -> Result<Vec<NormalsRow>, BenchError> {
    if mesh.is_empty() {
        return Err(BenchError::Config("empty mesh".into()));
    }
    let mask = sample_mask(mesh.len(), cfg.mask_fraction, cfg.seed)?;
    let f = cfg.weight_function();
    let family = KernelFamily::Diffusion { lambda: cfg.lambda };
    let walk = WalkConfig::new(cfg.p_halt, cfg.m, cfg.seed)?;

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let start = Instant::now();
        let pred = match method {
            NormalMethod::Bf => {
                let w = materialize_weights(&mesh.vertices, &f, MaterializeOptions::with_diagonal())?;
                let spec = KernelSpec::for_radius(family.clone(), spectral_radius_estimate(&w), K_MAX_LIMIT)?;
                let k = exact_kernel(&w, &spec)?;
                predict(mesh, &mask, |v| Ok(k.dot(v)))?
            }
            NormalMethod::Grf => {
                let w = materialize_weights(&mesh.vertices, &f, MaterializeOptions::with_diagonal())?;
                let spec = KernelSpec::with_default_truncation(family.clone())?;
                let rho = deconvolve_modulation(&spec, MODULATION_HORIZON)?;
                let (k1, k2) = grf_factorize(&w, &degrees(&w), &rho, &walk)?;
                predict(mesh, &mask, |v| Ok(grf_matvec(&k1, &k2, v)?))?
            }
            NormalMethod::Swing => {
                let spec = KernelSpec::with_default_truncation(family.clone())?;
                let rho = deconvolve_modulation(&spec, MODULATION_HORIZON)?;
                let k = swing_factorize(&mesh.vertices, &cfg.swing.config(f, walk, cfg.r), &rho)?;
                predict(mesh, &mask, |v| Ok(k.matvec(v)?))?
            }
        };
        let secs = start.elapsed().as_secs_f64();
        rows.push(NormalsRow {
            method: method.name().to_string(),
            n: mesh.len(),
            mask_fraction: cfg.mask_fraction,
            lambda: cfg.lambda,
            sigma: cfg.sigma,
            m: cfg.m,
            r: if method == NormalMethod::Swing { cfg.r } else { 0 },
            p_halt: cfg.p_halt,
            cosine: mean_masked_cosine(&pred, &mesh.normals, &mask),
            wall_time_seconds: secs,
            seed: cfg.seed,
        });
    }
    Ok(rows)
}

/// `(σ, λ, cosine)` of the best brute-force score over the grid.
pub fn search_bf(mesh: &Mesh, cfg: &NormalsConfig, sigmas: &[f64], lambdas: &[f64]) -> Result<(f64, f64, f64), BenchError> {
    let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
    for &sigma in sigmas {
        for &lambda in lambdas {
            let c = NormalsConfig { sigma, lambda, methods: vec![NormalMethod::Bf], ..cfg.clone() };
            let cos = normal_prediction_experiment(mesh, &c)?[0].cosine;
            if cos > best.2 {
                best = (sigma, lambda, cos);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::flat_patch;

    #[test]
    fn mask_has_ceiling_size() {
        let m = sample_mask(10, 0.75, 3).unwrap();
        assert_eq!(m.iter().filter(|&&b| b).count(), 8);
        assert!(sample_mask(10, 1.0, 3).is_err());
        assert!(sample_mask(10, 0.0, 3).is_err());
    }

    #[test]
    fn zero_prediction_scores_zero() {
        let truth = Array2::from_shape_vec((2, 3), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let pred = Array2::from_shape_vec((2, 3), vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(mean_masked_cosine(&pred, &truth, &[true, true]), 0.5);
        assert_eq!(mean_masked_cosine(&pred, &truth, &[false, true]), 1.0);
    }

    #[test]
    fn flat_patch_is_predicted_exactly() {
        let mesh = flat_patch(6, 0.3).unwrap();
        let cfg = NormalsConfig { m: 20, r: 32, ..NormalsConfig::default() };
        for row in normal_prediction_experiment(&mesh, &cfg).unwrap() {
            assert!((row.cosine - 1.0).abs() < 1e-6, "{}: {}", row.method, row.cosine);
        }
    }
}
