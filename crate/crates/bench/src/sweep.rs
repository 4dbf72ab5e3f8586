//! FNE and timing sweeps on synthetic clouds.

use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use swing_core::grf::{grf_factorize, grf_matvec, WalkConfig};
use swing_core::igraph::{
    deconvolve_modulation, degrees, exact_kernel, fne, materialize_weights, spectral_radius_estimate, KernelFamily,
    KernelSpec, MaterializeOptions, Modulation, PointCloud, WeightFunction,
};
use swing_core::rfeatures::{FeatureKind, FeatureSpec, ProposalSpec};
use swing_core::stats::{median, power_law_fit};
use swing_core::swing::{swing_factorize, FactorSharing, LengthMode, SwingConfig, SwingKernel};

use crate::cloud::gen_synthetic_cloud;
use crate::BenchError;

/// Horizon of the modulation; walks essentially never get this long.
pub const MODULATION_HORIZON: usize = 256;

/// Largest series truncation tried when fitting `K_max` to `‖W‖`.
pub const K_MAX_LIMIT: usize = 2000;

/// Skipped-deposit fraction above which a benchmark run is rejected.
pub const MAX_SKIPPED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Diffusion,
    PStep,
    RegLaplacian,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Diffusion, KernelKind::PStep, KernelKind::RegLaplacian];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Diffusion => "diffusion",
            KernelKind::PStep => "p-step",
            KernelKind::RegLaplacian => "reg-laplacian",
        }
    }
}

/// Family parameters shared by all rows of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub lambda: f64,
    pub p: u32,
    pub a: f64,
    pub gamma: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { lambda: 0.5, p: 3, a: 8.0, gamma: 0.1 }
    }
}

impl KernelParams {
    pub fn family(&self, kind: KernelKind) -> KernelFamily {
        match kind {
            KernelKind::Diffusion => KernelFamily::Diffusion { lambda: self.lambda },
            KernelKind::PStep => KernelFamily::PStepRandomWalk { p: self.p, a: self.a },
            KernelKind::RegLaplacian => KernelFamily::RegularizedLaplacian { gamma: self.gamma },
        }
    }
}

/// Free knobs of the SWING estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingSettings {
    pub sigma2: f64,
    /// Bandwidth of the deposit function `g`; `None` reuses `f`.
    pub g_bandwidth: Option<f64>,
    pub proposal: ProposalSpec,
    pub orthogonal: bool,
    pub length_mode: LengthMode,
    pub sharing: FactorSharing,
    pub phi_kind: FeatureKind,
    pub psi_kind: FeatureKind,
}

impl Default for SwingSettings {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            g_bandwidth: None,
            proposal: ProposalSpec::DataMixture { alpha: 2.0, spread: 1.0 },
            orthogonal: false,
            length_mode: LengthMode::FixedGeometric,
            sharing: FactorSharing::PerWalkStep,
            phi_kind: FeatureKind::Positive,
            psi_kind: FeatureKind::Positive,
        }
    }
}

impl SwingSettings {
    pub fn config(&self, f: WeightFunction, walk: WalkConfig, r: usize) -> SwingConfig {
        let mut cfg = SwingConfig::new(f, walk);
        cfg.sigma2 = self.sigma2;
        if let Some(bw) = self.g_bandwidth {
            cfg.g = WeightFunction::GaussianRbf { bandwidth: bw };
        }
        let spec = FeatureSpec::positive(r).with_proposal(self.proposal).with_orthogonal(self.orthogonal);
        cfg.phi = FeatureSpec { kind: self.phi_kind, ..spec };
        cfg.psi = FeatureSpec { kind: self.psi_kind, ..spec };
        cfg.length_mode = self.length_mode;
        cfg.sharing = self.sharing;
        cfg
    }
}

/// One output row. `r` is 0 for methods without random features and `fne`
/// is empty for timing-only rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub kernel: String,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub p_halt: f64,
    pub fne: Option<f64>,
    pub wall_time_seconds: f64,
    /// Seed of the walks and feature maps.
    pub seed: u64,
    /// Seed the cloud was drawn from.
    pub cloud_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kernels: Vec<KernelKind>,
    pub params: KernelParams,
    pub n_list: Vec<usize>,
    pub r_list: Vec<usize>,
    pub m: usize,
    pub p_halt: f64,
    pub seed: u64,
    /// Bandwidth of the Gaussian edge weights.
    pub bandwidth: f64,
    pub include_diagonal: bool,
    pub swing: SwingSettings,
    /// Run the SWING rows of one (kernel, N) pair in parallel.
    pub parallel: bool,
    /// Independent estimates per setting, with walk seeds `seed..seed + repeats`
    /// on the cloud drawn from `seed`.
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kernels: KernelKind::ALL.to_vec(),
            params: KernelParams::default(),
            n_list: vec![200],
            r_list: vec![8, 16, 32, 64, 128, 256, 512],
            m: 300,
            p_halt: 0.3,
            seed: 0,
            bandwidth: 1.0,
            include_diagonal: true,
            swing: SwingSettings::default(),
            parallel: false,
            repeats: 1,
        }
    }
}

/// Weight matrix, exact kernel and modulation for one cloud and family.
pub struct Oracle {
    pub w: ndarray::Array2<f64>,
    pub kernel: ndarray::Array2<f64>,
    pub rho: Modulation,
    pub spec: KernelSpec,
}

pub fn oracle(cloud: &PointCloud, f: &WeightFunction, family: KernelFamily, include_diagonal: bool) -> Result<Oracle, BenchError> {
    let opts = MaterializeOptions { include_diagonal, degree_normalize: false };
    let w = materialize_weights(cloud, f, opts)?;
    let radius = spectral_radius_estimate(&w);
    let spec = KernelSpec::for_radius(family, radius, K_MAX_LIMIT)?;
    let kernel = exact_kernel(&w, &spec)?;
    let rho = deconvolve_modulation(&spec, MODULATION_HORIZON)?;
    Ok(Oracle { w, kernel, rho, spec })
}

fn checked(k: SwingKernel) -> Result<SwingKernel, BenchError> {
    let frac = k.skipped_fraction();
    if frac > MAX_SKIPPED_FRACTION {
        return Err(BenchError::SkippedSteps(frac));
    }
    Ok(k)
}

/// GRF and SWING FNE against the exact kernel for every (family, N, r).
pub fn fne_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    let f = WeightFunction::GaussianRbf { bandwidth: cfg.bandwidth };
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let cloud = gen_synthetic_cloud(n, cfg.seed)?;
        for &kind in &cfg.kernels {
            let oracle = oracle(&cloud, &f, cfg.params.family(kind), cfg.include_diagonal)?;
            for rep in 0..cfg.repeats.max(1) as u64 {
                rows.extend(rows_for_seed(&cloud, kind, &oracle, cfg, cfg.seed + rep)?);
            }
        }
    }
    Ok(rows)
}

/// The rows of one repeat: the cloud of size `n` is drawn from `cfg.seed`
/// and the walks and features from `seed`.
pub fn fne_rows(cfg: &SweepConfig, n: usize, seed: u64) -> Result<Vec<SweepRow>, BenchError> {
    let f = WeightFunction::GaussianRbf { bandwidth: cfg.bandwidth };
    let cloud = gen_synthetic_cloud(n, cfg.seed)?;
    let mut rows = Vec::new();
    for &kind in &cfg.kernels {
        let oracle = oracle(&cloud, &f, cfg.params.family(kind), cfg.include_diagonal)?;
        rows.extend(rows_for_seed(&cloud, kind, &oracle, cfg, seed)?);
    }
    Ok(rows)
}

fn rows_for_seed(
    cloud: &PointCloud,
    kind: KernelKind,
    oracle: &Oracle,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepRow>, BenchError> {
    let f = WeightFunction::GaussianRbf { bandwidth: cfg.bandwidth };
    let n = cloud.len();
    let walk = WalkConfig::new(cfg.p_halt, cfg.m, seed)?;
    let row = |method: &str, r: usize, fne: f64, secs: f64| SweepRow {
        method: method.to_string(),
        kernel: kind.name().to_string(),
        n,
        r,
        m: cfg.m,
        p_halt: cfg.p_halt,
        fne: Some(fne),
        wall_time_seconds: secs,
        seed,
        cloud_seed: cfg.seed,
    };

    let start = Instant::now();
    let deg = degrees(&oracle.w);
    let (k1, k2) = grf_factorize(&oracle.w, &deg, &oracle.rho, &walk)?;
    let approx = k1.to_dense().dot(&k2.to_dense().t());
    let secs = start.elapsed().as_secs_f64();
    let mut rows = vec![row("grf", 0, fne(&oracle.kernel, &approx)?, secs)];

    let run = |r: usize| -> Result<SweepRow, BenchError> {
        let start = Instant::now();
        let k = checked(swing_factorize(cloud, &cfg.swing.config(f, walk, r), &oracle.rho)?)?;
        let dense = k.dense()?;
        let secs = start.elapsed().as_secs_f64();
        Ok(row("swing", r, fne(&oracle.kernel, &dense)?, secs))
    };
    let swing_rows: Vec<SweepRow> = if cfg.parallel {
        cfg.r_list.par_iter().map(|&r| run(r)).collect::<Result<_, _>>()?
    } else {
        cfg.r_list.iter().map(|&r| run(r)).collect::<Result<_, _>>()?
    };
    rows.extend(swing_rows);
    Ok(rows)
}

/// Mean FNE of `method` on `kernel` at each `r`, over all seeds and sizes
/// present in `rows`, in increasing `r`.
pub fn mean_fne_by_r(rows: &[SweepRow], method: &str, kernel: &str) -> Vec<(usize, f64)> {
    let mut acc: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for row in rows.iter().filter(|r| r.method == method && r.kernel == kernel) {
        if let Some(v) = row.fne {
            let e = acc.entry(row.r).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(r, (s, c))| (r, s / c as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSweepConfig {
    pub n_list: Vec<usize>,
    pub kernel: KernelKind,
    pub params: KernelParams,
    pub r: usize,
    pub m: usize,
    pub p_halt: f64,
    pub repeats: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub include_diagonal: bool,
    pub swing: SwingSettings,
}

impl Default for TimeSweepConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1000, 2000, 5000, 10000],
            kernel: KernelKind::Diffusion,
            params: KernelParams::default(),
            r: 64,
            m: 8,
            p_halt: 0.3,
            repeats: 5,
            seed: 0,
            bandwidth: 1.0,
            include_diagonal: true,
            swing: SwingSettings::default(),
        }
    }
}

/// Full GRF pipeline on an implicit graph: materialize `W`, walk, apply.
pub fn time_grf(cloud: &PointCloud, f: &WeightFunction, rho: &Modulation, walk: &WalkConfig, include_diagonal: bool, v: &Array1<f64>) -> Result<f64, BenchError> {
    let start = Instant::now();
    let opts = MaterializeOptions { include_diagonal, degree_normalize: false };
    let w = materialize_weights(cloud, f, opts)?;
    let deg = degrees(&w);
    let (k1, k2) = grf_factorize(&w, &deg, rho, walk)?;
    let out = grf_matvec(&k1, &k2, v)?;
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(out);
    Ok(secs)
}

/// Full SWING pipeline: features, walks, factors, one kernel action.
pub fn time_swing(cloud: &PointCloud, cfg: &SwingConfig, rho: &Modulation, v: &Array1<f64>) -> Result<f64, BenchError> {
    let start = Instant::now();
    let k = checked(swing_factorize(cloud, cfg, rho)?)?;
    let out = k.matvec(v)?;
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(out);
    Ok(secs)
}

/// Median wall-clock time of both pipelines over the N grid, after one
/// discarded warm-up run each.
pub fn time_sweep(cfg: &TimeSweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    if cfg.repeats == 0 {
        return Err(BenchError::Config("repeats must be at least 1".into()));
    }
    let f = WeightFunction::GaussianRbf { bandwidth: cfg.bandwidth };
    let walk = WalkConfig::new(cfg.p_halt, cfg.m, cfg.seed)?;
    let spec = KernelSpec::with_default_truncation(cfg.params.family(cfg.kernel))?;
    let rho = deconvolve_modulation(&spec, MODULATION_HORIZON)?;
    let swing_cfg = cfg.swing.config(f, walk, cfg.r);
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let cloud = gen_synthetic_cloud(n, cfg.seed)?;
        let v = Array1::from_iter((0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5));
        let row = |method: &str, r: usize, secs: f64| SweepRow {
            method: method.to_string(),
            kernel: cfg.kernel.name().to_string(),
            n,
            r,
            m: cfg.m,
            p_halt: cfg.p_halt,
            fne: None,
            wall_time_seconds: secs,
            seed: cfg.seed,
            cloud_seed: cfg.seed,
        };
        let mut times = Vec::with_capacity(cfg.repeats);
        time_swing(&cloud, &swing_cfg, &rho, &v)?;
        for _ in 0..cfg.repeats {
            times.push(time_swing(&cloud, &swing_cfg, &rho, &v)?);
        }
        rows.push(row("swing", cfg.r, median(&times)));

        times.clear();
        time_grf(&cloud, &f, &rho, &walk, cfg.include_diagonal, &v)?;
        for _ in 0..cfg.repeats {
            times.push(time_grf(&cloud, &f, &rho, &walk, cfg.include_diagonal, &v)?);
        }
        rows.push(row("grf", 0, median(&times)));
    }
    Ok(rows)
}

/// Power-law exponent of wall time against N for one method.
pub fn scaling_exponent(rows: &[SweepRow], method: &str) -> Result<f64, BenchError> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| (r.n as f64, r.wall_time_seconds))
        .unzip();
    Ok(power_law_fit(&x, &y)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_fne_sweep_produces_one_row_per_method_and_r() {
        let cfg = SweepConfig {
            kernels: vec![KernelKind::Diffusion],
            n_list: vec![20],
            r_list: vec![8, 16],
            m: 4,
            ..SweepConfig::default()
        };
        let rows = fne_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.fne.unwrap() >= 0.0 && r.wall_time_seconds > 0.0));
        assert_eq!(rows, fne_sweep(&cfg).unwrap().into_iter().map(|mut r| {
            r.wall_time_seconds = rows.iter().find(|x| x.method == r.method && x.r == r.r).unwrap().wall_time_seconds;
            r
        }).collect::<Vec<_>>());
    }

    #[test]
    fn exponent_of_quadratic_timings() {
        let rows: Vec<SweepRow> = [100usize, 200, 400]
            .iter()
            .map(|&n| SweepRow {
                method: "grf".into(),
                kernel: "diffusion".into(),
                n,
                r: 0,
                m: 1,
                p_halt: 0.3,
                fne: None,
                wall_time_seconds: (n * n) as f64 * 1e-6,
                seed: 0,
                cloud_seed: 0,
            })
            .collect();
        assert!((scaling_exponent(&rows, "grf").unwrap() - 2.0).abs() < 1e-12);
    }
}
