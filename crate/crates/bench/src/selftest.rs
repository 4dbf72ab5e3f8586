//! Quick oracle-equivalence checks, each pairing a fast path with an
//! independent slow computation of the same quantity.

use ndarray::Array1;
use rand::Rng;

use swing_core::grf::{grf_factorize, Ensemble, WalkConfig};
use swing_core::gumbel::relaxed_transition_exact;
use swing_core::igraph::{deconvolve_modulation, KernelFamily, KernelSpec, PointCloud, WeightFunction};
use swing_core::rfeatures::{point_feature_matrix, ExactCloudMap, FeatureMap};
use swing_core::rng::stream;
use swing_core::swing::{
    dense_signatures, linearized_transition, run_swing_walks, step_precompute, swing_factorize, PsiCache, SwingConfig,
    SwingFactor,
};

use crate::BenchError;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn() -> Result<Check, BenchError>;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = stream(seed, &[0x5e1f]);
    PointCloud::new((0..n).map(|_| (0..3).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()).expect("n > 0")
}

fn modulation_round_trip() -> Result<Check, BenchError> {
    let mut worst: f64 = 0.0;
    for family in [
        KernelFamily::Diffusion { lambda: 0.5 },
        KernelFamily::PStepRandomWalk { p: 3, a: 8.0 },
        KernelFamily::RegularizedLaplacian { gamma: 0.1 },
    ] {
        let spec = KernelSpec::with_default_truncation(family)?;
        let rho = deconvolve_modulation(&spec, 30)?;
        let back = rho.self_convolution();
        for (k, &alpha) in spec.coefficients().iter().enumerate().take(31) {
            let err = (back[k] - alpha).abs() / alpha.abs().max(f64::MIN_POSITIVE);
            if alpha != 0.0 {
                worst = worst.max(err);
            } else {
                worst = worst.max(back[k].abs());
            }
        }
    }
    Ok(Check { name: "modulation round trip", passed: worst <= 1e-10, detail: format!("max rel err {worst:.2e}") })
}

/// With exact cloud features the linearized step is the Gumbel-softmax step
/// with noise `τ_j = σ² ln a_j`.
fn linearized_matches_relaxed() -> Result<Check, BenchError> {
    let c = cloud(40, 1);
    let sigma2 = 0.7;
    let f = WeightFunction::gaussian(0.8);
    let map = ExactCloudMap::new(f.tempered(sigma2), &c)?;
    let fm = point_feature_matrix(&map, &c);
    let mut rng = stream(2, &[]);
    let factors: Vec<f64> = (0..c.len()).map(|_| swing_core::gumbel::sample_pa(sigma2, &mut rng)).collect();
    let pre = step_precompute(&c, &fm, &factors, 0);
    let noise: Vec<f64> = factors.iter().map(|a| sigma2 * a.ln()).collect();
    let mut worst: f64 = 0.0;
    let mut q = vec![0.0; map.len()];
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        map.query_features(&x, &mut q);
        let lin = linearized_transition(&pre, &q, 1.9)?;
        let exact = relaxed_transition_exact(&c, &f, &x, sigma2, &noise)?;
        worst = worst.max(rel_err(&lin, &exact.location));
    }
    Ok(Check { name: "linearized vs exact relaxed step", passed: worst <= 1e-10, detail: format!("max rel err {worst:.2e}") })
}

fn matvec_matches_deposits() -> Result<Check, BenchError> {
    let c = cloud(60, 3);
    let walk = WalkConfig::new(0.4, 3, 4)?;
    let cfg = SwingConfig::new(WeightFunction::gaussian(1.0), walk).with_features(32);
    let rho = deconvolve_modulation(&KernelSpec::with_default_truncation(KernelFamily::Diffusion { lambda: 0.3 })?, 64)?;
    let psi = PsiCache::new(cfg.build_psi(&c)?, &c);
    let mut factors = Vec::new();
    let mut direct = Vec::new();
    for ens in [Ensemble::First, Ensemble::Second] {
        let traj = run_swing_walks(&c, &cfg, &rho, cfg.build_phi(&c, ens)?.as_ref(), ens)?;
        factors.push(SwingFactor::from_trajectories(&traj, &psi));
        direct.push(dense_signatures(&traj, &psi)?);
    }
    let oracle = direct[0].dot(&direct[1].t());
    let mut rng = stream(5, &[]);
    let v = Array1::from_iter((0..c.len()).map(|_| rng.random_range(-1.0..1.0)));
    let fast = swing_core::swing::swing_matvec(&factors[0], &factors[1], &psi, &v)?;
    let slow = oracle.dot(&v);
    let err = rel_err(fast.as_slice().expect("contiguous"), slow.as_slice().expect("contiguous"));
    Ok(Check { name: "swing matvec vs dense deposition", passed: err <= 1e-8, detail: format!("rel err {err:.2e}") })
}

fn swing_is_deterministic() -> Result<Check, BenchError> {
    let c = cloud(30, 6);
    let cfg = SwingConfig::new(WeightFunction::gaussian(1.0), WalkConfig::new(0.3, 4, 7)?).with_features(16);
    let rho = deconvolve_modulation(&KernelSpec::with_default_truncation(KernelFamily::Diffusion { lambda: 0.5 })?, 64)?;
    let a = swing_factorize(&c, &cfg, &rho)?.dense()?;
    let b = swing_factorize(&c, &cfg, &rho)?.dense()?;
    Ok(Check { name: "swing reproducible from seed", passed: a == b, detail: String::new() })
}

fn grf_empty_graph_is_identity() -> Result<Check, BenchError> {
    let n = 7;
    let w = ndarray::Array2::zeros((n, n));
    let deg = Array1::zeros(n);
    let rho = deconvolve_modulation(&KernelSpec::with_default_truncation(KernelFamily::Diffusion { lambda: 1.0 })?, 16)?;
    let (k1, k2) = grf_factorize(&w, &deg, &rho, &WalkConfig::new(0.5, 3, 0)?)?;
    let k = k1.to_dense().dot(&k2.to_dense().t());
    let passed = k == ndarray::Array2::eye(n);
    Ok(Check { name: "grf on W = 0 is the identity", passed, detail: String::new() })
}

/// Runs every check. Errors inside a check are reported as failures.
pub fn run_selftest() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 5] = [
        ("modulation round trip", modulation_round_trip),
        ("linearized vs exact relaxed step", linearized_matches_relaxed),
        ("swing matvec vs dense deposition", matvec_matches_deposits),
        ("swing reproducible from seed", swing_is_deterministic),
        ("grf on W = 0 is the identity", grf_empty_graph_is_identity),
    ];
    checks
        .into_iter()
        .map(|(name, f)| f().unwrap_or_else(|e| Check { name, passed: false, detail: e.to_string() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
