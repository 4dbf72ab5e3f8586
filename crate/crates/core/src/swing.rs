//! Space walks for implicit graphs.
//!
//! Walkers live in `R^d` instead of on nodes. One step is a Gumbel-softmax
//! convex combination of cloud points with the softmax linearized by random
//! features `φ` of `f^{1/σ²}`, and the Gumbel noise `exp(τ_j/σ²)` replaced
//! by a product `a_j · b` of a per-point factor and a per-walker factor.
//! With
//!
//! ```text
//! A = Σ_j p_j a_j φ(p_j)ᵀ     B = Σ_j a_j φ(p_j)ᵀ     C = Σ_j φ(p_j)ᵀ
//! ```
//!
//! a step costs `O(d r)`:
//!
//! ```text
//! x' = A φ(x) b / (B φ(x) b)        l' = l · C φ(x) / (1 - p_halt)
//! ```
//!
//! Deposits `u = l ρ(t)` are spread over the nodes in proportion to
//! `g(x - p_k)^{1/σ²} ≈ ψ(x)ᵀψ(p_k)`. The spread factors through `ψ`, so a
//! whole ensemble collapses into an `N × r_ψ` matrix `E` with
//! `ξ(i)[k] = E_i · ψ(p_k)` and `K₁K₂ᵀ = E Ψᵀ Ψ E'ᵀ`.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::grf::{Ensemble, WalkConfig};
use crate::gumbel::{sample_pa, sample_pb};
use crate::igraph::{Modulation, PointCloud, WeightFunction};
use crate::rfeatures::{point_feature_matrix, FeatureMap, FeatureMatrix, FeatureSpec};
use crate::rng::{stream, tag, StreamRng};

/// Denominators smaller than this in magnitude are treated as zero.
pub const DEGENERATE_THRESHOLD: f64 = 1e-300;

/// How walk lengths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMode {
    /// One geometric length `T` shared by every walk of an ensemble.
    FixedGeometric,
    /// An independent geometric length per (node, walk).
    PerWalkGeometric,
}

/// How the per-point factors `a_j` are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSharing {
    /// Fresh per step, shared by every walker.
    PerStep,
    /// Fresh per (walk index, step), shared across start nodes.
    PerWalkStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingConfig {
    pub walk: WalkConfig,
    /// Softmax temperature `σ²`.
    pub sigma2: f64,
    /// Transition weights `f`.
    pub f: WeightFunction,
    /// Deposit spread `g`.
    pub g: WeightFunction,
    pub phi: FeatureSpec,
    pub psi: FeatureSpec,
    pub length_mode: LengthMode,
    pub sharing: FactorSharing,
}

impl SwingConfig {
    /// Defaults: `σ² = 1`, `g = f`, 128 positive features on both sides,
    /// one shared walk length, point factors fresh per (walk, step).
    pub fn new(f: WeightFunction, walk: WalkConfig) -> Self {
        Self {
            walk,
            sigma2: 1.0,
            f,
            g: f,
            phi: FeatureSpec::default(),
            psi: FeatureSpec::default(),
            length_mode: LengthMode::FixedGeometric,
            sharing: FactorSharing::PerWalkStep,
        }
    }

    pub fn with_features(mut self, r: usize) -> Self {
        self.phi.r = r;
        self.psi.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        positive("sigma2", self.sigma2)?;
        self.f.validate()?;
        self.g.validate()?;
        if self.phi.r == 0 || self.psi.r == 0 {
            return Err(Error::InvalidParameter { name: "r", reason: "feature counts must be at least 1".into() });
        }
        Ok(())
    }

    /// `f^{1/σ²}`, the function `φ` linearizes.
    pub fn tempered_f(&self) -> WeightFunction {
        self.f.tempered(self.sigma2)
    }

    /// `g^{1/σ²}`, the function `ψ` linearizes.
    pub fn tempered_g(&self) -> WeightFunction {
        self.g.tempered(self.sigma2)
    }

    /// Samples `φ` for one ensemble.
    pub fn build_phi(&self, cloud: &PointCloud, ensemble: Ensemble) -> Result<Arc<dyn FeatureMap>> {
        let mut rng = stream(self.walk.seed, &[tag::FEATURES, 1, ensemble.tag()]);
        self.phi.build(&self.tempered_f(), cloud, &mut rng)
    }

    /// Samples `ψ`, shared by both ensembles.
    pub fn build_psi(&self, cloud: &PointCloud) -> Result<Arc<dyn FeatureMap>> {
        let mut rng = stream(self.walk.seed, &[tag::FEATURES, 2]);
        self.psi.build(&self.tempered_g(), cloud, &mut rng)
    }
}

/// `A^t` and `B^t` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPrecompute {
    pub t: usize,
    /// `d × len(φ)`
    pub a: Array2<f64>,
    /// `len(φ)`
    pub b: Array1<f64>,
}

/// `C = Σ_i φ(p_i)`, stored as `exp(log_scale) * c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPrecompute {
    pub c: Array1<f64>,
    pub log_scale: f64,
}

impl LoadPrecompute {
    pub fn from_features(phi: &FeatureMatrix) -> Self {
        Self { c: phi.column_sums(), log_scale: phi.log_scale }
    }
}

/// `A` and `B` for the given point factors. Cloud features may carry any
/// common scale; it cancels in the transition.
pub fn step_precompute(cloud: &PointCloud, phi: &FeatureMatrix, factors: &[f64], t: usize) -> StepPrecompute {
    let (d, len) = (cloud.dim(), phi.values.ncols());
    let mut a = Array2::zeros((d, len));
    let mut b = Array1::zeros(len);
    for (j, (p, &aj)) in cloud.iter().zip(factors).enumerate() {
        let row = phi.values.row(j);
        b.scaled_add(aj, &row);
        for (dd, &pd) in p.iter().enumerate() {
            a.row_mut(dd).scaled_add(aj * pd, &row);
        }
    }
    StepPrecompute { t, a, b }
}

fn point_factors(cloud: &PointCloud, sigma2: f64, seed: u64, ensemble: Ensemble, walk: usize, t: usize) -> Vec<f64> {
    let mut rng = stream(seed, &[tag::SWING_POINT_FACTOR, ensemble.tag(), walk as u64, t as u64]);
    (0..cloud.len()).map(|_| sample_pa(sigma2, &mut rng)).collect()
}

/// `steps` independent `(A^t, B^t)` pairs and `C`, for point factors shared
/// by every walker.
pub fn build_step_precomputes(
    cloud: &PointCloud,
    phi: &dyn FeatureMap,
    sigma2: f64,
    steps: usize,
    seed: u64,
) -> Result<(Vec<StepPrecompute>, LoadPrecompute)> {
    if steps == 0 {
        return Err(Error::InvalidParameter { name: "steps", reason: "need at least one step".into() });
    }
    positive("sigma2", sigma2)?;
    let fm = point_feature_matrix(phi, cloud);
    let pre = (0..steps)
        .into_par_iter()
        .map(|t| {
            let factors = point_factors(cloud, sigma2, seed, Ensemble::First, 0, t);
            step_precompute(cloud, &fm, &factors, t)
        })
        .collect();
    Ok((pre, LoadPrecompute::from_features(&fm)))
}

/// `A φ(x) b / (B φ(x) b)`. The scale of `φ(x)` and the factor `b` cancel;
/// `b` is only used for the degeneracy check, so the output is bit-identical
/// for every positive `b`.
pub fn linearized_transition(pre: &StepPrecompute, phi_x: &[f64], b: f64) -> Result<Vec<f64>> {
    let q = ArrayView1::from(phi_x);
    let den = pre.b.dot(&q);
    if !((den * b).abs() >= DEGENERATE_THRESHOLD) {
        return Err(Error::DegenerateTransition { node: 0, walk: 0, step: pre.t, denominator: den * b });
    }
    Ok(pre.a.dot(&q).iter().map(|v| v / den).collect())
}

/// `l · C φ(x) / (1 - p_halt)`, with `φ(x)` given as `exp(phi_scale) * phi_x`.
pub fn relaxed_load_update(l: f64, load: &LoadPrecompute, phi_x: &[f64], phi_scale: f64, p_halt: f64) -> f64 {
    l * degree_estimate(load, phi_x, phi_scale) / (1.0 - p_halt)
}

/// `C φ(x)`, the relaxed weighted degree at `x`.
pub fn degree_estimate(load: &LoadPrecompute, phi_x: &[f64], phi_scale: f64) -> f64 {
    let dot = load.c.dot(&ArrayView1::from(phi_x));
    if dot == 0.0 {
        0.0
    } else {
        dot * (load.log_scale + phi_scale).exp()
    }
}

/// Locations, loads and deposits of every walk of one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    n: usize,
    m: usize,
    d: usize,
    /// Step offsets per walk, walk `(i, w)` at index `i * m + w`.
    offsets: Vec<usize>,
    locations: Vec<f64>,
    loads: Vec<f64>,
    deposits: Vec<f64>,
    pub ensemble: Ensemble,
    /// Steps whose relaxed degree estimate was negative.
    pub negative_degrees: usize,
    /// Walks whose drawn length exceeded `max_steps`.
    pub truncations: usize,
}

/// One walk's recorded states, `t = 0..=T`.
#[derive(Debug, Clone, Copy)]
pub struct WalkView<'a> {
    d: usize,
    locations: &'a [f64],
    pub loads: &'a [f64],
    pub deposits: &'a [f64],
}

impl<'a> WalkView<'a> {
    pub fn steps(&self) -> usize {
        self.loads.len()
    }

    pub fn location(&self, t: usize) -> &'a [f64] {
        &self.locations[t * self.d..(t + 1) * self.d]
    }
}

impl Trajectories {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn walk(&self, i: usize, w: usize) -> WalkView<'_> {
        let k = i * self.m + w;
        let (s, e) = (self.offsets[k], self.offsets[k + 1]);
        WalkView {
            d: self.d,
            locations: &self.locations[s * self.d..e * self.d],
            loads: &self.loads[s..e],
            deposits: &self.deposits[s..e],
        }
    }

    /// Total recorded states over all walks.
    pub fn total_steps(&self) -> usize {
        self.loads.len()
    }
}

struct WalkRecord {
    locations: Vec<f64>,
    loads: Vec<f64>,
    deposits: Vec<f64>,
    negative: usize,
}

fn geometric_length(p_halt: f64, max_steps: usize, rng: &mut StreamRng) -> (usize, bool) {
    let t = Geometric::new(p_halt).expect("p_halt validated").sample(rng);
    if t > max_steps as u64 {
        (max_steps, true)
    } else {
        (t as usize, false)
    }
}

#[allow(clippy::too_many_arguments)]
fn walk_once(
    cloud: &PointCloud,
    cfg: &SwingConfig,
    rho: &Modulation,
    phi: &dyn FeatureMap,
    pre: &[StepPrecompute],
    load: &LoadPrecompute,
    ensemble: Ensemble,
    i: usize,
    w: usize,
    length: usize,
) -> Result<WalkRecord> {
    let d = cloud.dim();
    let mut rng = stream(cfg.walk.seed, &[tag::SWING_WALKER_FACTOR, ensemble.tag(), i as u64, w as u64]);
    let mut rec = WalkRecord {
        locations: Vec::with_capacity((length + 1) * d),
        loads: Vec::with_capacity(length + 1),
        deposits: Vec::with_capacity(length + 1),
        negative: 0,
    };
    let mut x = cloud.point(i).to_vec();
    let mut l = 1.0;
    let mut q = vec![0.0; phi.len()];
    #[allow(clippy::needless_range_loop)]
    for t in 0..=length {
        rec.locations.extend_from_slice(&x);
        rec.loads.push(l);
        rec.deposits.push(l * rho.get(t));
        if t == length {
            break;
        }
        let scale = phi.query_features(&x, &mut q);
        let b = sample_pb(cfg.sigma2, &mut rng);
        let next = linearized_transition(&pre[t], &q, b).map_err(|e| match e {
            Error::DegenerateTransition { step, denominator, .. } => {
                Error::DegenerateTransition { node: i, walk: w, step, denominator }
            }
            other => other,
        })?;
        let deg = degree_estimate(load, &q, scale);
        if deg < 0.0 {
            rec.negative += 1;
        }
        l *= deg / (1.0 - cfg.walk.p_halt);
        x = next;
    }
    Ok(rec)
}

/// Runs `m` walks from every cloud point for one ensemble.
pub fn run_swing_walks(
    cloud: &PointCloud,
    cfg: &SwingConfig,
    rho: &Modulation,
    phi: &dyn FeatureMap,
    ensemble: Ensemble,
) -> Result<Trajectories> {
    cfg.validate()?;
    if phi.input_dim() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), found: phi.input_dim() });
    }
    let (n, m) = (cloud.len(), cfg.walk.m);
    let seed = cfg.walk.seed;

    let mut truncations = 0;
    let lengths: Vec<usize> = match cfg.length_mode {
        LengthMode::FixedGeometric => {
            let mut rng = stream(seed, &[tag::SWING_LENGTH, ensemble.tag()]);
            let (t, cut) = geometric_length(cfg.walk.p_halt, cfg.walk.max_steps, &mut rng);
            truncations += cut as usize * n * m;
            vec![t; n * m]
        }
        LengthMode::PerWalkGeometric => (0..n * m)
            .map(|k| {
                let mut rng = stream(seed, &[tag::SWING_LENGTH, ensemble.tag(), (k / m) as u64, (k % m) as u64]);
                let (t, cut) = geometric_length(cfg.walk.p_halt, cfg.walk.max_steps, &mut rng);
                truncations += cut as usize;
                t
            })
            .collect(),
    };

    let fm = point_feature_matrix(phi, cloud);
    let load = LoadPrecompute::from_features(&fm);
    let build = |walk_key: usize, steps: usize| -> Vec<StepPrecompute> {
        (0..steps)
            .into_par_iter()
            .map(|t| step_precompute(cloud, &fm, &point_factors(cloud, cfg.sigma2, seed, ensemble, walk_key, t), t))
            .collect()
    };

    let shared = match cfg.sharing {
        FactorSharing::PerStep => Some(build(0, lengths.iter().copied().max().unwrap_or(0))),
        FactorSharing::PerWalkStep => None,
    };

    let mut records: Vec<Option<WalkRecord>> = (0..n * m).map(|_| None).collect();
    for w in 0..m {
        let own;
        let pre: &[StepPrecompute] = match &shared {
            Some(p) => p,
            None => {
                let steps = (0..n).map(|i| lengths[i * m + w]).max().unwrap_or(0);
                own = build(w, steps);
                &own
            }
        };
        let batch: Vec<WalkRecord> = (0..n)
            .into_par_iter()
            .map(|i| walk_once(cloud, cfg, rho, phi, pre, &load, ensemble, i, w, lengths[i * m + w]))
            .collect::<Result<_>>()?;
        for (i, rec) in batch.into_iter().enumerate() {
            records[i * m + w] = Some(rec);
        }
    }

    let d = cloud.dim();
    let total: usize = lengths.iter().map(|t| t + 1).sum();
    let mut traj = Trajectories {
        n,
        m,
        d,
        offsets: Vec::with_capacity(n * m + 1),
        locations: Vec::with_capacity(total * d),
        loads: Vec::with_capacity(total),
        deposits: Vec::with_capacity(total),
        ensemble,
        negative_degrees: 0,
        truncations,
    };
    traj.offsets.push(0);
    for rec in records.into_iter().map(|r| r.expect("every walk ran")) {
        traj.locations.extend(rec.locations);
        traj.loads.extend(rec.loads);
        traj.deposits.extend(rec.deposits);
        traj.negative_degrees += rec.negative;
        traj.offsets.push(traj.loads.len());
    }
    Ok(traj)
}

/// `ψ(p_k)` for the cloud together with `C_ψ = Σ_k ψ(p_k)`, in one common
/// scale that cancels in every deposit.
#[derive(Debug, Clone)]
pub struct PsiCache {
    pub map: Arc<dyn FeatureMap>,
    pub features: FeatureMatrix,
    pub c: Array1<f64>,
}

impl PsiCache {
    pub fn new(map: Arc<dyn FeatureMap>, cloud: &PointCloud) -> Self {
        let features = point_feature_matrix(map.as_ref(), cloud);
        let c = features.column_sums();
        Self { map, features, c }
    }

    pub fn n(&self) -> usize {
        self.features.values.nrows()
    }
}

/// The collapsed signature factor `E`, one row per start node, with
/// `ξ(i)[k] = E_i · ψ(p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwingFactor {
    pub e: Array2<f64>,
    /// Deposits dropped because `ψ(x)ᵀ C_ψ` vanished.
    pub skipped: usize,
    pub steps: usize,
}

impl SwingFactor {
    pub fn from_trajectories(traj: &Trajectories, psi: &PsiCache) -> Self {
        let len = psi.map.len();
        let rows: Vec<(Vec<f64>, usize, usize)> = (0..traj.n())
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; len];
                let mut q = vec![0.0; len];
                let (mut skipped, mut steps) = (0, 0);
                for w in 0..traj.m() {
                    let walk = traj.walk(i, w);
                    for t in 0..walk.steps() {
                        let u = walk.deposits[t];
                        if u == 0.0 {
                            continue;
                        }
                        steps += 1;
                        psi.map.query_features(walk.location(t), &mut q);
                        let den: f64 = q.iter().zip(&psi.c).map(|(a, b)| a * b).sum();
                        if !(den.abs() >= DEGENERATE_THRESHOLD) {
                            skipped += 1;
                            continue;
                        }
                        let s = u / den;
                        acc.iter_mut().zip(&q).for_each(|(a, v)| *a += s * v);
                    }
                }
                let inv_m = 1.0 / traj.m() as f64;
                acc.iter_mut().for_each(|a| *a *= inv_m);
                (acc, skipped, steps)
            })
            .collect();
        let mut e = Array2::zeros((traj.n(), len));
        let (mut skipped, mut steps) = (0, 0);
        for (i, (row, s, st)) in rows.into_iter().enumerate() {
            e.row_mut(i).assign(&Array1::from(row));
            skipped += s;
            steps += st;
        }
        Self { e, skipped, steps }
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Fraction of deposit steps that were skipped.
    pub fn skipped_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.skipped as f64 / self.steps as f64
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `K₁ w`: entry `i = Σ_k ξ(i)[k] w_k = E_i · Σ_k ψ(p_k) w_k`.
pub fn matvec_k1(factor: &SwingFactor, psi: &PsiCache, w: &Array1<f64>) -> Result<Array1<f64>> {
    check_len(factor.n(), w.len())?;
    check_len(psi.n(), w.len())?;
    let s_w = psi.features.values.t().dot(w);
    Ok(factor.e.dot(&s_w))
}

/// `K₂ᵀ v`: entry `k = Σ_i ξ'(i)[k] v_i = ψ(p_k) · Σ_i v_i E'_i`.
pub fn matvec_k2t(factor: &SwingFactor, psi: &PsiCache, v: &Array1<f64>) -> Result<Array1<f64>> {
    check_len(factor.n(), v.len())?;
    check_len(psi.n(), v.len())?;
    let d_v = factor.e.t().dot(v);
    Ok(psi.features.values.dot(&d_v))
}

/// `K₁ (K₂ᵀ v)` in `O(N r_ψ)`.
pub fn swing_matvec(k1: &SwingFactor, k2: &SwingFactor, psi: &PsiCache, v: &Array1<f64>) -> Result<Array1<f64>> {
    let inner = matvec_k2t(k2, psi, v)?;
    matvec_k1(k1, psi, &inner)
}

/// Dense `K₁K₂ᵀ` for validation. Column `k` equals `swing_matvec(e_k)` up
/// to summation order.
pub fn swing_dense_kernel(k1: &SwingFactor, k2: &SwingFactor, psi: &PsiCache) -> Result<Array2<f64>> {
    let n = psi.n();
    check_len(n, k1.n())?;
    check_len(n, k2.n())?;
    if n > crate::igraph::ORACLE_CAP {
        return Err(Error::OracleCap { n, cap: crate::igraph::ORACLE_CAP });
    }
    let psi_mat = &psi.features.values;
    let gram = psi_mat.t().dot(psi_mat);
    Ok(k1.e.dot(&gram).dot(&k2.e.t()))
}

/// Both factors of a SWING kernel estimate together with the shared `ψ`.
#[derive(Debug, Clone)]
pub struct SwingKernel {
    pub k1: SwingFactor,
    pub k2: SwingFactor,
    pub psi: PsiCache,
    pub negative_degrees: usize,
    pub truncations: usize,
}

impl SwingKernel {
    pub fn matvec(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        swing_matvec(&self.k1, &self.k2, &self.psi, v)
    }

    pub fn dense(&self) -> Result<Array2<f64>> {
        swing_dense_kernel(&self.k1, &self.k2, &self.psi)
    }

    pub fn skipped_fraction(&self) -> f64 {
        let steps = self.k1.steps + self.k2.steps;
        if steps == 0 {
            0.0
        } else {
            (self.k1.skipped + self.k2.skipped) as f64 / steps as f64
        }
    }
}

/// Runs both ensembles and collapses them into factors.
pub fn swing_factorize(cloud: &PointCloud, cfg: &SwingConfig, rho: &Modulation) -> Result<SwingKernel> {
    cfg.validate()?;
    let psi = PsiCache::new(cfg.build_psi(cloud)?, cloud);
    let mut factors = Vec::with_capacity(2);
    let (mut negative_degrees, mut truncations) = (0, 0);
    for ensemble in [Ensemble::First, Ensemble::Second] {
        let phi = cfg.build_phi(cloud, ensemble)?;
        let traj = run_swing_walks(cloud, cfg, rho, phi.as_ref(), ensemble)?;
        negative_degrees += traj.negative_degrees;
        truncations += traj.truncations;
        factors.push(SwingFactor::from_trajectories(&traj, &psi));
    }
    let k2 = factors.pop().expect("two ensembles");
    let k1 = factors.pop().expect("two ensembles");
    Ok(SwingKernel { k1, k2, psi, negative_degrees, truncations })
}

/// Row sums of `K` restricted to one ensemble: `Σ_k ξ(i)[k]`, the total
/// mass deposited per start node.
pub fn deposited_mass(factor: &SwingFactor, psi: &PsiCache) -> Array1<f64> {
    factor.e.dot(&psi.features.values.sum_axis(Axis(0)))
}

/// Signature vectors built one deposit at a time,
/// `ξ(i)[k] = (1/m) Σ_{w,t} u ψ(x)ᵀψ(p_k) / ψ(x)ᵀC_ψ`, without the collapse
/// through `E`. `O(N² T m)`; a reference for [`SwingFactor`].
pub fn dense_signatures(traj: &Trajectories, psi: &PsiCache) -> Result<Array2<f64>> {
    let n = traj.n();
    check_len(psi.n(), n)?;
    if n > crate::igraph::ORACLE_CAP {
        return Err(Error::OracleCap { n, cap: crate::igraph::ORACLE_CAP });
    }
    let len = psi.map.len();
    let mut out = Array2::zeros((n, n));
    let mut q = vec![0.0; len];
    for i in 0..n {
        for w in 0..traj.m() {
            let walk = traj.walk(i, w);
            for t in 0..walk.steps() {
                let u = walk.deposits[t];
                if u == 0.0 {
                    continue;
                }
                psi.map.query_features(walk.location(t), &mut q);
                let den: f64 = q.iter().zip(&psi.c).map(|(a, b)| a * b).sum();
                if !(den.abs() >= DEGENERATE_THRESHOLD) {
                    continue;
                }
                for k in 0..n {
                    let num: f64 = q.iter().zip(psi.features.values.row(k)).map(|(a, b)| a * b).sum();
                    out[[i, k]] += u * num / den;
                }
            }
        }
    }
    out.mapv_inplace(|v| v / traj.m() as f64);
    Ok(out)
}
