//! Graph random features on a materialized weight matrix.
//!
//! Each node launches `m` terminating random walks. A walk deposits
//! `load · ρ(len)` at every node it visits, moves to a neighbour with
//! probability proportional to the edge weight, multiplies its load by
//! `deg(current) / (1 - p_halt)` and halts with probability `p_halt`.
//! Averaging the deposits gives the signature vector `ξ(i)`, and two
//! independent ensembles give `K ≈ K₁K₂ᵀ`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::igraph::Modulation;
use crate::rng::{stream, tag, StreamRng};

pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub p_halt: f64,
    /// Walks per start node.
    pub m: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(p_halt: f64, m: usize, seed: u64) -> Result<Self> {
        let cfg = Self { p_halt, m, max_steps: DEFAULT_MAX_STEPS, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_halt > 0.0 && self.p_halt < 1.0) {
            return Err(Error::InvalidParameter { name: "p_halt", reason: format!("must lie in (0, 1), got {}", self.p_halt) });
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter { name: "m", reason: "need at least one walk per node".into() });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter { name: "max_steps", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Which of the two independent walk ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ensemble {
    First,
    Second,
}

impl Ensemble {
    pub fn tag(self) -> u64 {
        match self {
            Ensemble::First => 1,
            Ensemble::Second => 2,
        }
    }
}

/// What happened on one walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOutcome {
    /// Number of transitions survived; deposits were made at `0..=length`.
    pub length: usize,
    pub truncated: bool,
}

/// One terminating walk from `start`. `deposit(node, amount)` is called for
/// every visit, in order.
pub fn random_walk(
    w: &Array2<f64>,
    deg: &Array1<f64>,
    rho: &Modulation,
    cfg: &WalkConfig,
    start: usize,
    rng: &mut StreamRng,
    mut deposit: impl FnMut(usize, f64),
) -> WalkOutcome {
    let n = w.nrows();
    let mut load = 1.0;
    let mut len = 0usize;
    let mut cur = start;
    loop {
        deposit(cur, load * rho.get(len));
        if deg[cur] <= 0.0 {
            return WalkOutcome { length: len, truncated: false };
        }
        if len == cfg.max_steps {
            return WalkOutcome { length: len, truncated: true };
        }
        len += 1;
        let row = w.row(cur);
        let target = rng.random::<f64>() * deg[cur];
        let mut acc = 0.0;
        let mut next = None;
        for j in 0..n {
            let v = row[j];
            if v > 0.0 {
                acc += v;
                next = Some(j);
                if acc > target {
                    break;
                }
            }
        }
        load *= deg[cur] / (1.0 - cfg.p_halt);
        cur = next.expect("positive degree implies a positive entry");
        if rng.random::<f64>() < cfg.p_halt {
            // Halting after the move: the landing node gets no deposit.
            return WalkOutcome { length: len - 1, truncated: false };
        }
    }
}

/// Sparse signature rows `ξ(1)..ξ(N)` from one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    pub ensemble: Ensemble,
    /// Walks cut off at `max_steps`.
    pub truncations: usize,
}

impl SignatureMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero entries of `ξ(i)`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                out[[i, k]] = v;
            }
        }
        out
    }

    /// `K v`, entry `i = Σ_k ξ(i)[k] v_k`.
    pub fn matvec(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        self.check(v)?;
        Ok(self.rows.iter().map(|row| row.iter().map(|&(k, x)| x * v[k]).sum()).collect())
    }

    /// `Kᵀ v`, entry `k = Σ_i ξ(i)[k] v_i`.
    pub fn matvec_transpose(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        self.check(v)?;
        let mut out = Array1::zeros(self.n);
        for (row, &vi) in self.rows.iter().zip(v) {
            for &(k, x) in row {
                out[k] += x * vi;
            }
        }
        Ok(out)
    }

    fn check(&self, v: &Array1<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        Ok(())
    }
}

fn check_inputs(w: &Array2<f64>, deg: &Array1<f64>, cfg: &WalkConfig) -> Result<()> {
    cfg.validate()?;
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.ncols() });
    }
    if deg.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: deg.len() });
    }
    if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    Ok(())
}

fn signature_row(
    w: &Array2<f64>,
    deg: &Array1<f64>,
    rho: &Modulation,
    cfg: &WalkConfig,
    i: usize,
    ensemble: Ensemble,
) -> (Vec<(usize, f64)>, usize) {
    let mut deposits: Vec<(usize, f64)> = Vec::new();
    let mut truncations = 0;
    for walk in 0..cfg.m {
        let mut rng = stream(cfg.seed, &[tag::GRF_WALK, ensemble.tag(), i as u64, walk as u64]);
        let out = random_walk(w, deg, rho, cfg, i, &mut rng, |node, amount| {
            if amount != 0.0 {
                deposits.push((node, amount));
            }
        });
        truncations += out.truncated as usize;
    }
    // Stable sort keeps per-node sums in walk order.
    deposits.sort_by_key(|&(k, _)| k);
    let scale = 1.0 / cfg.m as f64;
    let mut row: Vec<(usize, f64)> = Vec::new();
    for (k, v) in deposits {
        match row.last_mut() {
            Some((last, acc)) if *last == k => *acc += v,
            _ => row.push((k, v)),
        }
    }
    row.iter_mut().for_each(|(_, v)| *v *= scale);
    (row, truncations)
}

/// Dense `ξ(i)` for one start node.
pub fn sample_signature_vector(
    w: &Array2<f64>,
    deg: &Array1<f64>,
    rho: &Modulation,
    cfg: &WalkConfig,
    i: usize,
    ensemble: Ensemble,
) -> Result<Array1<f64>> {
    check_inputs(w, deg, cfg)?;
    if i >= w.nrows() {
        return Err(Error::InvalidInput(format!("node {i} out of range for {} nodes", w.nrows())));
    }
    let (row, _) = signature_row(w, deg, rho, cfg, i, ensemble);
    let mut out = Array1::zeros(w.nrows());
    for (k, v) in row {
        out[k] = v;
    }
    Ok(out)
}

/// All signature rows for one ensemble, in parallel over start nodes.
pub fn sample_signature_matrix(
    w: &Array2<f64>,
    deg: &Array1<f64>,
    rho: &Modulation,
    cfg: &WalkConfig,
    ensemble: Ensemble,
) -> Result<SignatureMatrix> {
    check_inputs(w, deg, cfg)?;
    let n = w.nrows();
    let parts: Vec<(Vec<(usize, f64)>, usize)> =
        (0..n).into_par_iter().map(|i| signature_row(w, deg, rho, cfg, i, ensemble)).collect();
    let truncations = parts.iter().map(|p| p.1).sum();
    let rows = parts.into_iter().map(|p| p.0).collect();
    Ok(SignatureMatrix { n, rows, ensemble, truncations })
}

/// Two independent ensembles with `E[K₁K₂ᵀ] = Σ α_k W^k`.
pub fn grf_factorize(
    w: &Array2<f64>,
    deg: &Array1<f64>,
    rho: &Modulation,
    cfg: &WalkConfig,
) -> Result<(SignatureMatrix, SignatureMatrix)> {
    let k1 = sample_signature_matrix(w, deg, rho, cfg, Ensemble::First)?;
    let k2 = sample_signature_matrix(w, deg, rho, cfg, Ensemble::Second)?;
    Ok((k1, k2))
}

/// `K₁ (K₂ᵀ v)`.
pub fn grf_matvec(k1: &SignatureMatrix, k2: &SignatureMatrix, v: &Array1<f64>) -> Result<Array1<f64>> {
    if k1.n() != k2.n() {
        return Err(Error::DimensionMismatch { expected: k1.n(), found: k2.n() });
    }
    let inner = k2.matvec_transpose(v)?;
    k1.matvec(&inner)
}
