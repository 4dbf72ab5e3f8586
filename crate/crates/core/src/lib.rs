//! Graph random features for implicitly defined graphs.
//!
//! An implicit graph ("i-graph") is given by a point cloud `p_1..p_N` in `R^d`
//! and a weight generator `f`, with edge weights `w_ij = f(p_i - p_j)`. The
//! adjacency matrix is never needed by the continuous-space walker in
//! [`swing`]; it exists only in [`igraph`] as a brute-force oracle.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`igraph`] | point clouds, weight functions, kernel series, modulation, FNE |
//! | [`grf`] | classic graph random features on a materialized `W` |
//! | [`rfeatures`] | Fourier / positive random feature maps, orthogonal ensembles, importance sampling |
//! | [`gumbel`] | Gumbel-max, exact relaxed transition, Fréchet factorization samplers |
//! | [`swing`] | walks in `R^d`, relaxed loads, linear-time kernel action |
//! | [`stats`] | goodness-of-fit and regression helpers used by tests and the bench harness |

// `!(x >= t)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grf;
pub mod gumbel;
pub mod igraph;
pub mod rfeatures;
pub mod rng;
pub mod stats;
pub mod swing;

pub use error::{Error, Result};
