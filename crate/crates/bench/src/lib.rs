//! Experiment harness for `swing-core`: synthetic clouds, FNE and timing
//! sweeps, and vertex-normal prediction on triangle meshes. Results are
//! written as CSV.

pub mod cloud;
pub mod mesh;
pub mod normals;
pub mod report;
pub mod selftest;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] swing_core::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("mesh line {line}: {message}")]
    Mesh { line: usize, message: String },

    #[error("{:.3}% of deposit steps were skipped (limit 0.1%)", .0 * 100.0)]
    SkippedSteps(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
}
