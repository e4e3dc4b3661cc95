//! Benchmark harness for the planners in `wuuct-core`: episode runner,
//! worker-grid sweeps and CSV/JSON/Markdown/gnuplot output.

pub mod config;
pub mod emit;
pub mod episode;
pub mod planners;
pub mod sweep;

use thiserror::Error;
use wuuct_core::PlanError;

pub use config::{BenchConfig, EnvParams, Overrides, PlannerKind};
pub use episode::{run_episode, EpisodeResult};
pub use sweep::{sweep, CellResult, SweepResult};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<PlanError> for BenchError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Config(m) => BenchError::Config(m),
            PlanError::Policy(p) => BenchError::Config(p.to_string()),
            other => BenchError::Runtime(other.to_string()),
        }
    }
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 3,
        }
    }
}
