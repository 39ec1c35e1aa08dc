use thiserror::Error;

use crate::lowrank::LowRankMedium;
use crate::tensor::KrylovLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Some β_j or γ_j is (numerically) zero: a Wood anomaly.
    #[error("resonant mode j = {mode}: |{which}_j| = {magnitude:e} is below the resonance guard")]
    Resonance {
        mode: i64,
        which: &'static str,
        magnitude: f64,
    },

    #[error("propagating mode j = {mode} lies outside the truncation window [{lo}, {hi}]")]
    Truncation { mode: i64, lo: i64, hi: i64 },

    #[error("medium does not match the exterior permittivity: {0}")]
    MediumMismatch(String),

    #[error("failed to resolve function: {0}")]
    Resolution(String),

    #[error("singular system: pivot {pivot:e} at step {step} (threshold {threshold:e})")]
    SingularSystem {
        step: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("dense system with {unknowns} unknowns exceeds the cap of {cap}")]
    SizeCap { unknowns: usize, cap: usize },

    #[error("low-rank approximation did not reach the tolerance within rank {}", .0.achieved_rank)]
    RankExceeded(Box<LowRankMedium>),

    #[error("GMRES breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("GMRES did not converge in {} iterations (final residual {:e})", .0.iterations, .0.final_residual())]
    NotConverged(Box<KrylovLog>),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MediumMismatch(_)
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Truncation { .. }
                | Error::Resonance { .. }
        )
    }
}
