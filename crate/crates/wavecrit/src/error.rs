//! Error type shared across the crate.

use thiserror::Error;

use crate::solver::TraceEntry;

/// Unified error type. Every fallible operation in the crate returns this, so
/// the CLI can map any failure to a structured JSON object with a stable
/// `kind` discriminant.
#[derive(Debug, Error)]
pub enum WaveError {
    /// A model parameter is outside its physical range (non-positive
    /// diffusivity, negative rate, ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// The requested computation only makes sense in a different parameter
    /// regime (e.g. wave construction requires `beta > gamma`).
    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// A profile handed to the wave operator lies outside its admissible
    /// domain by more than the documented tolerance.
    #[error("profile outside admissible set: {0}")]
    OutsideGamma(String),

    /// The fixed-point iteration hit its iteration cap. The full residual
    /// trace is carried along for forensics.
    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        trace: Vec<TraceEntry>,
    },

    /// The explicit time stepper produced non-finite values or blow-up.
    #[error("numerical instability at step {step} (t = {t}): {message}")]
    Instability { step: usize, t: f64, message: String },

    /// A grid fails one of its admissibility requirements.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Configuration file / override parsing problems. The message names the
    /// offending key (and the line, when the parser provides one).
    #[error("configuration error: {0}")]
    Config(String),

    /// A verification check failed on data that was expected to pass.
    #[error("check failed: {0}")]
    CheckFailed(String),

    /// Malformed on-disk artifact (CSV schema mismatch, non-uniform grid, ...).
    #[error("artifact format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl WaveError {
    /// Stable machine-readable discriminant used in the CLI's JSON error
    /// output.
    pub fn kind(&self) -> &'static str {
        match self {
            WaveError::InvalidParams(_) => "invalid_params",
            WaveError::InvalidRegime(_) => "invalid_regime",
            WaveError::OutsideGamma(_) => "outside_gamma",
            WaveError::NoConvergence { .. } => "no_convergence",
            WaveError::Instability { .. } => "instability",
            WaveError::InvalidGrid(_) => "invalid_grid",
            WaveError::Config(_) => "config",
            WaveError::CheckFailed(_) => "check_failed",
            WaveError::Format { .. } => "format",
            WaveError::Io(_) => "io",
        }
    }
}
