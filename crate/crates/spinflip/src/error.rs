//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two dressed eigenvectors are equally connected to the reference
    /// state, so branch selection would be arbitrary. Occurs at avoided
    /// crossings of the pair manifold.
    #[error("degenerate branch: candidate eigenvectors have |alpha| within {gap:.3e} of each other")]
    DegenerateBranch { gap: f64 },

    /// A state vector or operator does not match the working basis.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A gate record lacks the trajectory needed for a requested quantity.
    #[error("missing trajectory for initial state |{sector}>")]
    MissingTrajectory { sector: String },

    /// A diagonal amplitude is too small for its phase to be defined.
    #[error("zero amplitude: |<{sector}|U|{sector}>| = {magnitude:.3e} < 1e-12")]
    ZeroAmplitude { sector: String, magnitude: f64 },

    /// A gate record's decay setting conflicts with the requested method.
    #[error("method mismatch: record was propagated with gamma_r = {record_gamma}, {hint}")]
    MethodMismatch { record_gamma: f64, hint: String },

    /// The optimizer hit its iteration budget without meeting tolerances.
    /// Carries the best fidelity found; callers may still use the result.
    #[error("optimizer did not converge: best fidelity {best_fidelity}")]
    NoConvergence { best_fidelity: f64 },

    /// No duration within the search bounds reached the target fidelity.
    #[error("bracket failed: no tau in [{lo}, {hi}] us reaches fidelity {target}")]
    BracketFailed { lo: f64, hi: f64, target: f64 },

    /// A run configuration failed validation; names the offending field.
    #[error("invalid config: field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    /// Export found runs whose row schemas disagree.
    #[error("mixed schemas: {details}")]
    MixedSchemas { details: String },

    #[error("invalid waveform file: {0}")]
    WaveformFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
