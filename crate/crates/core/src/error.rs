use thiserror::Error;

/// Errors shared by all laboratory modules.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time index {index} outside materialized horizon ±{horizon}")]
    HorizonExceeded { index: i64, horizon: i64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("pullback iteration failed to converge: {0}")]
    NonConvergence(String),

    #[error("density lower bound violated: {0}")]
    DegenerateDensity(String),

    #[error("decay fit failed: {0}")]
    FitFailed(String),

    #[error("series tail failed its geometric envelope: {0}")]
    TailNotConverged(String),

    #[error("observable is not a coboundary: {0}")]
    NotACoboundary(String),

    #[error("reference measures are not equivariant: {0}")]
    NonEquivariantMeasure(String),

    #[error("adjacency window is not primitive: {0}")]
    NotPrimitive(String),

    #[error("points do not share the symbol at time zero")]
    NotBracketable,

    #[error("spectral truncation exceeded its budget: {0}")]
    TruncationExceeded(String),

    #[error("power iteration lost the spectral gap: {0}")]
    NoSpectralGap(String),
}
