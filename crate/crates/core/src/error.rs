//! Error type shared by every module of the crate.

/// Errors raised by model construction, estimation, and analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mode index {index} for a {dims}-dimensional grid")]
    InvalidMode { index: usize, dims: usize },

    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("invalid source parameters: {0}")]
    InvalidSources(String),

    #[error("mode {mode} has no sample pair separated by shift {shift}")]
    NotShiftInvariant { mode: usize, shift: f64 },

    #[error("matrix is not centro-Hermitian (relative residual {residual:.3e})")]
    NotCentroHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular shift-invariance system: {0}")]
    SingularInvariance(String),

    #[error("source count exceeds resolvability limit: {0}")]
    Resolvability(String),

    #[error("unsupported array geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("zero noise power")]
    ZeroNoisePower,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
