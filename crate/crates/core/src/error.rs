//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coin matrix is not unitary (max |C†C - I| entry = {deviation:.3e})")]
    NonUnitaryCoin { deviation: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("initial coin state has norm {norm} (must be 1 within 1e-12)")]
    UnnormalizedInitialState { norm: f64 },

    #[error("invalid shift set: {context}")]
    InvalidShiftSet { context: String },

    #[error("fourier family parameters must satisfy 2|a|^2 + 2|b|^2 = 1 (got {got})")]
    UnnormalizedFamilyParameters { got: f64 },

    #[error("eigensolver failed to converge at k = {k:?} (residual {residual:.3e})")]
    EigensolverFailure { k: Vec<f64>, residual: f64 },

    #[error("grid too small for exact quadrature: N = {n} but N >= {required} needed for T = {t}")]
    GridTooSmall { n: usize, required: usize, t: usize },

    #[error("band continuation ambiguous at grid index {index:?}")]
    BandDiscontinuity { index: Vec<usize> },

    #[error("fit window contains {found} positive points, need at least {required}")]
    InsufficientPositivePoints { found: usize, required: usize },

    #[error("decay-exponent fit is inconclusive: {context}")]
    InconclusiveFit { context: String },

    #[error("every stationary feature is filtered out by the initial state")]
    NoFeatureSurvives { fastest_filtered: Option<f64> },

    #[error("momentum grid does not retain eigenvectors (rebuild with retain_vectors)")]
    MissingEigenvectors,
}

pub type Result<T> = std::result::Result<T, Error>;
