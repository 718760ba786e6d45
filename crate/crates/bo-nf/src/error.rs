use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected at least {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },

    #[error("series is not real (pairing defect {defect:.3e})")]
    NotReal { defect: f64 },

    #[error("series is not mean-zero (c_0 = {value:.3e})")]
    NotMeanZero { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("phase normalization ill-conditioned at index {index} (|inner product| = {value:.3e})")]
    IllConditionedPhase { index: usize, value: f64 },

    #[error("near-degenerate eigenvalues at index {index} (separation {separation:.3e})")]
    NearDegenerate { index: usize, separation: f64 },

    #[error("index {index} outside the trusted band n <= {band}")]
    OutsideBand { index: usize, band: usize },

    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("rank-deficient Jacobian (smallest singular value {sigma:.3e})")]
    RankDeficient { sigma: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("state left the neighbourhood at tau = {tau:.4} (|z_perp|_0 = {norm:.3e}, radius {radius:.3e})")]
    NeighbourhoodExit { tau: f64, norm: f64, radius: f64 },

    #[error("blow-up detected at t = {t:.4} (norm ratio {ratio:.3e})")]
    BlowUp { t: f64, ratio: f64 },

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
