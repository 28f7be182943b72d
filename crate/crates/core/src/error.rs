use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum SmsError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("domain has an empty interior")]
    EmptyInterior,

    #[error("h too coarse for shape: narrowest gap {gap} < 4h = {}", 4.0 * h)]
    TooCoarse { gap: f64, h: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("p out of range (4,6): got {0}")]
    ExponentOutOfRange(f64),

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("CG did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNonConvergence { iterations: usize, residual: f64 },

    #[error("discrete maximum principle violated: min psi = {0:.3e}")]
    MaximumPrinciple(f64),

    #[error("u⁺ vanishes")]
    ZeroPositivePart,

    #[error("zero field")]
    ZeroField,

    #[error("projection failed: {0}")]
    Projection(String),

    #[error("point is not admissible: {0}")]
    NotAdmissible(String),

    #[error("epsilon too small for grid: eps = {eps} < 4h = {}", 4.0 * h)]
    EpsTooSmall { eps: f64, h: f64 },

    #[error("unknown topology for shape {0}")]
    UnknownTopology(String),

    #[error("all seeds failed")]
    AllSeedsFailed,

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SmsError>;
