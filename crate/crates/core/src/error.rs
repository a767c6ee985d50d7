use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("grid dimension `{name}` = {value} is below the minimum of 2")]
    TooSmall { name: &'static str, value: usize },
    #[error("momentum {0:?} lies on the polar axis; use the pole frame convention")]
    Pole([f64; 3]),
    #[error("helicity must be +1 or -1, got {0}")]
    BadHelicity(i32),
    #[error("spin axis must be 1, 2 or 3, got {0}")]
    BadAxis(usize),
    #[error("zero momentum has no direction")]
    ZeroMomentum,
    #[error("amplitudes live on different grids")]
    GridMismatch,
    #[error("vector amplitude is not transverse (max relative residual {0:.3e})")]
    NotTransverse(f64),
    #[error("grid captures only {captured:.9} of the state norm (threshold {threshold})")]
    NormLeak { captured: f64, threshold: f64 },
    #[error("finite-difference step {h} exceeds 0.1|p| = {limit}")]
    StepTooLarge { h: f64, limit: f64 },
    #[error("state provides no analytic gradient")]
    GradientUnavailable,
    #[error("lattice spacing {spacing} exceeds pi/k_max = {limit}")]
    LatticeTooCoarse { spacing: f64, limit: f64 },
    #[error("invalid state parameters: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
