use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Riesz order alpha = {alpha} outside (0, {dimension})")]
    AlphaOutOfRange { alpha: f64, dimension: usize },

    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("no admissible theta pair: feasibility interval ({lo}, {hi}) is empty")]
    InfeasibleThetas { lo: f64, hi: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("iterate collapsed to zero at iteration {iteration} (norm ratio {norm_ratio:e})")]
    Collapse { iteration: usize, norm_ratio: f64 },

    #[error("resampling would alias: spectral tail fraction {0:e}")]
    Aliasing(f64),

    #[error("reflection plane lambda = {lambda} outside box half-width {half_width}")]
    PlaneOutsideBox { lambda: f64, half_width: f64 },

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
