use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis {axis} out of range for a field of rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("derivative order {0} is not supported (maximum is 3)")]
    UnsupportedOrder(u8),

    #[error("field length {len} does not match {points}^{rank}")]
    ShapeMismatch { len: usize, points: usize, rank: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("registry does not match configuration (registry m = {registry}, config m = {config})")]
    RegistryMismatch { registry: usize, config: usize },

    #[error("assembly referenced a variable outside the registry: {0}")]
    RegistryMiss(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("system dimension {dim} exceeds the materialization cap {cap}:\n{report}")]
    CapExceeded { dim: usize, cap: usize, report: String },

    #[error("unstable step: spectral radius estimate of dt*A is {product:.3} (limit {limit})")]
    Unstable { product: f64, limit: f64 },

    #[error("integration diverged at t = {time}: block {block} reached norm {norm:e}")]
    Divergence { time: f64, block: String, norm: f64 },

    #[error("time {0} is not a sampled instant")]
    NotSampled(f64),

    #[error("reference norm is zero")]
    ZeroReference,

    #[error("mismatched series: {0}")]
    SeriesMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
