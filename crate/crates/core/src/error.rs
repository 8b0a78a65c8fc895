use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("region does not belong to this grid")]
    RegionMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("kernel `{0}` is not certified")]
    Uncertified(String),

    #[error("unknown {kind} `{name}`; valid choices: {valid}")]
    Unknown {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
