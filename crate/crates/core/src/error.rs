use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("disconnected variable: target node {0} does not influence the objective")]
    DisconnectedVariable(usize),

    #[error("objective must be a real 1x1 value, got {rows}x{cols}")]
    NonScalarObjective { rows: usize, cols: usize },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate projection: smallest singular value {0:e} below 1e-12")]
    DegenerateProjection(f64),

    #[error("oracle too large: {0} grid points exceeds the 1e6 limit")]
    OracleTooLarge(u128),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
