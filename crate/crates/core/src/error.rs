use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position ({x:.6e}, {y:.6e}) m lies outside the grid")]
    OutOfExtent { x: f64, y: f64 },

    #[error("non-finite value in solver iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("solver did not converge for source {source_index} (relative update {residual:.3e})")]
    NotConverged { source_index: usize, residual: f64 },

    #[error("container magic mismatch: expected \"USCTFLD1\"")]
    BadMagic,

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-parsable category used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_)
            | Error::GridMismatch(_)
            | Error::InvalidArgument(_)
            | Error::OutOfExtent { .. } => "invalid-input",
            Error::NonFinite { .. } | Error::NotConverged { .. } => "solver",
            Error::BadMagic | Error::TruncatedPayload { .. } | Error::UnknownDtype(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
