use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unstable: spectral radius ≥ 1 (got {radius:.6})")]
    Unstable { radius: f64 },

    #[error("frequency index {j} is outside the Fourier grid of size {n}")]
    Index { j: i64, n: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Lyapunov iteration did not converge after {iterations} steps (residual {residual:e})")]
    Lyapunov { iterations: usize, residual: f64 },

    #[error("degenerate channel {channel}: diagonal {value:e} below floor {floor:e}")]
    DegenerateChannel {
        channel: usize,
        value: f64,
        floor: f64,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema version mismatch: expected \"{expected}\", found \"{found}\"")]
    SchemaVersion { expected: String, found: String },

    #[error("missing threshold for frequency index {0}")]
    MissingLambda(i64),

    #[error("frequency sets differ between estimate and truth")]
    FrequencyMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code for the CLI: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Index { .. } | Error::MissingLambda(_) => 2,
            Error::Numerical(_) | Error::Lyapunov { .. } => 4,
            Error::Unstable { .. }
            | Error::DegenerateChannel { .. }
            | Error::Parse { .. }
            | Error::SchemaVersion { .. }
            | Error::FrequencyMismatch
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 3,
        }
    }
}
