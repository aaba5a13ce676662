use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("signal too short: need {needed} samples, got {actual}")]
    Length { needed: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pilot capacity exceeded: {users} users x {taps} taps > {subcarriers} subcarriers")]
    Capacity {
        users: usize,
        taps: usize,
        subcarriers: usize,
    },

    #[error("ill-posed estimation model: {0}")]
    IllPosed(String),

    #[error("degenerate pulse: energy {energy:e} below threshold")]
    DegeneratePulse { energy: f64 },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed channel table at line {line}: {message}")]
    Table { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
