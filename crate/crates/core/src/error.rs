use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid task, architecture, training or analysis configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of an operation (bad arm, bad observation).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Two objects that must agree (shapes, seeds, lengths) do not.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite loss during training.
    #[error("non-finite loss {loss} (episode seed {episode_seed})")]
    NonFiniteLoss { loss: f64, episode_seed: u64 },

    /// Any other numerical failure (non-convergent bisection, bad grid).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by numerical failure (maps to a distinct CLI exit code).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::Numeric(_))
    }
}
