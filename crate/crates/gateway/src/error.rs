use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GatewayError {
    /// The endpoint could not be reached or kept failing after every retry.
    #[error("transport failure after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        message: String,
        attempts: u32,
    },

    /// The endpoint answered but cannot provide what was asked for.
    #[error("{0}")]
    Capability(String),

    #[error("malformed endpoint response: {0}")]
    Decode(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("requested {requested} items but the dataset has {available}")]
    Size { requested: usize, available: usize },

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Core(#[from] pacroute_core::CoreError),
}

impl GatewayError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}
