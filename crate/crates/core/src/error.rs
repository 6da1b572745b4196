use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or violates an invariant.
    /// `key` is the dotted path of the offending entry, e.g. `world.tile_size`.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown agent {0}")]
    UnknownAgent(crate::AgentId),

    #[error("invalid bid: {0}")]
    InvalidBid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trial failed: {0}")]
    Trial(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
