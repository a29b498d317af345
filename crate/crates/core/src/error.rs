use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent instance description.
    #[error("instance format error: {0}")]
    InstanceFormat(String),

    /// A configuration value is out of range; `field` names the offending key.
    #[error("invalid configuration `{field}`: {msg}")]
    InvalidConfig { field: String, msg: String },

    /// A hard size cap of the exhaustive geometry routines was exceeded.
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("non-adaptive sequence exhausted at round {0}")]
    SequenceExhausted(usize),

    #[error("loss {value} outside declared range [{lo}, {hi}]")]
    LossOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("bandit mode requires context-free follower utilities: {0}")]
    ContextDependentFollowers(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
