use thiserror::Error;

pub type Result<T> = std::result::Result<T, BjnsError>;

#[derive(Debug, Error)]
pub enum BjnsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cache out of sync with state (cache at theta v{cache_theta}/diag v{cache_diag}, state at theta v{state_theta}/diag v{state_diag})")]
    StaleCache {
        cache_theta: u64,
        cache_diag: u64,
        state_theta: u64,
        state_diag: u64,
    },

    #[error("not enough samples: need {needed}, have {available}")]
    NotEnoughSamples { needed: usize, available: usize },

    #[error("refused: {0}")]
    Refused(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl BjnsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        BjnsError::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            BjnsError::Numeric(_) | BjnsError::Degenerate(_) | BjnsError::StaleCache { .. }
        )
    }
}
