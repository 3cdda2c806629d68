use thiserror::Error;

/// Errors raised by the network, buffer and environments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numeric instability in layer {layer}")]
    NumericInstability { layer: usize },

    #[error("invalid action {action} for environment with {action_count} actions")]
    InvalidAction { action: usize, action_count: usize },

    #[error("unknown environment `{0}` (expected bandit, bandit-swap or cartpole)")]
    UnknownEnvironment(String),

    #[error("cannot sample from an empty solution buffer")]
    EmptyBuffer,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
