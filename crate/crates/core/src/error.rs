use thiserror::Error;

/// A text-format failure located at a byte offset of the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArenaError {
    /// A task payload or parameter set is malformed.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// An action does not belong to the episode's environment.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The operation is not valid in the episode's current state.
    #[error("state error: {0}")]
    State(String),

    /// A request exceeds a hard computational guard.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Rejection sampling ran out of attempts.
    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl ArenaError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        ArenaError::Config { field: field.into(), message: message.into() }
    }
}

pub type Result<T, E = ArenaError> = std::result::Result<T, E>;
