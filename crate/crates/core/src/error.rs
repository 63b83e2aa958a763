use thiserror::Error;

/// Errors raised by the tree builders, oracles and estimators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("sequence is not reducible: {0}")]
    NotReducible(String),

    #[error("target prefix run {target} unreachable: {reason}")]
    TargetUnreachable { target: usize, reason: String },

    #[error("state space exceeded: {states} states reached (cap {cap})")]
    StateSpaceExceeded { states: usize, cap: usize },

    #[error("cannot graft a tree onto itself")]
    SelfGraft,

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
