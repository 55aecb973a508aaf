use std::io;

use crate::types::EventType;

/// Errors raised across the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown event type: {0:?}")]
    UnknownEventType(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("no events fall inside the requested window")]
    EmptyWindow,

    #[error("event type {0} has no bipartite network")]
    UnsupportedEventType(EventType),

    #[error("cannot split {vertices} vertices into {parts} balanced parts")]
    InfeasibleBalance { vertices: usize, parts: usize },

    #[error("unknown user: {0}")]
    UnknownUser(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cannot sample from an empty rank")]
    EmptyRank,

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("beta {beta} must be below 1/spectral radius = {limit}")]
    BetaTooLarge { beta: f64, limit: f64 },

    #[error("target has fewer than two distinct values")]
    DegenerateTarget,

    #[error("rbo persistence must lie in (0, 1), got {0}")]
    BadPersistence(f64),

    #[error("all ground-truth values are equal")]
    DegenerateTruth,

    #[error("community is empty")]
    EmptyCommunity,

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model step failed for user {user}: {source}")]
    Step {
        user: String,
        #[source]
        source: Box<Error>,
    },
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::MalformedRecord {
                line: 0,
                reason: format!("{other:?}"),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Snapshot(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
