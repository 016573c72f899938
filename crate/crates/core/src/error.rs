use std::io;

use thiserror::Error;

use crate::rds::RdsTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("log-density is not available for {0}")]
    UnsupportedDensity(&'static str),

    #[error("recruitment exhausted after {} of the requested participants", .partial.len())]
    TraceExhausted { partial: Box<RdsTrace> },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("component with {size} nodes exceeds the exact-enumeration limit of {limit}")]
    Capacity { size: usize, limit: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no replicate of the regime completed ({0} failures)")]
    NoReplicates(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }
}
