//! Model files, query strings and benchmark generators.

mod benchmarks;
mod format;
mod lexer;
mod query;

use thiserror::Error;

pub use benchmarks::{generate_benchmark, job_rate, Benchmark, BenchmarkParams, Family};
pub use format::{parse_model, serialize_model};
pub use query::{parse_query, QueryKind, QuerySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown state {state}")]
    UnknownState { line: usize, col: usize, state: String },
    #[error("{line}:{col}: duplicate declaration of {what}")]
    DuplicateDeclaration { line: usize, col: usize, what: String },
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward function \"{0}\"")]
    UnknownRewardName(String),
    #[error("query shape mismatch: {0}")]
    MixedQueryShape(String),
    #[error("invalid benchmark parameters: {0}")]
    InvalidParams(String),
}

impl IngestError {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Syntax { .. } => "SyntaxError",
            IngestError::UnknownState { .. } => "UnknownState",
            IngestError::DuplicateDeclaration { .. } => "DuplicateDeclaration",
            IngestError::UnknownLabel(_) => "UnknownLabel",
            IngestError::UnknownRewardName(_) => "UnknownRewardName",
            IngestError::MixedQueryShape(_) => "MixedQueryShape",
            IngestError::InvalidParams(_) => "InvalidParams",
        }
    }
}
