use thiserror::Error;

use crate::graph::Violation;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid graph: {0}")]
    Validation(Violation),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("invalid pruning config: {0}")]
    InvalidConfig(String),

    #[error("influence retained is undefined: the graph carries no edge weight")]
    UndefinedInfluenceRetained,

    #[error("distributions have different supports")]
    SupportMismatch,

    #[error("at least {required} views are required, got {got}")]
    TooFewViews { required: usize, got: usize },

    #[error("views were pruned from different graphs")]
    MixedGraphs,

    #[error("tau must lie in (0, 1], got {0}")]
    InvalidTau(f64),

    #[error("budget {k} exceeds the {available} available edges")]
    BudgetTooLarge { k: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
