use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more scenario / model parameters are out of range.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("node {node} out of range (valid: {min}..={max})")]
    NodeOutOfRange { node: usize, min: usize, max: usize },

    /// Sufficient decoding condition fails at this node; no finite number of
    /// rounds is guaranteed to reach the threshold.
    #[error("node {node} is infeasible: the decoding condition cannot be met for any number of rounds")]
    Infeasible { node: usize },

    #[error("slot {slot} precedes steady state at node {node} (first steady slot is {first})")]
    Transient { node: usize, slot: i64, first: i64 },

    #[error("expansion needs {needed} terms, budget is {budget}")]
    TermBudget { needed: u128, budget: u128 },

    #[error("delay overflow at node {node} with {rounds} rounds")]
    Overflow { node: usize, rounds: u32 },

    /// Two independent evaluation routes disagreed; always a bug.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
