use thiserror::Error;

/// Errors raised by the optimizer engines, objectives and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CemError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: `{field}` {constraint}")]
    Config {
        field: &'static str,
        constraint: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("capacity exceeded: n = {n} is larger than the limit {limit}")]
    Capacity { n: usize, limit: usize },

    #[error("objective returned a non-finite value ({0})")]
    NonFinite(f64),

    #[error(
        "window threshold disagrees with full re-sort at draw {draw}: {incremental} vs {resorted}"
    )]
    WindowOracle {
        draw: u64,
        incremental: f64,
        resorted: f64,
    },
}

impl CemError {
    pub(crate) fn config(field: &'static str, constraint: impl Into<String>) -> Self {
        CemError::Config {
            field,
            constraint: constraint.into(),
        }
    }
}

pub type Result<T, E = CemError> = std::result::Result<T, E>;
