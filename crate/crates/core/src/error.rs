use thiserror::Error;

/// Numerical and domain failures raised by the reconstruction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{matrix} is singular or near-singular (condition number {condition:e}, H1 {h1_bits} bits)")]
    Singular {
        matrix: &'static str,
        condition: f64,
        h1_bits: f64,
    },

    #[error("{0} is the zero matrix")]
    ZeroMatrix(&'static str),

    #[error("terminal current magnitude must be positive, got {0}")]
    NonPositiveCurrent(f64),

    #[error("invalid physical constant {name}: {value}")]
    InvalidConstant { name: &'static str, value: f64 },

    #[error("exhaustive search over {subsets} subsets exceeds the budget of {budget}; use the greedy strategy")]
    BudgetExceeded { subsets: u128, budget: u64 },

    #[error("subset size {k} is invalid for {available} sensors")]
    InvalidSubsetSize { k: usize, available: usize },

    #[error("unsupported VSH truncation degree {0}; only l_max = 1 is evaluated")]
    UnsupportedDegree(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{method} failed for orientation {label}: {source}")]
    Estimation {
        label: String,
        method: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
