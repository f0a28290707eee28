use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("bad class label {label} (expected an integer in 0..{classes})")]
    BadLabel { label: f64, classes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("class {0} is absent from the training data")]
    DegenerateClass(usize),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue estimate {0:e})")]
    NonPsd(f64),

    #[error("constraint set is empty: {0}")]
    Infeasible(String),

    #[error("test row {0} has no positive basis value")]
    DegenerateBasis(usize),

    #[error("partition into {parts} components of {items} items leaves a component empty")]
    PartitionTooFine { parts: usize, items: usize },

    #[error("kernel matrix of {entries} entries exceeds the budget of {budget}")]
    MemoryBudget { entries: usize, budget: usize },

    #[error("could not satisfy sampling constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("class {0} is missing from the base test pool")]
    ClassMissingInPool(usize),

    #[error("split left one side empty after {0} attempts")]
    DegenerateSplit(usize),

    #[error("fold {fold} cannot train a model: {reason}")]
    FoldTooSmall { fold: usize, reason: String },

    #[error("no critical value tabulated for K={k}, alpha={alpha}")]
    UnsupportedK { k: usize, alpha: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of an optimization routine rather than bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::NonPsd(_)
                | Error::SingularSystem
                | Error::DegenerateBasis(_)
                | Error::MemoryBudget { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
