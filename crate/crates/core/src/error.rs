use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwfError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero iterate: the operation is undefined at z = 0")]
    ZeroIterate,

    #[error("negative mean intensity {0}")]
    NegativeMean(f64),

    #[error("every measurement was removed by truncation")]
    AllTruncated,

    #[error("power iteration collapsed to the zero vector")]
    PowerIterationCollapsed,

    #[error("line search failed: step fell below {0:e} without sufficient increase")]
    LineSearchUnderflow(f64),

    #[error("no strictly feasible start for the supplied signs")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, TwfError>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(TwfError::DimensionMismatch { expected, actual })
    }
}
