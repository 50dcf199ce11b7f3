use thiserror::Error;

/// Errors raised while validating or preprocessing raw input rows.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("input is empty")]
    EmptyInput,
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("keys not strictly ascending at row {row}")]
    UnsortedKeys { row: usize },
}

/// Errors raised by the minimax fitting layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("degree {deg} out of supported range {min}..={max}")]
    DegreeOutOfRange { deg: usize, min: usize, max: usize },
    #[error("LP solver failure: {0}")]
    SolverFailure(String),
}

/// Errors raised by segmentation routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("instance of {len} samples exceeds the DP oracle cap of {cap}")]
    InstanceTooLarge { len: usize, cap: usize },
}

/// Errors raised while building an index.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("quad tree exceeded max depth {max_depth}; delta likely unachievable")]
    MaxDepthExceeded { max_depth: usize },
}

/// Errors raised at query time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("invalid range: lower bound {lo} exceeds upper bound {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error(
        "absolute guarantee mismatch: eps_abs {eps} requires build delta {required}, index was built with delta {actual}"
    )]
    GuaranteeMismatch { eps: f64, required: f64, actual: f64 },
}
