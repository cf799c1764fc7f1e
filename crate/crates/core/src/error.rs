use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("power iteration did not converge in {iters} iterations")]
    NoConvergence { iters: usize },
    #[error("matrix exponential overflowed the representable range")]
    Overflow,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty sample")]
    EmptySample,
    #[error("empty input")]
    EmptyInput,
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("moment matrix is singular or rank-deficient")]
    SingularSystem,
    #[error("design matrix is singular on a training complement")]
    SingularDesign,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("need at least {need} complete rows for column {col}, got {got}")]
    TooFewComplete { col: usize, need: usize, got: usize },
    #[error("multiple imputation needs K >= 2, got {got}")]
    TooFewImputations { got: usize },
    #[error("fold count K={k} invalid for n={n}")]
    BadK { k: usize, n: usize },
    #[error("treatment arm {arm} missing from the training complement of fold {fold}")]
    ArmMissing { fold: usize, arm: u8 },
    #[error("residual moments are degenerate: mu4 - 1 - mu3^2 = {value:.3e}")]
    DegenerateMoments { value: f64 },
    #[error("tilt radius unreachable within the bracket [0, {cap:.3e}]")]
    NoSolutionInBracket { cap: f64 },
    #[error("missingness weights reference invalid columns")]
    BadColumns,
    #[error("value {value} outside the open unit interval")]
    OutOfUnitInterval { value: f64 },
    #[error("shrinkage risk identity requires d >= 3, got {got}")]
    DimensionTooSmall { got: usize },
    #[error("Sinkhorn marginal violation {violation:.3e} after {iters} iterations; raise epsilon")]
    NonConvergence { iters: usize, violation: f64 },
    #[error("non-finite state encountered during integration")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("model i/o: {0}")]
    ModelIo(String),
}

pub type Result<T> = std::result::Result<T, Error>;
