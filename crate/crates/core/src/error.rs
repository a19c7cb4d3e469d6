use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singlet fraction {0} outside [0, 1]")]
    SingletFractionDomain(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid row pair: {0}")]
    InvalidRows(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("number of pairs {n} outside supported range {min}..={max}")]
    PairCount { n: usize, min: usize, max: usize },

    #[error("pair index {k} outside 1..={n}")]
    PairIndex { k: usize, n: usize },

    #[error("post-selection never succeeds (unnormalized trace {0:e})")]
    DegenerateSelection(f64),

    #[error("degenerate vectors: {0}")]
    Degenerate(String),

    #[error("direction vector is not unit norm (|v| = {0})")]
    NonUnitDirection(f64),

    #[error("correlation matrix has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),
}
