use thiserror::Error;

/// Errors raised by space, filtration, kernel and spectral construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("atom level {0} outside the supported range 1..=16")]
    AtomLevel(u32),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid density: {0}")]
    Density(String),
    #[error("half-line spaces require a truncation window")]
    MissingWindow,
    #[error("point {0} lies outside the domain")]
    OutsideDomain(String),
    #[error("filtration depth {depth} exceeds {limit}")]
    Depth { depth: usize, limit: usize },
    #[error("level {level} outside filtration with {levels} levels")]
    Level { level: usize, levels: usize },
    #[error("cover does not cover atom {0}")]
    CoverGap(usize),
    #[error("set [{0}] is not aligned with the atom grid")]
    NotGridAligned(String),
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("kernel {kernel} is not defined on {domain}")]
    KernelDomain { kernel: String, domain: String },
    #[error("{atoms} atoms exceed the dense budget of {budget}")]
    AtomBudget { atoms: usize, budget: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
