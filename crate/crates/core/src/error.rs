use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate kernel: every weight is zero")]
    DegenerateKernel,
    #[error("height-invariance violated: kernel weights sum to {sum}, not 0")]
    HeightInvariance { sum: String },
    #[error("invalid edge offset {0}: edge offsets are half-integers n/2 with n odd")]
    InvalidOffset(String),
    #[error("cannot parse kernel literal {literal:?}: {reason}")]
    KernelLiteral { literal: String, reason: String },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step counter overflow after {0} steps")]
    RunLength(u64),
    #[error("gradient profile does not fit in window [-{window}, {window}]")]
    WindowOverflow { window: i64 },
    #[error("kernel is not positive definite; the Gibbs weight is not normalizable")]
    NotPositiveDefinite,
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
