use thiserror::Error;

/// Errors produced by the design, codebook and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The requested number of streams cannot be zero-forced for this channel/precoder.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("codebook has {0} entries, at least 2 are required")]
    TooFewEntries(usize),

    #[error("permutation codebook would have {count} entries (cap {cap})")]
    TooLarge { count: u128, cap: usize },

    /// Every codebook entry leaves the effective channel rank deficient.
    #[error("no feasible codebook entry for this channel")]
    AllInfeasible,

    #[error("packing density must be supplied to evaluate the distortion bound")]
    MissingDensity,

    #[error("campaign infeasible: {skipped} of {total} channel draws skipped")]
    InfeasibleCampaign { skipped: usize, total: usize },

    #[error("malformed codebook file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
