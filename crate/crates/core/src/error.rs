use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into two families: configuration problems (bad input,
/// unreadable files, inconsistent dimensions) and numerical contract
/// violations (singular matrices, non-Hermitian operators). The CLI maps
/// the two families onto distinct exit codes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network specification: {0}")]
    Spec(String),

    #[error("structure not present: {0}")]
    StructureNotPresent(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },

    #[error(
        "s0*I + iH is singular at s0 = {s0_re}{s0_im:+}i (condition {condition:.3e}); \
         retry with an offset such as s0 = {suggested:e}"
    )]
    FrequencySingular {
        s0_re: f64,
        s0_im: f64,
        condition: f64,
        suggested: f64,
    },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("perturbation lies on the mu boundary: I - G11*Delta is singular")]
    AtMuBoundary,

    #[error("problem too large for brute force: dimension {dim} exceeds {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration errors, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonHermitian { .. }
            | Error::FrequencySingular { .. }
            | Error::Singular(_)
            | Error::AtMuBoundary => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
