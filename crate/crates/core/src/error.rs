use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. The variant name doubles as the
/// stable error class printed by the command-line tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate marginal for '{0}': zero variance with a gaussian marginal")]
    DegenerateMarginal(String),
    #[error("value {value} is not an admissible level of '{name}'")]
    InvalidLevel { name: String, value: String },
    #[error("rank {rank} exceeds the maximum of {max} (training size minus one)")]
    InvalidRank { rank: usize, max: usize },
    #[error("conditioning system is singular; add jitter or observation noise")]
    SingularConditioning,
    #[error("mode {k} out of range 1..={max}")]
    InvalidMode { k: usize, max: usize },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("correspondence error: {0}")]
    CorrespondenceError(String),
    #[error("missing record: {0}")]
    MissingRecord(String),
    #[error("format error: {0}")]
    FormatError(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DegenerateMarginal(_) => "DegenerateMarginal",
            Error::InvalidLevel { .. } => "InvalidLevel",
            Error::InvalidRank { .. } => "InvalidRank",
            Error::SingularConditioning => "SingularConditioning",
            Error::InvalidMode { .. } => "InvalidMode",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::CorrespondenceError(_) => "CorrespondenceError",
            Error::MissingRecord(_) => "MissingRecord",
            Error::FormatError(_) => "FormatError",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidTask(_) => "InvalidTask",
            Error::Io(_) => "Io",
        }
    }
}
