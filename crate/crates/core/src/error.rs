use std::path::PathBuf;

use crate::config::Mode;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the engine can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// and a process exit status (see [`Error::exit_status`]) so that shell
/// harnesses can branch on the failure class.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in {0}: expected \"RDTF\"")]
    BadMagic(PathBuf),
    #[error("unsupported tensor format version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype tag {0}")]
    UnsupportedDtype(u8),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("invalid tensor contents: {0}")]
    InvalidTensor(String),
    #[error("invalid dimensions {0:?}")]
    DimOverflow(Vec<u32>),
    #[error("json error in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("manifest field `{0}` is missing")]
    MissingField(&'static str),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("root index {index} out of range for {len} tokens")]
    RootIndexOutOfRange { index: usize, len: usize },
    #[error("mask values must be 0 or 1 ({0})")]
    NonBinaryMask(String),
    #[error("referring expression is empty")]
    EmptyExpression,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no valid proposal survives sanitization")]
    NoValidProposal,
    #[error("mask is empty or covers the whole image")]
    DegenerateMask,
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("proposal set is empty")]
    EmptyProposalSet,
    #[error("mode {mode} requires `{field}`")]
    MissingInput { mode: Mode, field: &'static str },
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable error code printed on stderr by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoFailure",
            Error::BadMagic(_) => "BadMagic",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::DimOverflow(_) => "DimOverflow",
            Error::InvalidTensor(_) => "InvalidTensor",
            Error::Json { .. } => "InvalidJson",
            Error::MissingField(_) => "MissingField",
            Error::DimMismatch(_) => "DimMismatch",
            Error::RootIndexOutOfRange { .. } => "RootIndexOutOfRange",
            Error::NonBinaryMask(_) => "NonBinaryMask",
            Error::EmptyExpression => "EmptyExpression",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::NoValidProposal => "NoValidProposal",
            Error::DegenerateMask => "DegenerateMask",
            Error::ZeroVector => "ZeroVector",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyProposalSet => "EmptyProposalSet",
            Error::MissingInput { .. } => "MissingInput",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    /// Process exit status for this error. 0 is reserved for success and
    /// 2 for command-line usage errors.
    pub fn exit_status(&self) -> i32 {
        match self {
            Error::Io { .. } => 10,
            Error::BadMagic(_) => 11,
            Error::UnsupportedVersion(_) => 12,
            Error::UnsupportedDtype(_) => 13,
            Error::TruncatedPayload { .. } => 14,
            Error::DimOverflow(_) => 15,
            Error::InvalidTensor(_) => 17,
            Error::Json { .. } => 16,
            Error::MissingField(_) => 20,
            Error::DimMismatch(_) => 21,
            Error::RootIndexOutOfRange { .. } => 22,
            Error::NonBinaryMask(_) => 23,
            Error::EmptyExpression => 30,
            Error::IndexOutOfRange { .. } => 31,
            Error::NoValidProposal => 40,
            Error::DegenerateMask => 41,
            Error::ZeroVector => 42,
            Error::LengthMismatch { .. } => 43,
            Error::EmptyProposalSet => 44,
            Error::MissingInput { .. } => 50,
            Error::EmptyDataset => 51,
            Error::InvalidConfig(_) => 52,
        }
    }
}
