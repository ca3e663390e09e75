use alloc::string::String;
use core::fmt;

/// Failures raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    ParseLabel { id: String, reason: &'static str },
    MalformedTaxonomyLine { line: usize, reason: String },
    DuplicateLabel(String),
    OrphanLabel { id: String, parent: String },
    EmptyTaxonomy,
    UnknownLabel(String),
    InvalidConfig(String),
    ShapeMismatch { what: String, expected: usize, found: usize },
    TokenOutOfRange { id: u32, vocab_size: usize },
    NotFramed,
    EmptyLevel(usize),
    NonFinite { tensor: String },
    EmptyTrainingSet,
    EmptyBallots,
    Checkpoint(CheckpointError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointError {
    BadMagic,
    UnsupportedVersion(u32),
    Truncated,
    TaxonomyMismatch { expected: u64, found: u64 },
    Malformed(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ParseLabel { id, reason } => write!(f, "invalid label id {id:?}: {reason}"),
            Error::MalformedTaxonomyLine { line, reason } => {
                write!(f, "taxonomy line {line}: {reason}")
            }
            Error::DuplicateLabel(id) => write!(f, "duplicate label {id}"),
            Error::OrphanLabel { id, parent } => {
                write!(f, "label {id} has no parent {parent} in the taxonomy")
            }
            Error::EmptyTaxonomy => f.write_str("taxonomy definition is empty"),
            Error::UnknownLabel(id) => write!(f, "unknown label {id}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ShapeMismatch { what, expected, found } => {
                write!(f, "shape mismatch for {what}: expected {expected}, found {found}")
            }
            Error::TokenOutOfRange { id, vocab_size } => {
                write!(f, "token id {id} outside vocabulary of size {vocab_size}")
            }
            Error::NotFramed => f.write_str("token sequence is not framed"),
            Error::EmptyLevel(level) => write!(f, "label count vector for level {level} is empty"),
            Error::NonFinite { tensor } => write!(f, "non-finite gradient in {tensor}"),
            Error::EmptyTrainingSet => f.write_str("no labeled examples to train on"),
            Error::EmptyBallots => f.write_str("vote requires at least one ballot"),
            Error::Checkpoint(e) => write!(f, "checkpoint: {e}"),
        }
    }
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadMagic => f.write_str("bad magic"),
            CheckpointError::UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            CheckpointError::Truncated => f.write_str("truncated file"),
            CheckpointError::TaxonomyMismatch { expected, found } => write!(
                f,
                "taxonomy hash mismatch (checkpoint {found:016x}, taxonomy {expected:016x})"
            ),
            CheckpointError::Malformed(what) => write!(f, "malformed {what}"),
        }
    }
}

impl core::error::Error for Error {}
impl core::error::Error for CheckpointError {}

impl From<CheckpointError> for Error {
    fn from(e: CheckpointError) -> Self {
        Error::Checkpoint(e)
    }
}

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { what: what.into(), expected, found })
    }
}
