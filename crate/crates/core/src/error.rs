use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm below 1e-12")]
    ZeroVector,
    #[error("k = {k} out of range for length {len}")]
    BadK { k: usize, len: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("batch of {0} rows is too small; need at least 2")]
    BatchTooSmall(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("implicit alignment requested without a trained alignment model")]
    MissingAlignModel,
    #[error("unknown modality {0:?}")]
    BadModality(String),
    #[error("no neuron has both vision and language samples")]
    NoEvaluableNeurons,
    #[error("requested {requested} neurons but only {available} are live")]
    NotEnoughNeurons { requested: usize, available: usize },
    #[error("concept activation is all zero")]
    ZeroActivation,
    #[error("class set is empty")]
    EmptyClassSet,
    #[error("token mean differs from the pooled representation by {0:e}")]
    MeanMismatch(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    BadSpec(String),
    #[error("cannot split an empty set")]
    EmptySet,
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Data/format problems as opposed to numerical ones; used by the CLI to
    /// pick an exit code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyDataset
                | Error::EmptySet
                | Error::BadMagic(_)
                | Error::BadVersion(_)
                | Error::TruncatedFile { .. }
                | Error::DimMismatch(_)
                | Error::KindMismatch { .. }
                | Error::Malformed(_)
                | Error::MissingAlignModel
                | Error::Io(_)
        )
    }
}
