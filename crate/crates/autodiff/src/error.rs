use thiserror::Error;

pub type Result<T> = std::result::Result<T, AdError>;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} does not fit shape {shape:?}")]
    BadBuffer { shape: (usize, usize), len: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("{0}: empty operand list")]
    Empty(&'static str),
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
