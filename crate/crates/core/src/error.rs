use thiserror::Error;

/// Errors produced by parsing, network evaluation, training, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic number: expected {expected}, found {found}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated input at byte offset {offset}: need {needed} more bytes, found {found}")]
    Truncated {
        offset: usize,
        needed: usize,
        found: usize,
    },

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("label {label} at index {index} out of range for {classes} classes")]
    LabelOutOfRange {
        label: usize,
        index: usize,
        classes: usize,
    },

    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("negative variance: {0}")]
    NegativeVariance(f64),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("training diverged: {0}")]
    DivergenceDetected(String),

    #[error("gradient mismatch: {0}")]
    GradientMismatch(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
