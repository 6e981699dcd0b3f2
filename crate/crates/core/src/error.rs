use thiserror::Error;

/// Invalid or inconsistent configuration (waveform, scene, profile, model).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("configuration violates `{relation}`: {detail}")]
    Inconsistent { relation: &'static str, detail: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
}

impl ConfigError {
    pub(crate) fn inconsistent(relation: &'static str, detail: impl Into<String>) -> Self {
        ConfigError::Inconsistent { relation, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("map of {rows}x{cols} cells is smaller than the CFAR window ({needed} cells per dimension)")]
    MapTooSmall { rows: usize, cols: usize, needed: usize },
    #[error("invalid CFAR parameters: {0}")]
    CfarParams(String),
    #[error("cube dimensions {got:?} do not match the waveform {expected:?}")]
    CubeShape { got: (usize, usize, usize), expected: (usize, usize, usize) },
}

/// Frames or columns presented out of order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("frame {got} presented after frame {last}")]
pub struct OrderingError {
    pub last: u64,
    pub got: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape { op: &'static str, expected: String, got: String },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        NnError::Shape { op, expected: format!("{expected:?}"), got: format!("{got:?}") }
    }
}

/// Malformed binary file; `offset` is the byte position where decoding failed.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {version} at offset {offset}")]
    Version { version: u32, offset: u64 },
    #[error("file truncated at offset {offset} while reading {what}")]
    Truncated { offset: u64, what: &'static str },
    #[error("invalid {what} at offset {offset}: {detail}")]
    Invalid { offset: u64, what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("dataset generation failed: {0}")]
    Generation(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
