use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("negative {0}")]
    Negative(&'static str),
    #[error("invalid camera intrinsics")]
    InvalidIntrinsics,
    #[error("non-positive depth (void pixel)")]
    VoidDepth,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("image dimensions {got:?}, expected {expected:?}")]
    Dimensions {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("feature {0} has zero variance")]
    ZeroVariance(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("unrecognized header {found:?}, expected {expected:?}")]
    Header { found: String, expected: &'static str },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
