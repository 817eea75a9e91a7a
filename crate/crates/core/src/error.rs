use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("unsupported image format (magic {0:?})")]
    UnsupportedFormat(String),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("truncated image data: expected {expected} bytes, found {found}")]
    TruncatedImage { expected: usize, found: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("invalid vertex set: {0}")]
    InvalidVertexSet(String),

    #[error("zero-area triangle {0} during assembly")]
    ZeroAreaTriangle(usize),
    #[error("system is singular: {0}")]
    Singular(String),
    #[error("conjugate gradients diverged after {iterations} iterations")]
    Divergence { iterations: usize },
    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("payload: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("payload: unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("payload: truncated, expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("payload: {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("payload: duplicate position {0}")]
    DuplicatePosition(u32),
    #[error("payload: position {position} outside {width}x{height} image")]
    PositionOutOfRange { position: u32, width: u32, height: u32 },
    #[error("payload: {0}")]
    InvalidPayload(String),
}

impl Error {
    /// Whether the error originates in a numerical routine rather than
    /// input validation or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroAreaTriangle(_)
                | Error::Singular(_)
                | Error::Divergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Degenerate(_)
        )
    }
}
