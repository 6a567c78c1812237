use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("entropy source failed: {0}")]
    Entropy(String),
    #[error("invalid encoding: {0}")]
    InvalidEncoding(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("block grid is empty")]
    EmptyGrid,
    #[error(
        "crop rectangle rows {i1}..={i2}, cols {j1}..={j2} is outside a {height}x{width} grid"
    )]
    RectOutOfRange {
        i1: u32,
        i2: u32,
        j1: u32,
        j2: u32,
        width: u32,
        height: u32,
    },
    #[error("unknown suite id {0:#04x}")]
    UnknownSuite(u8),
    #[error("malformed signature encoding: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JpegError {
    #[error("unsupported JPEG: {0}")]
    Unsupported(String),
    #[error("malformed JPEG at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("truncated JPEG at byte {offset}")]
    Truncated { offset: usize },
    #[error("granularity must be at least 1")]
    ZeroGranularity,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

impl JpegError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        JpegError::Malformed {
            offset,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("signature payload is missing chunk {index} of {total}")]
    MissingChunk { index: u8, total: u8 },
    #[error("file carries more than one signature payload")]
    MultiplePayloads,
    #[error("malformed signature payload: {0}")]
    Malformed(String),
    #[error("payload of {0} bytes does not fit in 255 comment segments")]
    TooLarge(usize),
    #[error("certificate of {0} bytes exceeds the 65535-byte limit")]
    CertificateTooLarge(usize),
}

/// Errors from the image-level sign and crop workflows.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Jpeg(#[from] JpegError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("image already carries a signature payload")]
    AlreadySigned,
    #[error("image carries no signature payload")]
    NotSigned,
    #[error("image carries a cropped signature; only full signatures can be cropped")]
    AlreadyCropped,
}
