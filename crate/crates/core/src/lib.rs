//! Croppable signatures for JPEG images.
//!
//! A signer attaches one aggregatable BLS signature per block of the image.
//! Anyone holding the signed file can crop it along block boundaries and
//! collapse the signatures of the kept blocks into a single constant-size
//! signature, without any key. A verifier with the signer's public key then
//! authenticates the cropped image.
//!
//! * [`crypto`]: pairing groups, hash-to-G1, outer ECDSA signatures.
//! * [`scheme`]: sign / crop / verify over an abstract [`BlockGrid`].
//! * [`baseline`]: the linear-size scheme with one ECDSA signature per block.
//! * [`jpeg`]: baseline JPEG parsing, block extraction, lossless crop and
//!   payload embedding in comment segments.
//! * [`pipeline`]: the above wired together on whole files.

pub mod baseline;
pub mod crypto;
pub mod error;
pub mod grid;
pub mod jpeg;
pub mod pipeline;
pub mod scheme;

mod codec;

pub use crypto::{OuterKeyPair, OuterPublicKey, SuiteId};
pub use error::{Error, JpegError, PayloadError, SchemeError};
pub use grid::{BlockGrid, CropRect};
pub use jpeg::payload::{PayloadKind, SchemeKind, SignaturePayload};
pub use jpeg::{Granularity, JpegImage};
pub use pipeline::{
    crop_image, sign_image, verify_image, SignOptions, Signature, VerifyError, VerifyReport,
};
pub use scheme::{CroppedSignature, FullSignature, VerifyFailure};
