//! Sign, crop and verify whole JPEG files.

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::baseline::{self, BaselineCroppedSignature, BaselineFullSignature};
use crate::crypto::{OuterKeyPair, OuterPublicKey, SuiteId};
use crate::error::{Error, PayloadError};
use crate::grid::{BlockGrid, CropRect};
use crate::jpeg::crop::lossless_crop;
use crate::jpeg::payload::{self, PayloadKind, SchemeKind, SignaturePayload};
use crate::jpeg::{extract_block_grid, Granularity, JpegImage};
use crate::scheme::{self, CroppedSignature, FullSignature, VerifyFailure};

/// A decoded payload body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signature {
    Full(FullSignature),
    Cropped(CroppedSignature),
    BaselineFull(BaselineFullSignature),
    BaselineCropped(BaselineCroppedSignature),
}

impl Signature {
    pub fn from_payload(p: &SignaturePayload) -> Result<Self, Error> {
        let sig = match (p.scheme, p.kind) {
            (SchemeKind::Croppable, PayloadKind::Full) => {
                Signature::Full(FullSignature::from_bytes(&p.body)?)
            }
            (SchemeKind::Croppable, PayloadKind::Cropped) => {
                Signature::Cropped(CroppedSignature::from_bytes(&p.body)?)
            }
            (SchemeKind::Baseline, PayloadKind::Full) => {
                Signature::BaselineFull(BaselineFullSignature::from_bytes(&p.body)?)
            }
            (SchemeKind::Baseline, PayloadKind::Cropped) => {
                Signature::BaselineCropped(BaselineCroppedSignature::from_bytes(&p.body)?)
            }
        };
        if sig.suite() != p.suite {
            return Err(PayloadError::Malformed(
                "suite id differs between payload and body".into(),
            )
            .into());
        }
        Ok(sig)
    }

    pub fn suite(&self) -> SuiteId {
        match self {
            Signature::Full(s) => s.suite,
            Signature::Cropped(s) => s.suite,
            Signature::BaselineFull(s) => s.suite,
            Signature::BaselineCropped(s) => s.suite,
        }
    }

    /// Grid size `(width, height)` in cells of the originally signed image.
    pub fn grid_dims(&self) -> (u32, u32) {
        match self {
            Signature::Full(s) => (s.width, s.height),
            Signature::Cropped(s) => (s.width, s.height),
            Signature::BaselineFull(s) => (s.width, s.height),
            Signature::BaselineCropped(s) => (s.width, s.height),
        }
    }

    /// Covered cells; the whole grid for full signatures.
    pub fn rect(&self) -> CropRect {
        match self {
            Signature::Cropped(s) => s.rect,
            Signature::BaselineCropped(s) => s.rect,
            _ => {
                let (w, h) = self.grid_dims();
                CropRect::whole(w, h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignOptions {
    pub scheme: SchemeKind,
    pub granularity: Granularity,
    pub certificate: Vec<u8>,
}

impl SignOptions {
    pub fn new(scheme: SchemeKind, granularity: Granularity) -> Self {
        SignOptions {
            scheme,
            granularity,
            certificate: Vec::new(),
        }
    }
}

/// Signs an unsigned image and embeds the full-signature payload.
pub fn sign_image<R: RngCore + CryptoRng>(
    key: &OuterKeyPair,
    image: &JpegImage,
    opts: &SignOptions,
    rng: &mut R,
) -> Result<JpegImage, Error> {
    if payload::chunk_count(image) > 0 {
        return Err(Error::AlreadySigned);
    }
    let grid = extract_block_grid(image, opts.granularity);
    let body = match opts.scheme {
        SchemeKind::Croppable => scheme::sign_full(key, &grid, rng)?.to_bytes(),
        SchemeKind::Baseline => baseline::baseline_sign_full(key, &grid, rng)?.to_bytes(),
    };
    let p = SignaturePayload {
        scheme: opts.scheme,
        kind: PayloadKind::Full,
        suite: SuiteId::default(),
        granularity: opts.granularity.get(),
        body,
        certificate: opts.certificate.clone(),
    };
    Ok(payload::embed_payload(image, &p)?)
}

/// Crops a fully signed image to `rect` (cell indices) and replaces the
/// payload with the matching cropped signature. Needs no key.
pub fn crop_image(image: &JpegImage, rect: &CropRect) -> Result<JpegImage, Error> {
    let p = payload::extract_payload(image)?.ok_or(Error::NotSigned)?;
    let g = Granularity::new(p.granularity)?;
    let body = match Signature::from_payload(&p)? {
        Signature::Full(full) => scheme::crop_signature(&full, rect)?.to_bytes(),
        Signature::BaselineFull(full) => baseline::baseline_crop(&full, rect)?.to_bytes(),
        Signature::Cropped(_) | Signature::BaselineCropped(_) => return Err(Error::AlreadyCropped),
    };
    let cropped = lossless_crop(&payload::strip_payload(image), rect, g)?;
    let out = SignaturePayload {
        kind: PayloadKind::Cropped,
        body,
        ..p
    };
    Ok(payload::embed_payload(&cropped, &out)?)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("no signature payload")]
    NoPayload,
    #[error("malformed signature payload: {0}")]
    Malformed(String),
    #[error("verification failed: {0}")]
    Failed(#[from] VerifyFailure),
}

impl From<Error> for VerifyError {
    fn from(e: Error) -> Self {
        VerifyError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub scheme: SchemeKind,
    pub kind: PayloadKind,
    pub suite: SuiteId,
    pub granularity: u16,
    pub width_px: u32,
    pub height_px: u32,
    /// Cell grid of the originally signed image.
    pub grid: (u32, u32),
    pub rect: CropRect,
    pub signer_fingerprint: String,
    pub certificate_bytes: usize,
}

/// Checks the pixel extent of a cropped image against the signed rectangle:
/// every side that stops short of the original edge must span whole cells.
fn check_extent(
    image: &JpegImage,
    grid: &BlockGrid,
    sig: &Signature,
    g: Granularity,
) -> Result<(), VerifyFailure> {
    let (w, h) = sig.grid_dims();
    let rect = sig.rect();
    let layout = image.layout();
    let g = g.get() as u32;
    let cell_w = g * layout.mcu_width_px;
    let cell_h = g * layout.mcu_height_px;
    if rect.j2 < w && image.width() != rect.cols() * cell_w {
        return Err(VerifyFailure::GridMismatch(format!(
            "width {} is not whole cells",
            image.width()
        )));
    }
    if rect.i2 < h && image.height() != rect.rows() * cell_h {
        return Err(VerifyFailure::GridMismatch(format!(
            "height {} is not whole cells",
            image.height()
        )));
    }
    if grid.width() != rect.cols() || grid.height() != rect.rows() {
        return Err(VerifyFailure::GridMismatch(format!(
            "image has {}x{} cells, signature covers {}x{}",
            grid.height(),
            grid.width(),
            rect.rows(),
            rect.cols()
        )));
    }
    Ok(())
}

/// Verifies an image carrying a full or cropped signature of either scheme.
pub fn verify_image(signer_pk: &[u8], image: &JpegImage) -> Result<VerifyReport, VerifyError> {
    let p = payload::extract_payload(image)
        .map_err(|e| VerifyError::Malformed(e.to_string()))?
        .ok_or(VerifyError::NoPayload)?;
    let g = Granularity::new(p.granularity).map_err(|e| VerifyError::Malformed(e.to_string()))?;
    let sig = Signature::from_payload(&p)?;
    let stripped = payload::strip_payload(image);
    let rect = sig.rect();
    let grid = extract_block_grid(&stripped, g).with_origin(rect.i1, rect.j1);
    check_extent(&stripped, &grid, &sig, g)?;

    match &sig {
        Signature::Full(s) => scheme::check_full(signer_pk, s, &grid)?,
        Signature::Cropped(s) => scheme::check_cropped(signer_pk, s, &grid)?,
        Signature::BaselineFull(s) => baseline::check_baseline_full(signer_pk, s, &grid)?,
        Signature::BaselineCropped(s) => baseline::check_baseline(signer_pk, s, &grid)?,
    }
    let fingerprint = OuterPublicKey::from_bytes(signer_pk)
        .map(|k| k.fingerprint())
        .unwrap_or_default();
    Ok(VerifyReport {
        scheme: p.scheme,
        kind: p.kind,
        suite: p.suite,
        granularity: p.granularity,
        width_px: image.width(),
        height_px: image.height(),
        grid: sig.grid_dims(),
        rect,
        signer_fingerprint: fingerprint,
        certificate_bytes: p.certificate.len(),
    })
}
