//! The linear-size comparison scheme: one ordinary outer signature per cell.
//!
//! Without key aggregation there is no per-image BLS key to stop blocks being
//! spliced between images, so every block message is prefixed with a random
//! 16-byte image id which the header signature also covers.

use rand_core::{CryptoRng, RngCore};
use rayon::prelude::*;

use crate::codec::Reader;
use crate::crypto::{self, OuterKeyPair, OuterSignature, SuiteId, OUTER_SIG_BYTES};
use crate::error::SchemeError;
use crate::grid::{BlockGrid, CropRect};
use crate::scheme::{block_message, header_message, VerifyFailure};

pub const IMAGE_ID_BYTES: usize = 16;
const HEADER_TAG: &[u8; 16] = b"cropsig/v1/bhead";
const BLOCK_TAG: &[u8; 16] = b"cropsig/v1/bblck";
const HEADER_FIELDS_BYTES: usize = 1 + IMAGE_ID_BYTES + OUTER_SIG_BYTES + 4 + 4 + 32;

pub fn baseline_full_bytes(cells: usize) -> usize {
    HEADER_FIELDS_BYTES + cells * OUTER_SIG_BYTES
}

pub fn baseline_cropped_bytes(cells: usize) -> usize {
    HEADER_FIELDS_BYTES + 16 + cells * OUTER_SIG_BYTES
}

fn baseline_block_message(
    image_id: &[u8; IMAGE_ID_BYTES],
    i: u32,
    j: u32,
    block: &[u8],
) -> Vec<u8> {
    let mut m = Vec::with_capacity(BLOCK_TAG.len() + IMAGE_ID_BYTES + 32 + block.len());
    m.extend_from_slice(BLOCK_TAG);
    m.extend_from_slice(image_id);
    m.extend_from_slice(&block_message(i, j, block));
    m
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineFullSignature {
    pub suite: SuiteId,
    pub image_id: [u8; IMAGE_ID_BYTES],
    pub outer_sig: OuterSignature,
    pub width: u32,
    pub height: u32,
    pub context_digest: [u8; 32],
    pub block_sigs: Vec<OuterSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineCroppedSignature {
    pub suite: SuiteId,
    pub image_id: [u8; IMAGE_ID_BYTES],
    pub outer_sig: OuterSignature,
    pub width: u32,
    pub height: u32,
    pub context_digest: [u8; 32],
    pub rect: CropRect,
    /// Signatures of the cells in `rect`, row-major.
    pub block_sigs: Vec<OuterSignature>,
}

fn header(
    suite: SuiteId,
    width: u32,
    height: u32,
    image_id: &[u8; 16],
    digest: &[u8; 32],
) -> Vec<u8> {
    header_message(HEADER_TAG, suite, width, height, image_id, digest)
}

fn write_common(
    out: &mut Vec<u8>,
    suite: SuiteId,
    id: &[u8; 16],
    sig: &OuterSignature,
    w: u32,
    h: u32,
    d: &[u8; 32],
) {
    out.push(suite.as_byte());
    out.extend_from_slice(id);
    out.extend_from_slice(sig.as_bytes());
    out.extend_from_slice(&w.to_be_bytes());
    out.extend_from_slice(&h.to_be_bytes());
    out.extend_from_slice(d);
}

type Common = (SuiteId, [u8; 16], OuterSignature, u32, u32, [u8; 32]);

fn read_common(r: &mut Reader<'_>) -> Result<Common, SchemeError> {
    let short = SchemeError::Malformed("truncated baseline header");
    let s = r.u8().ok_or(short.clone())?;
    let suite = SuiteId::from_byte(s).ok_or(SchemeError::UnknownSuite(s))?;
    let id = r.array().ok_or(short.clone())?;
    let sig = OuterSignature(r.array().ok_or(short.clone())?);
    let w = r.u32().ok_or(short.clone())?;
    let h = r.u32().ok_or(short.clone())?;
    let d = r.array().ok_or(short)?;
    Ok((suite, id, sig, w, h, d))
}

fn read_sigs(r: &mut Reader<'_>, count: usize) -> Result<Vec<OuterSignature>, SchemeError> {
    if count.checked_mul(OUTER_SIG_BYTES) != Some(r.remaining()) {
        return Err(SchemeError::Malformed("baseline signature count"));
    }
    Ok((0..count)
        .map(|_| OuterSignature(r.array().unwrap()))
        .collect())
}

impl BaselineFullSignature {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(baseline_full_bytes(self.block_sigs.len()));
        write_common(
            &mut out,
            self.suite,
            &self.image_id,
            &self.outer_sig,
            self.width,
            self.height,
            &self.context_digest,
        );
        for s in &self.block_sigs {
            out.extend_from_slice(s.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SchemeError> {
        let mut r = Reader::new(bytes);
        let (suite, image_id, outer_sig, width, height, context_digest) = read_common(&mut r)?;
        let cells = (width as usize)
            .checked_mul(height as usize)
            .filter(|&n| n > 0)
            .ok_or(SchemeError::Malformed("grid dimensions"))?;
        let block_sigs = read_sigs(&mut r, cells)?;
        Ok(BaselineFullSignature {
            suite,
            image_id,
            outer_sig,
            width,
            height,
            context_digest,
            block_sigs,
        })
    }
}

impl BaselineCroppedSignature {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(baseline_cropped_bytes(self.block_sigs.len()));
        write_common(
            &mut out,
            self.suite,
            &self.image_id,
            &self.outer_sig,
            self.width,
            self.height,
            &self.context_digest,
        );
        out.extend_from_slice(&self.rect.to_bytes());
        for s in &self.block_sigs {
            out.extend_from_slice(s.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SchemeError> {
        let mut r = Reader::new(bytes);
        let (suite, image_id, outer_sig, width, height, context_digest) = read_common(&mut r)?;
        let rect = CropRect::from_bytes(
            &r.array()
                .ok_or(SchemeError::Malformed("truncated rectangle"))?,
        );
        rect.check_within(width, height)?;
        let block_sigs = read_sigs(&mut r, rect.cell_count())?;
        Ok(BaselineCroppedSignature {
            suite,
            image_id,
            outer_sig,
            width,
            height,
            context_digest,
            rect,
            block_sigs,
        })
    }
}

pub fn baseline_sign_full<R: RngCore + CryptoRng>(
    key: &OuterKeyPair,
    grid: &BlockGrid,
    rng: &mut R,
) -> Result<BaselineFullSignature, SchemeError> {
    if !grid.is_full() {
        return Err(SchemeError::Malformed("cannot sign a re-based sub-grid"));
    }
    let mut image_id = [0u8; IMAGE_ID_BYTES];
    rng.try_fill_bytes(&mut image_id)
        .map_err(|e| crypto_entropy(e.to_string()))?;
    let suite = SuiteId::default();
    let (width, height) = (grid.width(), grid.height());
    let cells: Vec<(u32, u32)> = CropRect::whole(width, height).cells().collect();
    let block_sigs = cells
        .par_iter()
        .map(|&(i, j)| {
            crypto::outer_sign(
                key,
                &baseline_block_message(&image_id, i, j, grid.block(i, j).unwrap()),
            )
        })
        .collect();
    let digest = *grid.context_digest();
    Ok(BaselineFullSignature {
        suite,
        image_id,
        outer_sig: crypto::outer_sign(key, &header(suite, width, height, &image_id, &digest)),
        width,
        height,
        context_digest: digest,
        block_sigs,
    })
}

fn crypto_entropy(msg: String) -> SchemeError {
    SchemeError::Crypto(crate::error::CryptoError::Entropy(msg))
}

/// Keeps the signatures of the cells in `rect`; nothing can be aggregated.
pub fn baseline_crop(
    full: &BaselineFullSignature,
    rect: &CropRect,
) -> Result<BaselineCroppedSignature, SchemeError> {
    rect.check_within(full.width, full.height)?;
    if full.block_sigs.len() != full.width as usize * full.height as usize {
        return Err(SchemeError::Malformed("baseline signature count"));
    }
    let block_sigs = rect
        .cells()
        .map(|(i, j)| full.block_sigs[((i - 1) * full.width + (j - 1)) as usize])
        .collect();
    Ok(BaselineCroppedSignature {
        suite: full.suite,
        image_id: full.image_id,
        outer_sig: full.outer_sig,
        width: full.width,
        height: full.height,
        context_digest: full.context_digest,
        rect: *rect,
        block_sigs,
    })
}

/// Verifies the header signature and every covered block signature.
pub fn check_baseline(
    signer_pk: &[u8],
    sig: &BaselineCroppedSignature,
    sub_grid: &BlockGrid,
) -> Result<(), VerifyFailure> {
    let msg = header(
        sig.suite,
        sig.width,
        sig.height,
        &sig.image_id,
        &sig.context_digest,
    );
    if !crypto::outer_verify(signer_pk, sig.outer_sig.as_bytes(), &msg) {
        return Err(VerifyFailure::OuterSignature);
    }
    if sub_grid.context_digest() != &sig.context_digest {
        return Err(VerifyFailure::DigestMismatch);
    }
    if !sig.rect.fits(sig.width, sig.height) || sub_grid.covered_rect() != sig.rect {
        return Err(VerifyFailure::GridMismatch(format!(
            "image covers cells {} but signature covers {}",
            sub_grid.covered_rect(),
            sig.rect
        )));
    }
    if sig.block_sigs.len() != sig.rect.cell_count() {
        return Err(VerifyFailure::GridMismatch("block signature count".into()));
    }
    let cells: Vec<(u32, u32)> = sig.rect.cells().collect();
    let bad: Vec<(u32, u32)> = cells
        .par_iter()
        .zip(sig.block_sigs.par_iter())
        .filter(|(&(i, j), s)| {
            let m = baseline_block_message(&sig.image_id, i, j, sub_grid.block(i, j).unwrap());
            !crypto::outer_verify(signer_pk, s.as_bytes(), &m)
        })
        .map(|(&c, _)| c)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(VerifyFailure::BlockSignatures(bad))
    }
}

pub fn baseline_verify(
    signer_pk: &[u8],
    sig: &BaselineCroppedSignature,
    sub_grid: &BlockGrid,
) -> bool {
    check_baseline(signer_pk, sig, sub_grid).is_ok()
}

/// Full signatures verify as a crop to the whole grid.
pub fn check_baseline_full(
    signer_pk: &[u8],
    full: &BaselineFullSignature,
    grid: &BlockGrid,
) -> Result<(), VerifyFailure> {
    let whole = baseline_crop(full, &CropRect::whole(full.width, full.height))
        .map_err(|e| VerifyFailure::GridMismatch(e.to_string()))?;
    check_baseline(signer_pk, &whole, grid)
}
