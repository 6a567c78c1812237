//! Croppable signatures over an abstract block grid.
//!
//! The signer draws a fresh BLS key pair (k, pk) per image, signs every cell
//! as `S_ij = k·H(i, j, x_ij)` and endorses `pk` together with the grid
//! header using its long-term outer key. Cropping sums the cell signatures
//! inside the rectangle into a single G1 point, so the cropped signature has
//! the same size whatever the rectangle. Verification checks the outer
//! signature and then `e(S'', P2) == e(Σ H(i, j, x_ij), pk)`, which costs two
//! pairings regardless of the number of cells.

use group::Curve;
use rand_core::{CryptoRng, RngCore};
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::Reader;
use crate::crypto::{
    self, EphemeralKey, G1Affine, G1Projective, G2Affine, OuterKeyPair, OuterSignature, SuiteId,
    G1_BYTES, G2_BYTES, OUTER_SIG_BYTES,
};
use crate::error::SchemeError;
use crate::grid::{BlockGrid, CropRect};

/// Domain separation tag for hashing block messages into G1.
pub const HASH_TAG: &[u8] = b"CROPSIG-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
pub(crate) const HEADER_TAG: &[u8; 16] = b"cropsig/v1/headr";
pub(crate) const BLOCK_TAG: &[u8; 16] = b"cropsig/v1/block";

const HEADER_FIELDS_BYTES: usize = 1 + G2_BYTES + OUTER_SIG_BYTES + 4 + 4 + 32;

/// Serialized size of every [`CroppedSignature`].
pub const CROPPED_SIGNATURE_BYTES: usize = HEADER_FIELDS_BYTES + 16 + G1_BYTES;

/// Serialized size of a [`FullSignature`] for a `cells`-cell grid.
pub fn full_signature_bytes(cells: usize) -> usize {
    HEADER_FIELDS_BYTES + cells * G1_BYTES
}

/// The message endorsed by the outer signature: tag, suite, w, h, the
/// per-image binding (ephemeral pk or nonce) and the grid context digest.
pub fn header_message(
    tag: &[u8; 16],
    suite: SuiteId,
    width: u32,
    height: u32,
    binding: &[u8],
    context_digest: &[u8; 32],
) -> Vec<u8> {
    let mut m = Vec::with_capacity(16 + 1 + 8 + binding.len() + 32);
    m.extend_from_slice(tag);
    m.push(suite.as_byte());
    m.extend_from_slice(&width.to_be_bytes());
    m.extend_from_slice(&height.to_be_bytes());
    m.extend_from_slice(binding);
    m.extend_from_slice(context_digest);
    m
}

/// `tag || i || j || len(x) || x`, all integers big-endian.
pub fn block_message(i: u32, j: u32, block: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(BLOCK_TAG.len() + 16 + block.len());
    m.extend_from_slice(BLOCK_TAG);
    m.extend_from_slice(&i.to_be_bytes());
    m.extend_from_slice(&j.to_be_bytes());
    m.extend_from_slice(&(block.len() as u64).to_be_bytes());
    m.extend_from_slice(block);
    m
}

fn hash_block(i: u32, j: u32, block: &[u8]) -> G1Projective {
    crypto::hash_to_g1(HASH_TAG, &block_message(i, j, block))
}

/// Why a verification did not succeed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    #[error("outer signature does not authenticate the signature header")]
    OuterSignature,
    #[error("context digest of the image does not match the signed one")]
    DigestMismatch,
    #[error("block grid does not match the signed rectangle: {0}")]
    GridMismatch(String),
    #[error("signature carries an invalid group element")]
    MalformedPoint,
    #[error("aggregate signature does not match the block data")]
    Aggregate,
    #[error("block signatures invalid at {0:?}")]
    BlockSignatures(Vec<(u32, u32)>),
}

/// Signer output: S′ plus one G1 signature per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullSignature {
    pub suite: SuiteId,
    pub ephemeral_pk: G2Affine,
    pub outer_sig: OuterSignature,
    pub width: u32,
    pub height: u32,
    pub context_digest: [u8; 32],
    /// Row-major, `width * height` entries.
    pub block_sigs: Vec<G1Affine>,
}

/// Cropper output: S′ plus the aggregate S″ over a rectangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CroppedSignature {
    pub suite: SuiteId,
    pub ephemeral_pk: G2Affine,
    pub outer_sig: OuterSignature,
    pub width: u32,
    pub height: u32,
    pub context_digest: [u8; 32],
    pub rect: CropRect,
    pub aggregate: G1Affine,
}

fn write_header(
    out: &mut Vec<u8>,
    suite: SuiteId,
    pk: &G2Affine,
    sig: &OuterSignature,
    width: u32,
    height: u32,
    digest: &[u8; 32],
) {
    out.push(suite.as_byte());
    out.extend_from_slice(&crypto::g2_to_bytes(pk));
    out.extend_from_slice(sig.as_bytes());
    out.extend_from_slice(&width.to_be_bytes());
    out.extend_from_slice(&height.to_be_bytes());
    out.extend_from_slice(digest);
}

type Header = (SuiteId, G2Affine, OuterSignature, u32, u32, [u8; 32]);

fn read_header(r: &mut Reader<'_>) -> Result<Header, SchemeError> {
    let short = SchemeError::Malformed("truncated signature header");
    let suite_byte = r.u8().ok_or(short.clone())?;
    let suite = SuiteId::from_byte(suite_byte).ok_or(SchemeError::UnknownSuite(suite_byte))?;
    let pk = crypto::g2_from_bytes(r.take(G2_BYTES).ok_or(short.clone())?)?;
    let sig = OuterSignature(r.array().ok_or(short.clone())?);
    let width = r.u32().ok_or(short.clone())?;
    let height = r.u32().ok_or(short.clone())?;
    let digest = r.array().ok_or(short)?;
    Ok((suite, pk, sig, width, height, digest))
}

impl FullSignature {
    fn header_message(&self) -> Vec<u8> {
        header_message(
            HEADER_TAG,
            self.suite,
            self.width,
            self.height,
            &crypto::g2_to_bytes(&self.ephemeral_pk),
            &self.context_digest,
        )
    }

    pub fn block_sig(&self, i: u32, j: u32) -> Option<&G1Affine> {
        if i == 0 || j == 0 || i > self.height || j > self.width {
            return None;
        }
        self.block_sigs
            .get(((i - 1) * self.width + (j - 1)) as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(full_signature_bytes(self.block_sigs.len()));
        write_header(
            &mut out,
            self.suite,
            &self.ephemeral_pk,
            &self.outer_sig,
            self.width,
            self.height,
            &self.context_digest,
        );
        for s in &self.block_sigs {
            out.extend_from_slice(&crypto::g1_to_bytes(s));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SchemeError> {
        let mut r = Reader::new(bytes);
        let (suite, ephemeral_pk, outer_sig, width, height, context_digest) = read_header(&mut r)?;
        let cells = (width as usize)
            .checked_mul(height as usize)
            .filter(|&n| n > 0)
            .ok_or(SchemeError::Malformed("grid dimensions"))?;
        if cells.checked_mul(G1_BYTES) != Some(r.remaining()) {
            return Err(SchemeError::Malformed(
                "block signature count does not match grid",
            ));
        }
        let block_sigs = r
            .take(r.remaining())
            .unwrap()
            .par_chunks(G1_BYTES)
            .map(crypto::g1_from_bytes)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FullSignature {
            suite,
            ephemeral_pk,
            outer_sig,
            width,
            height,
            context_digest,
            block_sigs,
        })
    }
}

impl CroppedSignature {
    fn header_message(&self) -> Vec<u8> {
        header_message(
            HEADER_TAG,
            self.suite,
            self.width,
            self.height,
            &crypto::g2_to_bytes(&self.ephemeral_pk),
            &self.context_digest,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CROPPED_SIGNATURE_BYTES);
        write_header(
            &mut out,
            self.suite,
            &self.ephemeral_pk,
            &self.outer_sig,
            self.width,
            self.height,
            &self.context_digest,
        );
        out.extend_from_slice(&self.rect.to_bytes());
        out.extend_from_slice(&crypto::g1_to_bytes(&self.aggregate));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SchemeError> {
        if bytes.len() != CROPPED_SIGNATURE_BYTES {
            return Err(SchemeError::Malformed("cropped signature length"));
        }
        let mut r = Reader::new(bytes);
        let (suite, ephemeral_pk, outer_sig, width, height, context_digest) = read_header(&mut r)?;
        let rect = CropRect::from_bytes(&r.array().unwrap());
        let aggregate = crypto::g1_from_bytes(r.take(G1_BYTES).unwrap())?;
        Ok(CroppedSignature {
            suite,
            ephemeral_pk,
            outer_sig,
            width,
            height,
            context_digest,
            rect,
            aggregate,
        })
    }
}

/// Signs every cell of `grid` under a fresh ephemeral key.
pub fn sign_full<R: RngCore + CryptoRng>(
    key: &OuterKeyPair,
    grid: &BlockGrid,
    rng: &mut R,
) -> Result<FullSignature, SchemeError> {
    if !grid.is_full() {
        return Err(SchemeError::Malformed("cannot sign a re-based sub-grid"));
    }
    let suite = SuiteId::default();
    let eph = EphemeralKey::generate(rng)?;
    let (width, height) = (grid.width(), grid.height());
    let cells: Vec<(u32, u32)> = CropRect::whole(width, height).cells().collect();
    let projective: Vec<G1Projective> = cells
        .par_iter()
        .map(|&(i, j)| eph.sign(HASH_TAG, &block_message(i, j, grid.block(i, j).unwrap())))
        .collect();
    let mut block_sigs = vec![G1Affine::identity(); projective.len()];
    G1Projective::batch_normalize(&projective, &mut block_sigs);

    let mut full = FullSignature {
        suite,
        ephemeral_pk: *eph.public(),
        outer_sig: OuterSignature([0; OUTER_SIG_BYTES]),
        width,
        height,
        context_digest: *grid.context_digest(),
        block_sigs,
    };
    full.outer_sig = crypto::outer_sign(key, &full.header_message());
    Ok(full)
}

/// Aggregates the cell signatures inside `rect`. Needs no key material.
pub fn crop_signature(
    full: &FullSignature,
    rect: &CropRect,
) -> Result<CroppedSignature, SchemeError> {
    rect.check_within(full.width, full.height)?;
    if full.block_sigs.len() != full.width as usize * full.height as usize {
        return Err(SchemeError::Malformed(
            "block signature count does not match grid",
        ));
    }
    let aggregate = rect
        .cells()
        .map(|(i, j)| full.block_sig(i, j).unwrap())
        .fold(G1Projective::identity(), |acc, s| acc + s)
        .to_affine();
    Ok(CroppedSignature {
        suite: full.suite,
        ephemeral_pk: full.ephemeral_pk,
        outer_sig: full.outer_sig,
        width: full.width,
        height: full.height,
        context_digest: full.context_digest,
        rect: *rect,
        aggregate,
    })
}

fn hash_sum(grid: &BlockGrid, rect: &CropRect) -> G1Projective {
    let cells: Vec<(u32, u32)> = rect.cells().collect();
    cells
        .par_iter()
        .map(|&(i, j)| hash_block(i, j, grid.block(i, j).unwrap()))
        .reduce(G1Projective::identity, |a, b| a + b)
}

struct Claim<'a> {
    header: Vec<u8>,
    width: u32,
    height: u32,
    digest: &'a [u8; 32],
    pk: &'a G2Affine,
}

fn check_header_and_grid(
    signer_pk: &[u8],
    outer_sig: &OuterSignature,
    claim: &Claim<'_>,
    rect: &CropRect,
    grid: &BlockGrid,
) -> Result<(), VerifyFailure> {
    if !crypto::outer_verify(signer_pk, outer_sig.as_bytes(), &claim.header) {
        return Err(VerifyFailure::OuterSignature);
    }
    if grid.context_digest() != claim.digest {
        return Err(VerifyFailure::DigestMismatch);
    }
    if !rect.fits(claim.width, claim.height) {
        return Err(VerifyFailure::GridMismatch(format!(
            "rectangle {rect} outside {}x{} grid",
            claim.height, claim.width
        )));
    }
    if grid.covered_rect() != *rect {
        return Err(VerifyFailure::GridMismatch(format!(
            "image covers cells {} but signature covers {rect}",
            grid.covered_rect()
        )));
    }
    if bool::from(claim.pk.is_identity()) {
        return Err(VerifyFailure::MalformedPoint);
    }
    Ok(())
}

fn check_aggregate(
    aggregate: &G1Affine,
    pk: &G2Affine,
    grid: &BlockGrid,
    rect: &CropRect,
) -> Result<(), VerifyFailure> {
    let hashes = hash_sum(grid, rect).to_affine();
    let lhs = crypto::pairing(aggregate, &G2Affine::generator());
    let rhs = crypto::pairing(&hashes, pk);
    if lhs == rhs {
        Ok(())
    } else {
        Err(VerifyFailure::Aggregate)
    }
}

/// Verifies a cropped signature against the cells of the cropped image.
///
/// `sub_grid` must hold exactly the cells of `sig.rect`, addressed by their
/// original indices.
pub fn check_cropped(
    signer_pk: &[u8],
    sig: &CroppedSignature,
    sub_grid: &BlockGrid,
) -> Result<(), VerifyFailure> {
    let claim = Claim {
        header: sig.header_message(),
        width: sig.width,
        height: sig.height,
        digest: &sig.context_digest,
        pk: &sig.ephemeral_pk,
    };
    check_header_and_grid(signer_pk, &sig.outer_sig, &claim, &sig.rect, sub_grid)?;
    check_aggregate(&sig.aggregate, &sig.ephemeral_pk, sub_grid, &sig.rect)
}

pub fn verify_cropped(signer_pk: &[u8], sig: &CroppedSignature, sub_grid: &BlockGrid) -> bool {
    check_cropped(signer_pk, sig, sub_grid).is_ok()
}

/// Verifies a full signature with a single aggregate check over all cells.
pub fn check_full(
    signer_pk: &[u8],
    full: &FullSignature,
    grid: &BlockGrid,
) -> Result<(), VerifyFailure> {
    let rect = CropRect::whole(full.width, full.height);
    let claim = Claim {
        header: full.header_message(),
        width: full.width,
        height: full.height,
        digest: &full.context_digest,
        pk: &full.ephemeral_pk,
    };
    check_header_and_grid(signer_pk, &full.outer_sig, &claim, &rect, grid)?;
    if full.block_sigs.len() != rect.cell_count() {
        return Err(VerifyFailure::GridMismatch("block signature count".into()));
    }
    let aggregate = full
        .block_sigs
        .iter()
        .fold(G1Projective::identity(), |acc, s| acc + s)
        .to_affine();
    check_aggregate(&aggregate, &full.ephemeral_pk, grid, &rect)
}

pub fn verify_full(signer_pk: &[u8], full: &FullSignature, grid: &BlockGrid) -> bool {
    check_full(signer_pk, full, grid).is_ok()
}

/// Checks every cell signature on its own and lists the cells that fail.
///
/// Two pairings per cell; meant for diagnosing a full signature that failed
/// [`check_full`]. Does not check the outer signature.
pub fn locate_invalid_blocks(full: &FullSignature, grid: &BlockGrid) -> Vec<(u32, u32)> {
    let cells: Vec<(u32, u32)> = CropRect::whole(full.width, full.height).cells().collect();
    let p2 = G2Affine::generator();
    cells
        .par_iter()
        .filter(|&&(i, j)| {
            let (Some(sig), Some(block)) = (full.block_sig(i, j), grid.block(i, j)) else {
                return true;
            };
            let h = hash_block(i, j, block).to_affine();
            bls12_381::pairing(sig, &p2) != bls12_381::pairing(&h, &full.ephemeral_pk)
        })
        .copied()
        .collect()
}
