//! Pairing-group arithmetic, hash-to-G1 and the outer (non-aggregatable)
//! signature scheme.
//!
//! The pairing suite is BLS12-381: block signatures live in G1 (48-byte
//! compressed), ephemeral public keys in G2 (96-byte compressed). The outer
//! scheme that endorses each ephemeral key is ECDSA over P-256 with SHA-256
//! and RFC 6979 nonces; signatures are the fixed 64-byte `r || s` form.

use std::cell::Cell;

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use ff::Field;
use group::Curve;
use p256::ecdsa::signature::{Signer, Verifier};
use rand_core::{CryptoRng, RngCore};

pub use bls12_381::{G1Affine, G1Projective, G2Affine, G2Projective, Gt, Scalar};

use crate::error::CryptoError;

/// Compressed G1 point length.
pub const G1_BYTES: usize = 48;
/// Compressed G2 point length.
pub const G2_BYTES: usize = 96;
/// Canonical scalar length.
pub const SCALAR_BYTES: usize = 32;
/// Outer signature length (`r || s`, big-endian, fixed width).
pub const OUTER_SIG_BYTES: usize = 64;
/// Outer public key length (SEC1 compressed).
pub const OUTER_PK_BYTES: usize = 33;
/// Outer private key length.
pub const OUTER_SK_BYTES: usize = 32;

/// Identifies the pairing curve and outer scheme a signature was made with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum SuiteId {
    /// BLS12-381 block signatures, ECDSA P-256/SHA-256 outer signature.
    #[default]
    Bls12381P256 = 0x01,
}

impl SuiteId {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(SuiteId::Bls12381P256),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::Bls12381P256 => "BLS12-381/ECDSA-P256",
        }
    }
}

/// Static description of the pairing groups the scheme is built on.
#[derive(Debug, Clone, Copy)]
pub struct PairingSuite {
    pub id: SuiteId,
    pub g1_generator: G1Affine,
    pub g2_generator: G2Affine,
    /// Big-endian bytes of the prime group order r.
    pub group_order: [u8; 32],
    pub security_bits: u32,
}

/// r = 0x73eda753...00000001
const BLS12_381_ORDER: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05,
    0x53, 0xbd, 0xa4, 0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

impl PairingSuite {
    pub fn bls12_381() -> Self {
        PairingSuite {
            id: SuiteId::Bls12381P256,
            g1_generator: G1Affine::generator(),
            g2_generator: G2Affine::generator(),
            group_order: BLS12_381_ORDER,
            security_bits: 120,
        }
    }

    pub fn for_id(id: SuiteId) -> Self {
        match id {
            SuiteId::Bls12381P256 => Self::bls12_381(),
        }
    }
}

/// Hashes `message` to the prime-order subgroup of G1 under `domain_tag`.
///
/// # Panics
///
/// Panics if `domain_tag` is empty or longer than 255 bytes.
pub fn hash_to_g1(domain_tag: &[u8], message: &[u8]) -> G1Projective {
    assert!(
        !domain_tag.is_empty() && domain_tag.len() <= 255,
        "domain tag must be 1..=255 bytes"
    );
    <G1Projective as HashToCurve<ExpandMsgXmd<sha2::Sha256>>>::hash_to_curve(message, domain_tag)
}

/// Draws a uniformly random nonzero scalar. Entropy failures are reported, not
/// retried.
pub fn scalar_random<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Scalar, CryptoError> {
    loop {
        let mut wide = [0u8; 64];
        rng.try_fill_bytes(&mut wide)
            .map_err(|e| CryptoError::Entropy(e.to_string()))?;
        let k = Scalar::from_bytes_wide(&wide);
        if !bool::from(k.is_zero()) {
            return Ok(k);
        }
    }
}

pub fn g1_scalar_mul(k: &Scalar, p: &G1Projective) -> G1Projective {
    p * k
}

pub fn g1_add(a: &G1Projective, b: &G1Projective) -> G1Projective {
    a + b
}

pub fn g2_scalar_mul(k: &Scalar, p: &G2Projective) -> G2Projective {
    p * k
}

thread_local! {
    static PAIRINGS: Cell<u64> = const { Cell::new(0) };
}

/// Computes e(a, b). Every call is counted per thread, see [`pairing_count`].
pub fn pairing(a: &G1Affine, b: &G2Affine) -> Gt {
    PAIRINGS.with(|c| c.set(c.get() + 1));
    bls12_381::pairing(a, b)
}

/// Number of pairings evaluated on the current thread so far.
pub fn pairing_count() -> u64 {
    PAIRINGS.with(Cell::get)
}

pub fn g1_to_bytes(p: &G1Affine) -> [u8; G1_BYTES] {
    p.to_compressed()
}

/// Decodes a compressed G1 point, rejecting off-curve and wrong-subgroup input.
pub fn g1_from_bytes(bytes: &[u8]) -> Result<G1Affine, CryptoError> {
    let arr: &[u8; G1_BYTES] = bytes
        .try_into()
        .map_err(|_| CryptoError::InvalidEncoding("G1 point length"))?;
    Option::from(G1Affine::from_compressed(arr)).ok_or(CryptoError::InvalidEncoding("G1 point"))
}

pub fn g2_to_bytes(p: &G2Affine) -> [u8; G2_BYTES] {
    p.to_compressed()
}

pub fn g2_from_bytes(bytes: &[u8]) -> Result<G2Affine, CryptoError> {
    let arr: &[u8; G2_BYTES] = bytes
        .try_into()
        .map_err(|_| CryptoError::InvalidEncoding("G2 point length"))?;
    Option::from(G2Affine::from_compressed(arr)).ok_or(CryptoError::InvalidEncoding("G2 point"))
}

/// Canonical little-endian scalar encoding.
pub fn scalar_to_bytes(k: &Scalar) -> [u8; SCALAR_BYTES] {
    k.to_bytes()
}

pub fn scalar_from_bytes(bytes: &[u8]) -> Result<Scalar, CryptoError> {
    let arr: &[u8; SCALAR_BYTES] = bytes
        .try_into()
        .map_err(|_| CryptoError::InvalidEncoding("scalar length"))?;
    Option::from(Scalar::from_bytes(arr)).ok_or(CryptoError::InvalidEncoding("scalar not reduced"))
}

/// Per-image BLS key pair (k, pk = k·P2).
#[derive(Clone)]
pub struct EphemeralKey {
    secret: Scalar,
    public: G2Affine,
}

impl EphemeralKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Self, CryptoError> {
        let secret = scalar_random(rng)?;
        let public = g2_scalar_mul(&secret, &G2Projective::generator()).to_affine();
        Ok(EphemeralKey { secret, public })
    }

    pub fn public(&self) -> &G2Affine {
        &self.public
    }

    /// Signs a message with the ephemeral key: k·H(tag, message).
    pub fn sign(&self, domain_tag: &[u8], message: &[u8]) -> G1Projective {
        g1_scalar_mul(&self.secret, &hash_to_g1(domain_tag, message))
    }
}

impl std::fmt::Debug for EphemeralKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EphemeralKey")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// The signer's long-term key pair for the outer signature scheme.
#[derive(Clone)]
pub struct OuterKeyPair {
    signing: p256::ecdsa::SigningKey,
}

impl OuterKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        OuterKeyPair {
            signing: p256::ecdsa::SigningKey::random(rng),
        }
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        p256::ecdsa::SigningKey::from_slice(bytes)
            .map(|signing| OuterKeyPair { signing })
            .map_err(|_| CryptoError::InvalidEncoding("outer private key"))
    }

    pub fn secret_bytes(&self) -> [u8; OUTER_SK_BYTES] {
        self.signing.to_bytes().into()
    }

    pub fn public_key(&self) -> OuterPublicKey {
        OuterPublicKey(*self.signing.verifying_key())
    }
}

impl std::fmt::Debug for OuterKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuterKeyPair")
            .field("public", &self.public_key())
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct OuterPublicKey(p256::ecdsa::VerifyingKey);

impl OuterPublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        p256::ecdsa::VerifyingKey::from_sec1_bytes(bytes)
            .map(OuterPublicKey)
            .map_err(|_| CryptoError::InvalidEncoding("outer public key"))
    }

    pub fn to_bytes(&self) -> [u8; OUTER_PK_BYTES] {
        let point = self.0.to_encoded_point(true);
        point
            .as_bytes()
            .try_into()
            .expect("compressed P-256 point is 33 bytes")
    }

    /// First 8 bytes of SHA-256 over the compressed key, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::Digest;
        let digest = sha2::Sha256::digest(&self.to_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for OuterPublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OuterPublicKey({})", self.fingerprint())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct OuterSignature(pub [u8; OUTER_SIG_BYTES]);

impl OuterSignature {
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(OuterSignature)
    }

    pub fn as_bytes(&self) -> &[u8; OUTER_SIG_BYTES] {
        &self.0
    }
}

impl std::fmt::Debug for OuterSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OuterSignature(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

pub fn outer_sign(key: &OuterKeyPair, message: &[u8]) -> OuterSignature {
    let sig: p256::ecdsa::Signature = key.signing.sign(message);
    OuterSignature(sig.to_bytes().into())
}

/// Verifies an outer signature. Malformed keys or signatures yield `false`.
pub fn outer_verify(public_key: &[u8], sig: &[u8], message: &[u8]) -> bool {
    let Ok(pk) = OuterPublicKey::from_bytes(public_key) else {
        return false;
    };
    let Ok(sig) = p256::ecdsa::Signature::from_slice(sig) else {
        return false;
    };
    pk.0.verify(message, &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    const TAG: &[u8] = b"cropsig-test-tag";

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    #[test]
    fn hash_is_deterministic_and_not_identity() {
        let a = hash_to_g1(TAG, b"hello");
        let b = hash_to_g1(TAG, b"hello");
        assert_eq!(a, b);
        assert!(!bool::from(a.is_identity()));
        assert!(bool::from(a.to_affine().is_torsion_free()));
    }

    #[test]
    fn hash_separates_messages_and_tags() {
        let mut rng = rng();
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let mut m = [0u8; 24];
            rng.fill_bytes(&mut m);
            let mut tag = [0u8; 12];
            rng.fill_bytes(&mut tag);
            assert!(seen.insert(g1_to_bytes(&hash_to_g1(TAG, &m).to_affine())));
            assert!(seen.insert(g1_to_bytes(&hash_to_g1(&tag, &m).to_affine())));
        }
    }

    #[test]
    #[should_panic]
    fn empty_tag_rejected() {
        hash_to_g1(b"", b"x");
    }

    #[test]
    fn scalars_are_nonzero_and_unique() {
        let mut rng = rng();
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let k = scalar_random(&mut rng).unwrap();
            assert!(!bool::from(k.is_zero()));
            // from_bytes only accepts canonical (< r) encodings
            assert_eq!(scalar_from_bytes(&scalar_to_bytes(&k)).unwrap(), k);
            assert!(seen.insert(scalar_to_bytes(&k)));
        }
    }

    struct FailingRng;
    impl RngCore for FailingRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, _: &mut [u8]) {}
        fn try_fill_bytes(&mut self, _: &mut [u8]) -> Result<(), rand_core::Error> {
            Err(rand_core::Error::from(
                core::num::NonZeroU32::new(rand_core::Error::CUSTOM_START).unwrap(),
            ))
        }
    }
    impl CryptoRng for FailingRng {}

    #[test]
    fn entropy_failure_is_reported() {
        assert!(matches!(
            scalar_random(&mut FailingRng),
            Err(CryptoError::Entropy(_))
        ));
    }

    #[test]
    fn group_identities() {
        let p = hash_to_g1(TAG, b"p");
        assert_eq!(g1_scalar_mul(&Scalar::ONE, &p), p);
        assert_eq!(g1_add(&p, &G1Projective::identity()), p);
        let mut rng = rng();
        let a = scalar_random(&mut rng).unwrap();
        let b = scalar_random(&mut rng).unwrap();
        assert_eq!(
            g1_scalar_mul(&(a + b), &p),
            g1_add(&g1_scalar_mul(&a, &p), &g1_scalar_mul(&b, &p))
        );
    }

    #[test]
    fn pairing_identity_and_bilinearity() {
        let p1 = G1Affine::generator();
        let p2 = G2Affine::generator();
        assert_eq!(pairing(&G1Affine::identity(), &p2), Gt::identity());
        assert_ne!(pairing(&p1, &p2), Gt::identity());
        let k = scalar_random(&mut rng()).unwrap();
        let lhs = pairing(&(p1 * k).to_affine(), &p2);
        let rhs = pairing(&p1, &(p2 * k).to_affine());
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, pairing(&p1, &p2) * k);
    }

    #[test]
    fn pairing_counter_counts() {
        let before = pairing_count();
        pairing(&G1Affine::generator(), &G2Affine::generator());
        assert_eq!(pairing_count(), before + 1);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(g1_from_bytes(&[0u8; 47]).is_err());
        assert!(g1_from_bytes(&[0xffu8; 48]).is_err());
        assert!(g2_from_bytes(&[0x13u8; 96]).is_err());
        assert!(scalar_from_bytes(&[0xffu8; 32]).is_err());
    }

    #[test]
    fn outer_sign_verify() {
        let key = OuterKeyPair::generate(&mut rng());
        let pk = key.public_key().to_bytes();
        let msg = b"short message";
        let sig = outer_sign(&key, msg);
        assert!(outer_verify(&pk, sig.as_bytes(), msg));
        for bit in 0..msg.len() * 8 {
            let mut m = msg.to_vec();
            m[bit / 8] ^= 1 << (bit % 8);
            assert!(!outer_verify(&pk, sig.as_bytes(), &m), "bit {bit}");
        }
        for bit in 0..OUTER_SIG_BYTES * 8 {
            let mut s = sig.0;
            s[bit / 8] ^= 1 << (bit % 8);
            assert!(!outer_verify(&pk, &s, msg), "sig bit {bit}");
        }
        assert!(!outer_verify(&pk, &sig.0[..63], msg));
        assert!(!outer_verify(&pk[..32], sig.as_bytes(), msg));
    }

    #[test]
    fn outer_key_roundtrip() {
        let key = OuterKeyPair::generate(&mut rng());
        let again = OuterKeyPair::from_secret_bytes(&key.secret_bytes()).unwrap();
        assert_eq!(key.public_key(), again.public_key());
        let pk = OuterPublicKey::from_bytes(&key.public_key().to_bytes()).unwrap();
        assert_eq!(pk, key.public_key());
        assert_eq!(pk.fingerprint().len(), 16);
    }
}
