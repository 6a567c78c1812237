//! The signature container carried in JPEG comment (COM) segments.
//!
//! Payload layout, all integers big-endian:
//!
//! ```text
//! "CRSIGJPG" | version u8 | scheme u8 | kind u8 | suite u8 | g u16
//!            | body_len u32 | body | cert_len u16 | cert
//! ```
//!
//! The payload is split across COM segments, each starting with
//! `"CRSG" | chunk_index u8 | chunk_total u8`. Chunks are inserted right
//! after the last application segment preceding the frame header.

use super::{JpegImage, Segment, COM};
use crate::codec::Reader;
use crate::crypto::SuiteId;
use crate::error::PayloadError;

pub const MAGIC: &[u8; 8] = b"CRSIGJPG";
pub const CHUNK_MAGIC: &[u8; 4] = b"CRSG";
pub const VERSION: u8 = 0x01;
/// Largest COM segment payload (segment length 65535 minus the length field).
pub const MAX_SEGMENT_PAYLOAD: usize = 65533;
pub const CHUNK_HEADER_BYTES: usize = CHUNK_MAGIC.len() + 2;
pub const MAX_CHUNK_DATA: usize = MAX_SEGMENT_PAYLOAD - CHUNK_HEADER_BYTES;
/// Payload bytes outside body and certificate.
pub const FIXED_HEADER_BYTES: usize = 8 + 1 + 1 + 1 + 1 + 2 + 4 + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SchemeKind {
    Croppable = 0x01,
    Baseline = 0x02,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Croppable => "croppable",
            SchemeKind::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "croppable" => Ok(SchemeKind::Croppable),
            "baseline" => Ok(SchemeKind::Baseline),
            _ => Err(format!("unknown scheme {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Full = 0x01,
    Cropped = 0x02,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Full => "full",
            PayloadKind::Cropped => "cropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignaturePayload {
    pub scheme: SchemeKind,
    pub kind: PayloadKind,
    pub suite: SuiteId,
    pub granularity: u16,
    pub body: Vec<u8>,
    /// Opaque certificate blob (e.g. DER); never interpreted.
    pub certificate: Vec<u8>,
}

impl SignaturePayload {
    /// Serializes the payload. A certificate longer than 65535 bytes cannot
    /// be represented; [`SignaturePayload::to_chunks`] rejects it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(FIXED_HEADER_BYTES + self.body.len() + self.certificate.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[
            VERSION,
            self.scheme as u8,
            self.kind as u8,
            self.suite.as_byte(),
        ]);
        out.extend_from_slice(&self.granularity.to_be_bytes());
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&(self.certificate.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.certificate);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PayloadError> {
        let bad = |m: &str| PayloadError::Malformed(m.to_string());
        let mut r = Reader::new(bytes);
        if r.take(8) != Some(&MAGIC[..]) {
            return Err(bad("bad magic"));
        }
        let version = r.u8().ok_or_else(|| bad("truncated header"))?;
        if version != VERSION {
            return Err(PayloadError::Malformed(format!(
                "unsupported version {version}"
            )));
        }
        let scheme = match r.u8() {
            Some(0x01) => SchemeKind::Croppable,
            Some(0x02) => SchemeKind::Baseline,
            Some(s) => {
                return Err(PayloadError::Malformed(format!(
                    "unknown scheme id {s:#04x}"
                )))
            }
            None => return Err(bad("truncated header")),
        };
        let kind = match r.u8() {
            Some(0x01) => PayloadKind::Full,
            Some(0x02) => PayloadKind::Cropped,
            Some(k) => return Err(PayloadError::Malformed(format!("unknown kind {k:#04x}"))),
            None => return Err(bad("truncated header")),
        };
        let suite_byte = r.u8().ok_or_else(|| bad("truncated header"))?;
        let suite = SuiteId::from_byte(suite_byte).ok_or_else(|| {
            PayloadError::Malformed(format!("unknown suite id {suite_byte:#04x}"))
        })?;
        let granularity = r.u16().ok_or_else(|| bad("truncated header"))?;
        if granularity == 0 {
            return Err(bad("zero granularity"));
        }
        let body_len = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let body = r
            .take(body_len)
            .ok_or_else(|| bad("truncated body"))?
            .to_vec();
        let cert_len = r.u16().ok_or_else(|| bad("truncated certificate length"))? as usize;
        let certificate = r
            .take(cert_len)
            .ok_or_else(|| bad("truncated certificate"))?
            .to_vec();
        if r.remaining() != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(SignaturePayload {
            scheme,
            kind,
            suite,
            granularity,
            body,
            certificate,
        })
    }

    /// Splits the serialized payload into COM segment payloads.
    pub fn to_chunks(&self) -> Result<Vec<Vec<u8>>, PayloadError> {
        if self.certificate.len() > u16::MAX as usize {
            return Err(PayloadError::CertificateTooLarge(self.certificate.len()));
        }
        let bytes = self.to_bytes();
        let total = bytes.len().div_ceil(MAX_CHUNK_DATA);
        if total > 255 {
            return Err(PayloadError::TooLarge(bytes.len()));
        }
        Ok(bytes
            .chunks(MAX_CHUNK_DATA)
            .enumerate()
            .map(|(k, data)| {
                let mut c = Vec::with_capacity(CHUNK_HEADER_BYTES + data.len());
                c.extend_from_slice(CHUNK_MAGIC);
                c.extend_from_slice(&[k as u8, total as u8]);
                c.extend_from_slice(data);
                c
            })
            .collect())
    }
}

fn is_chunk(seg: &Segment) -> bool {
    seg.marker == COM
        && seg.payload.len() >= CHUNK_HEADER_BYTES
        && seg.payload.starts_with(CHUNK_MAGIC)
}

/// Number of COM chunks carrying the payload, if any.
pub fn chunk_count(image: &JpegImage) -> usize {
    image.segments().iter().filter(|s| is_chunk(s)).count()
}

/// Inserts the payload as COM segments. Fails if the image already carries one.
pub fn embed_payload(
    image: &JpegImage,
    payload: &SignaturePayload,
) -> Result<JpegImage, PayloadError> {
    if chunk_count(image) > 0 {
        return Err(PayloadError::MultiplePayloads);
    }
    let segments = image.segments();
    let frame_at = segments
        .iter()
        .position(|s| s.marker == image.frame().marker)
        .expect("parsed image has a frame header");
    let insert_at = segments[..frame_at]
        .iter()
        .rposition(Segment::is_app)
        .map_or(1, |k| k + 1);
    let mut out = Vec::with_capacity(segments.len() + 4);
    out.extend_from_slice(&segments[..insert_at]);
    out.extend(
        payload
            .to_chunks()?
            .into_iter()
            .map(|c| Segment::new(COM, c)),
    );
    out.extend_from_slice(&segments[insert_at..]);
    Ok(image.with_segments(out))
}

/// Reassembles the payload from its chunks, in any order.
pub fn extract_payload(image: &JpegImage) -> Result<Option<SignaturePayload>, PayloadError> {
    let chunks: Vec<&[u8]> = image
        .segments()
        .iter()
        .filter(|s| is_chunk(s))
        .map(|s| &s.payload[CHUNK_MAGIC.len()..])
        .collect();
    let Some(first) = chunks.first() else {
        return Ok(None);
    };
    let total = first[1];
    if total == 0 {
        return Err(PayloadError::Malformed("zero chunk total".into()));
    }
    let mut slots: Vec<Option<&[u8]>> = vec![None; total as usize];
    for c in &chunks {
        let (index, t) = (c[0], c[1]);
        if t != total || index >= total || slots[index as usize].is_some() {
            return Err(PayloadError::MultiplePayloads);
        }
        slots[index as usize] = Some(&c[2..]);
    }
    let mut bytes = Vec::new();
    for (index, slot) in slots.iter().enumerate() {
        bytes.extend_from_slice(slot.ok_or(PayloadError::MissingChunk {
            index: index as u8,
            total,
        })?);
    }
    SignaturePayload::from_bytes(&bytes).map(Some)
}

/// Removes every payload chunk.
pub fn strip_payload(image: &JpegImage) -> JpegImage {
    image.with_segments(
        image
            .segments()
            .iter()
            .filter(|s| !is_chunk(s))
            .cloned()
            .collect(),
    )
}
