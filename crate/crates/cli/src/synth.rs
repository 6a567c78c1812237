//! Procedural test images: smooth gradients and ripples under uniform noise,
//! encoded as 4:2:0 JPEG.

use anyhow::{bail, Context, Result};
use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What to synthesize: a fixed quality or a target file size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTarget {
    Quality(u8),
    Bytes(usize),
}

/// `WxH:quality` or `WxH@size`, where size takes an optional `k`/`m` suffix
/// (powers of 1000).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub width: u16,
    pub height: u16,
    pub target: SynthTarget,
}

impl std::str::FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected WxH:quality or WxH@size, got {s:?}");
        let (dims, target) = if let Some((d, q)) = s.split_once(':') {
            let q: u8 = q.parse().map_err(|_| bad())?;
            if !(1..=100).contains(&q) {
                return Err(format!("quality {q} is outside 1..=100"));
            }
            (d, SynthTarget::Quality(q))
        } else if let Some((d, size)) = s.split_once('@') {
            let lower = size.to_ascii_lowercase();
            let (num, mult) = match lower.strip_suffix('k') {
                Some(n) => (n, 1000),
                None => match lower.strip_suffix('m') {
                    Some(n) => (n, 1_000_000),
                    None => (lower.as_str(), 1),
                },
            };
            let n: usize = num.parse().map_err(|_| bad())?;
            (d, SynthTarget::Bytes(n * mult))
        } else {
            return Err(bad());
        };
        let (w, h) = dims.split_once('x').ok_or_else(bad)?;
        let width: u16 = w.parse().map_err(|_| bad())?;
        let height: u16 = h.parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(SynthSpec {
            width,
            height,
            target,
        })
    }
}

impl std::fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.target {
            SynthTarget::Quality(q) => write!(f, "{}x{}:{}", self.width, self.height, q),
            SynthTarget::Bytes(n) => write!(f, "{}x{}@{}", self.width, self.height, n),
        }
    }
}

/// RGB pixels, row-major. The same arguments always give the same pixels.
pub fn pixels(width: u16, height: u16, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f32, height as f32);
    let mut px = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f32 / w, y as f32 / h);
            let ripple = (x as f32 * 0.045 + (y as f32 * 0.021).sin() * 6.0).sin() * 40.0;
            let rings = ((fx - 0.6).hypot(fy - 0.4) * 90.0).cos() * 25.0;
            let base = [
                60.0 + 140.0 * fx + ripple,
                50.0 + 150.0 * fy + rings,
                200.0 - 120.0 * (fx + fy) / 2.0 + ripple * 0.5 - rings,
            ];
            let noise = rng.next_u32();
            for (c, b) in base.iter().enumerate() {
                let n = ((noise >> (8 * c)) & 0xFF) as f32 / 255.0 - 0.5;
                px.push((b + n * 36.0).clamp(0.0, 255.0) as u8);
            }
        }
    }
    px
}

pub fn encode(px: &[u8], width: u16, height: u16, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut enc = Encoder::new(&mut out, quality);
    enc.set_sampling_factor(SamplingFactor::R_4_2_0);
    enc.encode(px, width, height, ColorType::Rgb)
        .context("jpeg encoding failed")?;
    Ok(out)
}

/// Synthesizes an image; returns the file and the quality used. Size targets
/// pick the quality whose output is closest to the target.
pub fn synthesize(spec: &SynthSpec) -> Result<(Vec<u8>, u8)> {
    let seed = (spec.width as u64) << 16 | spec.height as u64;
    let px = pixels(spec.width, spec.height, seed);
    match spec.target {
        SynthTarget::Quality(q) => Ok((encode(&px, spec.width, spec.height, q)?, q)),
        SynthTarget::Bytes(target) => {
            // sizes grow with quality; find the largest quality at or under target
            let (mut lo, mut hi) = (1u8, 100u8);
            let mut below: Option<(Vec<u8>, u8)> = None;
            while lo <= hi {
                let mid = lo + (hi - lo) / 2;
                let bytes = encode(&px, spec.width, spec.height, mid)?;
                if bytes.len() <= target {
                    below = Some((bytes, mid));
                    lo = mid + 1;
                } else {
                    hi = mid - 1;
                }
            }
            let above = match &below {
                Some((_, q)) if *q < 100 => {
                    Some((encode(&px, spec.width, spec.height, q + 1)?, q + 1))
                }
                Some(_) => None,
                None => Some((encode(&px, spec.width, spec.height, 1)?, 1)),
            };
            let pick = match (below, above) {
                (Some(b), Some(a)) => {
                    if target - b.0.len() <= a.0.len() - target {
                        b
                    } else {
                        a
                    }
                }
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (None, None) => bail!("no quality setting produced output"),
            };
            Ok(pick)
        }
    }
}
