#![allow(dead_code)]

use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug)]
pub struct Synth {
    pub width: u16,
    pub height: u16,
    pub quality: u8,
    pub sampling: SamplingFactor,
    pub gray: bool,
    pub restart: Option<u16>,
    pub seed: u64,
}

impl Synth {
    pub fn rgb(width: u16, height: u16, sampling: SamplingFactor) -> Self {
        Synth {
            width,
            height,
            quality: 80,
            sampling,
            gray: false,
            restart: None,
            seed: width as u64 * 31 + height as u64,
        }
    }

    pub fn gray(width: u16, height: u16) -> Self {
        Synth {
            gray: true,
            ..Synth::rgb(width, height, SamplingFactor::F_1_1)
        }
    }

    pub fn pixels(&self) -> Vec<u8> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let ch = if self.gray { 1 } else { 3 };
        let mut px = Vec::with_capacity(self.width as usize * self.height as usize * ch);
        for y in 0..self.height as u32 {
            for x in 0..self.width as u32 {
                for c in 0..ch as u32 {
                    let base = (x * (3 + c) + y * (5 - c)) % 256;
                    let noise = rng.next_u32() % 48;
                    px.push(((base + noise) % 256) as u8);
                }
            }
        }
        px
    }

    pub fn encode_pixels(&self, px: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = Encoder::new(&mut out, self.quality);
        enc.set_sampling_factor(self.sampling);
        if let Some(r) = self.restart {
            enc.set_restart_interval(r);
        }
        let ct = if self.gray {
            ColorType::Luma
        } else {
            ColorType::Rgb
        };
        enc.encode(px, self.width, self.height, ct).unwrap();
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        self.encode_pixels(&self.pixels())
    }
}

/// Decodes with an independent decoder; returns (width, height, pixels).
pub fn decode(bytes: &[u8]) -> (u16, u16, Vec<u8>) {
    let mut d = jpeg_decoder::Decoder::new(bytes);
    let px = d.decode().expect("third-party decoder accepts the file");
    let info = d.info().unwrap();
    (info.width, info.height, px)
}

/// Like [`decode`] but without colour conversion. Each output row holds the
/// samples of every component in turn.
pub fn decode_raw(bytes: &[u8]) -> (u16, u16, Vec<u8>) {
    let mut d = jpeg_decoder::Decoder::new(bytes);
    d.set_color_transform(jpeg_decoder::ColorTransform::None);
    let px = d.decode().expect("third-party decoder accepts the file");
    let info = d.info().unwrap();
    (info.width, info.height, px)
}
