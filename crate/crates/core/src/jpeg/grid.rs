//! MCU geometry and the mapping from a JPEG to a signable [`BlockGrid`].

use sha2::{Digest, Sha256};

use super::{FrameHeader, JpegImage};
use crate::error::JpegError;
use crate::grid::{BlockGrid, CropRect};

const CONTEXT_TAG: &[u8] = b"cropsig/v1/jpeg-context";

/// Side of a signature cell in MCUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Granularity(u16);

impl Granularity {
    pub fn new(g: u16) -> Result<Self, JpegError> {
        if g == 0 {
            Err(JpegError::ZeroGranularity)
        } else {
            Ok(Granularity(g))
        }
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

/// How the scan tiles the image into minimum coded units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McuGrid {
    pub mcu_width_px: u32,
    pub mcu_height_px: u32,
    pub mcus_per_row: u32,
    pub mcus_per_col: u32,
    /// Blocks per MCU (horizontal, vertical) for each frame component.
    pub components: Vec<(u8, u8)>,
}

impl McuGrid {
    pub fn new(frame: &FrameHeader) -> McuGrid {
        let (w, h) = (frame.width as u32, frame.height as u32);
        if frame.components.len() == 1 {
            // non-interleaved: one block per MCU whatever the declared sampling
            return McuGrid {
                mcu_width_px: 8,
                mcu_height_px: 8,
                mcus_per_row: w.div_ceil(8),
                mcus_per_col: h.div_ceil(8),
                components: vec![(1, 1)],
            };
        }
        let hmax = frame.components.iter().map(|c| c.h).max().unwrap() as u32;
        let vmax = frame.components.iter().map(|c| c.v).max().unwrap() as u32;
        McuGrid {
            mcu_width_px: 8 * hmax,
            mcu_height_px: 8 * vmax,
            mcus_per_row: w.div_ceil(8 * hmax),
            mcus_per_col: h.div_ceil(8 * vmax),
            components: frame.components.iter().map(|c| (c.h, c.v)).collect(),
        }
    }

    pub fn mcu_count(&self) -> u64 {
        self.mcus_per_row as u64 * self.mcus_per_col as u64
    }

    pub fn blocks_per_mcu(&self) -> usize {
        self.components
            .iter()
            .map(|&(h, v)| h as usize * v as usize)
            .sum()
    }

    /// Grid size in cells: `(ceil(mcus_per_row / g), ceil(mcus_per_col / g))`.
    pub fn cell_dims(&self, g: Granularity) -> (u32, u32) {
        let g = g.get() as u32;
        (self.mcus_per_row.div_ceil(g), self.mcus_per_col.div_ceil(g))
    }

    /// MCU column and row ranges (half-open) covered by a cell rectangle.
    pub fn mcu_span(
        &self,
        rect: &CropRect,
        g: Granularity,
    ) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
        let g = g.get() as u32;
        let cols = (rect.j1 - 1) * g..(rect.j2 * g).min(self.mcus_per_row);
        let rows = (rect.i1 - 1) * g..(rect.i2 * g).min(self.mcus_per_col);
        (cols, rows)
    }
}

/// Digest of everything outside the coefficient blocks that shapes their
/// meaning: precision, component ids, sampling factors, the quantization
/// table each component uses, MCU geometry and the granularity.
///
/// Pixel dimensions are deliberately absent because cropping changes them.
pub fn context_digest(image: &JpegImage, g: Granularity) -> [u8; 32] {
    let frame = image.frame();
    let layout = image.layout();
    let mut h = Sha256::new();
    h.update(CONTEXT_TAG);
    h.update([frame.precision, frame.components.len() as u8]);
    for (c, q) in frame.components.iter().zip(image.component_quant_tables()) {
        h.update([c.id, c.h, c.v, q.precision]);
        for v in q.values {
            h.update(v.to_be_bytes());
        }
    }
    h.update(layout.mcu_width_px.to_be_bytes());
    h.update(layout.mcu_height_px.to_be_bytes());
    h.update(g.get().to_be_bytes());
    h.finalize().into()
}

/// Serializes the coefficient blocks of the MCUs in `cols` x `rows`:
/// MCUs in raster order, components in frame order, each block's 64
/// zigzag coefficients as big-endian i16.
fn cell_bytes(
    image: &JpegImage,
    cols: std::ops::Range<u32>,
    rows: std::ops::Range<u32>,
) -> Vec<u8> {
    let layout = image.layout();
    let mcus = cols.len() * rows.len();
    let mut out = Vec::with_capacity(mcus * layout.blocks_per_mcu() * 128);
    for my in rows {
        for mx in cols.clone() {
            for (comp, &(h, v)) in image.coefficients().iter().zip(&layout.components) {
                for bv in 0..v as usize {
                    for bh in 0..h as usize {
                        let block = comp
                            .block(my as usize * v as usize + bv, mx as usize * h as usize + bh);
                        for c in block {
                            out.extend_from_slice(&c.to_be_bytes());
                        }
                    }
                }
            }
        }
    }
    out
}

/// Views the image as a grid of `g x g`-MCU cells with origin `(1, 1)`.
pub fn extract_block_grid(image: &JpegImage, g: Granularity) -> BlockGrid {
    let layout = image.layout();
    let (w, h) = layout.cell_dims(g);
    let digest = context_digest(image, g);
    BlockGrid::from_fn(w, h, digest, |i, j| {
        let (cols, rows) = layout.mcu_span(&CropRect::new(i, i, j, j), g);
        cell_bytes(image, cols, rows)
    })
    .expect("a parsed image has at least one MCU")
}
