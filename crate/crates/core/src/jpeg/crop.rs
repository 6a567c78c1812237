//! Coefficient-domain re-encoding and MCU-aligned lossless cropping.

use super::huffman::{self, BitWriter, EncodeTable, HuffmanSpec};
use super::{ComponentBlocks, FrameHeader, JpegImage, McuGrid, Segment, DHT, DNL, DRI, EOI, SOS};
use crate::error::JpegError;
use crate::grid::CropRect;
use crate::jpeg::Granularity;

fn dht_payload(tables: &[(u8, u8, HuffmanSpec)]) -> Vec<u8> {
    let mut p = Vec::new();
    for (class, id, spec) in tables {
        p.push((class << 4) | id);
        p.extend_from_slice(&spec.bits);
        p.extend_from_slice(&spec.values);
    }
    p
}

/// Visits every block in interleaved scan order as (scan index, block).
fn for_each_block<'a>(
    layout: &McuGrid,
    image: &JpegImage,
    coefficients: &'a [ComponentBlocks],
    mut f: impl FnMut(usize, &'a [i16; 64]),
) {
    for my in 0..layout.mcus_per_col as usize {
        for mx in 0..layout.mcus_per_row as usize {
            for (s, sc) in image.scan_components().iter().enumerate() {
                let (h, v) = layout.components[sc.component];
                let comp = &coefficients[sc.component];
                for bv in 0..v as usize {
                    for bh in 0..h as usize {
                        f(s, comp.block(my * v as usize + bv, mx * h as usize + bh));
                    }
                }
            }
        }
    }
}

/// Writes a complete JPEG for `frame` and `coefficients`, reusing every
/// non-coding segment of `image` verbatim. Huffman tables are regenerated
/// from the data and restart markers are dropped.
pub(crate) fn encode_image(
    image: &JpegImage,
    frame: FrameHeader,
    coefficients: &[ComponentBlocks],
) -> Vec<u8> {
    let layout = McuGrid::new(&frame);
    let scan = image.scan_components();

    let mut dc_freq = [[0u64; 256]; 2];
    let mut ac_freq = [[0u64; 256]; 2];
    let mut preds = vec![0i32; scan.len()];
    for_each_block(&layout, image, coefficients, |s, block| {
        let (d, a) = (scan[s].dc_table as usize, scan[s].ac_table as usize);
        let (dcf, acf) = (&mut dc_freq[d], &mut ac_freq[a]);
        huffman::count_block(block, &mut preds[s], dcf, acf);
    });

    let mut specs = Vec::new();
    let mut dc_enc: [Option<EncodeTable>; 2] = [None, None];
    let mut ac_enc: [Option<EncodeTable>; 2] = [None, None];
    for id in 0..2u8 {
        if scan.iter().any(|s| s.dc_table == id) {
            let spec = HuffmanSpec::optimal(&dc_freq[id as usize]);
            dc_enc[id as usize] = Some(EncodeTable::new(&spec));
            specs.push((0u8, id, spec));
        }
        if scan.iter().any(|s| s.ac_table == id) {
            let spec = HuffmanSpec::optimal(&ac_freq[id as usize]);
            ac_enc[id as usize] = Some(EncodeTable::new(&spec));
            specs.push((1u8, id, spec));
        }
    }

    let mut writer = BitWriter::new();
    preds.iter_mut().for_each(|p| *p = 0);
    for_each_block(&layout, image, coefficients, |s, block| {
        let dc = dc_enc[scan[s].dc_table as usize].as_ref().unwrap();
        let ac = ac_enc[scan[s].ac_table as usize].as_ref().unwrap();
        huffman::encode_block(&mut writer, block, &mut preds[s], dc, ac);
    });
    let entropy = writer.finish();

    let sos = image
        .segments()
        .iter()
        .find(|s| s.marker == SOS)
        .expect("parsed image has a scan");
    let mut segments = Vec::new();
    let mut after_scan = false;
    for seg in image.segments() {
        match seg.marker {
            SOS => {
                segments.push(Segment::new(DHT, dht_payload(&specs)));
                segments.push(Segment {
                    marker: SOS,
                    payload: sos.payload.clone(),
                    entropy: entropy.clone(),
                });
                after_scan = true;
            }
            DHT | DRI | DNL | EOI => {}
            m if m == frame.marker && !after_scan => {
                segments.push(Segment::new(m, frame.to_payload()))
            }
            _ => segments.push(seg.clone()),
        }
    }
    segments.push(Segment::new(EOI, Vec::new()));

    let mut out = Vec::new();
    for s in &segments {
        s.write(&mut out);
    }
    out
}

/// Crops `image` to the MCUs covered by the cell rectangle `rect` at
/// granularity `g`.
///
/// Coefficients are copied unchanged; only DC prediction and entropy coding
/// are redone for the new block topology. Every non-coding segment,
/// quantization tables included, is carried over as is.
pub fn lossless_crop(
    image: &JpegImage,
    rect: &CropRect,
    g: Granularity,
) -> Result<JpegImage, JpegError> {
    let layout = image.layout();
    let (w, h) = layout.cell_dims(g);
    rect.check_within(w, h)?;
    let (cols, rows) = layout.mcu_span(rect, g);

    let new_width = if cols.end == layout.mcus_per_row {
        image.width() - cols.start * layout.mcu_width_px
    } else {
        cols.len() as u32 * layout.mcu_width_px
    };
    let new_height = if rows.end == layout.mcus_per_col {
        image.height() - rows.start * layout.mcu_height_px
    } else {
        rows.len() as u32 * layout.mcu_height_px
    };
    let mut frame = image.frame().clone();
    frame.width = new_width as u16;
    frame.height = new_height as u16;

    let coefficients: Vec<ComponentBlocks> = image
        .coefficients()
        .iter()
        .zip(&layout.components)
        .map(|(comp, &(ch, cv))| {
            let (ch, cv) = (ch as usize, cv as usize);
            let bw = cols.len() * ch;
            let bh = rows.len() * cv;
            let (c0, r0) = (cols.start as usize * ch, rows.start as usize * cv);
            let mut blocks = Vec::with_capacity(bw * bh);
            for r in 0..bh {
                let start = (r0 + r) * comp.blocks_w + c0;
                blocks.extend_from_slice(&comp.blocks[start..start + bw]);
            }
            ComponentBlocks {
                blocks_w: bw,
                blocks_h: bh,
                blocks,
            }
        })
        .collect();

    let bytes = encode_image(image, frame, &coefficients);
    let cropped = JpegImage::parse(&bytes)?;
    debug_assert_eq!(cropped.coefficients(), &coefficients[..]);
    Ok(cropped)
}
