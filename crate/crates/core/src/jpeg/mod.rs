//! Baseline JPEG container: a lossless segment model plus the entropy-decoded
//! coefficient blocks of the single scan.
//!
//! Only baseline sequential (SOF0, or SOF1 at 8-bit precision) Huffman files
//! with one scan covering every component are accepted. Coefficients are kept
//! in zigzag order with DC prediction undone, so each block stands on its own.

pub mod crop;
pub mod grid;
pub mod huffman;
pub mod payload;

use crate::error::JpegError;
use huffman::{BitReader, DecodeTable, HuffmanSpec};

pub use grid::{extract_block_grid, Granularity, McuGrid};

pub const SOI: u8 = 0xD8;
pub const EOI: u8 = 0xD9;
pub const SOS: u8 = 0xDA;
pub const DQT: u8 = 0xDB;
pub const DHT: u8 = 0xC4;
pub const DRI: u8 = 0xDD;
pub const DNL: u8 = 0xDC;
pub const COM: u8 = 0xFE;
pub const SOF0: u8 = 0xC0;
pub const SOF1: u8 = 0xC1;

fn is_app(marker: u8) -> bool {
    (0xE0..=0xEF).contains(&marker)
}

fn is_sof(marker: u8) -> bool {
    matches!(marker, 0xC0..=0xCF) && !matches!(marker, DHT | 0xC8 | 0xCC)
}

fn is_standalone(marker: u8) -> bool {
    matches!(marker, SOI | EOI | 0x01 | 0xD0..=0xD7)
}

/// One marker segment in file order. For SOS, `entropy` holds the coded scan
/// data that follows the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub marker: u8,
    pub payload: Vec<u8>,
    pub entropy: Vec<u8>,
}

impl Segment {
    pub fn new(marker: u8, payload: Vec<u8>) -> Self {
        Segment {
            marker,
            payload,
            entropy: Vec::new(),
        }
    }

    pub fn is_app(&self) -> bool {
        is_app(self.marker)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&[0xFF, self.marker]);
        if !is_standalone(self.marker) {
            out.extend_from_slice(&((self.payload.len() + 2) as u16).to_be_bytes());
            out.extend_from_slice(&self.payload);
        }
        out.extend_from_slice(&self.entropy);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub tq: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameHeader {
    pub marker: u8,
    pub precision: u8,
    pub height: u16,
    pub width: u16,
    pub components: Vec<Component>,
}

impl FrameHeader {
    fn parse(marker: u8, p: &[u8], offset: usize) -> Result<Self, JpegError> {
        if p.len() < 6 {
            return Err(JpegError::malformed(offset, "short frame header"));
        }
        let precision = p[0];
        if precision != 8 {
            return Err(JpegError::Unsupported(format!(
                "{precision}-bit sample precision"
            )));
        }
        let height = u16::from_be_bytes([p[1], p[2]]);
        let width = u16::from_be_bytes([p[3], p[4]]);
        if height == 0 {
            return Err(JpegError::Unsupported("height defined by DNL".into()));
        }
        if width == 0 {
            return Err(JpegError::malformed(offset, "zero image width"));
        }
        let n = p[5] as usize;
        if n == 0 || n > 4 || p.len() != 6 + 3 * n {
            return Err(JpegError::malformed(offset, "frame component count"));
        }
        let components: Vec<Component> = p[6..]
            .chunks(3)
            .map(|c| Component {
                id: c[0],
                h: c[1] >> 4,
                v: c[1] & 0x0F,
                tq: c[2],
            })
            .collect();
        for c in &components {
            if !(1..=4).contains(&c.h) || !(1..=4).contains(&c.v) || c.tq > 3 {
                return Err(JpegError::malformed(
                    offset,
                    "component sampling or table id",
                ));
            }
        }
        for (k, c) in components.iter().enumerate() {
            if components[..k].iter().any(|o| o.id == c.id) {
                return Err(JpegError::malformed(offset, "duplicate component id"));
            }
        }
        Ok(FrameHeader {
            marker,
            precision,
            height,
            width,
            components,
        })
    }

    fn to_payload(&self) -> Vec<u8> {
        let mut p = vec![self.precision];
        p.extend_from_slice(&self.height.to_be_bytes());
        p.extend_from_slice(&self.width.to_be_bytes());
        p.push(self.components.len() as u8);
        for c in &self.components {
            p.extend_from_slice(&[c.id, (c.h << 4) | c.v, c.tq]);
        }
        p
    }
}

/// A quantization table; values are in zigzag order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTable {
    /// 0 for 8-bit entries, 1 for 16-bit.
    pub precision: u8,
    pub values: [u16; 64],
}

/// Per-component table selectors of the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanComponent {
    pub component: usize,
    pub dc_table: u8,
    pub ac_table: u8,
}

/// Coefficient blocks of one component, row-major over its block raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentBlocks {
    pub blocks_w: usize,
    pub blocks_h: usize,
    /// Zigzag-ordered quantized coefficients with absolute DC.
    pub blocks: Vec<[i16; 64]>,
}

impl ComponentBlocks {
    pub fn block(&self, row: usize, col: usize) -> &[i16; 64] {
        &self.blocks[row * self.blocks_w + col]
    }
}

/// A parsed baseline JPEG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JpegImage {
    segments: Vec<Segment>,
    trailer: Vec<u8>,
    frame: FrameHeader,
    quant: Vec<QuantTable>,
    scan: Vec<ScanComponent>,
    layout: McuGrid,
    coefficients: Vec<ComponentBlocks>,
}

#[derive(Default)]
struct TableState {
    quant: [Option<QuantTable>; 4],
    dc: [Option<HuffmanSpec>; 4],
    ac: [Option<HuffmanSpec>; 4],
    restart_interval: u16,
}

fn parse_dqt(p: &[u8], offset: usize, st: &mut TableState) -> Result<(), JpegError> {
    let mut k = 0;
    while k < p.len() {
        let (pq, tq) = (p[k] >> 4, p[k] & 0x0F);
        if pq > 1 || tq > 3 {
            return Err(JpegError::malformed(
                offset + k,
                "quantization table header",
            ));
        }
        let size = 64 * (pq as usize + 1);
        let body = p
            .get(k + 1..k + 1 + size)
            .ok_or_else(|| JpegError::malformed(offset + k, "short quantization table"))?;
        let mut values = [0u16; 64];
        for (n, v) in values.iter_mut().enumerate() {
            *v = if pq == 0 {
                body[n] as u16
            } else {
                u16::from_be_bytes([body[2 * n], body[2 * n + 1]])
            };
        }
        st.quant[tq as usize] = Some(QuantTable {
            precision: pq,
            values,
        });
        k += 1 + size;
    }
    Ok(())
}

fn parse_dht(p: &[u8], offset: usize, st: &mut TableState) -> Result<(), JpegError> {
    let mut k = 0;
    while k < p.len() {
        let (tc, th) = (p[k] >> 4, p[k] & 0x0F);
        if tc > 1 || th > 3 {
            return Err(JpegError::malformed(offset + k, "Huffman table header"));
        }
        let counts = p
            .get(k + 1..k + 17)
            .ok_or_else(|| JpegError::malformed(offset + k, "short Huffman table"))?;
        let mut bits = [0u8; 16];
        bits.copy_from_slice(counts);
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if total > 256 {
            return Err(JpegError::malformed(offset + k, "too many Huffman codes"));
        }
        let values = p
            .get(k + 17..k + 17 + total)
            .ok_or_else(|| JpegError::malformed(offset + k, "short Huffman table"))?
            .to_vec();
        let spec = HuffmanSpec { bits, values };
        if tc == 0 {
            st.dc[th as usize] = Some(spec);
        } else {
            st.ac[th as usize] = Some(spec);
        }
        k += 17 + total;
    }
    Ok(())
}

/// Offset just past the entropy-coded data starting at `start`.
fn scan_end(bytes: &[u8], start: usize) -> usize {
    let mut k = start;
    while k + 1 < bytes.len() {
        if bytes[k] == 0xFF {
            let m = bytes[k + 1];
            if m != 0x00 && !(0xD0..=0xD7).contains(&m) {
                return k;
            }
            k += 2;
        } else {
            k += 1;
        }
    }
    bytes.len()
}

type DecodedScan = (
    Vec<ScanComponent>,
    McuGrid,
    Vec<ComponentBlocks>,
    Vec<QuantTable>,
);

impl JpegImage {
    /// Parses a baseline JPEG file.
    pub fn parse(bytes: &[u8]) -> Result<JpegImage, JpegError> {
        if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != SOI {
            return Err(JpegError::malformed(0, "missing SOI marker"));
        }
        let mut segments = vec![Segment::new(SOI, Vec::new())];
        let mut pos = 2;
        let mut st = TableState::default();
        let mut frame: Option<FrameHeader> = None;
        let mut decoded: Option<DecodedScan> = None;
        let mut trailer = Vec::new();
        let mut seen_eoi = false;

        while pos < bytes.len() {
            if bytes[pos] != 0xFF {
                return Err(JpegError::malformed(pos, "expected marker"));
            }
            // fill bytes
            while bytes.get(pos + 1) == Some(&0xFF) {
                pos += 1;
            }
            let marker = *bytes
                .get(pos + 1)
                .ok_or(JpegError::Truncated { offset: pos + 1 })?;
            let marker_at = pos;
            pos += 2;
            if marker == EOI {
                segments.push(Segment::new(EOI, Vec::new()));
                trailer = bytes[pos..].to_vec();
                seen_eoi = true;
                break;
            }
            if is_standalone(marker) {
                return Err(JpegError::malformed(
                    marker_at,
                    format!("unexpected marker {marker:#04x}"),
                ));
            }
            let len_bytes = bytes
                .get(pos..pos + 2)
                .ok_or(JpegError::Truncated { offset: pos })?;
            let len = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
            if len < 2 {
                return Err(JpegError::malformed(pos, "segment length below 2"));
            }
            let payload = bytes
                .get(pos + 2..pos + len)
                .ok_or(JpegError::Truncated {
                    offset: bytes.len(),
                })?
                .to_vec();
            let body_at = pos + 2;
            pos += len;

            match marker {
                SOF0 | SOF1 => {
                    if frame.is_some() {
                        return Err(JpegError::malformed(marker_at, "second frame header"));
                    }
                    frame = Some(FrameHeader::parse(marker, &payload, body_at)?);
                }
                m if is_sof(m) => {
                    let kind = match m {
                        0xC2 | 0xC6 | 0xCA | 0xCE => "progressive",
                        0xC3 | 0xC7 | 0xCB | 0xCF => "lossless",
                        _ => "arithmetic-coded or hierarchical",
                    };
                    return Err(JpegError::Unsupported(format!(
                        "{kind} JPEG (SOF marker {m:#04x})"
                    )));
                }
                0xCC => {
                    return Err(JpegError::Unsupported(
                        "arithmetic coding conditioning (DAC)".into(),
                    ))
                }
                DNL => return Err(JpegError::Unsupported("DNL segment".into())),
                DQT => parse_dqt(&payload, body_at, &mut st)?,
                DHT => parse_dht(&payload, body_at, &mut st)?,
                DRI => {
                    if payload.len() != 2 {
                        return Err(JpegError::malformed(body_at, "restart interval length"));
                    }
                    st.restart_interval = u16::from_be_bytes([payload[0], payload[1]]);
                }
                SOS => {
                    if decoded.is_some() {
                        return Err(JpegError::Unsupported("multiple scans".into()));
                    }
                    let f = frame.as_ref().ok_or_else(|| {
                        JpegError::malformed(marker_at, "scan before frame header")
                    })?;
                    let scan = parse_scan_header(&payload, body_at, f)?;
                    let end = scan_end(bytes, pos);
                    let entropy = &bytes[pos..end];
                    let layout = McuGrid::new(f);
                    let quant = f
                        .components
                        .iter()
                        .map(|c| {
                            st.quant[c.tq as usize].clone().ok_or_else(|| {
                                JpegError::malformed(
                                    marker_at,
                                    format!("quantization table {} undefined", c.tq),
                                )
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let coefficients = decode_scan(entropy, pos, &scan, &layout, &st)?;
                    segments.push(Segment {
                        marker,
                        payload,
                        entropy: entropy.to_vec(),
                    });
                    decoded = Some((scan, layout, coefficients, quant));
                    pos = end;
                    continue;
                }
                _ => {}
            }
            segments.push(Segment::new(marker, payload));
        }

        let frame = frame.ok_or_else(|| JpegError::malformed(pos, "no frame header"))?;
        let (scan, layout, coefficients, quant) =
            decoded.ok_or_else(|| JpegError::malformed(pos, "no scan"))?;
        if !seen_eoi {
            return Err(JpegError::Truncated {
                offset: bytes.len(),
            });
        }
        Ok(JpegImage {
            segments,
            trailer,
            frame,
            quant,
            scan,
            layout,
            coefficients,
        })
    }

    /// Serializes the segment model. Unmodified images round-trip exactly
    /// (up to fill bytes between markers, which are dropped).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for s in &self.segments {
            s.write(&mut out);
        }
        out.extend_from_slice(&self.trailer);
        out
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn frame(&self) -> &FrameHeader {
        &self.frame
    }

    pub fn width(&self) -> u32 {
        self.frame.width as u32
    }

    pub fn height(&self) -> u32 {
        self.frame.height as u32
    }

    /// Quantization table used by each frame component, in frame order.
    pub fn component_quant_tables(&self) -> &[QuantTable] {
        &self.quant
    }

    pub fn layout(&self) -> &McuGrid {
        &self.layout
    }

    pub fn coefficients(&self) -> &[ComponentBlocks] {
        &self.coefficients
    }

    pub fn scan_components(&self) -> &[ScanComponent] {
        &self.scan
    }

    /// Replaces the segment list, keeping the decoded scan. Only for
    /// segments that do not affect decoding (comments, application data).
    pub(crate) fn with_segments(&self, segments: Vec<Segment>) -> JpegImage {
        JpegImage {
            segments,
            ..self.clone()
        }
    }

    /// Re-encodes the coefficients with freshly optimized Huffman tables and
    /// no restart markers, returning the parsed result.
    pub fn transcode(&self) -> Result<JpegImage, JpegError> {
        let bytes = crop::encode_image(self, self.frame.clone(), &self.coefficients);
        JpegImage::parse(&bytes)
    }

    /// Re-encodes the image with different coefficient values. Block counts
    /// must match the current layout.
    pub fn replace_coefficients(
        &self,
        coefficients: Vec<ComponentBlocks>,
    ) -> Result<JpegImage, JpegError> {
        let same_shape = coefficients.len() == self.coefficients.len()
            && coefficients.iter().zip(&self.coefficients).all(|(a, b)| {
                a.blocks_w == b.blocks_w
                    && a.blocks_h == b.blocks_h
                    && a.blocks.len() == b.blocks.len()
            });
        if !same_shape {
            return Err(JpegError::malformed(
                0,
                "replacement coefficients do not match the block layout",
            ));
        }
        JpegImage::parse(&crop::encode_image(self, self.frame.clone(), &coefficients))
    }
}

fn parse_scan_header(
    p: &[u8],
    offset: usize,
    frame: &FrameHeader,
) -> Result<Vec<ScanComponent>, JpegError> {
    let n = *p
        .first()
        .ok_or_else(|| JpegError::malformed(offset, "empty scan header"))? as usize;
    if p.len() != 1 + 2 * n + 3 {
        return Err(JpegError::malformed(offset, "scan header length"));
    }
    let mut scan = Vec::with_capacity(n);
    for k in 0..n {
        let (id, tables) = (p[1 + 2 * k], p[2 + 2 * k]);
        let component = frame
            .components
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| {
                JpegError::malformed(offset, format!("scan references unknown component {id}"))
            })?;
        if scan
            .iter()
            .any(|s: &ScanComponent| s.component >= component)
        {
            return Err(JpegError::malformed(
                offset,
                "scan components out of frame order",
            ));
        }
        let (dc_table, ac_table) = (tables >> 4, tables & 0x0F);
        if dc_table > 1 || ac_table > 1 {
            return Err(JpegError::malformed(
                offset,
                "baseline allows Huffman tables 0 and 1 only",
            ));
        }
        scan.push(ScanComponent {
            component,
            dc_table,
            ac_table,
        });
    }
    if n != frame.components.len() {
        return Err(JpegError::Unsupported(
            "scan does not cover every component (multi-scan sequential)".into(),
        ));
    }
    let (ss, se, a) = (p[1 + 2 * n], p[2 + 2 * n], p[3 + 2 * n]);
    if ss != 0 || se != 63 || a != 0 {
        return Err(JpegError::Unsupported(
            "non-baseline spectral selection".into(),
        ));
    }
    Ok(scan)
}

fn decode_scan(
    data: &[u8],
    base: usize,
    scan: &[ScanComponent],
    layout: &McuGrid,
    st: &TableState,
) -> Result<Vec<ComponentBlocks>, JpegError> {
    let missing = |kind: &str, id: u8| {
        JpegError::malformed(base, format!("{kind} Huffman table {id} undefined"))
    };
    let tables = scan
        .iter()
        .map(|s| {
            let dc = st.dc[s.dc_table as usize]
                .as_ref()
                .ok_or_else(|| missing("DC", s.dc_table))?;
            let ac = st.ac[s.ac_table as usize]
                .as_ref()
                .ok_or_else(|| missing("AC", s.ac_table))?;
            Ok((DecodeTable::new(dc), DecodeTable::new(ac)))
        })
        .collect::<Result<Vec<_>, JpegError>>()?;

    let mut out: Vec<ComponentBlocks> = layout
        .components
        .iter()
        .map(|&(h, v)| {
            let (bw, bh) = (
                layout.mcus_per_row as usize * h as usize,
                layout.mcus_per_col as usize * v as usize,
            );
            ComponentBlocks {
                blocks_w: bw,
                blocks_h: bh,
                blocks: vec![[0i16; 64]; bw * bh],
            }
        })
        .collect();

    let mut reader = BitReader::new(data, base);
    let mut preds = vec![0i32; scan.len()];
    let ri = st.restart_interval as u64;
    let total = layout.mcu_count();
    let mut restarts = 0u8;
    for n in 0..total {
        if ri > 0 && n > 0 && n % ri == 0 {
            reader.restart(restarts)?;
            restarts = restarts.wrapping_add(1);
            preds.iter_mut().for_each(|p| *p = 0);
        }
        let (mx, my) = (
            (n % layout.mcus_per_row as u64) as usize,
            (n / layout.mcus_per_row as u64) as usize,
        );
        for (s, sc) in scan.iter().enumerate() {
            let (h, v) = layout.components[sc.component];
            let comp = &mut out[sc.component];
            for bv in 0..v as usize {
                for bh in 0..h as usize {
                    let row = my * v as usize + bv;
                    let col = mx * h as usize + bh;
                    let idx = row * comp.blocks_w + col;
                    huffman::decode_block(
                        &mut reader,
                        &tables[s].0,
                        &tables[s].1,
                        &mut preds[s],
                        &mut comp.blocks[idx],
                    )?;
                }
            }
        }
    }
    Ok(out)
}
