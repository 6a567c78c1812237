//! Huffman tables, bit-level I/O and block entropy coding for baseline JPEG.

use crate::error::JpegError;

/// A table as stored in a DHT segment: code counts per length and the
/// symbols in code order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanSpec {
    pub bits: [u8; 16],
    pub values: Vec<u8>,
}

impl HuffmanSpec {
    /// Canonical (code, length) pairs in `values` order.
    fn codes(&self) -> Vec<(u16, u8)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut code: u32 = 0;
        for (len, &count) in self.bits.iter().enumerate() {
            for _ in 0..count {
                out.push((code as u16, len as u8 + 1));
                code += 1;
            }
            code <<= 1;
        }
        out
    }

    /// Builds a length-limited optimal table from symbol frequencies.
    ///
    /// Follows the reference procedure: a reserved pseudo-symbol guarantees
    /// no code is all ones, lengths over 16 are folded back, and symbols are
    /// listed by increasing code length then symbol value.
    pub fn optimal(freq: &[u64; 256]) -> HuffmanSpec {
        let mut freq: Vec<u64> = freq.iter().copied().chain(std::iter::once(1)).collect();
        let mut codesize = [0usize; 257];
        let mut others = [-1i32; 257];

        loop {
            let mut c1: i32 = -1;
            let mut v = u64::MAX;
            for (i, &f) in freq.iter().enumerate() {
                if f != 0 && f <= v {
                    v = f;
                    c1 = i as i32;
                }
            }
            let mut c2: i32 = -1;
            v = u64::MAX;
            for (i, &f) in freq.iter().enumerate() {
                if f != 0 && f <= v && i as i32 != c1 {
                    v = f;
                    c2 = i as i32;
                }
            }
            if c2 < 0 {
                break;
            }
            let (mut a, mut b) = (c1 as usize, c2 as usize);
            freq[a] += freq[b];
            freq[b] = 0;
            codesize[a] += 1;
            while others[a] >= 0 {
                a = others[a] as usize;
                codesize[a] += 1;
            }
            others[a] = c2;
            codesize[b] += 1;
            while others[b] >= 0 {
                b = others[b] as usize;
                codesize[b] += 1;
            }
        }

        let mut bits = [0u32; 33];
        for &cs in codesize.iter().filter(|&&cs| cs > 0) {
            bits[cs.min(32)] += 1;
        }
        for i in (17..=32).rev() {
            while bits[i] > 0 {
                let mut j = i - 2;
                while bits[j] == 0 {
                    j -= 1;
                }
                bits[i] -= 2;
                bits[i - 1] += 1;
                bits[j + 1] += 2;
                bits[j] -= 1;
            }
        }
        let mut i = 16;
        while bits[i] == 0 {
            i -= 1;
        }
        bits[i] -= 1;

        let mut values = Vec::new();
        for len in 1..=32 {
            values.extend(
                (0..256)
                    .filter(|&sym| codesize[sym] == len)
                    .map(|sym| sym as u8),
            );
        }
        // folding may have shortened some codes; the symbol order stands
        let total: u32 = bits[1..=16].iter().sum();
        values.truncate(total as usize);
        let mut out = [0u8; 16];
        for (k, b) in out.iter_mut().enumerate() {
            *b = bits[k + 1] as u8;
        }
        HuffmanSpec { bits: out, values }
    }
}

/// Decoding form of a [`HuffmanSpec`].
#[derive(Debug, Clone)]
pub struct DecodeTable {
    maxcode: [i32; 17],
    valptr: [i32; 17],
    mincode: [i32; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    pub fn new(spec: &HuffmanSpec) -> DecodeTable {
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let n = spec.bits[len - 1] as i32;
            if n > 0 {
                valptr[len] = k;
                mincode[len] = code;
                code += n;
                k += n;
                maxcode[len] = code - 1;
            }
            code <<= 1;
        }
        DecodeTable {
            maxcode,
            valptr,
            mincode,
            values: spec.values.clone(),
        }
    }
}

/// Encoding form: code and length per symbol.
#[derive(Debug, Clone)]
pub struct EncodeTable {
    code: [u16; 256],
    size: [u8; 256],
}

impl EncodeTable {
    pub fn new(spec: &HuffmanSpec) -> EncodeTable {
        let mut code = [0u16; 256];
        let mut size = [0u8; 256];
        for (&sym, (c, l)) in spec.values.iter().zip(spec.codes()) {
            code[sym as usize] = c;
            size[sym as usize] = l;
        }
        EncodeTable { code, size }
    }
}

/// Reads entropy-coded bits, undoing byte stuffing. Stops at any marker.
pub struct BitReader<'a> {
    data: &'a [u8],
    /// Absolute file offset of `data[0]`, for error reports.
    base: usize,
    pos: usize,
    acc: u64,
    nbits: u32,
    /// Zero bits appended past a marker or the end of data.
    padded: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8], base: usize) -> Self {
        BitReader {
            data,
            base,
            pos: 0,
            acc: 0,
            nbits: 0,
            padded: 0,
        }
    }

    fn fill(&mut self) {
        while self.nbits <= 56 {
            let byte = if self.padded > 0 || self.pos >= self.data.len() {
                self.padded += 8;
                0
            } else if self.data[self.pos] == 0xFF {
                if self.data.get(self.pos + 1) == Some(&0x00) {
                    self.pos += 2;
                    0xFF
                } else {
                    self.padded += 8;
                    0
                }
            } else {
                self.pos += 1;
                self.data[self.pos - 1]
            };
            self.acc |= (byte as u64) << (56 - self.nbits);
            self.nbits += 8;
        }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn bits(&mut self, n: u32) -> Result<u32, JpegError> {
        if n == 0 {
            return Ok(0);
        }
        if self.nbits < n {
            self.fill();
        }
        if self.nbits - self.padded.min(self.nbits) < n {
            return Err(JpegError::Truncated {
                offset: self.offset(),
            });
        }
        let v = (self.acc >> (64 - n)) as u32;
        self.acc <<= n;
        self.nbits -= n;
        Ok(v)
    }

    pub fn decode(&mut self, table: &DecodeTable) -> Result<u8, JpegError> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | self.bits(1)? as i32;
            if code <= table.maxcode[len] {
                let idx = table.valptr[len] + code - table.mincode[len];
                return table
                    .values
                    .get(idx as usize)
                    .copied()
                    .ok_or_else(|| JpegError::malformed(self.offset(), "Huffman value index"));
            }
        }
        Err(JpegError::malformed(self.offset(), "invalid Huffman code"))
    }

    /// `RECEIVE` + `EXTEND`: reads `s` bits and sign-extends them.
    pub fn receive_extend(&mut self, s: u8) -> Result<i32, JpegError> {
        if s == 0 {
            return Ok(0);
        }
        let v = self.bits(s as u32)? as i32;
        Ok(if v < 1 << (s - 1) {
            v - (1 << s) + 1
        } else {
            v
        })
    }

    /// Drops buffered bits and consumes the expected `RSTn` marker.
    pub fn restart(&mut self, n: u8) -> Result<(), JpegError> {
        // bytes pulled into the accumulator but not consumed are discarded
        self.acc = 0;
        self.nbits = 0;
        self.padded = 0;
        match self.data.get(self.pos..self.pos + 2) {
            Some([0xFF, m]) if *m == 0xD0 + (n & 7) => {
                self.pos += 2;
                Ok(())
            }
            Some(_) => Err(JpegError::malformed(
                self.offset(),
                "expected restart marker",
            )),
            None => Err(JpegError::Truncated {
                offset: self.offset(),
            }),
        }
    }

    /// Whole bytes not yet consumed by the decoder. Zero at a clean scan end.
    pub fn unread_bytes(&self) -> usize {
        let buffered = (self.nbits.saturating_sub(self.padded)) / 8;
        self.data.len() - self.pos + buffered as usize
    }
}

/// Writes entropy-coded bits with byte stuffing.
#[derive(Default)]
pub struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, value: u32, size: u32) {
        debug_assert!(size <= 16);
        if size == 0 {
            return;
        }
        self.acc = (self.acc << size) | (value & ((1 << size) - 1));
        self.nbits += size;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    /// Pads with one bits to a byte boundary and returns the bytes.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

/// Number of bits needed for `|v|` (the JPEG magnitude category).
pub fn category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

/// Decodes one block into zigzag-ordered coefficients; `pred` is the DC
/// predictor for the component and is updated in place.
pub fn decode_block(
    r: &mut BitReader<'_>,
    dc: &DecodeTable,
    ac: &DecodeTable,
    pred: &mut i32,
    out: &mut [i16; 64],
) -> Result<(), JpegError> {
    let t = r.decode(dc)?;
    if t > 11 {
        return Err(JpegError::malformed(r.offset(), "DC category out of range"));
    }
    *pred += r.receive_extend(t)?;
    out[0] =
        i16::try_from(*pred).map_err(|_| JpegError::malformed(r.offset(), "DC value overflow"))?;
    let mut k = 1usize;
    while k < 64 {
        let rs = r.decode(ac)?;
        let (run, s) = ((rs >> 4) as usize, rs & 0x0F);
        if s == 0 {
            if run == 15 {
                k += 16;
                if k > 64 {
                    return Err(JpegError::malformed(
                        r.offset(),
                        "zero run past end of block",
                    ));
                }
                continue;
            }
            break;
        }
        if s > 10 {
            return Err(JpegError::malformed(r.offset(), "AC category out of range"));
        }
        k += run;
        if k > 63 {
            return Err(JpegError::malformed(
                r.offset(),
                "AC index past end of block",
            ));
        }
        out[k] = r.receive_extend(s)? as i16;
        k += 1;
    }
    Ok(())
}

/// Symbol statistics for one block, mirroring [`encode_block`].
pub fn count_block(
    block: &[i16; 64],
    pred: &mut i32,
    dc_freq: &mut [u64; 256],
    ac_freq: &mut [u64; 256],
) {
    let diff = block[0] as i32 - *pred;
    *pred = block[0] as i32;
    dc_freq[category(diff) as usize] += 1;
    let mut run = 0;
    for &c in &block[1..] {
        if c == 0 {
            run += 1;
            continue;
        }
        while run > 15 {
            ac_freq[0xF0] += 1;
            run -= 16;
        }
        ac_freq[(run << 4) | category(c as i32) as usize] += 1;
        run = 0;
    }
    if run > 0 {
        ac_freq[0x00] += 1;
    }
}

fn put_value(w: &mut BitWriter, v: i32, s: u8) {
    let bits = if v < 0 { v - 1 } else { v };
    w.put(bits as u32, s as u32);
}

pub fn encode_block(
    w: &mut BitWriter,
    block: &[i16; 64],
    pred: &mut i32,
    dc: &EncodeTable,
    ac: &EncodeTable,
) {
    let diff = block[0] as i32 - *pred;
    *pred = block[0] as i32;
    let s = category(diff);
    w.put(dc.code[s as usize] as u32, dc.size[s as usize] as u32);
    put_value(w, diff, s);
    let mut run = 0usize;
    for &c in &block[1..] {
        if c == 0 {
            run += 1;
            continue;
        }
        while run > 15 {
            w.put(ac.code[0xF0] as u32, ac.size[0xF0] as u32);
            run -= 16;
        }
        let s = category(c as i32);
        let sym = (run << 4) | s as usize;
        w.put(ac.code[sym] as u32, ac.size[sym] as u32);
        put_value(w, c as i32, s);
        run = 0;
    }
    if run > 0 {
        w.put(ac.code[0] as u32, ac.size[0] as u32);
    }
}
