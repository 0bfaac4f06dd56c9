//! Canonical, length-limited Huffman coding of non-negative integer symbols.
//!
//! A coded section is laid out as
//!
//! ```text
//! payload_len: u32 LE      bytes of the bit payload that follow the table
//! count:       u16 LE      distinct symbols
//! gaps:        count × LEB128   symbols ascending, each stored as the gap
//!                               to the previous symbol minus one
//! lengths:     ⌈count/2⌉ bytes  (code length − 1) nibbles, high nibble first
//! payload:     payload_len bytes, canonical codes MSB-first, zero padded
//! ```

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

pub const MAX_CODE_LEN: u8 = 16;

/// Code lengths for `counts` (all positive), limited to `limit` bits.
fn code_lengths(counts: &[u64], limit: u8) -> Vec<u8> {
    let n = counts.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![1],
        _ => {}
    }
    let mut weights = counts.to_vec();
    loop {
        let lengths = unbounded_lengths(&weights);
        if lengths.iter().all(|&l| l <= limit) {
            return lengths;
        }
        for w in &mut weights {
            *w = (*w >> 1).max(1);
        }
    }
}

fn unbounded_lengths(weights: &[u64]) -> Vec<u8> {
    let n = weights.len();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| Reverse((w, i)))
        .collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, next)));
        next += 1;
    }
    // parents always have larger ids, so walk ids downward from the root
    let mut depth = vec![0u8; 2 * n - 1];
    for id in (0..2 * n - 2).rev() {
        depth[id] = depth[parent[id]] + 1;
    }
    depth.truncate(n);
    depth
}

/// Canonical Huffman code over an observed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    /// `(symbol, code length)`, symbols ascending.
    entries: Vec<(u32, u8)>,
}

impl HuffmanTable {
    pub fn from_symbols(symbols: &[u32]) -> Self {
        let mut hist: HashMap<u32, u64> = HashMap::new();
        for &s in symbols {
            *hist.entry(s).or_default() += 1;
        }
        let mut pairs: Vec<(u32, u64)> = hist.into_iter().collect();
        pairs.sort_unstable_by_key(|&(s, _)| s);
        let counts: Vec<u64> = pairs.iter().map(|&(_, c)| c).collect();
        let lengths = code_lengths(&counts, MAX_CODE_LEN);
        Self {
            entries: pairs
                .iter()
                .zip(lengths)
                .map(|(&(s, _), l)| (s, l))
                .collect(),
        }
    }

    pub fn from_entries(mut entries: Vec<(u32, u8)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(s, _)| s);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("duplicate symbol in code table".to_string()));
        }
        if entries.iter().any(|&(_, l)| l == 0 || l > MAX_CODE_LEN) {
            return Err(Error::Format("code length out of range".to_string()));
        }
        // Kraft inequality must hold for a decodable prefix code
        let kraft: u64 = entries
            .iter()
            .map(|&(_, l)| 1u64 << (MAX_CODE_LEN - l))
            .sum();
        if kraft > 1u64 << MAX_CODE_LEN {
            return Err(Error::Format(
                "code table violates the Kraft inequality".to_string(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(u32, u8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Symbols in canonical order with their codes.
    fn canonical(&self) -> Vec<(u32, u32, u8)> {
        let mut order: Vec<(u32, u8)> = self.entries.clone();
        order.sort_unstable_by_key(|&(s, l)| (l, s));
        let mut out = Vec::with_capacity(order.len());
        let mut code = 0u32;
        let mut prev_len = 0u8;
        for (s, l) in order {
            if prev_len != 0 {
                code = (code + 1) << (l - prev_len);
            }
            prev_len = l;
            out.push((s, code, l));
        }
        out
    }

    /// Mean code length weighted by the symbols' occurrences in `symbols`.
    pub fn mean_code_length(&self, symbols: &[u32]) -> f64 {
        let lens: HashMap<u32, u8> = self.entries.iter().copied().collect();
        let total: u64 = symbols.iter().map(|s| u64::from(lens[s])).sum();
        total as f64 / symbols.len().max(1) as f64
    }

    fn write_descriptor(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.entries.len() as u16).to_le_bytes());
        let mut prev: Option<u32> = None;
        for &(s, _) in &self.entries {
            let gap = match prev {
                None => s,
                Some(p) => s - p - 1,
            };
            write_varint(out, gap);
            prev = Some(s);
        }
        for pair in self.entries.chunks(2) {
            let hi = pair[0].1 - 1;
            let lo = pair.get(1).map_or(0, |e| e.1 - 1);
            out.push(hi << 4 | lo);
        }
    }

    fn read_descriptor(bytes: &[u8]) -> Result<(Self, usize)> {
        let count = u16::from_le_bytes(
            bytes
                .get(..2)
                .ok_or_else(|| Error::Format("truncated code table".to_string()))?
                .try_into()
                .unwrap(),
        ) as usize;
        let mut pos = 2;
        let mut symbols = Vec::with_capacity(count);
        let mut prev: Option<u32> = None;
        for _ in 0..count {
            let (gap, used) = read_varint(&bytes[pos..])?;
            pos += used;
            let s = match prev {
                None => Some(gap),
                Some(p) => p.checked_add(gap).and_then(|v| v.checked_add(1)),
            }
            .ok_or_else(|| Error::Format("code table symbol overflow".to_string()))?;
            symbols.push(s);
            prev = Some(s);
        }
        let nibble_bytes = count.div_ceil(2);
        let packed = bytes
            .get(pos..pos + nibble_bytes)
            .ok_or_else(|| Error::Format("truncated code lengths".to_string()))?;
        pos += nibble_bytes;
        let entries = symbols
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let b = packed[i / 2];
                let nib = if i % 2 == 0 { b >> 4 } else { b & 0xF };
                (s, nib + 1)
            })
            .collect();
        Ok((Self::from_entries(entries)?, pos))
    }

    pub fn encoder(&self) -> HashMap<u32, (u32, u8)> {
        self.canonical()
            .into_iter()
            .map(|(s, c, l)| (s, (c, l)))
            .collect()
    }

    pub fn decoder(&self) -> Decoder {
        let canon = self.canonical();
        let max_len = canon.last().map_or(0, |c| c.2) as usize;
        let mut count = vec![0u32; max_len + 1];
        for &(_, _, l) in &canon {
            count[l as usize] += 1;
        }
        let mut first = vec![0u32; max_len + 1];
        let mut offset = vec![0usize; max_len + 1];
        let mut code = 0u32;
        let mut idx = 0usize;
        for len in 1..=max_len {
            first[len] = code;
            offset[len] = idx;
            code = (code + count[len]) << 1;
            idx += count[len] as usize;
        }
        Decoder {
            symbols: canon.iter().map(|c| c.0).collect(),
            count,
            first,
            offset,
        }
    }
}

pub struct Decoder {
    symbols: Vec<u32>,
    count: Vec<u32>,
    first: Vec<u32>,
    offset: Vec<usize>,
}

impl Decoder {
    pub fn next(&self, reader: &mut BitReader<'_>) -> Result<u32> {
        let mut code = 0u32;
        for len in 1..self.count.len() {
            code = code << 1 | u32::from(reader.read_bit()?);
            let delta = code.wrapping_sub(self.first[len]);
            if code >= self.first[len] && delta < self.count[len] {
                return Ok(self.symbols[self.offset[len] + delta as usize]);
            }
        }
        Err(Error::Format("invalid Huffman code in payload".to_string()))
    }
}

fn write_varint(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8]) -> Result<(u32, usize)> {
    let mut v: u64 = 0;
    for (i, &b) in bytes.iter().enumerate().take(5) {
        v |= u64::from(b & 0x7F) << (7 * i);
        if b & 0x80 == 0 {
            return u32::try_from(v)
                .map(|v| (v, i + 1))
                .map_err(|_| Error::Format("varint overflow".to_string()));
        }
    }
    Err(Error::Format("truncated or oversized varint".to_string()))
}

pub(crate) fn read_u32(bytes: &[u8], pos: usize) -> Result<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated length field".to_string()))
}

/// Codes `symbols` as one self-contained section.
pub fn entropy_encode(symbols: &[u32]) -> Result<Vec<u8>> {
    let table = HuffmanTable::from_symbols(symbols);
    if table.len() > usize::from(u16::MAX) {
        return Err(Error::Format(format!(
            "alphabet of {} symbols exceeds the code table limit",
            table.len()
        )));
    }
    let codes = table.encoder();
    let mut w = BitWriter::new();
    for s in symbols {
        let (code, len) = codes[s];
        w.write(code, u32::from(len));
    }
    let payload = w.finish();
    let mut out = Vec::with_capacity(payload.len() + 8 + 3 * table.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    table.write_descriptor(&mut out);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Parsed section: a decoder positioned at the start of the payload.
pub struct Section<'a> {
    decoder: Decoder,
    reader: BitReader<'a>,
    empty: bool,
    payload_len: usize,
    /// Bytes the whole section occupies.
    pub size: usize,
}

impl<'a> Section<'a> {
    pub fn parse(bytes: &'a [u8]) -> Result<Self> {
        let payload_len = read_u32(bytes, 0)? as usize;
        let (table, used) = HuffmanTable::read_descriptor(&bytes[4..])?;
        let start = 4 + used;
        let payload = bytes
            .get(start..start + payload_len)
            .ok_or_else(|| Error::Format("truncated Huffman payload".to_string()))?;
        Ok(Self {
            empty: table.is_empty(),
            payload_len,
            decoder: table.decoder(),
            reader: BitReader::new(payload),
            size: start + payload_len,
        })
    }

    /// Bytes of coded symbols, excluding length field and code table.
    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn next_symbol(&mut self) -> Result<u32> {
        if self.empty {
            return Err(Error::Format(
                "symbol requested from empty section".to_string(),
            ));
        }
        self.decoder.next(&mut self.reader)
    }
}

/// Decodes `count` symbols from a section; returns them and the section size.
pub fn entropy_decode(bytes: &[u8], count: usize) -> Result<(Vec<u32>, usize)> {
    let mut section = Section::parse(bytes)?;
    let symbols = (0..count)
        .map(|_| section.next_symbol())
        .collect::<Result<Vec<_>>>()?;
    Ok((symbols, section.size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_symbol_alphabet() {
        let symbols = vec![42u32; 100];
        let bytes = entropy_encode(&symbols).unwrap();
        let table = HuffmanTable::from_symbols(&symbols);
        assert_eq!(table.entries(), &[(42, 1)]);
        let payload = read_u32(&bytes, 0).unwrap() as usize;
        assert!(payload <= 100usize.div_ceil(8));
        assert_eq!(entropy_decode(&bytes, 100).unwrap().0, symbols);
    }

    #[test]
    fn skewed_two_symbol_source() {
        let symbols: Vec<u32> = (0..1000).map(|i| if i % 10 == 0 { 7 } else { 3 }).collect();
        let table = HuffmanTable::from_symbols(&symbols);
        assert!(table.mean_code_length(&symbols) <= 1.0);
    }

    #[test]
    fn lengths_are_limited() {
        // Fibonacci weights force a maximally skewed tree.
        let mut counts = vec![1u64, 1];
        while counts.len() < 30 {
            let n = counts.len();
            counts.push(counts[n - 1] + counts[n - 2]);
        }
        let lengths = code_lengths(&counts, MAX_CODE_LEN);
        assert!(lengths.iter().all(|&l| l <= MAX_CODE_LEN));
        let kraft: f64 = lengths.iter().map(|&l| 0.5f64.powi(l as i32)).sum();
        assert!(kraft <= 1.0 + 1e-12);
        let mut symbols = Vec::new();
        for (s, &c) in counts.iter().enumerate().take(24) {
            symbols.extend(std::iter::repeat_n(s as u32, c as usize));
        }
        let bytes = entropy_encode(&symbols).unwrap();
        assert_eq!(entropy_decode(&bytes, symbols.len()).unwrap().0, symbols);
    }

    #[test]
    fn empty_and_corrupt() {
        let bytes = entropy_encode(&[]).unwrap();
        assert_eq!(entropy_decode(&bytes, 0).unwrap().0, Vec::<u32>::new());
        assert!(entropy_decode(&bytes, 1).is_err());
        let bytes = entropy_encode(&[1, 2, 3, 1, 1, 5]).unwrap();
        assert!(entropy_decode(&bytes[..bytes.len() - 1], 6).is_err());
    }

    proptest! {
        #[test]
        fn lossless(symbols in proptest::collection::vec(0u32..5000, 0..600)) {
            let bytes = entropy_encode(&symbols).unwrap();
            let (back, used) = entropy_decode(&bytes, symbols.len()).unwrap();
            prop_assert_eq!(back, symbols);
            prop_assert_eq!(used, bytes.len());
        }
    }
}
