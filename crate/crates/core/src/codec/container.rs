//! File layout.
//!
//! ```text
//! "SRC1" | version u8
//! orig_h, orig_w, pad_h, pad_w      u32 LE each
//! transform                          kind u8 [+ 9 × f64 LE, row-major]
//! levels, block_side, redundancy, prototype set   u8 each
//! delta, theta                       f64 LE
//! block count Q                      u32 LE
//! index section | magnitude section  (Huffman, see `huffman`)
//! sign section                       u32 byte length | bits, MSB first
//! ```
//!
//! Symbol counts are implied: the index stream ends after its `Q`-th zero
//! and the number of coefficients is the number of non-zero index symbols.

use super::bits::{BitReader, BitWriter};
use super::huffman::{entropy_decode, entropy_encode, read_u32, Section};
use super::quant::QuantParams;
use super::symbols::BlockSymbolStream;
use crate::color::ColorTransform;
use crate::dictionary::{DictParams, PrototypeSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SRC1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub orig_height: usize,
    pub orig_width: usize,
    pub pad_height: usize,
    pub pad_width: usize,
    pub transform: ColorTransform,
    pub levels: usize,
    pub dict: DictParams,
    pub quant: QuantParams,
    pub block_count: usize,
}

impl Header {
    /// Blocks implied by the padded size and block side.
    pub fn expected_blocks(&self) -> usize {
        let side = self.dict.block_side;
        if side == 0 {
            return 0;
        }
        3 * (self.pad_height / side) * (self.pad_width / side)
    }

    fn validate(&self) -> Result<()> {
        let side = self.dict.block_side;
        if side < 2 || !self.pad_height.is_multiple_of(side) || !self.pad_width.is_multiple_of(side)
        {
            return Err(Error::Format(format!(
                "padded size {}x{} does not tile into {side}-blocks",
                self.pad_height, self.pad_width
            )));
        }
        if self.orig_height == 0
            || self.orig_width == 0
            || self.orig_height > self.pad_height
            || self.orig_width > self.pad_width
        {
            return Err(Error::Format("inconsistent image dimensions".to_string()));
        }
        if self.block_count != self.expected_blocks() {
            return Err(Error::Format(format!(
                "block count {} does not match the padded size",
                self.block_count
            )));
        }
        if self.levels == 0 {
            return Err(Error::Format("zero wavelet levels".to_string()));
        }
        Ok(())
    }
}

fn u32_field(v: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Format(format!("{what} {v} does not fit in 32 bits")))
}

fn u8_field(v: usize, what: &str) -> Result<u8> {
    u8::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in 8 bits")))
}

pub fn write_container(header: &Header, stream: &BlockSymbolStream) -> Result<Vec<u8>> {
    header.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for (v, what) in [
        (header.orig_height, "height"),
        (header.orig_width, "width"),
        (header.pad_height, "padded height"),
        (header.pad_width, "padded width"),
    ] {
        out.extend_from_slice(&u32_field(v, what)?);
    }
    header.transform.write_to(&mut out);
    out.push(u8_field(header.levels, "levels")?);
    out.push(u8_field(header.dict.block_side, "block side")?);
    out.push(u8_field(header.dict.redundancy, "redundancy")?);
    out.push(header.dict.prototypes.id());
    out.extend_from_slice(&header.quant.delta.to_le_bytes());
    out.extend_from_slice(&header.quant.theta.to_le_bytes());
    out.extend_from_slice(&u32_field(header.block_count, "block count")?);

    out.extend_from_slice(&entropy_encode(&stream.indices)?);
    out.extend_from_slice(&entropy_encode(&stream.magnitudes)?);

    let mut w = BitWriter::new();
    for &s in &stream.signs {
        w.write_bit(s);
    }
    let signs = w.finish();
    out.extend_from_slice(&u32_field(signs.len(), "sign section")?);
    out.extend_from_slice(&signs);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format(format!("truncated header at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let v = read_u32(self.bytes, self.pos)?;
        self.pos += 4;
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

pub fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("not a colorsparse file".to_string()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let orig_height = r.u32()?;
    let orig_width = r.u32()?;
    let pad_height = r.u32()?;
    let pad_width = r.u32()?;
    let (transform, used) = ColorTransform::read_from(r.rest())?;
    r.pos += used;
    let levels = usize::from(r.u8()?);
    let block_side = usize::from(r.u8()?);
    let redundancy = usize::from(r.u8()?);
    let proto = r.u8()?;
    let prototypes = PrototypeSet::from_id(proto)
        .ok_or_else(|| Error::Format(format!("unknown prototype set {proto}")))?;
    let delta = r.f64()?;
    let theta = r.f64()?;
    let quant = QuantParams::new(delta, theta).map_err(|e| Error::Format(e.to_string()))?;
    let block_count = r.u32()?;
    let header = Header {
        orig_height,
        orig_width,
        pad_height,
        pad_width,
        transform,
        levels,
        dict: DictParams {
            block_side,
            redundancy,
            prototypes,
        },
        quant,
        block_count,
    };
    header.validate()?;
    Ok((header, r.pos))
}

/// Byte split of a file: everything descriptive (fixed fields, code tables,
/// length fields) against the three coded streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub header: usize,
    pub payload: usize,
}

/// Parses a whole file into its header and symbol streams.
pub fn read_container(bytes: &[u8]) -> Result<(Header, BlockSymbolStream)> {
    read_container_layout(bytes).map(|(h, s, _)| (h, s))
}

pub fn read_container_layout(bytes: &[u8]) -> Result<(Header, BlockSymbolStream, Layout)> {
    let (header, mut pos) = read_header(bytes)?;
    let mut payload = 0usize;

    let mut section = Section::parse(&bytes[pos..])?;
    let mut indices = Vec::new();
    let mut zeros = 0usize;
    while zeros < header.block_count {
        let s = section.next_symbol()?;
        zeros += usize::from(s == 0);
        indices.push(s);
    }
    pos += section.size;
    payload += section.payload_len();
    let entries = indices.len() - header.block_count;

    let (magnitudes, used) = entropy_decode(&bytes[pos..], entries)?;
    payload += read_u32(bytes, pos)? as usize;
    pos += used;

    let sign_len = read_u32(bytes, pos)? as usize;
    pos += 4;
    let sign_bytes = bytes
        .get(pos..pos + sign_len)
        .ok_or_else(|| Error::Format("truncated sign section".to_string()))?;
    if sign_len != entries.div_ceil(8) {
        return Err(Error::Format("sign section length mismatch".to_string()));
    }
    pos += sign_len;
    payload += sign_len;
    let mut reader = BitReader::new(sign_bytes);
    let signs = (0..entries)
        .map(|_| reader.read_bit())
        .collect::<Result<Vec<_>>>()?;
    if pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after sign section",
            bytes.len() - pos
        )));
    }
    Ok((
        header,
        BlockSymbolStream {
            indices,
            magnitudes,
            signs,
        },
        Layout {
            header: bytes.len() - payload,
            payload,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            orig_height: 30,
            orig_width: 20,
            pad_height: 32,
            pad_width: 32,
            transform: ColorTransform::dct(),
            levels: 2,
            dict: DictParams::default(),
            quant: QuantParams::with_step(1.5).unwrap(),
            block_count: 12,
        }
    }

    #[test]
    fn round_trip() {
        let h = header();
        let mut indices = vec![0u32; 12];
        indices.splice(3..3, [4, 9, 100]);
        let stream = BlockSymbolStream {
            indices,
            magnitudes: vec![1, 7, 3],
            signs: vec![true, false, true],
        };
        let bytes = write_container(&h, &stream).unwrap();
        assert_eq!(&bytes[..4], b"SRC1");
        let (h2, s2) = read_container(&bytes).unwrap();
        assert_eq!(h2, h);
        assert_eq!(s2, stream);

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(read_container(&bad).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_container(&bad).is_err());
        assert!(read_container(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(read_container(&long).is_err());
    }

    #[test]
    fn rejects_inconsistent_header() {
        let mut h = header();
        h.block_count = 11;
        let stream = BlockSymbolStream {
            indices: vec![0; 11],
            ..Default::default()
        };
        assert!(write_container(&h, &stream).is_err());
    }
}
