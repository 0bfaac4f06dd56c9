//! 8-bit RGB rasters, binary PPM (P6) I/O and block padding.

use crate::error::{Error, Result};
use crate::plane::Plane;

/// 8-bit, 3-channel raster stored interleaved, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function of (row, col).
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Splits the raster into three real planes (R, G, B).
    pub fn to_planes(&self) -> [Plane; 3] {
        let mut planes = [
            Plane::zeros(self.height, self.width),
            Plane::zeros(self.height, self.width),
            Plane::zeros(self.height, self.width),
        ];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for (z, plane) in planes.iter_mut().enumerate() {
                plane.as_mut_slice()[i] = f64::from(px[z]);
            }
        }
        planes
    }

    /// Rebuilds a raster from real planes, clamping to [0, 255] and rounding.
    pub fn from_planes(planes: &[Plane; 3]) -> Result<Self> {
        let (rows, cols) = (planes[0].rows(), planes[0].cols());
        if planes.iter().any(|p| p.rows() != rows || p.cols() != cols) {
            return Err(Error::DimensionMismatch(
                "planes differ in size".to_string(),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols * 3);
        for i in 0..rows * cols {
            for plane in planes {
                data.push(plane.as_slice()[i].clamp(0.0, 255.0).round() as u8);
            }
        }
        Self::new(cols, rows, data)
    }

    /// Copies the `height`×`width` window whose top-left pixel is (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> RgbImage {
        assert!(row + height <= self.height && col + width <= self.width);
        RgbImage::from_fn(width, height, |r, c| self.pixel(row + r, col + c))
    }
}

/// Image extended on the bottom/right to a multiple of the block side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedImage {
    pub image: RgbImage,
    pub orig_height: usize,
    pub orig_width: usize,
}

impl PaddedImage {
    pub fn crop(&self) -> RgbImage {
        self.image.crop(0, 0, self.orig_height, self.orig_width)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

/// Parses a binary P6 PPM with maxval 255.
pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(cur.err("missing P6 magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_offset,
            reason: format!("unsupported maxval {maxval}, only 255 is accepted"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace before raster")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| cur.err("dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < needed {
        return Err(Error::Parse {
            offset: bytes.len(),
            reason: format!(
                "truncated raster: expected {needed} bytes, found {}",
                payload.len()
            ),
        });
    }
    RgbImage::new(width, height, payload[..needed].to_vec())
}

/// Writes the canonical binary P6 form: `P6 <w> <h> 255\n` then the raster.
pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    let header = format!("P6 {} {} 255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

/// Maps an out-of-range coordinate back into `0..len` by edge-inclusive mirroring.
fn mirror_index(i: usize, len: usize) -> usize {
    let period = 2 * len;
    let m = i % period;
    if m < len {
        m
    } else {
        period - 1 - m
    }
}

/// Mirrors the bottom/right edges so both dimensions become multiples of `block_side`.
pub fn pad_to_block(img: &RgbImage, block_side: usize) -> PaddedImage {
    assert!(block_side >= 1, "block side must be positive");
    let height = img.height.div_ceil(block_side) * block_side;
    let width = img.width.div_ceil(block_side) * block_side;
    let image = RgbImage::from_fn(width, height, |r, c| {
        img.pixel(mirror_index(r, img.height), mirror_index(c, img.width))
    });
    PaddedImage {
        image,
        orig_height: img.height,
        orig_width: img.width,
    }
}
