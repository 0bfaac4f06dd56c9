//! Lossy RGB image codec: a cross-color transform, a CDF 9/7 wavelet, and
//! block-wise greedy sparse approximation (HBW-OMP2D) of the wavelet
//! coefficients over a separable mixed dictionary, followed by dead-zone
//! quantisation and Huffman coding.
//!
//! ```no_run
//! use colorsparse::codec::{decode_image, encode_image, EncoderConfig, Mode};
//! use colorsparse::image_io::read_ppm;
//!
//! let img = read_ppm(&std::fs::read("in.ppm")?)?;
//! let cfg = EncoderConfig { mode: Mode::TargetPsnr(36.0), ..Default::default() };
//! let out = encode_image(&img, &cfg)?;
//! let back = decode_image(&out.bytes)?;
//! # Ok::<(), colorsparse::Error>(())
//! ```

pub mod analysis;
pub mod codec;
pub mod color;
pub mod dictionary;
pub mod error;
pub mod image_io;
pub mod metrics;
pub mod plane;
pub mod pursuit;
pub mod wavelet;

pub use error::{Error, Result};
pub use image_io::RgbImage;
pub use plane::Plane;
