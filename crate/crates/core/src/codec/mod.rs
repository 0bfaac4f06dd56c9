//! Encoder and decoder.
//!
//! Encoding pads the image, applies the colour transform and the wavelet,
//! stacks the three coefficient planes, approximates them block-wise with
//! HBW-OMP2D, quantises the coefficients and entropy-codes the result.
//! Decoding runs the same synthesis on the dequantised coefficients.

pub mod bits;
pub mod container;
pub mod huffman;
pub mod quant;
pub mod symbols;

use crate::color::{apply_forward, apply_inverse, ColorTransform, TransformKind};
use crate::dictionary::{build_mixed, DictParams, SeparableDictionary};
use crate::error::{Error, Result};
use crate::image_io::{pad_to_block, RgbImage};
use crate::metrics::{psnr, sparsity_ratio};
use crate::pursuit::{
    concat_channels, partition_blocks, reconstruct, split_channels, BlockDecomposition, HbwPursuit,
    StopRule,
};
use crate::wavelet::{dwt_volume, idwt_volume, DEFAULT_LEVELS};

use container::{read_container, write_container, Header};
use quant::QuantParams;
use symbols::{deserialize_blocks, serialize_blocks};

/// Colour transform to encode with.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformChoice {
    /// Fixed or derived from the image being encoded.
    Kind(TransformKind),
    /// A given matrix, e.g. a learned one.
    Fixed(ColorTransform),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Reach this PSNR (dB) at the smallest step that still meets it.
    TargetPsnr(f64),
    /// Select exactly this many atoms in total.
    TargetAtoms(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub transform: TransformChoice,
    pub levels: usize,
    pub dict: DictParams,
    pub mode: Mode,
    /// Fixes the quantisation step instead of searching for it.
    pub delta: Option<f64>,
    /// Dead-zone threshold; defaults to half the step.
    pub theta: Option<f64>,
    /// Approximation target relative to the requested PSNR, leaving room
    /// for quantisation loss.
    pub overshoot: f64,
    /// Give up once this many atoms have been selected.
    pub max_atoms: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            transform: TransformChoice::Kind(TransformKind::Dct),
            levels: DEFAULT_LEVELS,
            dict: DictParams::default(),
            mode: Mode::TargetPsnr(35.0),
            delta: None,
            theta: None,
            overshoot: 1.025,
            max_atoms: None,
        }
    }
}

/// Step used in atom-count mode when none is given.
pub const DEFAULT_ATOMS_DELTA: f64 = 1.0;

/// Initial bounds of the step search; the upper one widens if still feasible.
const DELTA_RANGE: (f64, f64) = (1e-3, 64.0);
const MAX_DELTA_PROBES: usize = 30;
/// Accepted PSNR window above the target.
const PSNR_SLACK: f64 = 0.1;
const MAX_TIGHTEN_ROUNDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeStats {
    /// PSNR of the decoded image against the input.
    pub psnr: f64,
    /// Sparsity ratio over the stored (non-zero) coefficients.
    pub sr: f64,
    /// Atoms selected by the pursuit.
    pub atoms: usize,
    /// Coefficients stored after quantisation.
    pub stored: usize,
    pub bpp: f64,
    pub delta: f64,
    pub theta: f64,
    pub bytes: usize,
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub bytes: Vec<u8>,
    pub stats: EncodeStats,
}

/// File bytes, decoded image and stored coefficient count.
type Probe = (Vec<u8>, RgbImage, usize);

/// Everything the decoder needs besides the coefficients.
struct Synthesis<'d> {
    header: Header,
    dict: &'d SeparableDictionary,
}

impl Synthesis<'_> {
    fn image(&self, decomps: &[BlockDecomposition]) -> Result<RgbImage> {
        let h = &self.header;
        let ext = reconstruct(decomps, self.dict, 3 * h.pad_height, h.pad_width)?;
        let volume = split_channels(&ext, h.levels)?;
        let planes = apply_inverse(&idwt_volume(&volume), &h.transform);
        let padded = RgbImage::from_planes(&planes)?;
        Ok(padded.crop(0, 0, h.orig_height, h.orig_width))
    }

    /// Writes a file for these decompositions and decodes it again.
    fn probe(&mut self, decomps: &[BlockDecomposition], quant: QuantParams) -> Result<Probe> {
        self.header.quant = quant;
        let (mx, my) = (self.dict.x.count(), self.dict.y.count());
        let stream = serialize_blocks(decomps, quant, mx, my)?;
        let bytes = write_container(&self.header, &stream)?;
        let (header, stream) = read_container(&bytes)?;
        let decoded = deserialize_blocks(&stream, header.block_count, header.quant, mx, my)?;
        let img = self.image(&decoded)?;
        Ok((bytes, img, stream.magnitudes.len()))
    }
}

fn resolve_transform(choice: &TransformChoice, img: &RgbImage) -> Result<ColorTransform> {
    let t = match choice {
        TransformChoice::Kind(kind) => ColorTransform::of_kind(*kind, img)?,
        TransformChoice::Fixed(t) => t.clone(),
    };
    // use exactly what the decoder will read back
    let mut buf = Vec::new();
    t.write_to(&mut buf);
    Ok(ColorTransform::read_from(&buf)?.0)
}

fn quant_params(delta: f64, theta: Option<f64>) -> Result<QuantParams> {
    match theta {
        Some(theta) => QuantParams::new(delta, theta),
        None => QuantParams::with_step(delta),
    }
}

pub fn encode_image(img: &RgbImage, cfg: &EncoderConfig) -> Result<EncodeOutput> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Config("empty image".to_string()));
    }
    let side = cfg.dict.block_side;
    let dict = build_mixed(cfg.dict)?;
    let transform = resolve_transform(&cfg.transform, img)?;
    if !(cfg.overshoot >= 1.0 && cfg.overshoot.is_finite()) {
        return Err(Error::Config(format!(
            "overshoot must be at least 1, got {}",
            cfg.overshoot
        )));
    }

    let padded = pad_to_block(img, side);
    let (pad_h, pad_w) = (padded.image.height(), padded.image.width());
    let planes = apply_forward(&padded.image.to_planes(), &transform);
    let volume = dwt_volume(&planes, cfg.levels)?;
    let blocks = partition_blocks(&concat_channels(&volume), side)?;

    let header = Header {
        orig_height: img.height(),
        orig_width: img.width(),
        pad_height: pad_h,
        pad_width: pad_w,
        transform,
        levels: cfg.levels,
        dict: cfg.dict,
        quant: QuantParams::with_step(1.0)?,
        block_count: blocks.len(),
    };
    let mut synth = Synthesis {
        header,
        dict: &dict,
    };
    let mut pursuit = HbwPursuit::new(&blocks, &dict);
    let max_atoms = cfg.max_atoms.unwrap_or(usize::MAX);

    let (bytes, decoded, stored) = match cfg.mode {
        Mode::TargetAtoms(k) => {
            if k > max_atoms {
                return Err(Error::Config(format!(
                    "{k} atoms requested but at most {max_atoms} allowed"
                )));
            }
            pursuit.run(StopRule::TotalAtoms(k));
            let quant = quant_params(cfg.delta.unwrap_or(DEFAULT_ATOMS_DELTA), cfg.theta)?;
            synth.probe(&pursuit.decompositions(), quant)?
        }
        Mode::TargetPsnr(target) => {
            if !(target > 0.0 && target.is_finite()) {
                return Err(Error::Config(format!("invalid PSNR target {target}")));
            }
            let decomps =
                approximate_to_psnr(img, &mut pursuit, &synth, target * cfg.overshoot, max_atoms)?;
            match cfg.delta {
                Some(delta) => synth.probe(&decomps, quant_params(delta, cfg.theta)?)?,
                None => search_delta(img, &decomps, &mut synth, target, cfg.theta)?,
            }
        }
    };

    let achieved = psnr(img, &decoded)?;
    Ok(EncodeOutput {
        stats: EncodeStats {
            psnr: achieved,
            sr: if stored == 0 {
                f64::INFINITY
            } else {
                sparsity_ratio(img.height(), img.width(), stored)?
            },
            atoms: pursuit.total_atoms(),
            stored,
            bpp: crate::metrics::bpp(bytes.len() * 8, img.height(), img.width()),
            delta: synth.header.quant.delta,
            theta: synth.header.quant.theta,
            bytes: bytes.len(),
        },
        bytes,
    })
}

/// Grows the pursuit until the unquantised reconstruction reaches `goal` dB.
fn approximate_to_psnr(
    img: &RgbImage,
    pursuit: &mut HbwPursuit<'_>,
    synth: &Synthesis<'_>,
    goal: f64,
    max_atoms: usize,
) -> Result<Vec<BlockDecomposition>> {
    let h = &synth.header;
    let n = (3 * h.pad_height * h.pad_width) as f64;
    let mut energy = n * 255.0 * 255.0 / 10f64.powf(goal / 10.0);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..MAX_TIGHTEN_ROUNDS {
        run_capped(pursuit, StopRule::ResidualNorm(energy.sqrt()), max_atoms);
        let decomps = pursuit.decompositions();
        let achieved = psnr(img, &synth.image(&decomps)?)?;
        best = best.max(achieved);
        if achieved >= goal {
            return Ok(decomps);
        }
        let exhausted = pursuit.peek().is_none();
        if exhausted || pursuit.total_atoms() >= max_atoms {
            break;
        }
        energy *= 10f64.powf(-(goal - achieved) / 10.0) * 0.98;
    }
    Err(Error::TargetUnreachable {
        target: goal,
        achieved: best,
    })
}

fn run_capped(pursuit: &mut HbwPursuit<'_>, stop: StopRule, max_atoms: usize) {
    if max_atoms == usize::MAX {
        pursuit.run(stop);
        return;
    }
    while pursuit.total_atoms() < max_atoms {
        let done = match stop {
            StopRule::ResidualNorm(tol) => pursuit.residual_energy() <= tol * tol,
            StopRule::TotalAtoms(k) => pursuit.total_atoms() >= k,
        };
        if done || pursuit.step().is_none() {
            break;
        }
    }
}

/// Largest step whose decoded PSNR is still at least `target`, searched by
/// bisection in the log domain.
fn search_delta(
    img: &RgbImage,
    decomps: &[BlockDecomposition],
    synth: &mut Synthesis<'_>,
    target: f64,
    theta: Option<f64>,
) -> Result<Probe> {
    let probes = std::cell::Cell::new(0usize);
    let mut eval = |delta: f64| -> Result<(f64, Probe)> {
        probes.set(probes.get() + 1);
        let out = synth.probe(decomps, quant_params(delta, theta)?)?;
        Ok((psnr(img, &out.1)?, out))
    };
    // the upper bound is only initial: widen it while it still meets the target
    let mut hi = DELTA_RANGE.1;
    let mut best_hi = None;
    loop {
        let (p, out) = eval(hi)?;
        if p < target {
            break;
        }
        if p < target + PSNR_SLACK || probes.get() >= MAX_DELTA_PROBES / 2 {
            return Ok(out);
        }
        best_hi = Some((p, out));
        hi *= 2.0;
    }
    let lo_delta = if best_hi.is_some() {
        hi / 2.0
    } else {
        DELTA_RANGE.0
    };
    let (p_lo, out_lo) = match best_hi {
        Some(b) => b,
        None => eval(DELTA_RANGE.0)?,
    };
    if p_lo < target {
        return Err(Error::TargetUnreachable {
            target,
            achieved: p_lo,
        });
    }
    let (mut lo, mut hi) = (lo_delta.ln(), hi.ln());
    let mut best = (p_lo, out_lo);
    while probes.get() < MAX_DELTA_PROBES {
        if best.0 < target + PSNR_SLACK {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (p, out) = eval(mid.exp())?;
        if p >= target {
            lo = mid;
            best = (p, out);
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Decodes a file produced by [`encode_image`].
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let (header, stream) = read_container(bytes)?;
    let dict = build_mixed(header.dict).map_err(|e| Error::Format(e.to_string()))?;
    let decomps = deserialize_blocks(
        &stream,
        header.block_count,
        header.quant,
        dict.x.count(),
        dict.y.count(),
    )?;
    Synthesis {
        header,
        dict: &dict,
    }
    .image(&decomps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_image(w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |r, c| {
            let x = r as f64 / h as f64;
            let y = c as f64 / w as f64;
            [
                (120.0 + 80.0 * (3.0 * x).sin() * y) as u8,
                (90.0 + 60.0 * (2.0 * y).cos()) as u8,
                (60.0 + 50.0 * x * y) as u8,
            ]
        })
    }

    #[test]
    fn constant_image_is_tiny() {
        let img = RgbImage::from_fn(64, 64, |_, _| [128, 128, 128]);
        let cfg = EncoderConfig {
            mode: Mode::TargetPsnr(40.0),
            ..Default::default()
        };
        let out = encode_image(&img, &cfg).unwrap();
        let (_, _, layout) = container::read_container_layout(&out.bytes).unwrap();
        assert!(layout.payload < 100, "{layout:?}");
        assert!(layout.header > layout.payload, "{layout:?}");
        assert!(out.stats.psnr >= 40.0);
        assert_eq!(
            psnr(&img, &decode_image(&out.bytes).unwrap()).unwrap(),
            out.stats.psnr
        );
    }

    #[test]
    fn psnr_target_met_and_reported_exactly() {
        let img = smooth_image(45, 37);
        let cfg = EncoderConfig {
            mode: Mode::TargetPsnr(38.0),
            ..Default::default()
        };
        let out = encode_image(&img, &cfg).unwrap();
        let decoded = decode_image(&out.bytes).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (45, 37));
        let p = psnr(&img, &decoded).unwrap();
        assert_eq!(p, out.stats.psnr);
        assert!(p >= 38.0, "{p}");
        assert_eq!(out.stats.bytes, out.bytes.len());
    }

    #[test]
    fn atom_mode_uses_exact_count() {
        let img = smooth_image(32, 32);
        let cfg = EncoderConfig {
            transform: TransformChoice::Kind(TransformKind::Pc),
            mode: Mode::TargetAtoms(50),
            levels: 2,
            ..Default::default()
        };
        let out = encode_image(&img, &cfg).unwrap();
        assert_eq!(out.stats.atoms, 50);
        assert_eq!(out.stats.delta, DEFAULT_ATOMS_DELTA);
        assert!(out.stats.stored <= 50);
        decode_image(&out.bytes).unwrap();
    }

    #[test]
    fn atom_cap_makes_target_unreachable() {
        let img = smooth_image(32, 32);
        let cfg = EncoderConfig {
            mode: Mode::TargetPsnr(50.0),
            max_atoms: Some(3),
            levels: 2,
            ..Default::default()
        };
        assert!(matches!(
            encode_image(&img, &cfg),
            Err(Error::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let img = smooth_image(16, 16);
        let cfg = EncoderConfig {
            mode: Mode::TargetAtoms(10),
            levels: 2,
            ..Default::default()
        };
        let bytes = encode_image(&img, &cfg).unwrap().bytes;
        assert!(decode_image(&bytes[..bytes.len() / 2]).is_err());
        assert!(decode_image(b"nope").is_err());
    }
}
