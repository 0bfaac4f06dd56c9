//! Sparse approximation without quantisation, for comparing transforms and
//! approximation methods at a fixed sparsity.

use crate::color::{apply_forward, apply_inverse, keep_largest, ColorTransform};
use crate::dictionary::{build_mixed, DictParams};
use crate::error::{Error, Result};
use crate::image_io::{pad_to_block, RgbImage};
use crate::pursuit::{
    concat_channels, hbw_run, partition_blocks, reconstruct, split_channels, StopRule,
};
use crate::wavelet::{dwt_volume, idwt_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseMethod {
    /// Keep the largest wavelet coefficients over all three channels.
    Truncate,
    /// HBW-OMP2D over the stacked wavelet planes with the mixed dictionary.
    Pursuit(DictParams),
}

/// Number of terms giving sparsity ratio `sr` on a `rows`×`cols` RGB image.
pub fn budget_for_sr(rows: usize, cols: usize, sr: f64) -> Result<usize> {
    if !(sr >= 1.0 && sr.is_finite()) {
        return Err(Error::Config(format!(
            "sparsity ratio must be at least 1, got {sr}"
        )));
    }
    let k = ((3 * rows * cols) as f64 / sr).floor() as usize;
    if k == 0 {
        return Err(Error::ZeroCount);
    }
    Ok(k)
}

/// Approximates `img` with `terms` coefficients (or atoms) and returns the
/// reconstruction, cropped to the input size.
pub fn sparsify(
    img: &RgbImage,
    transform: &ColorTransform,
    levels: usize,
    terms: usize,
    method: SparseMethod,
) -> Result<RgbImage> {
    let side = match method {
        SparseMethod::Truncate => 1,
        SparseMethod::Pursuit(p) => p.block_side,
    };
    let padded = pad_to_block(img, side);
    let planes = apply_forward(&padded.image.to_planes(), transform);
    let mut volume = dwt_volume(&planes, levels)?;
    let volume = match method {
        SparseMethod::Truncate => {
            keep_largest(&mut volume, terms);
            volume
        }
        SparseMethod::Pursuit(params) => {
            let dict = build_mixed(params)?;
            let ext = concat_channels(&volume);
            let blocks = partition_blocks(&ext, side)?;
            let decomps = hbw_run(&blocks, &dict, StopRule::TotalAtoms(terms));
            let approx = reconstruct(&decomps, &dict, ext.rows(), ext.cols())?;
            split_channels(&approx, levels)?
        }
    };
    let out = RgbImage::from_planes(&apply_inverse(&idwt_volume(&volume), transform))?;
    Ok(out.crop(0, 0, img.height(), img.width()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    fn test_image() -> RgbImage {
        RgbImage::from_fn(40, 36, |r, c| {
            let v = ((r * 7 + c * 3) % 64) as u8;
            [v + 100, v / 2 + 60, 200 - v]
        })
    }

    #[test]
    fn budgets() {
        assert_eq!(budget_for_sr(16, 16, 10.0).unwrap(), 76);
        assert!(budget_for_sr(16, 16, 0.5).is_err());
        assert!(budget_for_sr(1, 1, 10.0).is_err());
    }

    #[test]
    fn more_terms_do_not_hurt() {
        let img = test_image();
        let t = ColorTransform::dct();
        for method in [
            SparseMethod::Truncate,
            SparseMethod::Pursuit(DictParams::default()),
        ] {
            let a = sparsify(&img, &t, 2, 200, method).unwrap();
            let b = sparsify(&img, &t, 2, 800, method).unwrap();
            assert_eq!((a.width(), a.height()), (40, 36));
            assert!(psnr(&img, &b).unwrap() >= psnr(&img, &a).unwrap() - 0.05);
        }
    }
}
