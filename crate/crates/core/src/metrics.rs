//! Quality and sparsity measurements.

use crate::error::{Error, Result};
use crate::image_io::RgbImage;
use crate::plane::Plane;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 128;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean squared error over all three channels.
pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let sq: Vec<f64> = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// `10·log10(255²/MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// Elements in the three `rows`×`cols` channels per retained entry (or atom).
pub fn sparsity_ratio(rows: usize, cols: usize, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::ZeroCount);
    }
    Ok((rows * cols * 3) as f64 / count as f64)
}

/// File bits per pixel of a single channel of the original image.
pub fn bpp(file_bits: usize, rows: usize, cols: usize) -> f64 {
    file_bits as f64 / (rows * cols) as f64
}

/// Pearson correlation of channel pairs (1,2), (2,3) and (1,3).
pub fn channel_correlation(img: &RgbImage) -> Result<[f64; 3]> {
    plane_correlation(&img.to_planes())
}

/// [`channel_correlation`] for real-valued channels, e.g. after a colour
/// transform.
pub fn plane_correlation(planes: &[Plane; 3]) -> Result<[f64; 3]> {
    let n = planes[0].as_slice().len();
    let mut centred: [Vec<f64>; 3] = std::array::from_fn(|z| planes[z].as_slice().to_vec());
    let mut sigma = [0.0; 3];
    for (z, ch) in centred.iter_mut().enumerate() {
        let mean = pairwise_sum(ch) / n as f64;
        ch.iter_mut().for_each(|v| *v -= mean);
        let sq: Vec<f64> = ch.iter().map(|v| v * v).collect();
        sigma[z] = pairwise_sum(&sq).sqrt();
        if sigma[z] == 0.0 || !sigma[z].is_finite() {
            return Err(Error::UndefinedCorrelation(z + 1));
        }
    }
    let corr = |a: usize, b: usize| {
        let prod: Vec<f64> = centred[a]
            .iter()
            .zip(&centred[b])
            .map(|(x, y)| x * y)
            .collect();
        (pairwise_sum(&prod) / (sigma[a] * sigma[b])).clamp(-1.0, 1.0)
    };
    Ok([corr(0, 1), corr(1, 2), corr(0, 2)])
}

/// Formats a PSNR value, writing the identical-image sentinel as `inf`.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub psnr: f64,
    pub mse: f64,
    pub sr: f64,
    pub bpp: f64,
    pub r: [f64; 3],
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "image,psnr,sr,bpp,r1,r2,r3";

    pub fn csv_row(&self, image: &str) -> String {
        format!(
            "{image},{},{:.4},{:.4},{:.6},{:.6},{:.6}",
            format_db(self.psnr),
            self.sr,
            self.bpp,
            self.r[0],
            self.r[1],
            self.r[2]
        )
    }
}
