//! Cross-color 3×3 transforms.
//!
//! A pixel is treated as the row vector `[r g b]`; the forward transform
//! produces `[r g b]·T` and the inverse recovers it through `U·T⁻¹`.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_io::RgbImage;
use crate::plane::Plane;
use crate::wavelet::{dwt_volume, idwt_volume, CoeffVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Identity,
    Dct,
    YCbCr,
    Pc,
    Learned,
}

impl TransformKind {
    pub fn to_byte(self) -> u8 {
        match self {
            TransformKind::Identity => 0,
            TransformKind::Dct => 1,
            TransformKind::YCbCr => 2,
            TransformKind::Pc => 3,
            TransformKind::Learned => 4,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => TransformKind::Identity,
            1 => TransformKind::Dct,
            2 => TransformKind::YCbCr,
            3 => TransformKind::Pc,
            4 => TransformKind::Learned,
            _ => return None,
        })
    }

    /// Image-dependent kinds carry their matrix in the bitstream.
    pub fn stores_matrix(self) -> bool {
        matches!(self, TransformKind::Pc | TransformKind::Learned)
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Ok(TransformKind::Identity),
            "dct" => Ok(TransformKind::Dct),
            "ycbcr" => Ok(TransformKind::YCbCr),
            "pc" | "pca" => Ok(TransformKind::Pc),
            "learned" => Ok(TransformKind::Learned),
            other => Err(Error::Config(format!("unknown transform kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransformKind::Identity => "identity",
            TransformKind::Dct => "dct",
            TransformKind::YCbCr => "ycbcr",
            TransformKind::Pc => "pc",
            TransformKind::Learned => "learned",
        })
    }
}

/// Invertible 3×3 cross-color transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorTransform {
    pub kind: TransformKind,
    pub forward: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
}

const YCBCR_FORWARD: [[f64; 3]; 3] = [
    [0.299, -0.169, 0.5],
    [0.587, -0.331, -0.419],
    [0.114, 0.5, -0.0813],
];

const YCBCR_INVERSE: [[f64; 3]; 3] = [
    [
        1.000_420_506_152_991_4,
        0.999_785_749_224_367_8,
        1.000_000_297_066_242_7,
    ],
    [
        -0.000_181_540_481_586_331_12,
        -0.344_075_071_215_770_7,
        1.772_160_942_172_383_4,
    ],
    [
        1.401_687_176_637_735_2,
        -0.714_169_252_107_102_6,
        0.000_990_220_808_652_621_2,
    ],
];

fn from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

impl ColorTransform {
    pub fn identity() -> Self {
        Self {
            kind: TransformKind::Identity,
            forward: Matrix3::identity(),
            inverse: Matrix3::identity(),
        }
    }

    /// Builds a transform from its forward matrix, inverting numerically.
    pub fn from_forward(kind: TransformKind, forward: Matrix3<f64>) -> Result<Self> {
        let inverse = forward
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Degenerate("transform matrix is singular".to_string()))?;
        Ok(Self {
            kind,
            forward,
            inverse,
        })
    }

    /// Orthonormal 3-point DCT-II, basis vectors as columns.
    pub fn dct() -> Self {
        let forward = Matrix3::from_fn(|l, z| {
            let w = if z == 0 {
                (1.0f64 / 3.0).sqrt()
            } else {
                (2.0f64 / 3.0).sqrt()
            };
            w * (std::f64::consts::PI * (2 * l + 1) as f64 * z as f64 / 6.0).cos()
        });
        Self {
            kind: TransformKind::Dct,
            forward,
            inverse: forward.transpose(),
        }
    }

    pub fn ycbcr() -> Self {
        Self {
            kind: TransformKind::YCbCr,
            forward: from_rows(&YCBCR_FORWARD),
            inverse: from_rows(&YCBCR_INVERSE),
        }
    }

    /// Principal-components transform of the image's pixel covariance.
    ///
    /// Columns are unit eigenvectors in descending eigenvalue order, each
    /// signed so its largest-magnitude entry is positive.
    pub fn principal_components(img: &RgbImage) -> Result<Self> {
        let cov = pixel_covariance(img);
        if cov.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(
                "pixel covariance is zero; image is a single color".to_string(),
            ));
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        // stable: equal eigenvalues keep their original column order
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut forward = Matrix3::zeros();
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            col /= col.norm();
            let lead = col
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if lead < 0.0 {
                col = -col;
            }
            forward.set_column(dst, &col);
        }
        Ok(Self {
            kind: TransformKind::Pc,
            forward,
            inverse: forward.transpose(),
        })
    }

    /// Random orthonormal matrix from the QR factorisation of a Gaussian sample.
    pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let sample = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = sample.qr();
            let r = qr.r();
            if (0..3).any(|i| r[(i, i)].abs() < 1e-8) {
                continue;
            }
            let mut q = qr.q();
            for i in 0..3 {
                if r[(i, i)] < 0.0 {
                    let flipped = -q.column(i);
                    q.set_column(i, &flipped);
                }
            }
            return Self {
                kind: TransformKind::Learned,
                forward: q,
                inverse: q.transpose(),
            };
        }
    }

    pub fn of_kind(kind: TransformKind, img: &RgbImage) -> Result<Self> {
        match kind {
            TransformKind::Identity => Ok(Self::identity()),
            TransformKind::Dct => Ok(Self::dct()),
            TransformKind::YCbCr => Ok(Self::ycbcr()),
            TransformKind::Pc => Self::principal_components(img),
            TransformKind::Learned => Err(Error::Config(
                "learned transforms must be loaded from a transform file".to_string(),
            )),
        }
    }

    /// Serialises as the kind byte, followed by the forward matrix
    /// (nine little-endian f64, row-major) for image-dependent kinds.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.kind.to_byte());
        if self.kind.stores_matrix() {
            for r in 0..3 {
                for c in 0..3 {
                    out.extend_from_slice(&self.forward[(r, c)].to_le_bytes());
                }
            }
        }
    }

    /// Reads a transform written by [`write_to`](Self::write_to); returns it
    /// with the number of bytes consumed.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, usize)> {
        let kind_byte = *bytes
            .first()
            .ok_or_else(|| Error::Format("missing transform kind".to_string()))?;
        let kind = TransformKind::from_byte(kind_byte)
            .ok_or_else(|| Error::Format(format!("unknown transform kind {kind_byte}")))?;
        if !kind.stores_matrix() {
            let t = match kind {
                TransformKind::Identity => Self::identity(),
                TransformKind::Dct => Self::dct(),
                _ => Self::ycbcr(),
            };
            return Ok((t, 1));
        }
        if bytes.len() < 1 + 72 {
            return Err(Error::Format("truncated transform matrix".to_string()));
        }
        let mut m = Matrix3::zeros();
        for i in 0..9 {
            let chunk: [u8; 8] = bytes[1 + 8 * i..9 + 8 * i].try_into().unwrap();
            m[(i / 3, i % 3)] = f64::from_le_bytes(chunk);
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite transform matrix".to_string()));
        }
        Ok((Self::from_forward(kind, m)?, 73))
    }
}

fn mix(planes: &[Plane; 3], m: &Matrix3<f64>) -> [Plane; 3] {
    let (rows, cols) = (planes[0].rows(), planes[0].cols());
    let mut out = [
        Plane::zeros(rows, cols),
        Plane::zeros(rows, cols),
        Plane::zeros(rows, cols),
    ];
    let [a, b, c] = [
        planes[0].as_slice(),
        planes[1].as_slice(),
        planes[2].as_slice(),
    ];
    for (z, plane) in out.iter_mut().enumerate() {
        let (m0, m1, m2) = (m[(0, z)], m[(1, z)], m[(2, z)]);
        for (i, v) in plane.as_mut_slice().iter_mut().enumerate() {
            *v = a[i] * m0 + b[i] * m1 + c[i] * m2;
        }
    }
    out
}

/// `U(:,:,z) = Σ_l I(:,:,l)·T(l,z)`.
pub fn apply_forward(planes: &[Plane; 3], t: &ColorTransform) -> [Plane; 3] {
    mix(planes, &t.forward)
}

/// Inverse of [`apply_forward`], `I = U·T⁻¹` per pixel.
pub fn apply_inverse(planes: &[Plane; 3], t: &ColorTransform) -> [Plane; 3] {
    mix(planes, &t.inverse)
}

/// Unnormalised-by-N covariance of RGB pixel vectors (divided by N).
pub fn pixel_covariance(img: &RgbImage) -> Matrix3<f64> {
    let n = img.pixel_count() as f64;
    let mut mean = [0.0f64; 3];
    for px in img.as_bytes().chunks_exact(3) {
        for z in 0..3 {
            mean[z] += f64::from(px[z]);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Matrix3::zeros();
    for px in img.as_bytes().chunks_exact(3) {
        let d = [
            f64::from(px[0]) - mean[0],
            f64::from(px[1]) - mean[1],
            f64::from(px[2]) - mean[2],
        ];
        for r in 0..3 {
            for c in r..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    for r in 0..3 {
        for c in r..3 {
            cov[(r, c)] /= n;
            cov[(c, r)] = cov[(r, c)];
        }
    }
    cov
}

/// Zeroes all but the `keep` largest-magnitude coefficients across the three
/// planes jointly. Ties at the cut-off are kept in scan order (plane, row, col).
pub fn keep_largest(volume: &mut CoeffVolume, keep: usize) {
    let total: usize = volume.planes.iter().map(|p| p.data.as_slice().len()).sum();
    if keep >= total {
        return;
    }
    if keep == 0 {
        for p in &mut volume.planes {
            p.data.as_mut_slice().fill(0.0);
        }
        return;
    }
    let mut mags: Vec<f64> = volume
        .planes
        .iter()
        .flat_map(|p| p.data.as_slice().iter().map(|v| v.abs()))
        .collect();
    let (_, &mut cutoff, _) = mags.select_nth_unstable_by(total - keep, f64::total_cmp);
    let above = volume
        .planes
        .iter()
        .flat_map(|p| p.data.as_slice())
        .filter(|v| v.abs() > cutoff)
        .count();
    let mut ties_left = keep - above;
    for p in &mut volume.planes {
        for v in p.data.as_mut_slice() {
            let m = v.abs();
            if m > cutoff {
                continue;
            }
            if m == cutoff && ties_left > 0 {
                ties_left -= 1;
            } else {
                *v = 0.0;
            }
        }
    }
}

/// Progress of [`learn_transform`].
#[derive(Debug, Clone)]
pub struct LearnState {
    pub transform: ColorTransform,
    pub iteration: usize,
    /// Fitting error per accepted iterate; entry 0 is the initial transform.
    pub trace: Vec<f64>,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LearnConfig {
    /// Coefficients kept per image.
    pub budget: usize,
    pub wavelet_levels: usize,
    pub max_iter: usize,
    /// Stop once the relative decrease of the error falls below this.
    pub rel_tol: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            budget: 1,
            wavelet_levels: crate::wavelet::DEFAULT_LEVELS,
            max_iter: 50,
            rel_tol: 1e-6,
        }
    }
}

/// Transform, truncate and reconstruct one training image.
fn sparse_reconstruction(
    planes: &[Plane; 3],
    t: &ColorTransform,
    cfg: &LearnConfig,
) -> Result<[Plane; 3]> {
    let u = apply_forward(planes, t);
    let mut w = dwt_volume(&u, cfg.wavelet_levels)?;
    keep_largest(&mut w, cfg.budget);
    Ok(idwt_volume(&w))
}

/// Normal equations of `I ≈ Ũ·G` for one image: (ŨᵀŨ, ŨᵀI).
fn normal_equations(approx: &[Plane; 3], original: &[Plane; 3]) -> (Matrix3<f64>, Matrix3<f64>) {
    let mut gram = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    let n = approx[0].as_slice().len();
    for i in 0..n {
        let u = [
            approx[0].as_slice()[i],
            approx[1].as_slice()[i],
            approx[2].as_slice()[i],
        ];
        let x = [
            original[0].as_slice()[i],
            original[1].as_slice()[i],
            original[2].as_slice()[i],
        ];
        for r in 0..3 {
            for c in 0..3 {
                gram[(r, c)] += u[r] * u[c];
                cross[(r, c)] += u[r] * x[c];
            }
        }
    }
    (gram, cross)
}

fn fit_error(approx: &[Plane; 3], original: &[Plane; 3], g: &Matrix3<f64>) -> f64 {
    let rebuilt = mix(approx, g);
    rebuilt
        .iter()
        .zip(original)
        .map(|(a, b)| {
            a.as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum()
}

/// Alternating learning of a cross-color transform.
///
/// Each iteration truncates every training image to its `budget` largest
/// wavelet coefficients under the current transform, then refits the
/// inverse matrix `G` by least squares against the originals and takes
/// `T = G⁻¹` as the next iterate. Iteration stops when the fitted error no
/// longer decreases, its relative decrease drops below `rel_tol`, or
/// `max_iter` steps have run. The best iterate is returned with the trace.
pub fn learn_transform(
    train: &[RgbImage],
    cfg: &LearnConfig,
    init: &ColorTransform,
) -> Result<(ColorTransform, Vec<f64>)> {
    let state = learn_transform_state(train, cfg, init)?;
    Ok((state.transform, state.trace))
}

pub fn learn_transform_state(
    train: &[RgbImage],
    cfg: &LearnConfig,
    init: &ColorTransform,
) -> Result<LearnState> {
    let first = train
        .first()
        .ok_or_else(|| Error::Learning("empty training set".to_string()))?;
    if train
        .iter()
        .any(|im| im.width() != first.width() || im.height() != first.height())
    {
        return Err(Error::Learning(
            "training images must share dimensions".to_string(),
        ));
    }
    if cfg.budget == 0 {
        return Err(Error::Learning(
            "coefficient budget must be positive".to_string(),
        ));
    }
    let originals: Vec<[Plane; 3]> = train.iter().map(RgbImage::to_planes).collect();

    let approximate = |t: &ColorTransform| -> Result<Vec<[Plane; 3]>> {
        originals
            .par_iter()
            .map(|p| sparse_reconstruction(p, t, cfg))
            .collect()
    };

    let approx = approximate(init)?;
    let initial_error: f64 = approx
        .iter()
        .zip(&originals)
        .map(|(a, o)| fit_error(a, o, &init.inverse))
        .sum();

    let mut state = LearnState {
        transform: init.clone(),
        iteration: 0,
        trace: vec![initial_error],
        budget: cfg.budget,
    };
    let mut current = init.clone();
    let mut approx = Some(approx);

    for iter in 1..=cfg.max_iter {
        let approx_k = match approx.take() {
            Some(a) => a,
            None => approximate(&current)?,
        };
        let (gram, cross) = approx_k
            .par_iter()
            .zip(&originals)
            .map(|(a, o)| normal_equations(a, o))
            .collect::<Vec<_>>()
            .into_iter()
            .fold((Matrix3::zeros(), Matrix3::zeros()), |(g, c), (g1, c1)| {
                (g + g1, c + c1)
            });
        let g_star = gram
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .map(|inv| inv * cross)
            .ok_or_else(|| Error::Learning("singular normal equations".to_string()))?;
        let err: f64 = approx_k
            .iter()
            .zip(&originals)
            .map(|(a, o)| fit_error(a, o, &g_star))
            .sum();

        let prev = *state.trace.last().unwrap();
        if err > prev {
            break;
        }
        let t_next = g_star
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Learning("fitted inverse is not invertible".to_string()))?;
        current = ColorTransform {
            kind: TransformKind::Learned,
            forward: t_next,
            inverse: g_star,
        };
        state.trace.push(err);
        state.transform = current.clone();
        state.iteration = iter;
        if prev - err <= cfg.rel_tol * prev {
            break;
        }
    }
    Ok(state)
}
