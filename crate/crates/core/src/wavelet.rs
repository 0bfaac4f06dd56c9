//! Multi-level separable CDF 9/7 wavelet transform, computed by lifting.
//!
//! Coefficients are kept in Mallat layout: after each level the low-pass
//! half of every row/column is stored first, so the deepest LL band sits in
//! the top-left corner and each detail band occupies its own rectangle.
//! Boundaries use whole-point symmetric extension and odd lengths keep the
//! extra sample in the low-pass half.
//!
//! The scaling pair is chosen so both analysis filters have near-unit norm
//! (low-pass DC gain √2); squared error in the coefficient domain is then
//! a close proxy for squared error in the signal domain.

use crate::error::{Error, Result};
use crate::plane::Plane;

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
const K: f64 = 1.230_174_104_914_001;

const LOW_SCALE: f64 = std::f64::consts::SQRT_2 / K;
const HIGH_SCALE: f64 = K / std::f64::consts::SQRT_2;

pub const DEFAULT_LEVELS: usize = 4;

/// One channel of wavelet coefficients in Mallat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPlane {
    pub data: Plane,
    pub levels: usize,
}

/// Three coefficient planes sharing dimensions and depth.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVolume {
    pub planes: [CoeffPlane; 3],
}

impl CoeffVolume {
    pub fn new(planes: [CoeffPlane; 3]) -> Result<Self> {
        let first = &planes[0];
        let (rows, cols, levels) = (first.data.rows(), first.data.cols(), first.levels);
        if planes
            .iter()
            .any(|p| p.data.rows() != rows || p.data.cols() != cols || p.levels != levels)
        {
            return Err(Error::DimensionMismatch(
                "coefficient planes disagree in size or depth".to_string(),
            ));
        }
        Ok(Self { planes })
    }

    pub fn levels(&self) -> usize {
        self.planes[0].levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    LL,
    HL,
    LH,
    HH,
}

/// Axis-aligned rectangle of one subband inside a Mallat-layout array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubbandRect {
    pub band: Band,
    pub level: usize,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

/// Subband rectangles for a `rows`×`cols` array decomposed `levels` times.
pub fn subband_rects(rows: usize, cols: usize, levels: usize) -> Vec<SubbandRect> {
    let mut rects = Vec::with_capacity(3 * levels + 1);
    let (mut h, mut w) = (rows, cols);
    for level in 1..=levels {
        let (lh, lw) = (h.div_ceil(2), w.div_ceil(2));
        let (hh, hw) = (h - lh, w - lw);
        rects.push(SubbandRect {
            band: Band::HL,
            level,
            row: 0,
            col: lw,
            height: lh,
            width: hw,
        });
        rects.push(SubbandRect {
            band: Band::LH,
            level,
            row: lh,
            col: 0,
            height: hh,
            width: lw,
        });
        rects.push(SubbandRect {
            band: Band::HH,
            level,
            row: lh,
            col: lw,
            height: hh,
            width: hw,
        });
        h = lh;
        w = lw;
    }
    rects.push(SubbandRect {
        band: Band::LL,
        level: levels,
        row: 0,
        col: 0,
        height: h,
        width: w,
    });
    rects
}

#[inline]
fn lift(x: &mut [f64], parity: usize, coeff: f64) {
    let n = x.len();
    let mut i = parity;
    while i < n {
        let left = if i == 0 { x[1] } else { x[i - 1] };
        let right = if i + 1 == n { x[n - 2] } else { x[i + 1] };
        x[i] += coeff * (left + right);
        i += 2;
    }
}

/// In-place 1D analysis. `scratch` must be at least `x.len()` long.
fn analyze_1d(x: &mut [f64], scratch: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    lift(x, 1, ALPHA);
    lift(x, 0, BETA);
    lift(x, 1, GAMMA);
    lift(x, 0, DELTA);
    let low = n.div_ceil(2);
    for (i, v) in x.iter().enumerate() {
        if i % 2 == 0 {
            scratch[i / 2] = v * LOW_SCALE;
        } else {
            scratch[low + i / 2] = v * HIGH_SCALE;
        }
    }
    x.copy_from_slice(&scratch[..n]);
}

fn synthesize_1d(x: &mut [f64], scratch: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let low = n.div_ceil(2);
    for i in 0..n {
        scratch[i] = if i % 2 == 0 {
            x[i / 2] / LOW_SCALE
        } else {
            x[low + i / 2] / HIGH_SCALE
        };
    }
    x.copy_from_slice(&scratch[..n]);
    lift(x, 0, -DELTA);
    lift(x, 1, -GAMMA);
    lift(x, 0, -BETA);
    lift(x, 1, -ALPHA);
}

fn level_dims(rows: usize, cols: usize, level: usize) -> (usize, usize) {
    let (mut h, mut w) = (rows, cols);
    for _ in 0..level {
        h = h.div_ceil(2);
        w = w.div_ceil(2);
    }
    (h, w)
}

fn transform_region(p: &mut Plane, h: usize, w: usize, inverse: bool) {
    let mut line = vec![0.0; h.max(w)];
    let mut scratch = vec![0.0; h.max(w)];
    let step = if inverse { synthesize_1d } else { analyze_1d };
    let rows_pass = |p: &mut Plane, line: &mut [f64], scratch: &mut [f64]| {
        for r in 0..h {
            let row = &mut p.row_mut(r)[..w];
            line[..w].copy_from_slice(row);
            step(&mut line[..w], scratch);
            row.copy_from_slice(&line[..w]);
        }
    };
    let cols_pass = |p: &mut Plane, line: &mut [f64], scratch: &mut [f64]| {
        for c in 0..w {
            for r in 0..h {
                line[r] = p[(r, c)];
            }
            step(&mut line[..h], scratch);
            for r in 0..h {
                p[(r, c)] = line[r];
            }
        }
    };
    if inverse {
        cols_pass(p, &mut line, &mut scratch);
        rows_pass(p, &mut line, &mut scratch);
    } else {
        rows_pass(p, &mut line, &mut scratch);
        cols_pass(p, &mut line, &mut scratch);
    }
}

/// Forward transform, `levels` dyadic splits of the LL band.
pub fn dwt2(plane: &Plane, levels: usize) -> Result<CoeffPlane> {
    let (rows, cols) = (plane.rows(), plane.cols());
    let min = 1usize
        .checked_shl(levels as u32)
        .filter(|_| levels < usize::BITS as usize)
        .unwrap_or(usize::MAX);
    if levels == 0 || rows < min || cols < min {
        return Err(Error::TooSmallForLevels { rows, cols, levels });
    }
    let mut data = plane.clone();
    for level in 0..levels {
        let (h, w) = level_dims(rows, cols, level);
        transform_region(&mut data, h, w, false);
    }
    Ok(CoeffPlane { data, levels })
}

/// Inverse of [`dwt2`].
pub fn idwt2(coeffs: &CoeffPlane) -> Plane {
    let (rows, cols) = (coeffs.data.rows(), coeffs.data.cols());
    let mut data = coeffs.data.clone();
    for level in (0..coeffs.levels).rev() {
        let (h, w) = level_dims(rows, cols, level);
        transform_region(&mut data, h, w, true);
    }
    data
}

pub fn dwt_volume(planes: &[Plane; 3], levels: usize) -> Result<CoeffVolume> {
    let [a, b, c] = planes;
    let (a, (b, c)) = rayon::join(
        || dwt2(a, levels),
        || rayon::join(|| dwt2(b, levels), || dwt2(c, levels)),
    );
    CoeffVolume::new([a?, b?, c?])
}

pub fn idwt_volume(volume: &CoeffVolume) -> [Plane; 3] {
    let [a, b, c] = &volume.planes;
    let (a, (b, c)) = rayon::join(|| idwt2(a), || rayon::join(|| idwt2(b), || idwt2(c)));
    [a, b, c]
}
