//! Dead-zone uniform quantisation of coefficient magnitudes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    /// Step Δ.
    pub delta: f64,
    /// Dead-zone threshold θ.
    pub theta: f64,
}

impl QuantParams {
    pub fn new(delta: f64, theta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidQuant(format!(
                "step must be positive, got {delta}"
            )));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidQuant(format!(
                "threshold must be non-negative, got {theta}"
            )));
        }
        Ok(Self { delta, theta })
    }

    /// θ = Δ/2, so reconstruction levels are exact multiples of Δ.
    pub fn with_step(delta: f64) -> Result<Self> {
        Self::new(delta, delta / 2.0)
    }
}

/// Quantised magnitude and sign bit (`true` for negative).
///
/// `⌈(|c| − θ)/Δ⌉` for `|c| ≥ θ`, else 0. A coefficient sitting exactly on
/// the threshold maps to 1 rather than 0 so it still reconstructs within Δ/2.
pub fn quantize(c: f64, p: QuantParams) -> (u32, bool) {
    let mag = c.abs();
    let negative = c < 0.0;
    if mag < p.theta || mag == 0.0 {
        return (0, negative);
    }
    let q = ((mag - p.theta) / p.delta).ceil().max(1.0);
    (q.min(f64::from(u32::MAX)) as u32, negative)
}

/// `±(Δ·q + θ − Δ/2)`.
pub fn dequantize(q: u32, negative: bool, p: QuantParams) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidQuant(
            "zero magnitudes are never stored".to_string(),
        ));
    }
    let mag = p.delta * f64::from(q) + (p.theta - p.delta / 2.0);
    Ok(if negative { -mag } else { mag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let p = QuantParams::new(2.0, 1.0).unwrap();
        assert_eq!(quantize(5.3, p), (3, false));
        assert_eq!(quantize(-5.3, p), (3, true));
        assert_eq!(quantize(0.5, p).0, 0);
        assert_eq!(dequantize(3, false, p).unwrap(), 6.0);
        assert_eq!(dequantize(3, true, p).unwrap(), -6.0);
        assert!(dequantize(0, false, p).is_err());

        let half = QuantParams::with_step(0.75).unwrap();
        assert_eq!(dequantize(5, false, half).unwrap(), 0.75 * 5.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(QuantParams::new(0.0, 1.0).is_err());
        assert!(QuantParams::new(1.0, -0.1).is_err());
        assert!(QuantParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn error_bounded_by_half_step() {
        let p = QuantParams::new(0.7, 1.3).unwrap();
        let mut c = p.theta;
        while c < 40.0 {
            let (q, neg) = quantize(c, p);
            let r = dequantize(q, neg, p).unwrap();
            assert!((r - c).abs() <= p.delta / 2.0 + 1e-12, "{c} -> {r}");
            c += 0.0137;
        }
    }
}
