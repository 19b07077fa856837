//! Discretized Laplace sampling on a fixed grid.
//!
//! A draw with center `c` and width `w` returns `c + k * g` where `g` is the
//! grid granularity and `k` is two-sided geometric with
//! `P(k) = (1 - a) / (1 + a) * a^|k|`, `a = exp(-g / w)`.

use rand::Rng;
use thiserror::Error;

/// Default grid granularity, `2^-20`.
pub const DEFAULT_GRANULARITY: f64 = 1.0 / 1_048_576.0;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("laplace width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("laplace center must be finite, got {0}")]
    NonFiniteCenter(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteLaplace {
    granularity: f64,
}

impl Default for DiscreteLaplace {
    fn default() -> Self {
        DiscreteLaplace {
            granularity: DEFAULT_GRANULARITY,
        }
    }
}

impl DiscreteLaplace {
    pub fn new(granularity: f64) -> Self {
        assert!(
            granularity.is_finite() && granularity > 0.0,
            "granularity must be positive"
        );
        DiscreteLaplace { granularity }
    }

    pub fn granularity(&self) -> f64 {
        self.granularity
    }

    /// Geometric ratio `exp(-g / w)`.
    pub fn alpha(&self, width: f64) -> f64 {
        (-self.granularity / width).exp()
    }

    /// Probability of offset `k` grid steps from the center.
    pub fn pmf(&self, k: i64, width: f64) -> f64 {
        let a = self.alpha(width);
        // (1 - a) computed via expm1 for accuracy when a is close to 1.
        let one_minus = -(-self.granularity / width).exp_m1();
        one_minus / (1.0 + a) * a.powf(k.unsigned_abs() as f64)
    }

    /// Draws an offset in grid steps.
    pub fn sample_steps<G: Rng + ?Sized>(&self, width: f64, rng: &mut G) -> Result<i64, SamplerError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(SamplerError::InvalidWidth(width));
        }
        let scale = width / self.granularity;
        Ok(geometric(scale, rng) - geometric(scale, rng))
    }

    /// Draws a sample around `center`.
    pub fn sample<G: Rng + ?Sized>(&self, center: f64, width: f64, rng: &mut G) -> Result<f64, SamplerError> {
        if !center.is_finite() {
            return Err(SamplerError::NonFiniteCenter(center));
        }
        let k = self.sample_steps(width, rng)?;
        Ok(center + k as f64 * self.granularity)
    }
}

/// Geometric on {0, 1, ...} with `P(G >= g) = exp(-g / scale)`, by inversion.
fn geometric<G: Rng + ?Sized>(scale: f64, rng: &mut G) -> i64 {
    // u in (0, 1]
    let u = 1.0 - rng.gen::<f64>();
    let g = (-u.ln() * scale).floor();
    if g >= i64::MAX as f64 {
        i64::MAX / 2
    } else {
        g as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pmf_sums_to_one() {
        let s = DiscreteLaplace::new(0.25);
        let total: f64 = (-400..=400).map(|k| s.pmf(k, 1.0)).sum();
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn rejects_bad_width() {
        let s = DiscreteLaplace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            s.sample(0.0, -1.0, &mut rng),
            Err(SamplerError::InvalidWidth(-1.0))
        );
    }

    #[test]
    fn samples_lie_on_grid() {
        let s = DiscreteLaplace::new(0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = s.sample(1.0, 2.0, &mut rng).unwrap();
            let k = (x - 1.0) / 0.125;
            assert_eq!(k, k.round());
        }
    }
}
