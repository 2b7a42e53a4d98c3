//! Seven-component normal mixture approximating the log chi-square(1)
//! density, used to linearize the stochastic-volatility measurement
//! equation.

use crate::error::{Error, Result};
use crate::kernel::RngStream;

/// Mean of `log(z^2)` for standard normal `z`: `-(gamma + ln 2)`.
pub const LOG_CHI2_MEAN: f64 = -1.270_362_845_461_478;
/// Variance of `log(z^2)`: `pi^2 / 2`.
pub const LOG_CHI2_VARIANCE: f64 = 4.934_802_200_544_679;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub probability: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTable {
    components: [MixtureComponent; 7],
}

// Component weights, means (before the -1.2704 shift) and variances.
const KSC: [(f64, f64, f64); 7] = [
    (0.00730, -10.12999, 5.79596),
    (0.10556, -3.97281, 2.61369),
    (0.00002, -8.56686, 5.17950),
    (0.04395, 2.77786, 0.16735),
    (0.34001, 0.61942, 0.64009),
    (0.24566, 1.79518, 0.34023),
    (0.25750, -1.08819, 1.26261),
];
const KSC_SHIFT: f64 = -1.2704;

impl Default for MixtureTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl MixtureTable {
    /// The standard seven-component table; component means include the
    /// `-1.2704` shift so the mixture targets `log(z^2)` directly.
    pub fn standard() -> Self {
        let components = KSC.map(|(p, m, v)| MixtureComponent {
            probability: p,
            mean: m + KSC_SHIFT,
            variance: v,
        });
        Self { components }
    }

    pub fn components(&self) -> &[MixtureComponent; 7] {
        &self.components
    }

    /// Mixture mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.components.iter().map(|c| c.probability * c.mean).sum();
        let second: f64 = self
            .components
            .iter()
            .map(|c| c.probability * (c.variance + c.mean * c.mean))
            .sum();
        (mean, second - mean * mean)
    }

    /// Checks normalization and that the first two moments match those of
    /// `log(z^2)` within 0.05.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture probabilities sum to {total}"
            )));
        }
        let (mean, var) = self.moments();
        if (mean - LOG_CHI2_MEAN).abs() > 0.05 || (var - LOG_CHI2_VARIANCE).abs() > 0.05 {
            return Err(Error::InvalidParameter(format!(
                "mixture moments ({mean}, {var}) do not match log chi-square(1)"
            )));
        }
        Ok(())
    }

    /// Posterior component probabilities for an observation
    /// `residual = y* - 2h` (the mixture variate itself).
    pub fn conditional_probabilities(&self, residual: f64) -> [f64; 7] {
        let mut logw = [0.0; 7];
        for (lw, c) in logw.iter_mut().zip(&self.components) {
            let d = residual - c.mean;
            *lw = c.probability.ln() - 0.5 * c.variance.ln() - 0.5 * d * d / c.variance;
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w = logw.map(|l| (l - max).exp());
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    /// Draws a component index from [`Self::conditional_probabilities`].
    pub fn sample_indicator(&self, residual: f64, rng: &mut RngStream) -> u8 {
        let probs = self.conditional_probabilities(residual);
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u8;
            }
        }
        // u within rounding of 1
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(6) as u8
    }
}
