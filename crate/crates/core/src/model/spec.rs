use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// VAR lag order.
    pub lags: usize,
    /// Total Gibbs sweeps, burn-in included.
    pub n_draws: usize,
    pub burn_in: usize,
    /// Keep every `thinning`-th post-burn-in sweep.
    pub thinning: usize,
    pub seed: u64,
    /// Redraw coefficient paths whose companion matrix is explosive at any
    /// date (up to 100 attempts, then keep the previous path).
    pub reject_explosive: bool,
    /// Z-score every variable before estimation.
    pub standardize: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            lags: 1,
            n_draws: 55_000,
            burn_in: 5_000,
            thinning: 5,
            seed: 20_230_101,
            reject_explosive: false,
            standardize: false,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        if k < 2 {
            return fail(format!("need at least 2 variables, got {k}"));
        }
        if self.lags == 0 {
            return fail("lag order must be >= 1".into());
        }
        if self.burn_in >= self.n_draws {
            return fail(format!(
                "burn_in {} must be below n_draws {}",
                self.burn_in, self.n_draws
            ));
        }
        if self.thinning == 0 {
            return fail("thinning must be >= 1".into());
        }
        Ok(())
    }

    /// Whether sweep `sweep` (0-based) is stored.
    pub fn keeps(&self, sweep: usize) -> bool {
        sweep >= self.burn_in && (sweep - self.burn_in + 1) % self.thinning == 0
    }

    pub fn retained_count(&self) -> usize {
        (self.n_draws - self.burn_in) / self.thinning
    }
}

/// Prior calibration from a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Leading observations used only for the OLS prior.
    pub training_size: usize,
    pub kappa_q: f64,
    pub kappa_s: f64,
    pub kappa_w: f64,
    /// Degrees of freedom of the prior on `Q`; defaults to `training_size`.
    pub dof_q: Option<f64>,
    /// Degrees of freedom for each block of `S`; defaults to block size + 1.
    pub dof_s: Option<f64>,
    /// Degrees of freedom for each diagonal element of `W`; defaults to 2.
    pub dof_w: Option<f64>,
    /// Multiplier on the OLS covariance for the initial coefficient state.
    pub beta_cov_scale: f64,
    /// Multiplier on the OLS covariance for the initial contemporaneous state.
    pub a_cov_scale: f64,
    /// Initial log-volatility covariance is this times the identity.
    pub h_cov_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            training_size: 40,
            kappa_q: 0.01,
            kappa_s: 0.1,
            kappa_w: 0.01,
            dof_q: None,
            dof_s: None,
            dof_w: None,
            beta_cov_scale: 4.0,
            a_cov_scale: 4.0,
            h_cov_scale: 4.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self, k: usize, lags: usize) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        if self.training_size <= k * lags + 1 {
            return fail(format!(
                "training_size {} must exceed k*s + 1 = {}",
                self.training_size,
                k * lags + 1
            ));
        }
        for (name, v) in [
            ("kappa_q", self.kappa_q),
            ("kappa_s", self.kappa_s),
            ("kappa_w", self.kappa_w),
            ("beta_cov_scale", self.beta_cov_scale),
            ("a_cov_scale", self.a_cov_scale),
            ("h_cov_scale", self.h_cov_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("dof_q", self.dof_q), ("dof_s", self.dof_s), ("dof_w", self.dof_w)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return fail(format!("{name} must be positive, got {v}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_keeps_ten_thousand_draws() {
        let m = ModelSpec::default();
        assert_eq!((m.n_draws, m.burn_in, m.lags), (55_000, 5_000, 1));
        assert_eq!(m.retained_count(), 10_000);
        assert_eq!((0..m.n_draws).filter(|&s| m.keeps(s)).count(), 10_000);
    }

    #[test]
    fn validation_rules() {
        let mut m = ModelSpec::default();
        assert!(m.validate(4).is_ok());
        assert!(m.validate(1).is_err());
        m.burn_in = 60_000;
        assert!(m.validate(4).is_err());
        let mut p = PriorSpec::default();
        assert!(p.validate(4, 1).is_ok());
        p.kappa_q = 0.0;
        assert!(p.validate(4, 1).is_err());
        let p = PriorSpec {
            training_size: 5,
            ..PriorSpec::default()
        };
        assert!(p.validate(4, 1).is_err());
    }
}
