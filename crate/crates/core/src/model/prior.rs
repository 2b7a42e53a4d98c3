use nalgebra::{DMatrix, DVector};

use super::regressors::Regressors;
use super::spec::PriorSpec;
use crate::error::{Error, Result};
use crate::kernel::{cholesky, symmetrize};


/// Priors for the initial states and the innovation covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    /// Equation `j`'s contemporaneous block (`j = 1..k`) is element `j-1`.
    pub a_means: Vec<DVector<f64>>,
    pub a_covs: Vec<DMatrix<f64>>,
    pub h_mean: DVector<f64>,
    pub h_cov: DMatrix<f64>,
    /// Inverse-Wishart scale and degrees of freedom for `Q`.
    pub q_scale: DMatrix<f64>,
    pub q_dof: f64,
    /// Inverse-Wishart parameters for each block of `S`.
    pub s_scales: Vec<DMatrix<f64>>,
    pub s_dofs: Vec<f64>,
    /// Per-element inverse-Wishart (1 x 1) parameters for the diagonal of `W`.
    pub w_scales: DVector<f64>,
    pub w_dof: f64,
}

/// Training-sample least-squares quantities behind the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFit {
    pub beta: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub a: Vec<DVector<f64>>,
    pub a_covs: Vec<DMatrix<f64>>,
    /// Standard deviations of the orthogonalized training residuals.
    pub sigma: DVector<f64>,
}

fn singular(what: &str, n: usize) -> Error {
    Error::Singular(format!(
        "{what} is singular on the {n}-period training sample; try a larger training_size"
    ))
}

fn inverse_gram(x: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    let r = x.clone().qr().r();
    let rmax = r.diagonal().amax();
    let tol = rmax * n.max(p) as f64 * f64::EPSILON * 16.0;
    if !(rmax > 0.0) || r.diagonal().iter().any(|d| d.abs() <= tol) {
        return Err(singular(what, n));
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| singular(what, n))?;
    let mut inv = &r_inv * r_inv.transpose();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Constant-parameter VAR fit by least squares, plus the recursive
/// regressions of each reduced-form residual on the negated residuals of
/// the variables ordered before it.
pub fn training_fit(training: &Regressors) -> Result<TrainingFit> {
    let (n, k, ks) = (training.len(), training.k(), training.k() * training.lags());
    if n <= ks + 1 {
        return Err(Error::Length(format!(
            "training sample of {n} periods needs more than k*s + 1 = {}",
            ks + 1
        )));
    }
    let zmat = DMatrix::from_fn(n, ks, |t, c| training.lagged(t)[c]);
    let ymat = DMatrix::from_fn(n, k, |t, j| training.y(t)[j]);
    let zz_inv = inverse_gram(&zmat, "training regressor matrix")?;
    let coef = &zz_inv * zmat.transpose() * &ymat; // ks x k
    let resid = &ymat - &zmat * &coef;
    let dof = (n - ks) as f64;
    let sigma_u = resid.transpose() * &resid / dof;

    let nb = k * ks;
    let beta = DVector::from_fn(nb, |i, _| coef[(i % ks, i / ks)]);
    let mut beta_cov = DMatrix::from_fn(nb, nb, |r, c| sigma_u[(r / ks, c / ks)] * zz_inv[(r % ks, c % ks)]);
    symmetrize(&mut beta_cov);

    let mut a = Vec::with_capacity(k.saturating_sub(1));
    let mut a_covs = Vec::with_capacity(k.saturating_sub(1));
    let mut sigma = DVector::zeros(k);
    sigma[0] = (resid.column(0).norm_squared() / dof).sqrt();
    for j in 1..k {
        let x = -resid.columns(0, j).into_owned();
        let y = resid.column(j).into_owned();
        let xx_inv = inverse_gram(&x, "training residual cross-product")?;
        let coef_a = &xx_inv * x.transpose() * &y;
        let e = &y - &x * &coef_a;
        let s2 = e.norm_squared() / (n - j) as f64;
        let mut cov = xx_inv * s2;
        symmetrize(&mut cov);
        a.push(coef_a);
        a_covs.push(cov);
        sigma[j] = s2.sqrt();
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(singular("training residual variance", n));
    }
    Ok(TrainingFit {
        beta,
        beta_cov,
        a,
        a_covs,
        sigma,
    })
}

/// Calibrates the prior from a training sample.
pub fn init_prior(training: &Regressors, spec: &PriorSpec) -> Result<Prior> {
    spec.validate(training.k(), training.lags())?;
    if training.len() != spec.training_size {
        return Err(Error::Length(format!(
            "training sample has {} periods, spec asks for {}",
            training.len(),
            spec.training_size
        )));
    }
    let fit = training_fit(training)?;
    prior_from_fit(&fit, spec)
}

/// Builds the prior from a least-squares fit.
pub fn prior_from_fit(fit: &TrainingFit, spec: &PriorSpec) -> Result<Prior> {
    let k = fit.sigma.len();
    let q_dof = spec.dof_q.unwrap_or(spec.training_size as f64);
    let s_dofs: Vec<f64> = (1..k).map(|j| spec.dof_s.unwrap_or(j as f64 + 1.0)).collect();
    let w_dof = spec.dof_w.unwrap_or(2.0);
    let prior = Prior {
        beta_mean: fit.beta.clone(),
        beta_cov: &fit.beta_cov * spec.beta_cov_scale,
        a_means: fit.a.clone(),
        a_covs: fit.a_covs.iter().map(|c| c * spec.a_cov_scale).collect(),
        h_mean: fit.sigma.map(f64::ln),
        h_cov: DMatrix::identity(k, k) * spec.h_cov_scale,
        q_scale: &fit.beta_cov * (spec.kappa_q.powi(2) * q_dof),
        q_dof,
        s_scales: fit
            .a_covs
            .iter()
            .zip(&s_dofs)
            .map(|(c, dof)| c * (spec.kappa_s.powi(2) * dof))
            .collect(),
        s_dofs,
        w_scales: DVector::from_element(k, spec.kappa_w.powi(2) * w_dof),
        w_dof,
    };
    prior.validate()?;
    Ok(prior)
}

impl Prior {
    pub fn k(&self) -> usize {
        self.h_mean.len()
    }

    pub fn n_coefficients(&self) -> usize {
        self.beta_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, nb) = (self.k(), self.n_coefficients());
        let shapes_ok = self.beta_cov.shape() == (nb, nb)
            && self.q_scale.shape() == (nb, nb)
            && self.h_cov.shape() == (k, k)
            && self.w_scales.len() == k
            && self.a_means.len() + 1 == k
            && self.a_covs.len() + 1 == k
            && self.s_scales.len() + 1 == k
            && self.s_dofs.len() + 1 == k
            && (0..k - 1).all(|j| {
                self.a_means[j].len() == j + 1
                    && self.a_covs[j].shape() == (j + 1, j + 1)
                    && self.s_scales[j].shape() == (j + 1, j + 1)
            });
        if !shapes_ok {
            return Err(Error::Dimension("prior component shapes are inconsistent".into()));
        }
        for m in [&self.beta_cov, &self.q_scale, &self.h_cov]
            .into_iter()
            .chain(&self.a_covs)
            .chain(&self.s_scales)
        {
            cholesky(m)?;
        }
        if self.w_scales.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("W prior scale must be positive".into()));
        }
        if !(self.q_dof > nb as f64 - 1.0)
            || self.s_dofs.iter().enumerate().any(|(j, d)| !(*d > j as f64))
            || !(self.w_dof > 0.0)
        {
            return Err(Error::InvalidParameter(
                "prior degrees of freedom must exceed dimension - 1".into(),
            ));
        }
        Ok(())
    }
}
