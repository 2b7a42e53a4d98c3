//! Gaussian filtering, smoothing and simulation smoothing for random-walk
//! state-space models:
//!
//! ```text
//! y_t     = Z_t x_t + v_t,   v_t ~ N(0, H_t)
//! x_{t+1} = x_t + u_t,       u_t ~ N(0, Q)
//! x_1     ~ N(m_0, P_0)
//! ```

use nalgebra::{DMatrix, DVector};

use super::linalg::{cholesky, symmetrize};
use super::rng::RngStream;
use super::sampling::sample_mvn;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    /// `Z_t`, one per period.
    pub obs_matrices: Vec<DMatrix<f64>>,
    /// `H_t`, one per period.
    pub obs_covs: Vec<DMatrix<f64>>,
    /// `Q`.
    pub state_cov: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn state_dim(&self) -> usize {
        self.init_mean.len()
    }

    pub fn validate(&self, data: &[DVector<f64>]) -> Result<()> {
        let m = self.state_dim();
        let t = data.len();
        if self.obs_matrices.len() != t || self.obs_covs.len() != t {
            return Err(Error::Dimension(format!(
                "{t} observations but {} observation matrices and {} observation covariances",
                self.obs_matrices.len(),
                self.obs_covs.len()
            )));
        }
        let square = |c: &DMatrix<f64>, n: usize| c.nrows() == n && c.ncols() == n;
        if !square(&self.init_cov, m) || !square(&self.state_cov, m) {
            return Err(Error::Dimension(format!(
                "state dimension {m} does not match state or initial covariance"
            )));
        }
        for (i, ((z, h), y)) in self.obs_matrices.iter().zip(&self.obs_covs).zip(data).enumerate() {
            let p = y.len();
            if z.nrows() != p || z.ncols() != m || !square(h, p) {
                return Err(Error::Dimension(format!(
                    "period {i}: y has length {p}, Z is {}x{}, H is {}x{}",
                    z.nrows(),
                    z.ncols(),
                    h.nrows(),
                    h.ncols()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `E[x_t | y_{1:t-1}]`.
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    /// `E[x_t | y_{1:t}]`.
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct SmootherOutput {
    /// `E[x_t | y_{1:T}]`.
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn kalman_filter(model: &StateSpaceModel, data: &[DVector<f64>]) -> Result<FilterOutput> {
    model.validate(data)?;
    let n = data.len();
    let mut out = FilterOutput {
        predicted_means: Vec::with_capacity(n),
        predicted_covs: Vec::with_capacity(n),
        filtered_means: Vec::with_capacity(n),
        filtered_covs: Vec::with_capacity(n),
        log_likelihood: 0.0,
    };
    let mut mean = model.init_mean.clone();
    let mut cov = model.init_cov.clone();
    for (t, y) in data.iter().enumerate() {
        if t > 0 {
            cov += &model.state_cov;
        }
        let z = &model.obs_matrices[t];
        let zp = z * &cov;
        let mut f = &zp * z.transpose() + &model.obs_covs[t];
        symmetrize(&mut f);
        let f_chol = cholesky(&f).map_err(|_| Error::InnovationSingular { period: t })?;
        let innovation = y - z * &mean;
        let f_inv_v = f_chol.solve(&innovation);
        let f_inv_zp = f_chol.solve_mat(&zp);
        out.log_likelihood +=
            -0.5 * (y.len() as f64 * LN_2PI + f_chol.log_det() + innovation.dot(&f_inv_v));

        out.predicted_means.push(mean.clone());
        out.predicted_covs.push(cov.clone());
        mean += zp.transpose() * f_inv_v;
        cov -= zp.transpose() * f_inv_zp;
        symmetrize(&mut cov);
        out.filtered_means.push(mean.clone());
        out.filtered_covs.push(cov.clone());
    }
    Ok(out)
}

/// Solves `R X = B` for symmetric PSD `R`, falling back to the
/// pseudo-inverse when `R` is singular (e.g. zero state noise and a
/// degenerate initial state).
fn solve_psd(r: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match cholesky(r) {
        Ok(f) => Ok(f.solve_mat(b)),
        Err(_) => {
            let scale = r.amax().max(f64::MIN_POSITIVE);
            let pinv = r
                .clone()
                .pseudo_inverse(1e-12 * scale)
                .map_err(|e| Error::Singular(e.to_string()))?;
            Ok(pinv * b)
        }
    }
}

/// Rauch-Tung-Striebel smoothed moments.
pub fn kalman_smoother(model: &StateSpaceModel, data: &[DVector<f64>]) -> Result<SmootherOutput> {
    let filter = kalman_filter(model, data)?;
    let n = data.len();
    if n == 0 {
        return Ok(SmootherOutput {
            means: vec![],
            covs: vec![],
        });
    }
    let mut means = filter.filtered_means.clone();
    let mut covs = filter.filtered_covs.clone();
    for t in (0..n - 1).rev() {
        let p_f = &filter.filtered_covs[t];
        let p_next = &filter.predicted_covs[t + 1];
        // gain^T = P_{t+1|t}^{-1} P_{t|t}
        let gain = solve_psd(p_next, p_f)?.transpose();
        let mean = &filter.filtered_means[t] + &gain * (&means[t + 1] - &filter.predicted_means[t + 1]);
        let mut cov = p_f + &gain * (&covs[t + 1] - p_next) * gain.transpose();
        symmetrize(&mut cov);
        means[t] = mean;
        covs[t] = cov;
    }
    Ok(SmootherOutput { means, covs })
}

/// Forward-filter backward-sampler: one joint draw of `x_{1:T}` from its
/// Gaussian posterior.
pub fn ffbs(model: &StateSpaceModel, data: &[DVector<f64>], rng: &mut RngStream) -> Result<Vec<DVector<f64>>> {
    let filter = kalman_filter(model, data)?;
    let n = data.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut path = vec![DVector::zeros(model.state_dim()); n];
    path[n - 1] = sample_mvn(&filter.filtered_means[n - 1], &filter.filtered_covs[n - 1], rng)?;
    for t in (0..n - 1).rev() {
        let m_f = &filter.filtered_means[t];
        let p_f = &filter.filtered_covs[t];
        let r = &filter.predicted_covs[t + 1];
        // x_t | x_{t+1} ~ N(m + G (x_{t+1} - m), G Q) with G = P R^{-1}.
        let gain = solve_psd(r, p_f)?.transpose();
        let mean = m_f + &gain * (&path[t + 1] - m_f);
        let mut cov = &gain * &model.state_cov;
        symmetrize(&mut cov);
        path[t] = sample_mvn(&mean, &cov, rng)?;
    }
    Ok(path)
}

/// Scalar random-walk model `x_t = x_{t-1} + w_t`, `y_t = z_t x_t + v_t`
/// with `Var(w_t) = q` and `Var(v_t) = r_t`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSystem<'a> {
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub r: &'a [f64],
    pub q: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

/// [`ffbs`] specialized to a scalar state and observation. Consumes the
/// random stream exactly as the general routine does for the equivalent
/// one-dimensional model.
pub fn ffbs_scalar(sys: &ScalarSystem<'_>, rng: &mut RngStream) -> Result<Vec<f64>> {
    let n = sys.y.len();
    if sys.z.len() != n || sys.r.len() != n {
        return Err(Error::Dimension(format!(
            "scalar system lengths differ: y {n}, z {}, r {}",
            sys.z.len(),
            sys.r.len()
        )));
    }
    if !(sys.q >= 0.0 && sys.init_var >= 0.0) {
        return Err(Error::InvalidParameter("scalar system variances must be non-negative".into()));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut m_f = Vec::with_capacity(n);
    let mut p_f = Vec::with_capacity(n);
    let (mut m, mut p) = (sys.init_mean, sys.init_var);
    for t in 0..n {
        if t > 0 {
            p += sys.q;
        }
        let z = sys.z[t];
        let f = z * p * z + sys.r[t];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InnovationSingular { period: t });
        }
        let zp = z * p;
        m += zp * (sys.y[t] - z * m) / f;
        p -= zp * zp / f;
        p = p.max(0.0);
        m_f.push(m);
        p_f.push(p);
    }
    let draw = |mean: f64, var: f64, rng: &mut RngStream| {
        let e = rng.standard_normal();
        if var > 0.0 {
            mean + var.sqrt() * e
        } else {
            mean
        }
    };
    let mut path = vec![0.0; n];
    path[n - 1] = draw(m_f[n - 1], p_f[n - 1], rng);
    for t in (0..n - 1).rev() {
        let r = p_f[t] + sys.q;
        let gain = if r > 0.0 { p_f[t] / r } else { 0.0 };
        let mean = m_f[t] + gain * (path[t + 1] - m_f[t]);
        path[t] = draw(mean, gain * sys.q, rng);
    }
    if path.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite scalar state draw".into()));
    }
    Ok(path)
}
