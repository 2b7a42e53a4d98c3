//! Conditional draws of the four Gibbs blocks.

use nalgebra::{DMatrix, DVector};

use super::mixture::MixtureTable;
use super::prior::Prior;
use super::regressors::Regressors;
use super::state::{a_offset, free_a_count, unit_lower, HyperCovariances};
use crate::error::{Error, Result};
use crate::kernel::{
    ffbs, ffbs_scalar, sample_inverse_gamma, sample_inverse_wishart, symmetrize, RngStream,
    ScalarSystem, StateSpaceModel,
};

/// Offset inside `log(e^2 + c)` guarding against zero residuals.
pub const SV_OFFSET: f64 = 1e-6;

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{name} has {got} periods, data has {want}")));
    }
    Ok(())
}

/// Reduced-form covariance `A^{-1} Sigma Sigma' A^{-1}'` of one period.
pub fn reduced_form_covariance(a: &DVector<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let k = h.len();
    let sigma = DMatrix::from_diagonal(&h.map(f64::exp));
    let b = unit_lower(a, k)
        .solve_lower_triangular(&sigma)
        .expect("unit diagonal");
    let mut omega = &b * b.transpose();
    symmetrize(&mut omega);
    omega
}

/// Draws the coefficient path given the contemporaneous relations and
/// volatilities, by FFBS on `y_t = X_t beta_t + A_t^{-1} Sigma_t eps_t`.
pub fn draw_beta_paths(
    data: &Regressors,
    a: &[DVector<f64>],
    h: &[DVector<f64>],
    q: &DMatrix<f64>,
    init_mean: &DVector<f64>,
    init_cov: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<Vec<DVector<f64>>> {
    let n = data.len();
    check_len("a path", a.len(), n)?;
    check_len("h path", h.len(), n)?;
    let model = StateSpaceModel {
        obs_matrices: (0..n).map(|t| data.x(t)).collect(),
        obs_covs: (0..n).map(|t| reduced_form_covariance(&a[t], &h[t])).collect(),
        state_cov: q.clone(),
        init_mean: init_mean.clone(),
        init_cov: init_cov.clone(),
    };
    ffbs(&model, data.observations(), rng)
}

/// Draws the free elements of `A_t`, equation by equation: the residual of
/// equation `j` is regressed on the negated residuals of equations `< j`
/// with time-varying coefficients and noise variance `exp(2 h_jt)`.
#[allow(clippy::too_many_arguments)]
pub fn draw_a_paths(
    data: &Regressors,
    beta: &[DVector<f64>],
    h: &[DVector<f64>],
    s_blocks: &[DMatrix<f64>],
    init_means: &[DVector<f64>],
    init_covs: &[DMatrix<f64>],
    rng: &mut RngStream,
) -> Result<Vec<DVector<f64>>> {
    let (n, k) = (data.len(), data.k());
    check_len("beta path", beta.len(), n)?;
    check_len("h path", h.len(), n)?;
    let blocks = k.saturating_sub(1);
    if s_blocks.len() != blocks || init_means.len() != blocks || init_covs.len() != blocks {
        return Err(Error::Dimension(format!("expected {blocks} contemporaneous blocks")));
    }
    let mut out = vec![DVector::zeros(free_a_count(k)); n];
    if k < 2 {
        return Ok(out);
    }
    let resid: Vec<DVector<f64>> = (0..n).map(|t| data.residual(t, &beta[t])).collect();
    for j in 1..k {
        let var: Vec<f64> = (0..n).map(|t| (2.0 * h[t][j]).exp()).collect();
        let y: Vec<f64> = resid.iter().map(|u| u[j]).collect();
        let path: Vec<DVector<f64>> = if j == 1 {
            let z: Vec<f64> = resid.iter().map(|u| -u[0]).collect();
            let sys = ScalarSystem {
                y: &y,
                z: &z,
                r: &var,
                q: s_blocks[0][(0, 0)],
                init_mean: init_means[0][0],
                init_var: init_covs[0][(0, 0)],
            };
            ffbs_scalar(&sys, rng)?
                .into_iter()
                .map(|v| DVector::from_element(1, v))
                .collect()
        } else {
            let model = StateSpaceModel {
                obs_matrices: resid
                    .iter()
                    .map(|u| DMatrix::from_fn(1, j, |_, i| -u[i]))
                    .collect(),
                obs_covs: var.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
                state_cov: s_blocks[j - 1].clone(),
                init_mean: init_means[j - 1].clone(),
                init_cov: init_covs[j - 1].clone(),
            };
            let obs: Vec<DVector<f64>> = y.iter().map(|&v| DVector::from_element(1, v)).collect();
            ffbs(&model, &obs, rng)?
        };
        for (t, p) in path.iter().enumerate() {
            out[t].rows_mut(a_offset(j), j).copy_from(p);
        }
    }
    Ok(out)
}

/// Structural residuals `A_t (y_t - X_t beta_t)`.
pub fn structural_residuals(
    data: &Regressors,
    beta: &[DVector<f64>],
    a: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let k = data.k();
    (0..data.len())
        .map(|t| unit_lower(&a[t], k) * data.residual(t, &beta[t]))
        .collect()
}

/// Draws the mixture indicators given the previous log-volatilities, then
/// the log-volatility paths given the new indicators.
#[allow(clippy::too_many_arguments)]
pub fn draw_h_paths(
    data: &Regressors,
    beta: &[DVector<f64>],
    a: &[DVector<f64>],
    h_prev: &[DVector<f64>],
    w: &DVector<f64>,
    init_mean: &DVector<f64>,
    init_var: &DVector<f64>,
    mixture: &MixtureTable,
    rng: &mut RngStream,
) -> Result<(Vec<DVector<f64>>, Vec<Vec<u8>>)> {
    let (n, k) = (data.len(), data.k());
    check_len("beta path", beta.len(), n)?;
    check_len("a path", a.len(), n)?;
    check_len("previous h path", h_prev.len(), n)?;
    if w.len() != k || init_mean.len() != k || init_var.len() != k {
        return Err(Error::Dimension("log-volatility parameters must have length k".into()));
    }
    let e = structural_residuals(data, beta, a);
    let ystar: Vec<DVector<f64>> = e.iter().map(|v| v.map(|x| (x * x + SV_OFFSET).ln())).collect();
    let mut indicators = vec![vec![0u8; k]; n];
    for j in 0..k {
        for t in 0..n {
            indicators[t][j] = mixture.sample_indicator(ystar[t][j] - 2.0 * h_prev[t][j], rng);
        }
    }
    let comps = mixture.components();
    let mut h = vec![DVector::zeros(k); n];
    let z = vec![2.0; n];
    for j in 0..k {
        let y: Vec<f64> = (0..n)
            .map(|t| ystar[t][j] - comps[indicators[t][j] as usize].mean)
            .collect();
        let r: Vec<f64> = (0..n)
            .map(|t| comps[indicators[t][j] as usize].variance)
            .collect();
        let sys = ScalarSystem {
            y: &y,
            z: &z,
            r: &r,
            q: w[j],
            init_mean: init_mean[j],
            init_var: init_var[j],
        };
        for (t, v) in ffbs_scalar(&sys, rng)?.into_iter().enumerate() {
            h[t][j] = v;
        }
    }
    Ok((h, indicators))
}

/// `prior_scale + sum_t dx_t dx_t'` over first differences of `path`.
pub fn posterior_scale(prior_scale: &DMatrix<f64>, path: &[DVector<f64>]) -> DMatrix<f64> {
    let mut s = prior_scale.clone();
    for pair in path.windows(2) {
        let d = &pair[1] - &pair[0];
        s += &d * d.transpose();
    }
    symmetrize(&mut s);
    s
}

fn block_path(a: &[DVector<f64>], j: usize) -> Vec<DVector<f64>> {
    a.iter().map(|v| v.rows(a_offset(j), j).into_owned()).collect()
}

/// Conjugate inverse-Wishart draws of `Q`, each block of `S`, and each
/// diagonal element of `W`.
pub fn draw_hypercovariances(
    beta: &[DVector<f64>],
    a: &[DVector<f64>],
    h: &[DVector<f64>],
    prior: &Prior,
    rng: &mut RngStream,
) -> Result<HyperCovariances> {
    let n = beta.len();
    check_len("a path", a.len(), n)?;
    check_len("h path", h.len(), n)?;
    let extra = n.saturating_sub(1) as f64;
    let q = sample_inverse_wishart(&posterior_scale(&prior.q_scale, beta), prior.q_dof + extra, rng)?;
    let k = prior.k();
    let mut s_blocks = Vec::with_capacity(k.saturating_sub(1));
    for j in 1..k {
        let scale = posterior_scale(&prior.s_scales[j - 1], &block_path(a, j));
        s_blocks.push(sample_inverse_wishart(&scale, prior.s_dofs[j - 1] + extra, rng)?);
    }
    let mut w = DVector::zeros(k);
    for j in 0..k {
        let ss: f64 = h.windows(2).map(|p| (p[1][j] - p[0][j]).powi(2)).sum();
        // A 1 x 1 inverse-Wishart(psi, nu) is inverse-gamma(nu / 2, psi / 2).
        w[j] = sample_inverse_gamma(
            0.5 * (prior.w_dof + extra),
            0.5 * (prior.w_scales[j] + ss),
            rng,
        )?;
    }
    Ok(HyperCovariances { q, s_blocks, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quarter::{calendar, QuarterDate};

    fn regressors(y: Vec<DVector<f64>>, z: Vec<DVector<f64>>, k: usize) -> Regressors {
        let dates = calendar(QuarterDate::new(1950, 1).unwrap(), y.len());
        Regressors::from_parts(k, 1, dates, y, z).unwrap()
    }

    fn noise_data(n: usize, k: usize, seed: u64) -> Regressors {
        let mut rng = RngStream::new(seed);
        let y = (0..n).map(|_| DVector::from_fn(k, |_, _| rng.standard_normal())).collect();
        let z = (0..n).map(|_| DVector::from_fn(k, |_, _| rng.standard_normal())).collect();
        regressors(y, z, k)
    }

    fn max_drift(q_var: f64) -> f64 {
        let data = noise_data(50, 2, 1);
        let n = data.len();
        let a = vec![DVector::from_element(1, 0.2); n];
        let h = vec![DVector::zeros(2); n];
        let q = DMatrix::identity(4, 4) * q_var;
        let mut rng = RngStream::new(2);
        let beta = draw_beta_paths(
            &data,
            &a,
            &h,
            &q,
            &DVector::zeros(4),
            &DMatrix::identity(4, 4),
            &mut rng,
        )
        .unwrap();
        assert_eq!(beta.len(), n);
        assert!(beta.iter().all(|b| b.len() == 4));
        beta.iter().map(|b| (b - &beta[0]).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn frozen_coefficients_stay_constant() {
        // innovation standard deviation 1e-12
        let drift = max_drift(1e-24);
        assert!(drift <= 1e-6, "{drift}");
        // innovation variance 1e-12: drift is of the order of the
        // random-walk spread sqrt(4 * 50) * 1e-6
        let drift = max_drift(1e-12);
        assert!(drift <= 1e-4, "{drift}");
    }

    #[test]
    fn a_path_dimensions() {
        let data = noise_data(20, 4, 3);
        let beta = vec![DVector::zeros(16); 20];
        let h = vec![DVector::zeros(4); 20];
        let s: Vec<_> = (1..4).map(|j| DMatrix::identity(j, j) * 0.01).collect();
        let m: Vec<_> = (1..4).map(|j| DVector::zeros(j)).collect();
        let c: Vec<_> = (1..4).map(|j| DMatrix::identity(j, j)).collect();
        let a = draw_a_paths(&data, &beta, &h, &s, &m, &c, &mut RngStream::new(4)).unwrap();
        assert!(a.iter().all(|v| v.len() == 6));

        let data = noise_data(20, 1, 3);
        let a = draw_a_paths(
            &data,
            &vec![DVector::zeros(1); 20],
            &vec![DVector::zeros(1); 20],
            &[],
            &[],
            &[],
            &mut RngStream::new(4),
        )
        .unwrap();
        assert!(a.iter().all(|v| v.is_empty()));
    }

    #[test]
    fn single_increment_conjugacy() {
        let prior = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0]);
        let path = vec![DVector::from_vec(vec![0.5, 1.0]), DVector::from_vec(vec![1.5, -1.0])];
        let d = DVector::from_vec(vec![1.0, -2.0]);
        assert_eq!(posterior_scale(&prior, &path), &prior + &d * d.transpose());
    }

    #[test]
    fn sv_residual_offset() {
        // A zero residual maps to log(c) rather than -inf.
        let data = regressors(vec![DVector::zeros(2); 3], vec![DVector::zeros(2); 3], 2);
        let (h, ind) = draw_h_paths(
            &data,
            &vec![DVector::zeros(4); 3],
            &vec![DVector::zeros(1); 3],
            &vec![DVector::zeros(2); 3],
            &DVector::from_element(2, 0.01),
            &DVector::zeros(2),
            &DVector::from_element(2, 4.0),
            &MixtureTable::standard(),
            &mut RngStream::new(1),
        )
        .unwrap();
        assert!(h.iter().all(|v| v.iter().all(|x| x.is_finite() && x.exp() > 0.0)));
        assert!(ind.iter().flatten().all(|&i| i < 7));
    }

    /// Long random walk with known Q: the posterior mean of Q is close.
    #[test]
    fn hyper_posterior_concentrates_on_truth() {
        let n = 2000;
        let q_true = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.02]);
        let l = q_true.clone().cholesky().unwrap().l();
        let mut rng = RngStream::new(5);
        let mut beta = vec![DVector::zeros(2)];
        for _ in 1..n {
            let e = DVector::from_fn(2, |_, _| rng.standard_normal());
            let next = beta.last().unwrap() + &l * e;
            beta.push(next);
        }
        let prior = Prior {
            beta_mean: DVector::zeros(2),
            beta_cov: DMatrix::identity(2, 2),
            a_means: vec![],
            a_covs: vec![],
            h_mean: DVector::zeros(1),
            h_cov: DMatrix::identity(1, 1),
            q_scale: DMatrix::identity(2, 2) * 1e-4 * 40.0,
            q_dof: 40.0,
            s_scales: vec![],
            s_dofs: vec![],
            w_scales: DVector::from_element(1, 2e-4),
            w_dof: 2.0,
        };
        let a = vec![DVector::zeros(0); n];
        let h = vec![DVector::zeros(1); n];
        let mut mean = DMatrix::zeros(2, 2);
        let reps = 400;
        for _ in 0..reps {
            let d = draw_hypercovariances(&beta, &a, &h, &prior, &mut rng).unwrap();
            d.q.clone().cholesky().expect("PD draw");
            mean += d.q / reps as f64;
        }
        for i in 0..2 {
            let rel = (mean[(i, i)] - q_true[(i, i)]).abs() / q_true[(i, i)];
            assert!(rel < 0.15, "diag {i}: {rel}");
        }
        assert!((mean[(0, 1)] - q_true[(0, 1)]).abs() < 0.15 * q_true[(0, 0)].sqrt() * q_true[(1, 1)].sqrt());
    }
}
