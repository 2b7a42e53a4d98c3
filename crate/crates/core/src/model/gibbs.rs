//! The Gibbs sampler: beta -> a -> (indicators, h) -> (Q, S, W).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::blocks::{
    draw_a_paths, draw_beta_paths, draw_h_paths, draw_hypercovariances, reduced_form_covariance,
};
use super::mixture::MixtureTable;
use super::prior::{init_prior, Prior};
use super::regressors::{build_regressors, Regressors};
use super::spec::{ModelSpec, PriorSpec};
use super::state::{GibbsDraw, HyperCovariances, StatePaths};
use super::store::ChainStore;
use crate::error::{Error, Result};
use crate::ingest::AlignedPanel;
use crate::kernel::{cholesky, companion_form, spectral_radius, RngStream};

/// Redraws allowed per sweep when explosive coefficient paths are rejected.
pub const EXPLOSIVE_ATTEMPTS: usize = 100;

/// Estimation data and prior derived from a panel.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub variables: Vec<String>,
    pub estimation: Regressors,
    pub prior: Prior,
}

/// Builds regressors, splits off the training sample and calibrates the
/// prior.
pub fn prepare(panel: &AlignedPanel, spec: &ModelSpec, prior_spec: &PriorSpec) -> Result<Prepared> {
    spec.validate(panel.k())?;
    prior_spec.validate(panel.k(), spec.lags)?;
    let panel = if spec.standardize {
        panel.standardized()
    } else {
        panel.clone()
    };
    let all = build_regressors(&panel, spec.lags)?;
    let (training, estimation) = all.split_training(prior_spec.training_size)?;
    let prior = init_prior(&training, prior_spec)?;
    Ok(Prepared {
        variables: panel.variables().to_vec(),
        estimation,
        prior,
    })
}

/// Runs the sampler on `panel`, whose columns must already be in the
/// identification order.
pub fn run_gibbs(
    panel: &AlignedPanel,
    spec: &ModelSpec,
    prior_spec: &PriorSpec,
    rng: &mut RngStream,
) -> Result<ChainStore> {
    let prepared = prepare(panel, spec, prior_spec)?;
    run_chain(&prepared, spec, prior_spec, rng)
}

/// Runs the sampler on prepared data.
pub fn run_chain(
    prepared: &Prepared,
    spec: &ModelSpec,
    prior_spec: &PriorSpec,
    rng: &mut RngStream,
) -> Result<ChainStore> {
    let data = &prepared.estimation;
    spec.validate(data.k())?;
    let started = Instant::now();
    let meta = ChainStore::new_meta(
        prepared.variables.clone(),
        data.dates()[0],
        data.len(),
        spec.clone(),
        prior_spec.clone(),
        rng.seed(),
        rng.stream(),
    );
    let mut store = ChainStore::empty(meta);
    let mut sampler = GibbsSampler::new(data, &prepared.prior, spec)?;
    for sweep in 0..spec.n_draws {
        sampler.sweep(rng)?;
        if spec.keeps(sweep) {
            store.push(sampler.state())?;
        }
    }
    store.meta_mut().explosive_fallbacks = sampler.explosive_fallbacks;
    store.wall_time_secs = Some(started.elapsed().as_secs_f64());
    Ok(store)
}

/// Sampler state between sweeps.
pub struct GibbsSampler<'a> {
    data: &'a Regressors,
    prior: &'a Prior,
    reject_explosive: bool,
    mixture: MixtureTable,
    state: GibbsDraw,
    sweep: usize,
    explosive_fallbacks: usize,
}

fn wrap(sweep: usize, block: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Sweep {
        sweep,
        block,
        source: Box::new(e),
    }
}

fn check_finite<'v>(
    sweep: usize,
    block: &'static str,
    values: impl IntoIterator<Item = &'v DVector<f64>>,
) -> Result<()> {
    for (t, v) in values.into_iter().enumerate() {
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                sweep,
                block,
                detail: format!("period {t}, element {i} = {}", v[i]),
            });
        }
    }
    Ok(())
}

impl<'a> GibbsSampler<'a> {
    /// Starts every path at its prior mean and each innovation covariance
    /// at its prior scale divided by the prior degrees of freedom.
    pub fn new(data: &'a Regressors, prior: &'a Prior, spec: &ModelSpec) -> Result<Self> {
        prior.validate()?;
        let (n, k) = (data.len(), data.k());
        if prior.k() != k || prior.n_coefficients() != data.n_coefficients() {
            return Err(Error::Dimension("prior does not match the data dimensions".into()));
        }
        if n < 2 {
            return Err(Error::Length(format!("estimation sample of {n} periods")));
        }
        let a0 = DVector::from_iterator(
            prior.a_means.iter().map(|v| v.len()).sum(),
            prior.a_means.iter().flat_map(|v| v.iter().copied()),
        );
        let state = GibbsDraw {
            paths: StatePaths {
                beta: vec![prior.beta_mean.clone(); n],
                a: vec![a0; n],
                h: vec![prior.h_mean.clone(); n],
            },
            hyper: HyperCovariances {
                q: &prior.q_scale / prior.q_dof,
                s_blocks: prior
                    .s_scales
                    .iter()
                    .zip(&prior.s_dofs)
                    .map(|(s, d)| s / *d)
                    .collect(),
                w: &prior.w_scales / prior.w_dof,
            },
            indicators: vec![vec![0; k]; n],
        };
        let mixture = MixtureTable::standard();
        mixture.validate()?;
        Ok(Self {
            data,
            prior,
            reject_explosive: spec.reject_explosive,
            mixture,
            state,
            sweep: 0,
            explosive_fallbacks: 0,
        })
    }

    /// Resumes sampling from `state` instead of the prior-mean start.
    pub fn with_state(data: &'a Regressors, prior: &'a Prior, spec: &ModelSpec, state: GibbsDraw) -> Result<Self> {
        let mut sampler = Self::new(data, prior, spec)?;
        state.validate(data.k(), data.lags())?;
        if state.paths.len() != data.len() {
            return Err(Error::Dimension(format!(
                "state covers {} periods, data {}",
                state.paths.len(),
                data.len()
            )));
        }
        sampler.state = state;
        Ok(sampler)
    }

    pub fn state(&self) -> &GibbsDraw {
        &self.state
    }

    pub fn explosive_fallbacks(&self) -> usize {
        self.explosive_fallbacks
    }

    fn is_explosive(&self, beta: &[DVector<f64>]) -> Result<bool> {
        let (k, lags) = (self.data.k(), self.data.lags());
        for b in beta {
            if spectral_radius(&companion_form(b.as_slice(), k, lags)?) >= 1.0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn draw_beta(&self, rng: &mut RngStream) -> Result<Vec<DVector<f64>>> {
        let p = &self.state.paths;
        draw_beta_paths(
            self.data,
            &p.a,
            &p.h,
            &self.state.hyper.q,
            &self.prior.beta_mean,
            &self.prior.beta_cov,
            rng,
        )
    }

    /// One full sweep over the four blocks.
    pub fn sweep(&mut self, rng: &mut RngStream) -> Result<()> {
        let sweep = self.sweep;
        let prior = self.prior;

        let mut beta = self.draw_beta(rng).map_err(wrap(sweep, "beta"))?;
        if self.reject_explosive {
            let mut attempts = 1;
            while self.is_explosive(&beta).map_err(wrap(sweep, "beta"))? {
                if attempts == EXPLOSIVE_ATTEMPTS {
                    beta = self.state.paths.beta.clone();
                    self.explosive_fallbacks += 1;
                    break;
                }
                beta = self.draw_beta(rng).map_err(wrap(sweep, "beta"))?;
                attempts += 1;
            }
        }
        check_finite(sweep, "beta", &beta)?;
        self.state.paths.beta = beta;

        let p = &self.state.paths;
        let a = draw_a_paths(
            self.data,
            &p.beta,
            &p.h,
            &self.state.hyper.s_blocks,
            &prior.a_means,
            &prior.a_covs,
            rng,
        )
        .map_err(wrap(sweep, "a"))?;
        check_finite(sweep, "a", &a)?;
        self.state.paths.a = a;

        let p = &self.state.paths;
        let (h, indicators) = draw_h_paths(
            self.data,
            &p.beta,
            &p.a,
            &p.h,
            &self.state.hyper.w,
            &prior.h_mean,
            &prior.h_cov.diagonal(),
            &self.mixture,
            rng,
        )
        .map_err(wrap(sweep, "h"))?;
        check_finite(sweep, "h", &h)?;
        if h.iter().flat_map(|v| v.iter()).any(|x| !(x.exp() > 0.0 && x.exp().is_finite())) {
            return Err(Error::NonFinite {
                sweep,
                block: "h",
                detail: "volatility exp(h) under- or overflows".into(),
            });
        }
        self.state.paths.h = h;
        self.state.indicators = indicators;

        let p = &self.state.paths;
        let hyper = draw_hypercovariances(&p.beta, &p.a, &p.h, prior, rng)
            .map_err(wrap(sweep, "hyper"))?;
        let finite = hyper.q.iter().chain(hyper.s_blocks.iter().flat_map(|b| b.iter())).chain(hyper.w.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                sweep,
                block: "hyper",
                detail: "innovation covariance draw".into(),
            });
        }
        self.state.hyper = hyper;
        self.sweep += 1;
        Ok(())
    }
}

/// Gaussian log density of the reduced-form one-step-ahead prediction
/// `y_t ~ N(X_t beta_t, A_t^{-1} Sigma_t Sigma_t' A_t^{-1}')`, summed over
/// periods.
pub fn reduced_form_log_likelihood(data: &Regressors, paths: &StatePaths) -> Result<f64> {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    if paths.len() != data.len() {
        return Err(Error::Dimension("paths and data lengths differ".into()));
    }
    let mut ll = 0.0;
    for t in 0..data.len() {
        let omega = reduced_form_covariance(&paths.a[t], &paths.h[t]);
        let f = cholesky(&omega)?;
        let u = data.residual(t, &paths.beta[t]);
        ll -= 0.5 * (data.k() as f64 * LN_2PI + f.log_det() + u.dot(&f.solve(&u)));
    }
    Ok(ll)
}

/// Recursive factorization `Omega = A^{-1} Sigma Sigma' A^{-1}'` of a
/// reduced-form covariance, returning the free elements of `A` and the log
/// standard deviations `h`.
pub fn structural_factors(omega: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = omega.nrows();
    let l = cholesky(omega)?.into_inner();
    let d = l.diagonal();
    // L = A^{-1} Sigma, so A^{-1} = L Sigma^{-1} and A is its inverse.
    let a_inv = DMatrix::from_fn(k, k, |i, j| l[(i, j)] / d[j]);
    let a = a_inv
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("unit lower-triangular inverse".into()))?;
    let mut free = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for j in 1..k {
        for i in 0..j {
            free.push(a[(j, i)]);
        }
    }
    Ok((DVector::from_vec(free), d.map(f64::ln)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::state::unit_lower;
    use crate::quarter::QuarterDate;

    fn panel(n: usize, seed: u64) -> AlignedPanel {
        let mut rng = RngStream::new(seed);
        let mut v = DMatrix::zeros(n, 2);
        for t in 1..n {
            let e0 = rng.standard_normal();
            let e1 = 0.5 * rng.standard_normal() - 0.3 * e0;
            v[(t, 0)] = 0.6 * v[(t - 1, 0)] + e0;
            v[(t, 1)] = 0.2 * v[(t - 1, 0)] + 0.4 * v[(t - 1, 1)] + e1;
        }
        AlignedPanel::new(vec!["x".into(), "y".into()], QuarterDate::new(1960, 1).unwrap(), v).unwrap()
    }

    fn short_spec(n_draws: usize, burn_in: usize, seed: u64) -> ModelSpec {
        ModelSpec {
            n_draws,
            burn_in,
            thinning: 1,
            seed,
            ..ModelSpec::default()
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let p = panel(120, 1);
        let spec = short_spec(30, 10, 4);
        let prior = PriorSpec::default();
        let a = run_gibbs(&p, &spec, &prior, &mut RngStream::new(4)).unwrap();
        let b = run_gibbs(&p, &spec, &prior, &mut RngStream::new(4)).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.meta(), b.meta());
        assert!(a.wall_time_secs.is_some());
        for d in 0..a.len() {
            assert_eq!(a.draw(d), b.draw(d));
        }
        a.validate().unwrap();
        let c = run_gibbs(&p, &spec, &prior, &mut RngStream::new(5)).unwrap();
        assert_ne!(a.draw(0), c.draw(0));
        // first estimation period: 1 lag plus 40 training quarters
        assert_eq!(a.meta().start, QuarterDate::new(1970, 2).unwrap());
        assert_eq!(a.periods(), 120 - 41);
    }

    #[test]
    fn explosive_rejection_keeps_stable_paths() {
        let p = panel(100, 2);
        let spec = ModelSpec {
            reject_explosive: true,
            ..short_spec(10, 0, 1)
        };
        let store = run_gibbs(&p, &spec, &PriorSpec::default(), &mut RngStream::new(1)).unwrap();
        for d in 0..store.len() {
            for t in 0..store.periods() {
                let c = companion_form(store.beta(d, t), 2, 1).unwrap();
                assert!(spectral_radius(&c) < 1.0);
            }
        }
    }

    #[test]
    fn too_short_panel_errors() {
        let p = panel(42, 3);
        assert!(run_gibbs(&p, &short_spec(5, 0, 1), &PriorSpec::default(), &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn structural_factors_invert_reduced_form() {
        let omega = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.4, 0.3, 1.0, 0.2, -0.4, 0.2, 0.7]);
        let (a, h) = structural_factors(&omega).unwrap();
        assert!((reduced_form_covariance(&a, &h) - &omega).amax() < 1e-12);
        let am = unit_lower(&a, 3);
        assert_eq!(am[(0, 0)], 1.0);
    }

    /// Permuting the variables and re-factoring the reduced-form
    /// covariance changes `A_t` but not the predictive likelihood.
    #[test]
    fn likelihood_invariant_to_ordering() {
        let p = panel(80, 6);
        let spec = short_spec(3, 0, 2);
        let prepared = prepare(&p, &spec, &PriorSpec::default()).unwrap();
        let store = run_chain(&prepared, &spec, &PriorSpec::default(), &mut RngStream::new(2)).unwrap();
        let paths = store.paths(store.len() - 1);
        let data = &prepared.estimation;
        let ll = reduced_form_log_likelihood(data, &paths).unwrap();

        let swapped_panel = p.select(&["y", "x"]).unwrap();
        let swapped = prepare(&swapped_panel, &spec, &PriorSpec::default()).unwrap().estimation;
        let perm = [1usize, 0];
        let mut mapped = StatePaths {
            beta: vec![],
            a: vec![],
            h: vec![],
        };
        for t in 0..data.len() {
            let b = &paths.beta[t];
            // coefficient of variable i's lag on equation j moves to the
            // permuted positions
            mapped.beta.push(DVector::from_fn(4, |idx, _| {
                let (j, i) = (idx / 2, idx % 2);
                b[perm[j] * 2 + perm[i]]
            }));
            let omega = reduced_form_covariance(&paths.a[t], &paths.h[t]);
            let pomega = DMatrix::from_fn(2, 2, |r, c| omega[(perm[r], perm[c])]);
            let (a, h) = structural_factors(&pomega).unwrap();
            mapped.a.push(a);
            mapped.h.push(h);
        }
        assert_ne!(mapped.a, paths.a);
        let ll2 = reduced_form_log_likelihood(&swapped, &mapped).unwrap();
        assert!((ll - ll2).abs() < 1e-6, "{ll} vs {ll2}");
    }
}
