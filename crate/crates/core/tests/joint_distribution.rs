//! Joint-distribution test of the whole sampler.
//!
//! Parameters drawn from the prior and parameters produced by alternating
//! "simulate data given parameters" with one Gibbs sweep share the same
//! stationary distribution exactly when every block draws from its correct
//! conditional. Moments from the two simulators are compared on a small
//! two-variable model.

use nalgebra::{DMatrix, DVector};
use tvpsv::kernel::{sample_inverse_gamma, sample_inverse_wishart, sample_mvn, RngStream};
use tvpsv::model::{unit_lower, GibbsDraw, GibbsSampler, HyperCovariances, ModelSpec, Prior, Regressors, StatePaths};
use tvpsv::quarter::calendar;
use tvpsv::QuarterDate;

const PERIODS: usize = 10;

fn prior() -> Prior {
    let (q_dof, s_dof, w_dof) = (12.0, 8.0, 8.0);
    Prior {
        beta_mean: DVector::from_vec(vec![0.5, 0.1, 0.0, 0.4]),
        beta_cov: DMatrix::identity(4, 4) * 0.01,
        a_means: vec![DVector::from_element(1, 0.3)],
        a_covs: vec![DMatrix::from_element(1, 1, 0.05)],
        h_mean: DVector::from_vec(vec![0.0, -0.5]),
        h_cov: DMatrix::identity(2, 2) * 0.1,
        // Scales chosen so every innovation variance has prior mean 0.001,
        // except W whose mean is 0.01.
        q_scale: DMatrix::identity(4, 4) * (0.001 * (q_dof - 5.0)),
        q_dof,
        s_scales: vec![DMatrix::from_element(1, 1, 0.001 * (s_dof - 2.0))],
        s_dofs: vec![s_dof],
        w_scales: DVector::from_element(2, 0.01 * (w_dof - 2.0)),
        w_dof,
    }
}

fn random_walk(start: DVector<f64>, cov: &DMatrix<f64>, n: usize, rng: &mut RngStream) -> Vec<DVector<f64>> {
    let zero = DVector::zeros(start.len());
    let mut path = vec![start];
    for _ in 1..n {
        let next = path.last().unwrap() + sample_mvn(&zero, cov, rng).unwrap();
        path.push(next);
    }
    path
}

/// Parameters straight from the prior.
fn prior_draw(p: &Prior, rng: &mut RngStream) -> GibbsDraw {
    let q = sample_inverse_wishart(&p.q_scale, p.q_dof, rng).unwrap();
    let s = sample_inverse_wishart(&p.s_scales[0], p.s_dofs[0], rng).unwrap();
    let w = DVector::from_fn(2, |j, _| sample_inverse_gamma(0.5 * p.w_dof, 0.5 * p.w_scales[j], rng).unwrap());
    let beta = random_walk(sample_mvn(&p.beta_mean, &p.beta_cov, rng).unwrap(), &q, PERIODS, rng);
    let a = random_walk(sample_mvn(&p.a_means[0], &p.a_covs[0], rng).unwrap(), &s, PERIODS, rng);
    let h = random_walk(
        sample_mvn(&p.h_mean, &p.h_cov, rng).unwrap(),
        &DMatrix::from_diagonal(&w),
        PERIODS,
        rng,
    );
    GibbsDraw {
        paths: StatePaths { beta, a, h },
        hyper: HyperCovariances {
            q,
            s_blocks: vec![s],
            w,
        },
        indicators: vec![vec![0; 2]; PERIODS],
    }
}

/// Data from the observation equation given the parameter paths.
fn simulate_data(paths: &StatePaths, rng: &mut RngStream) -> Regressors {
    let mut z = vec![DVector::from_vec(vec![0.5, -0.5])];
    let mut y = Vec::with_capacity(PERIODS);
    for t in 0..PERIODS {
        let b = DMatrix::from_row_slice(2, 2, paths.beta[t].as_slice());
        let a_inv = unit_lower(&paths.a[t], 2).try_inverse().unwrap();
        let e = DVector::from_fn(2, |j, _| paths.h[t][j].exp() * rng.standard_normal());
        let yt = &b * &z[t] + a_inv * e;
        z.push(yt.clone());
        y.push(yt);
    }
    z.pop();
    let dates = calendar(QuarterDate::new(2000, 1).unwrap(), PERIODS);
    Regressors::from_parts(2, 1, dates, y, z).unwrap()
}

fn functionals(d: &GibbsDraw) -> Vec<f64> {
    let p = &d.paths;
    let last = PERIODS - 1;
    vec![
        p.beta[last][0],
        p.beta[0][3],
        p.beta[last][1].powi(2),
        p.a[last][0],
        p.h[last][0],
        p.h[0][1],
        p.h[last][1].powi(2),
        d.hyper.q[(0, 0)],
        d.hyper.q[(1, 2)],
        d.hyper.s_blocks[0][(0, 0)],
        d.hyper.w[0],
        d.hyper.w[1],
    ]
}

const NAMES: [&str; 12] = [
    "beta_T[0]",
    "beta_1[3]",
    "beta_T[1]^2",
    "a_T",
    "h_T[0]",
    "h_1[1]",
    "h_T[1]^2",
    "Q[0,0]",
    "Q[1,2]",
    "S[0,0]",
    "W[0]",
    "W[1]",
];

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Squared standard error of the mean from non-overlapping batch means.
fn batch_var_of_mean(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = x.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    mean_and_var(&means).1 / means.len() as f64
}

#[test]
fn successive_conditional_simulator_matches_prior_moments() {
    let prior = prior();
    let spec = ModelSpec::default();
    let n = 100_000;

    let mut rng = RngStream::new(31);
    let marginal: Vec<Vec<f64>> = (0..n).map(|_| functionals(&prior_draw(&prior, &mut rng))).collect();

    let mut data_rng = RngStream::new(32);
    let mut gibbs_rng = RngStream::new(33);
    let mut state = prior_draw(&prior, &mut RngStream::new(34));
    let mut successive = Vec::with_capacity(n);
    for _ in 0..n {
        let data = simulate_data(&state.paths, &mut data_rng);
        let mut sampler = GibbsSampler::with_state(&data, &prior, &spec, state).unwrap();
        sampler.sweep(&mut gibbs_rng).unwrap();
        state = sampler.state().clone();
        successive.push(functionals(&state));
    }

    let mut worst = (0.0f64, "");
    for (i, name) in NAMES.iter().enumerate() {
        let a: Vec<f64> = marginal.iter().map(|v| v[i]).collect();
        let b: Vec<f64> = successive.iter().map(|v| v[i]).collect();
        let (ma, va) = mean_and_var(&a);
        let mb = mean_and_var(&b).0;
        let se2 = va / n as f64 + batch_var_of_mean(&b, 50);
        let z = (mb - ma) / se2.sqrt();
        println!("{name:>12}: prior {ma:+.5}, successive {mb:+.5}, z = {z:+.2}");
        if z.abs() > worst.0 {
            worst = (z.abs(), name);
        }
    }
    assert!(worst.0 < 4.0, "largest discrepancy {} (|z| = {:.2})", worst.1, worst.0);
}
