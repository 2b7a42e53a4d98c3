//! Synthetic data with known parameters, and a dense Gaussian-conditioning
//! oracle for the state-space kernel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AlignedPanel;
use crate::kernel::{companion_form, psd_factor, spectral_radius, RngStream, StateSpaceModel};
use crate::model::{free_a_count, StatePaths};
use crate::quarter::QuarterDate;

/// Periods simulated and discarded before the returned sample.
pub const SIM_BURN_IN: usize = 200;

// Stream identifiers for the parameter random walks.
const STREAM_BETA: u64 = 1;
const STREAM_A: u64 = 2;
const STREAM_H: u64 = 3;

fn default_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("y{i}")).collect()
}

fn default_start() -> QuarterDate {
    QuarterDate::new(1950, 1).expect("valid quarter")
}

/// Stacks the rows of `b` (`k x ks`) into the equation-major coefficient
/// vector.
pub fn stack_coefficients(b: &DMatrix<f64>) -> DVector<f64> {
    let (k, ks) = b.shape();
    DVector::from_fn(k * ks, |i, _| b[(i / ks, i % ks)])
}

/// Strictly lower elements of a unit lower-triangular matrix, row by row.
pub fn free_elements(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::Dimension("contemporaneous matrix must be square".into()));
    }
    for i in 0..k {
        if a[(i, i)] != 1.0 || (i + 1..k).any(|j| a[(i, j)] != 0.0) {
            return Err(Error::InvalidParameter(
                "contemporaneous matrix must be unit lower-triangular".into(),
            ));
        }
    }
    let mut v = Vec::with_capacity(free_a_count(k));
    for j in 1..k {
        for i in 0..j {
            v.push(a[(j, i)]);
        }
    }
    Ok(DVector::from_vec(v))
}

/// Generates `y_t = X_t beta_t + A_t^{-1} Sigma_t eps_t` along the given
/// parameter paths. The first [`SIM_BURN_IN`] periods use the period-0
/// parameters and are discarded; lags start at zero.
pub fn simulate_from_paths(
    paths: &StatePaths,
    lags: usize,
    variables: Vec<String>,
    start: QuarterDate,
    rng: &mut RngStream,
) -> Result<AlignedPanel> {
    let n = paths.len();
    let k = variables.len();
    if n == 0 {
        return Err(Error::Length("no periods to simulate".into()));
    }
    paths.validate(k, lags)?;
    let ks = k * lags;
    let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(k); lags];
    let mut values = DMatrix::zeros(n, k);
    for step in 0..SIM_BURN_IN + n {
        let t = step.saturating_sub(SIM_BURN_IN);
        let z = DVector::from_fn(ks, |c, _| hist[hist.len() - 1 - c / k][c % k]);
        let beta = &paths.beta[t];
        let mean = DVector::from_fn(k, |j, _| beta.rows(j * ks, ks).dot(&z));
        let eps = DVector::from_fn(k, |_, _| rng.standard_normal());
        let y = mean + paths.impact_matrix(t, k) * eps;
        if step >= SIM_BURN_IN {
            values.row_mut(t).copy_from(&y.transpose());
        }
        hist.push(y);
        if hist.len() > lags {
            hist.remove(0);
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("simulated data diverged".into()));
    }
    AlignedPanel::new(variables, start, values)
}

fn check_stable(b: &DMatrix<f64>, k: usize, lags: usize) -> Result<()> {
    if b.shape() != (k, k * lags) {
        return Err(Error::Dimension(format!(
            "coefficient matrix is {:?}, expected {k}x{}",
            b.shape(),
            k * lags
        )));
    }
    let radius = spectral_radius(&companion_form(stack_coefficients(b).as_slice(), k, lags)?);
    if radius >= 1.0 {
        return Err(Error::Explosive { radius });
    }
    Ok(())
}

/// Constant-parameter VAR(s): `b` is `k x ks` (lag blocks side by side),
/// `a` unit lower-triangular, `sigma` the structural standard deviations.
pub fn simulate_constant_var(
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma: &DVector<f64>,
    periods: usize,
    rng: &mut RngStream,
) -> Result<AlignedPanel> {
    let k = a.nrows();
    if k == 0 || b.nrows() != k || b.ncols() % k != 0 || sigma.len() != k {
        return Err(Error::Dimension("inconsistent VAR dimensions".into()));
    }
    let lags = b.ncols() / k;
    check_stable(b, k, lags)?;
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("structural standard deviations must be positive".into()));
    }
    let paths = constant_paths(b, a, sigma, periods)?;
    simulate_from_paths(&paths, lags, default_labels(k), default_start(), rng)
}

fn constant_paths(b: &DMatrix<f64>, a: &DMatrix<f64>, sigma: &DVector<f64>, periods: usize) -> Result<StatePaths> {
    let beta = stack_coefficients(b);
    let free = free_elements(a)?;
    let h = sigma.map(f64::ln);
    Ok(StatePaths {
        beta: vec![beta; periods],
        a: vec![free; periods],
        h: vec![h; periods],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ConstantVar,
    TvpVarSv,
}

/// Ground truth for a simulated dataset. Matrices are row-major nested
/// vectors so scenarios can be written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub kind: ScenarioKind,
    pub periods: usize,
    pub seed: u64,
    /// `k x ks` lag coefficients (initial values for `tvp_var_sv`).
    pub b: Vec<Vec<f64>>,
    /// Unit lower-triangular contemporaneous matrix.
    pub a: Vec<Vec<f64>>,
    /// Structural standard deviations.
    pub sigma: Vec<f64>,
    /// Covariance of the coefficient innovations (`k^2 s` square).
    #[serde(default)]
    pub q: Option<Vec<Vec<f64>>>,
    /// Covariance of the contemporaneous innovations (`k(k-1)/2` square).
    #[serde(default)]
    pub s: Option<Vec<Vec<f64>>>,
    /// Variances of the log-volatility innovations.
    #[serde(default)]
    pub w: Option<Vec<f64>>,
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    #[serde(default)]
    pub start: Option<QuarterDate>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    if rows.iter().any(|v| v.len() != c) {
        return Err(Error::Dimension(format!("{name} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl SyntheticScenario {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn lags(&self) -> usize {
        self.b.first().map_or(0, |r| r.len()) / self.k().max(1)
    }

    pub fn b_matrix(&self) -> Result<DMatrix<f64>> {
        matrix(&self.b, "b")
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        matrix(&self.a, "a")
    }

    pub fn labels(&self) -> Vec<String> {
        self.variables.clone().unwrap_or_else(|| default_labels(self.k()))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let b = self.b_matrix()?;
        let a = self.a_matrix()?;
        if k == 0 || a.shape() != (k, k) || b.nrows() != k || b.ncols() == 0 || b.ncols() % k != 0 {
            return Err(Error::Dimension("scenario matrix shapes".into()));
        }
        free_elements(&a)?;
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        if self.labels().len() != k {
            return Err(Error::Dimension("variable labels".into()));
        }
        if self.kind == ScenarioKind::ConstantVar {
            check_stable(&b, k, self.lags())?;
        }
        Ok(())
    }

    /// Simulates the scenario with an RNG seeded from `seed`.
    pub fn simulate(&self) -> Result<(AlignedPanel, StatePaths)> {
        let mut rng = RngStream::new(self.seed);
        match self.kind {
            ScenarioKind::ConstantVar => {
                self.validate()?;
                let paths = constant_paths(
                    &self.b_matrix()?,
                    &self.a_matrix()?,
                    &DVector::from_column_slice(&self.sigma),
                    self.periods,
                )?;
                let panel = simulate_from_paths(
                    &paths,
                    self.lags(),
                    self.labels(),
                    self.start.unwrap_or_else(default_start),
                    &mut rng,
                )?;
                Ok((panel, paths))
            }
            ScenarioKind::TvpVarSv => simulate_tvp_var_sv(self, &mut rng),
        }
    }
}

fn random_walk(
    start: &DVector<f64>,
    cov: &DMatrix<f64>,
    periods: usize,
    name: &str,
    rng: &mut RngStream,
) -> Result<Vec<DVector<f64>>> {
    let d = start.len();
    if cov.shape() != (d, d) {
        return Err(Error::Dimension(format!("{name} must be {d}x{d}")));
    }
    if (cov - cov.transpose()).amax() > 0.0 {
        return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
    }
    let l = psd_factor(cov).map_err(|_| {
        Error::InvalidParameter(format!("{name} is not positive semidefinite"))
    })?;
    let mut out = Vec::with_capacity(periods);
    let mut cur = start.clone();
    for t in 0..periods {
        if t > 0 {
            let e = DVector::from_fn(d, |_, _| rng.standard_normal());
            cur += &l * e;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Simulates drifting parameters from the scenario's initial values and
/// innovation covariances (missing covariances are zero), then data along
/// those paths. Parameter innovations come from split streams so the data
/// draws match [`simulate_constant_var`] when all covariances are zero.
pub fn simulate_tvp_var_sv(
    scenario: &SyntheticScenario,
    rng: &mut RngStream,
) -> Result<(AlignedPanel, StatePaths)> {
    scenario.validate()?;
    let (k, lags, n) = (scenario.k(), scenario.lags(), scenario.periods);
    let nb = k * k * lags;
    let na = free_a_count(k);
    let beta0 = stack_coefficients(&scenario.b_matrix()?);
    let a0 = free_elements(&scenario.a_matrix()?)?;
    let h0 = DVector::from_iterator(k, scenario.sigma.iter().map(|s| s.ln()));
    let q = match &scenario.q {
        Some(m) => matrix(m, "q")?,
        None => DMatrix::zeros(nb, nb),
    };
    let s = match &scenario.s {
        Some(m) => matrix(m, "s")?,
        None => DMatrix::zeros(na, na),
    };
    let w = match &scenario.w {
        Some(v) => {
            if v.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidParameter("w must be non-negative".into()));
            }
            DMatrix::from_diagonal(&DVector::from_column_slice(v))
        }
        None => DMatrix::zeros(k, k),
    };
    let paths = StatePaths {
        beta: random_walk(&beta0, &q, n, "q", &mut rng.split(STREAM_BETA))?,
        a: random_walk(&a0, &s, n, "s", &mut rng.split(STREAM_A))?,
        h: random_walk(&h0, &w, n, "w", &mut rng.split(STREAM_H))?,
    };
    let panel = simulate_from_paths(
        &paths,
        lags,
        scenario.labels(),
        scenario.start.unwrap_or_else(default_start),
        rng,
    )?;
    Ok((panel, paths))
}

/// Exact conditional moments from the dense joint Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    pub filtered_means: Vec<DVector<f64>>,
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

/// Largest `T * max(state dim, obs dim)` the dense oracle accepts.
pub const ORACLE_CAP: usize = 60;

fn solve_dense(s: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, Option<f64>)> {
    match s.clone().cholesky() {
        Some(c) => {
            let log_det = 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            Ok((c.solve(b), Some(log_det)))
        }
        None => {
            let pinv = s
                .clone()
                .pseudo_inverse(1e-12 * s.amax().max(f64::MIN_POSITIVE))
                .map_err(|e| Error::Singular(e.to_string()))?;
            Ok((pinv * b, None))
        }
    }
}

/// Conditions the joint Gaussian of all states and observations of a
/// random-walk state-space model directly on the data.
pub fn gaussian_conditioning_oracle(model: &StateSpaceModel, data: &[DVector<f64>]) -> Result<OracleMoments> {
    model.validate(data)?;
    let n = data.len();
    let d = model.state_dim();
    let p = data.first().map_or(0, |y| y.len());
    if n * d.max(p) > ORACLE_CAP {
        return Err(Error::OracleTooLarge(format!(
            "T * dim = {} exceeds {ORACLE_CAP}",
            n * d.max(p)
        )));
    }
    // Cov(x_s, x_t) = P0 + min(s, t) Q
    let cov_x = |s: usize, t: usize| &model.init_cov + &model.state_cov * s.min(t) as f64;
    let mut sxx = DMatrix::zeros(n * d, n * d);
    let mut sxy = DMatrix::zeros(n * d, n * p);
    let mut syy = DMatrix::zeros(n * p, n * p);
    for s in 0..n {
        for t in 0..n {
            let c = cov_x(s, t);
            sxx.view_mut((s * d, t * d), (d, d)).copy_from(&c);
            let zt = &model.obs_matrices[t];
            sxy.view_mut((s * d, t * p), (d, p)).copy_from(&(&c * zt.transpose()));
            let mut yy = &model.obs_matrices[s] * &c * zt.transpose();
            if s == t {
                yy += &model.obs_covs[t];
            }
            syy.view_mut((s * p, t * p), (p, p)).copy_from(&yy);
        }
    }
    let mu_x = DVector::from_fn(n * d, |i, _| model.init_mean[i % d]);
    let mu_y = DVector::from_fn(n * p, |i, _| (&model.obs_matrices[i / p] * &model.init_mean)[i % p]);
    let y = DVector::from_fn(n * p, |i, _| data[i / p][i % p]);
    let resid = &y - &mu_y;

    let (gain_full, log_det) = solve_dense(&syy, &sxy.transpose())?;
    let sm = &mu_x + gain_full.transpose() * &resid;
    let scov = &sxx - &sxy * &gain_full;
    let smoothed_means = (0..n).map(|t| sm.rows(t * d, d).into_owned()).collect();
    let smoothed_covs = (0..n).map(|t| scov.view((t * d, t * d), (d, d)).into_owned()).collect();

    let mut filtered_means = Vec::with_capacity(n);
    for t in 0..n {
        let m = (t + 1) * p;
        let syy_t = syy.view((0, 0), (m, m)).into_owned();
        let sxy_t = sxy.view((t * d, 0), (d, m)).into_owned();
        let (g, _) = solve_dense(&syy_t, &DMatrix::from_column_slice(m, 1, &resid.as_slice()[..m]))?;
        filtered_means.push(&model.init_mean + sxy_t * g.column(0));
    }

    let log_likelihood = match log_det {
        Some(ld) => {
            let (alpha, _) = solve_dense(&syy, &DMatrix::from_column_slice(n * p, 1, resid.as_slice()))?;
            -0.5 * ((n * p) as f64 * (2.0 * std::f64::consts::PI).ln() + ld + resid.dot(&alpha.column(0)))
        }
        None => f64::NEG_INFINITY,
    };
    Ok(OracleMoments {
        filtered_means,
        smoothed_means,
        smoothed_covs,
        log_likelihood,
    })
}
