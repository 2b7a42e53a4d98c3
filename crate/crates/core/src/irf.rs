//! Time-varying structural impulse responses and residual volatility
//! paths computed from retained draws.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::companion_form;
use crate::model::{unit_lower, ChainStore};
use crate::quarter::QuarterDate;

/// Lower and upper percentiles of the 66% equal-tailed band.
pub const BAND_LOWER: f64 = 0.17;
pub const BAND_UPPER: f64 = 0.83;
/// Points in each density grid.
pub const DENSITY_POINTS: usize = 64;

/// Which responses to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrfRequest {
    pub dates: Vec<QuarterDate>,
    /// Horizon 1 is the impact period.
    pub horizons: Vec<usize>,
    /// Shocked variables; empty means every variable.
    pub shocks: Vec<String>,
    /// Responding variables; empty means every variable.
    pub responses: Vec<String>,
}

/// Business-cycle peaks used as default response dates.
pub fn default_irf_dates() -> Vec<QuarterDate> {
    [(1973, 1), (1981, 3), (1990, 3), (2001, 1), (2007, 4), (2019, 4)]
        .iter()
        .map(|&(y, q)| QuarterDate::new(y, q).expect("valid quarter"))
        .collect()
}

impl Default for IrfRequest {
    fn default() -> Self {
        Self {
            dates: default_irf_dates(),
            horizons: vec![1, 4, 8, 12, 20],
            shocks: vec![],
            responses: vec![],
        }
    }
}

impl IrfRequest {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return Err(Error::InvalidParameter("horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("horizons must be strictly ascending".into()));
        }
        if self.dates.is_empty() {
            return Err(Error::InvalidParameter("at least one date is required".into()));
        }
        Ok(())
    }

    fn resolve(labels: &[String], wanted: &[String], what: &str) -> Result<Vec<usize>> {
        if wanted.is_empty() {
            return Ok((0..labels.len()).collect());
        }
        wanted
            .iter()
            .map(|w| {
                labels
                    .iter()
                    .position(|l| l == w)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown {what} variable {w:?}")))
            })
            .collect()
    }
}

/// Responses of all variables to structural shock `shock` for a single
/// parameter draw: horizon `n` is `J C^{n-1} [b_j; 0]`, where `b_j` is
/// column `shock` of `A^{-1} Sigma` and `C` is the companion matrix of
/// `beta`, held fixed over the horizon.
pub fn structural_irf(
    beta: &[f64],
    a: &[f64],
    h: &[f64],
    lags: usize,
    shock: usize,
    horizons: &[usize],
) -> Result<Vec<DVector<f64>>> {
    let k = h.len();
    if shock >= k {
        return Err(Error::Range(format!("shock index {shock} with {k} variables")));
    }
    let impact = impact_matrix(a, h)?;
    let responses = structural_irf_matrix(beta, &impact, lags, horizons)?;
    Ok(responses.iter().map(|m| m.column(shock).into_owned()).collect())
}

/// `A^{-1} Sigma` from the free elements of `A` and the log volatilities.
pub fn impact_matrix(a: &[f64], h: &[f64]) -> Result<DMatrix<f64>> {
    let k = h.len();
    if a.len() != k * k.saturating_sub(1) / 2 {
        return Err(Error::Dimension(format!(
            "{} contemporaneous elements for {k} variables",
            a.len()
        )));
    }
    let am = unit_lower(&DVector::from_column_slice(a), k);
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(k, h.iter().map(|v| v.exp())));
    Ok(am.solve_lower_triangular(&sigma).expect("unit diagonal"))
}

/// Responses to every shock at once: element `(i, j)` of entry `m` is the
/// response of variable `i` to shock `j` at `horizons[m]`, for an
/// arbitrary impact matrix.
pub fn structural_irf_matrix(
    beta: &[f64],
    impact: &DMatrix<f64>,
    lags: usize,
    horizons: &[usize],
) -> Result<Vec<DMatrix<f64>>> {
    let k = impact.nrows();
    let c = companion_form(beta, k, lags)?;
    let ks = k * lags;
    let mut state = DMatrix::zeros(ks, impact.ncols());
    state.rows_mut(0, k).copy_from(impact);
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    if horizons.contains(&0) {
        return Err(Error::InvalidParameter("horizons start at 1 (impact)".into()));
    }
    let mut out = vec![DMatrix::zeros(k, impact.ncols()); horizons.len()];
    for n in 1..=max_h {
        for (slot, &hz) in horizons.iter().enumerate() {
            if hz == n {
                out[slot] = state.rows(0, k).into_owned();
            }
        }
        if n < max_h {
            state = &c * state;
        }
    }
    Ok(out)
}

/// [`structural_irf`] for draw `d` of a store at `date`.
pub fn structural_irf_at_date(
    store: &ChainStore,
    d: usize,
    date: QuarterDate,
    shock: usize,
    horizons: &[usize],
) -> Result<Vec<DVector<f64>>> {
    let t = store.period_of(date)?;
    structural_irf(store.beta(d, t), store.a(d, t), store.h(d, t), store.meta().lags, shock, horizons)
}

/// Median and 66% band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub median: f64,
    pub p17: f64,
    pub p83: f64,
}

/// Linear-interpolation percentile (`p` in `[0, 1]`) of sorted data.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of empty data");
    let pos = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and 17th/83rd percentiles of `draws`.
pub fn summarize(draws: &[f64]) -> Result<BandSummary> {
    if draws.is_empty() {
        return Err(Error::EmptyStore);
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BandSummary {
        median: percentile_sorted(&sorted, 0.5),
        p17: percentile_sorted(&sorted, BAND_LOWER),
        p83: percentile_sorted(&sorted, BAND_UPPER),
    })
}

/// Gaussian kernel density on 64 equally spaced points spanning the draws,
/// with normal-reference bandwidth `1.06 * sd * n^(-1/5)`.
pub fn kernel_density(draws: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = draws.len();
    if n == 0 {
        return Err(Error::EmptyStore);
    }
    let (mut lo, mut hi) = draws
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut bw = 1.06 * sd * (n as f64).powf(-0.2);
    if !(bw > 0.0) {
        // Degenerate draw set: a narrow bump around the common value.
        bw = 1e-6 * mean.abs().max(1.0);
        lo = mean - 3.0 * bw;
        hi = mean + 3.0 * bw;
    }
    let step = (hi - lo) / (DENSITY_POINTS - 1) as f64;
    let norm = 1.0 / (n as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..DENSITY_POINTS)
        .map(|i| {
            let g = lo + step * i as f64;
            let dens = draws
                .iter()
                .map(|x| (-0.5 * ((g - x) / bw).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (g, dens)
        })
        .collect())
}

/// Posterior responses of one variable to one shock at one date and
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfCell {
    pub date: QuarterDate,
    pub shock: String,
    pub response: String,
    pub horizon: usize,
    pub draws: Vec<f64>,
    pub summary: BandSummary,
    pub density: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorIrf {
    pub cells: Vec<IrfCell>,
}

impl PosteriorIrf {
    pub fn cell(&self, date: QuarterDate, shock: &str, response: &str, horizon: usize) -> Option<&IrfCell> {
        self.cells
            .iter()
            .find(|c| c.date == date && c.shock == shock && c.response == response && c.horizon == horizon)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["peak", "shock", "response", "horizon", "median", "p17", "p83"])?;
        for c in &self.cells {
            out.write_record([
                c.date.to_string(),
                c.shock.clone(),
                c.response.clone(),
                c.horizon.to_string(),
                c.summary.median.to_string(),
                c.summary.p17.to_string(),
                c.summary.p83.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("irf.csv", e))
    }

    pub fn write_density_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["peak", "shock", "response", "horizon", "grid", "density"])?;
        for c in &self.cells {
            for (g, d) in &c.density {
                out.write_record([
                    c.date.to_string(),
                    c.shock.clone(),
                    c.response.clone(),
                    c.horizon.to_string(),
                    g.to_string(),
                    d.to_string(),
                ])?;
            }
        }
        out.flush().map_err(|e| Error::io("irf_density.csv", e))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).map(std::io::BufWriter::new).map_err(|e| Error::io(&p, e))
        };
        self.write_csv(create("irf.csv")?)?;
        self.write_density_csv(create("irf_density.csv")?)
    }
}

/// Applies the structural response computation to every retained draw.
pub fn posterior_irf(store: &ChainStore, request: &IrfRequest) -> Result<PosteriorIrf> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    request.validate()?;
    let labels = &store.meta().variables;
    let shocks = IrfRequest::resolve(labels, &request.shocks, "shock")?;
    let responses = IrfRequest::resolve(labels, &request.responses, "response")?;
    let lags = store.meta().lags;
    let mut cells = vec![];
    for &date in &request.dates {
        let t = store.period_of(date)?;
        // [horizon][draw] -> k x k response matrix
        let mut per_draw = Vec::with_capacity(store.len());
        for d in 0..store.len() {
            let impact = impact_matrix(store.a(d, t), store.h(d, t))?;
            per_draw.push(structural_irf_matrix(store.beta(d, t), &impact, lags, &request.horizons)?);
        }
        for &j in &shocks {
            for &i in &responses {
                for (slot, &hz) in request.horizons.iter().enumerate() {
                    let draws: Vec<f64> = per_draw.iter().map(|m| m[slot][(i, j)]).collect();
                    cells.push(IrfCell {
                        date,
                        shock: labels[j].clone(),
                        response: labels[i].clone(),
                        horizon: hz,
                        summary: summarize(&draws)?,
                        density: kernel_density(&draws)?,
                        draws,
                    });
                }
            }
        }
    }
    Ok(PosteriorIrf { cells })
}

/// Posterior of `sigma_jt = exp(h_jt)` for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPath {
    pub variable: String,
    pub dates: Vec<QuarterDate>,
    /// `draws[t][d]`.
    pub draws: Vec<Vec<f64>>,
    pub summaries: Vec<BandSummary>,
}

pub fn residual_volatility_paths(store: &ChainStore) -> Result<Vec<VolatilityPath>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let dates = store.dates();
    let mut out = vec![];
    for (j, label) in store.meta().variables.iter().enumerate() {
        let draws: Vec<Vec<f64>> = (0..store.periods())
            .map(|t| (0..store.len()).map(|d| store.h(d, t)[j].exp()).collect())
            .collect();
        let summaries = draws.iter().map(|v| summarize(v)).collect::<Result<_>>()?;
        out.push(VolatilityPath {
            variable: label.clone(),
            dates: dates.clone(),
            draws,
            summaries,
        });
    }
    Ok(out)
}

pub fn write_volatility_csv(paths: &[VolatilityPath], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["variable", "date", "median", "p17", "p83"])?;
    for p in paths {
        for (date, s) in p.dates.iter().zip(&p.summaries) {
            out.write_record([
                p.variable.clone(),
                date.to_string(),
                s.median.to_string(),
                s.p17.to_string(),
                s.p83.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("volatility.csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RngStream;
    use proptest::prelude::*;

    fn var1(k: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed);
        let beta = (0..k * k).map(|_| 0.3 * rng.standard_normal()).collect();
        let a = (0..k * (k - 1) / 2).map(|_| rng.standard_normal()).collect();
        let h = (0..k).map(|_| 0.5 * rng.standard_normal()).collect();
        (beta, a, h)
    }

    #[test]
    fn zero_coefficients_only_impact() {
        let (_, a, h) = var1(3, 1);
        let beta = vec![0.0; 9];
        let r = structural_irf(&beta, &a, &h, 1, 1, &[1, 2, 5]).unwrap();
        let impact = impact_matrix(&a, &h).unwrap();
        assert_eq!(r[0], impact.column(1).into_owned());
        assert!(r[1].iter().chain(r[2].iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn matches_matrix_powers() {
        let (beta, a, h) = var1(4, 2);
        let b = DMatrix::from_row_slice(4, 4, &beta);
        let impact = impact_matrix(&a, &h).unwrap();
        let horizons: Vec<usize> = (1..=20).collect();
        for j in 0..4 {
            let r = structural_irf(&beta, &a, &h, 1, j, &horizons).unwrap();
            for &n in &horizons {
                let oracle = b.pow((n - 1) as u32) * impact.column(j);
                assert!((&r[n - 1] - oracle).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn recursive_zeros_on_impact() {
        let (beta, a, h) = var1(4, 3);
        for j in 0..4 {
            let r = structural_irf(&beta, &a, &h, 1, j, &[1]).unwrap();
            for i in 0..j {
                assert_eq!(r[0][i], 0.0);
            }
            assert!((r[0][j] - h[j].exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn percentile_interpolates() {
        let x: Vec<f64> = (0..=10).map(|v| v as f64).collect();
        assert!((percentile_sorted(&x, 0.17) - 1.7).abs() < 1e-15);
        assert_eq!(percentile_sorted(&x, 0.5), 5.0);
        let s = summarize(&[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(s.median, 0.0);
        let s = summarize(&[2.5]).unwrap();
        assert_eq!((s.median, s.p17, s.p83), (2.5, 2.5, 2.5));
    }

    #[test]
    fn density_integrates_to_about_one() {
        let mut rng = RngStream::new(4);
        let x: Vec<f64> = (0..2000).map(|_| rng.standard_normal()).collect();
        let d = kernel_density(&x).unwrap();
        assert_eq!(d.len(), 64);
        let step = d[1].0 - d[0].0;
        let mass: f64 = d.iter().map(|p| p.1).sum::<f64>() * step;
        assert!((mass - 1.0).abs() < 0.05, "{mass}");
        let single = kernel_density(&[3.0]).unwrap();
        assert!(single.iter().all(|p| p.1.is_finite()));
    }

    #[test]
    fn request_validation() {
        assert!(IrfRequest::default().validate().is_ok());
        let r = IrfRequest {
            horizons: vec![4, 1],
            ..IrfRequest::default()
        };
        assert!(r.validate().is_err());
        let r = IrfRequest {
            horizons: vec![0, 1],
            ..IrfRequest::default()
        };
        assert!(r.validate().is_err());
    }

    proptest! {
        #[test]
        fn linear_in_impact(seed in 0u64..500) {
            let (beta, a, h) = var1(3, seed);
            let impact = impact_matrix(&a, &h).unwrap();
            let r1 = structural_irf_matrix(&beta, &impact, 1, &[1, 3, 7]).unwrap();
            let r2 = structural_irf_matrix(&beta, &(impact * 2.0), 1, &[1, 3, 7]).unwrap();
            for (x, y) in r1.iter().zip(&r2) {
                prop_assert_eq!(x * 2.0, y.clone());
            }
        }

        #[test]
        fn stable_responses_die_out(seed in 0u64..500) {
            let (beta, a, h) = var1(3, seed);
            let c = companion_form(&beta, 3, 1).unwrap();
            // the decay rate is the spectral radius; 0.9^200 is ~7e-10
            prop_assume!(crate::kernel::spectral_radius(&c) < 0.9);
            let r = structural_irf(&beta, &a, &h, 1, 0, &[200]).unwrap();
            prop_assert!(r[0].amax() < 1e-6);
        }

        #[test]
        fn median_inside_band(draws in proptest::collection::vec(-100.0f64..100.0, 1..200)) {
            let s = summarize(&draws).unwrap();
            prop_assert!(s.p17 <= s.median && s.median <= s.p83);
        }
    }
}
