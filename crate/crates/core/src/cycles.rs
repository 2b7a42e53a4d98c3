//! Business-cycle descriptive statistics on Hamilton-filtered series.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AlignedPanel, RawSeries};
use crate::quarter::QuarterDate;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// Least squares via Householder QR.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("y has {} rows, X has {n}", y.len())));
    }
    if n <= p {
        return Err(Error::Length(format!("{n} observations for {p} regressors")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    let tol = rmax * n.max(p) as f64 * f64::EPSILON * 16.0;
    if let Some(j) = r.diagonal().iter().position(|d| d.abs() <= tol) {
        return Err(Error::Singular(format!("regressor matrix is rank deficient at column {j}")));
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let residuals = y - x * &coefficients;
    Ok(OlsFit {
        coefficients,
        residuals,
    })
}

/// Lookahead `h` and lag count `p` of the regression filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HamiltonSpec {
    pub lookahead: usize,
    pub lags: usize,
}

impl Default for HamiltonSpec {
    fn default() -> Self {
        Self {
            lookahead: 8,
            lags: 4,
        }
    }
}

impl HamiltonSpec {
    /// Observations lost at the start of the sample.
    pub fn shrinkage(&self) -> usize {
        self.lookahead + self.lags - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead == 0 || self.lags == 0 {
            return Err(Error::InvalidParameter(format!(
                "filter lookahead and lags must be >= 1, got {} and {}",
                self.lookahead, self.lags
            )));
        }
        Ok(())
    }
}

/// Regressor matrix `[1, y_t, ..., y_{t-p+1}]` and target `y_{t+h}`.
pub fn hamilton_design(series: &[f64], spec: HamiltonSpec) -> (DVector<f64>, DMatrix<f64>) {
    let (h, p) = (spec.lookahead, spec.lags);
    let rows = series.len() - spec.shrinkage();
    let x = DMatrix::from_fn(rows, p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            series[r + p - c]
        }
    });
    let y = DVector::from_fn(rows, |r, _| series[r + p - 1 + h]);
    (y, x)
}

/// Cyclical component: residuals of `y_{t+h}` on a constant and `p` recent
/// values, dated at `t+h`. Output is shorter than the input by `h + p - 1`.
pub fn hamilton_filter(series: &[f64], spec: HamiltonSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let need = spec.lookahead + spec.lags + 10;
    if series.len() < need {
        return Err(Error::Length(format!(
            "Hamilton filter needs at least {need} observations, got {}",
            series.len()
        )));
    }
    let (y, x) = hamilton_design(series, spec);
    let residuals = match ols(&y, &x) {
        Ok(fit) => fit.residuals,
        // Collinear lags (e.g. an exact linear trend): the projection is
        // still unique even though the coefficients are not.
        Err(Error::Singular(_)) => projection_residuals(&y, &x),
        Err(e) => return Err(e),
    };
    Ok(residuals.iter().copied().collect())
}

/// `y - P_X y` via the thin SVD, for rank-deficient `X`.
fn projection_residuals(y: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.amax();
    let tol = smax * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    let mut fitted = DVector::zeros(y.len());
    for (j, &sv) in svd.singular_values.iter().enumerate() {
        if sv > tol {
            let col = u.column(j);
            fitted += col * col.dot(y);
        }
    }
    y - fitted
}

pub fn hamilton_filter_series(series: &RawSeries, spec: HamiltonSpec) -> Result<RawSeries> {
    let cycle = hamilton_filter(series.values(), spec)?;
    Ok(RawSeries::new(
        series.id(),
        series.start() + spec.shrinkage() as i64,
        cycle,
    ))
}

/// Filters every column of a panel.
pub fn hamilton_filter_panel(panel: &AlignedPanel, spec: HamiltonSpec) -> Result<AlignedPanel> {
    let cols = panel
        .to_series()
        .iter()
        .map(|s| hamilton_filter(s.values(), spec))
        .collect::<Result<Vec<_>>>()?;
    let rows = cols.first().map_or(0, Vec::len);
    AlignedPanel::new(
        panel.variables().to_vec(),
        panel.start() + spec.shrinkage() as i64,
        DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]),
    )
}

/// A peak-to-peak cycle, extended past its closing peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleWindow {
    pub start_peak: QuarterDate,
    pub end_peak: QuarterDate,
    pub extension: i64,
    /// `end_peak + extension`, clipped to the calendar end.
    pub effective_end: QuarterDate,
}

impl CycleWindow {
    pub fn label(&self) -> String {
        format!("{}-{}", self.start_peak, self.end_peak)
    }

    pub fn len(&self) -> usize {
        (self.effective_end - self.start_peak + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.effective_end < self.start_peak
    }
}

/// Consecutive peaks become windows; each closes `extension` quarters after
/// its second peak, or at the end of the calendar if that comes first.
pub fn segment_cycles(
    calendar: &[QuarterDate],
    peaks: &[QuarterDate],
    extension: i64,
) -> Result<Vec<CycleWindow>> {
    let (Some(&first), Some(&last)) = (calendar.first(), calendar.last()) else {
        return Err(Error::Range("empty calendar".into()));
    };
    if extension < 0 {
        return Err(Error::InvalidParameter(format!("negative extension {extension}")));
    }
    for &p in peaks {
        if p < first || p > last {
            return Err(Error::Range(format!("peak {p} outside calendar {first}..{last}")));
        }
    }
    if let Some(w) = peaks.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "peaks not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(peaks
        .windows(2)
        .map(|w| CycleWindow {
            start_peak: w[0],
            end_peak: w[1],
            extension,
            effective_end: (w[1] + extension).min(last),
        })
        .collect())
}

/// Factor applied to a variable's standard deviation when reporting.
pub type ReportScales = BTreeMap<String, f64>;

fn scale_of(scales: &ReportScales, var: &str) -> f64 {
    scales.get(var).copied().unwrap_or(1.0)
}

/// Sample standard deviation (divisor n - 1).
pub fn sample_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn window_rows(panel: &AlignedPanel, from: QuarterDate, to: QuarterDate, what: &str) -> Result<(usize, usize)> {
    if to < from {
        return Err(Error::DegenerateWindow(format!("{what}: empty range {from}..{to}")));
    }
    let (Some(lo), Some(hi)) = (panel.row_of(from), panel.row_of(to)) else {
        return Err(Error::Range(format!(
            "{what}: {from}..{to} not inside panel {}..{}",
            panel.start(),
            panel.end()
        )));
    };
    if hi + 1 - lo < 3 {
        return Err(Error::DegenerateWindow(format!(
            "{what}: only {} observations",
            hi + 1 - lo
        )));
    }
    Ok((lo, hi + 1))
}

fn window_column(panel: &AlignedPanel, j: usize, rows: (usize, usize)) -> Vec<f64> {
    (rows.0..rows.1).map(|r| panel.values()[(r, j)]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStd {
    pub window_start: QuarterDate,
    pub window_end: QuarterDate,
    pub variable: String,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCorrelation {
    pub window_start: QuarterDate,
    pub window_end: QuarterDate,
    pub x: String,
    pub y: String,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleStats {
    pub stds: Vec<WindowStd>,
    pub correlations: Vec<WindowCorrelation>,
}

impl CycleStats {
    pub fn std_of(&self, window_start: QuarterDate, variable: &str) -> Option<f64> {
        self.stds
            .iter()
            .find(|s| s.window_start == window_start && s.variable == variable)
            .map(|s| s.std)
    }

    pub fn r_of(&self, window_start: QuarterDate, x: &str, y: &str) -> Option<f64> {
        self.correlations
            .iter()
            .find(|c| c.window_start == window_start && c.x == x && c.y == y)
            .map(|c| c.r)
    }
}

/// Per-window standard deviations of every variable and Pearson
/// correlations of every variable pair.
pub fn per_cycle_stats(
    panel: &AlignedPanel,
    windows: &[CycleWindow],
    scales: &ReportScales,
) -> Result<CycleStats> {
    let mut out = CycleStats::default();
    let vars = panel.variables();
    for w in windows {
        let rows = window_rows(panel, w.start_peak, w.effective_end, &w.label())?;
        let cols: Vec<Vec<f64>> = (0..vars.len()).map(|j| window_column(panel, j, rows)).collect();
        for (j, var) in vars.iter().enumerate() {
            out.stds.push(WindowStd {
                window_start: w.start_peak,
                window_end: w.effective_end,
                variable: var.clone(),
                std: scale_of(scales, var) * sample_std(&cols[j]),
            });
        }
        for a in 0..vars.len() {
            for b in (a + 1)..vars.len() {
                out.correlations.push(WindowCorrelation {
                    window_start: w.start_peak,
                    window_end: w.effective_end,
                    x: vars[a].clone(),
                    y: vars[b].clone(),
                    r: pearson(&cols[a], &cols[b]),
                });
            }
        }
    }
    Ok(out)
}

/// A named date range, inclusive at both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Era {
    pub label: String,
    pub start: QuarterDate,
    pub end: QuarterDate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EraStd {
    pub era: String,
    pub variable: String,
    pub std: f64,
}

pub fn era_stats(panel: &AlignedPanel, eras: &[Era], scales: &ReportScales) -> Result<Vec<EraStd>> {
    let mut out = Vec::new();
    for era in eras {
        let rows = window_rows(panel, era.start, era.end, &era.label)?;
        for (j, var) in panel.variables().iter().enumerate() {
            out.push(EraStd {
                era: era.label.clone(),
                variable: var.clone(),
                std: scale_of(scales, var) * sample_std(&window_column(panel, j, rows)),
            });
        }
    }
    Ok(out)
}

/// Sample cross-correlations `rho_xy(h)` for `h` in `[-max_lag, max_lag]`,
/// pairing `x_{t+h}` with `y_t` (positive `h`: x leads).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelation {
    pub max_lag: usize,
    /// Indexed by `h + max_lag`.
    pub coefficients: Vec<f64>,
    pub n: usize,
    /// `2 / sqrt(n)`.
    pub threshold: f64,
}

impl CrossCorrelation {
    pub fn at(&self, lag: i64) -> Option<f64> {
        let idx = lag + self.max_lag as i64;
        (idx >= 0).then(|| self.coefficients.get(idx as usize).copied()).flatten()
    }

    pub fn lags(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, &r)| (i as i64 - self.max_lag as i64, r))
    }

    /// Lag with the largest absolute correlation.
    pub fn peak_lag(&self) -> i64 {
        self.lags()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(h, _)| h)
    }
}

/// `sum_t a[t + shift] * b[t]` over the overlap, divided by `n`.
fn shifted_cov(a: &[f64], b: &[f64], shift: usize) -> f64 {
    let n = a.len();
    a[shift..]
        .iter()
        .zip(&b[..n - shift])
        .map(|(x, y)| x * y)
        .sum::<f64>()
        / n as f64
}

pub fn cross_correlation(x: &[f64], y: &[f64], max_lag: usize) -> Result<CrossCorrelation> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Length(format!("x has {n} observations, y has {}", y.len())));
    }
    if n < 3 || max_lag >= n - 2 {
        return Err(Error::Length(format!(
            "max_lag {max_lag} too large for {n} observations"
        )));
    }
    let demean = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter().map(|a| a - m).collect::<Vec<_>>()
    };
    let (xc, yc) = (demean(x), demean(y));
    let denom = (shifted_cov(&xc, &xc, 0) * shifted_cov(&yc, &yc, 0)).sqrt();
    let coefficients = (-(max_lag as i64)..=max_lag as i64)
        .map(|h| {
            let gamma = if h >= 0 {
                shifted_cov(&xc, &yc, h as usize)
            } else {
                shifted_cov(&yc, &xc, (-h) as usize)
            };
            gamma / denom
        })
        .collect();
    Ok(CrossCorrelation {
        max_lag,
        coefficients,
        n,
        threshold: 2.0 / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub date: QuarterDate,
    pub x: f64,
    pub y: f64,
    pub is_first: bool,
    pub is_last: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub window: CycleWindow,
    pub x_var: String,
    pub y_var: String,
    pub points: Vec<PhasePoint>,
    pub r: f64,
}

/// Time-ordered `(x, y)` pairs over a window, for connected scatter plots.
pub fn phase_trajectory(
    panel: &AlignedPanel,
    window: &CycleWindow,
    x_var: &str,
    y_var: &str,
) -> Result<PhaseTrajectory> {
    let col = |v: &str| {
        panel
            .column_index(v)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variable {v}")))
    };
    let (xj, yj) = (col(x_var)?, col(y_var)?);
    let rows = window_rows(panel, window.start_peak, window.effective_end, &window.label())?;
    let xs = window_column(panel, xj, rows);
    let ys = window_column(panel, yj, rows);
    let last = xs.len() - 1;
    let points = xs
        .iter()
        .zip(&ys)
        .enumerate()
        .map(|(i, (&x, &y))| PhasePoint {
            date: panel.date(rows.0 + i),
            x,
            y,
            is_first: i == 0,
            is_last: i == last,
        })
        .collect();
    Ok(PhaseTrajectory {
        window: *window,
        x_var: x_var.into(),
        y_var: y_var.into(),
        points,
        r: pearson(&xs, &ys),
    })
}

fn csv_err(e: std::io::Error) -> Error {
    Error::io("<csv>", e)
}

/// `window_start,window_end,variable,std`
pub fn write_cycles_csv(stds: &[WindowStd], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_start", "window_end", "variable", "std"])?;
    for s in stds {
        w.write_record([
            s.window_start.to_string(),
            s.window_end.to_string(),
            s.variable.clone(),
            s.std.to_string(),
        ])?;
    }
    w.flush().map_err(csv_err)
}

/// `x,y,lag,rho,threshold`
pub fn write_ccf_csv(entries: &[(String, String, CrossCorrelation)], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "lag", "rho", "threshold"])?;
    for (x, y, ccf) in entries {
        for (lag, rho) in ccf.lags() {
            w.write_record([
                x.clone(),
                y.clone(),
                lag.to_string(),
                rho.to_string(),
                ccf.threshold.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv_err)
}

/// `date,x,y,is_first,is_last`
pub fn write_phase_csv(trajectory: &PhaseTrajectory, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "x", "y", "is_first", "is_last"])?;
    for p in &trajectory.points {
        w.write_record([
            p.date.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.is_first.to_string(),
            p.is_last.to_string(),
        ])?;
    }
    w.flush().map_err(csv_err)
}
