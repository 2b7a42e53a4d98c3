use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::AlignedPanel;
use crate::quarter::QuarterDate;

/// Per-period observations and regressors of a VAR(s) without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    k: usize,
    lags: usize,
    dates: Vec<QuarterDate>,
    y: Vec<DVector<f64>>,
    /// Stacked lags `(y_{t-1}', ..., y_{t-s}')'`, length `k s`.
    z: Vec<DVector<f64>>,
}

/// Builds `y_t` and the lag vectors for periods `s+1..T` of `panel`.
pub fn build_regressors(panel: &AlignedPanel, lags: usize) -> Result<Regressors> {
    let (n, k) = (panel.len(), panel.k());
    if lags == 0 {
        return Err(Error::InvalidParameter("lag order must be >= 1".into()));
    }
    if n <= lags {
        return Err(Error::Length(format!(
            "{n} observations cannot support {lags} lags"
        )));
    }
    let v = panel.values();
    let row = |t: usize| DVector::from_fn(k, |i, _| v[(t, i)]);
    let mut out = Regressors {
        k,
        lags,
        dates: Vec::with_capacity(n - lags),
        y: Vec::with_capacity(n - lags),
        z: Vec::with_capacity(n - lags),
    };
    for t in lags..n {
        out.dates.push(panel.date(t));
        out.y.push(row(t));
        out.z.push(DVector::from_fn(k * lags, |c, _| v[(t - 1 - c / k, c % k)]));
    }
    Ok(out)
}

impl Regressors {
    /// Assembles regressors from explicit observation and lag vectors.
    pub fn from_parts(
        k: usize,
        lags: usize,
        dates: Vec<QuarterDate>,
        y: Vec<DVector<f64>>,
        z: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if y.len() != dates.len() || z.len() != dates.len() {
            return Err(Error::Dimension("dates, y and z lengths differ".into()));
        }
        if y.iter().any(|v| v.len() != k) || z.iter().any(|v| v.len() != k * lags) {
            return Err(Error::Dimension("observation or lag vector length".into()));
        }
        Ok(Self { k, lags, dates, y, z })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    /// Length of the coefficient vector, `k^2 s`.
    pub fn n_coefficients(&self) -> usize {
        self.k * self.k * self.lags
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dates(&self) -> &[QuarterDate] {
        &self.dates
    }

    pub fn y(&self, t: usize) -> &DVector<f64> {
        &self.y[t]
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.y
    }

    /// Stacked lag vector of period `t`.
    pub fn lagged(&self, t: usize) -> &DVector<f64> {
        &self.z[t]
    }

    /// `X_t = I_k ⊗ z_t'`, a `k x k^2 s` matrix.
    pub fn x(&self, t: usize) -> DMatrix<f64> {
        let ks = self.k * self.lags;
        let mut x = DMatrix::zeros(self.k, self.k * ks);
        for j in 0..self.k {
            for c in 0..ks {
                x[(j, j * ks + c)] = self.z[t][c];
            }
        }
        x
    }

    /// `X_t beta`, without forming `X_t`.
    pub fn fitted(&self, t: usize, beta: &DVector<f64>) -> DVector<f64> {
        let ks = self.k * self.lags;
        let z = &self.z[t];
        DVector::from_fn(self.k, |j, _| {
            beta.rows(j * ks, ks).dot(z)
        })
    }

    /// `y_t - X_t beta`.
    pub fn residual(&self, t: usize, beta: &DVector<f64>) -> DVector<f64> {
        &self.y[t] - self.fitted(t, beta)
    }

    /// Periods `from..to`.
    pub fn range(&self, from: usize, to: usize) -> Regressors {
        Regressors {
            k: self.k,
            lags: self.lags,
            dates: self.dates[from..to].to_vec(),
            y: self.y[from..to].to_vec(),
            z: self.z[from..to].to_vec(),
        }
    }

    /// Training periods `0..n` and the remaining estimation periods.
    pub fn split_training(&self, n: usize) -> Result<(Regressors, Regressors)> {
        if n + 2 > self.len() {
            return Err(Error::Length(format!(
                "{} usable periods leave no estimation sample after {n} training periods",
                self.len()
            )));
        }
        Ok((self.range(0, n), self.range(n, self.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(k: usize, n: usize) -> AlignedPanel {
        let labels = (0..k).map(|i| format!("v{i}")).collect();
        let values = DMatrix::from_fn(n, k, |t, i| (10 * t + i) as f64);
        AlignedPanel::new(labels, QuarterDate::new(2000, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn shapes_follow_kronecker_structure() {
        let r = build_regressors(&panel(4, 10), 1).unwrap();
        assert_eq!(r.len(), 9);
        assert_eq!(r.x(0).shape(), (4, 16));
        assert_eq!(r.n_coefficients(), 16);
        assert_eq!(r.dates()[0], QuarterDate::new(2000, 2).unwrap());

        let r = build_regressors(&panel(2, 10), 2).unwrap();
        assert_eq!(r.n_coefficients(), 8);
        let x = r.x(0); // period index 2
        // lag 1 then lag 2 of each variable
        assert_eq!(r.lagged(0).as_slice(), &[10.0, 11.0, 0.0, 1.0]);
        for j in 0..2 {
            for c in 0..8 {
                let expected = if c / 4 == j { r.lagged(0)[c % 4] } else { 0.0 };
                assert_eq!(x[(j, c)], expected);
            }
        }
    }

    #[test]
    fn fitted_matches_dense_product() {
        let r = build_regressors(&panel(3, 6), 2).unwrap();
        let beta = DVector::from_fn(18, |i, _| (i as f64 * 0.37).sin());
        for t in 0..r.len() {
            assert!((r.fitted(t, &beta) - r.x(t) * &beta).amax() < 1e-12);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(build_regressors(&panel(2, 2), 2).is_err());
        let r = build_regressors(&panel(2, 10), 1).unwrap();
        assert!(r.split_training(8).is_err());
        let (a, b) = r.split_training(5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 4));
    }
}
