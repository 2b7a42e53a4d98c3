use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::cholesky;

/// Number of free elements in a unit lower-triangular `k x k` matrix.
pub fn free_a_count(k: usize) -> usize {
    k * (k - 1) / 2
}

/// Offset of equation `j`'s free elements in the stacked vector; equation
/// `j` (0-based) owns `j` elements, `a[j][0..j]`.
pub fn a_offset(j: usize) -> usize {
    j * j.saturating_sub(1) / 2
}

/// Unit lower-triangular matrix from its row-wise free elements.
pub fn unit_lower(a: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(k, k);
    for j in 1..k {
        for i in 0..j {
            m[(j, i)] = a[a_offset(j) + i];
        }
    }
    m
}

/// Time paths of the three random-walk parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePaths {
    /// VAR coefficients, length `k^2 s` per period.
    pub beta: Vec<DVector<f64>>,
    /// Free elements of `A_t`, length `k(k-1)/2` per period.
    pub a: Vec<DVector<f64>>,
    /// Log standard deviations of the structural shocks, length `k`.
    pub h: Vec<DVector<f64>>,
}

impl StatePaths {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn a_matrix(&self, t: usize, k: usize) -> DMatrix<f64> {
        unit_lower(&self.a[t], k)
    }

    /// `diag(exp(h_t))`.
    pub fn sigma(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.h[t].map(f64::exp))
    }

    /// `A_t^{-1} Sigma_t`, whose columns are the structural impact vectors.
    pub fn impact_matrix(&self, t: usize, k: usize) -> DMatrix<f64> {
        self.a_matrix(t, k)
            .solve_lower_triangular(&self.sigma(t))
            .expect("unit diagonal")
    }

    pub fn validate(&self, k: usize, lags: usize) -> Result<()> {
        let t = self.beta.len();
        if self.a.len() != t || self.h.len() != t {
            return Err(Error::Dimension(format!(
                "path lengths differ: beta {t}, a {}, h {}",
                self.a.len(),
                self.h.len()
            )));
        }
        let (nb, na) = (k * k * lags, free_a_count(k));
        for i in 0..t {
            if self.beta[i].len() != nb || self.a[i].len() != na || self.h[i].len() != k {
                return Err(Error::Dimension(format!("period {i}: wrong state lengths")));
            }
            let finite = self.beta[i].iter().chain(self.a[i].iter()).chain(self.h[i].iter()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidParameter(format!("period {i}: non-finite state")));
            }
            if self.h[i].iter().any(|h| !(h.exp() > 0.0)) {
                return Err(Error::InvalidParameter(format!("period {i}: volatility underflow")));
            }
        }
        Ok(())
    }
}

/// Innovation covariances of the three random walks.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCovariances {
    /// Covariance of the coefficient innovations.
    pub q: DMatrix<f64>,
    /// Block `j-1` is the covariance of equation `j`'s contemporaneous
    /// innovations (`j = 1..k`).
    pub s_blocks: Vec<DMatrix<f64>>,
    /// Diagonal of the log-volatility innovation covariance.
    pub w: DVector<f64>,
}

impl HyperCovariances {
    /// Block-diagonal `S`.
    pub fn s_full(&self) -> DMatrix<f64> {
        let n: usize = self.s_blocks.iter().map(|b| b.nrows()).sum();
        let mut s = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.s_blocks {
            s.view_mut((off, off), b.shape()).copy_from(b);
            off += b.nrows();
        }
        s
    }

    pub fn validate(&self, k: usize, lags: usize) -> Result<()> {
        let nb = k * k * lags;
        if self.q.shape() != (nb, nb) || self.w.len() != k || self.s_blocks.len() != k - 1 {
            return Err(Error::Dimension("hyper-covariance shapes".into()));
        }
        for (j, b) in self.s_blocks.iter().enumerate() {
            if b.shape() != (j + 1, j + 1) {
                return Err(Error::Dimension(format!("S block {j} is {:?}", b.shape())));
            }
        }
        for m in std::iter::once(&self.q).chain(&self.s_blocks) {
            if m != &m.transpose() {
                return Err(Error::InvalidParameter("hyper-covariance not symmetric".into()));
            }
            cholesky(m)?;
        }
        if self.w.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("W must be positive".into()));
        }
        Ok(())
    }
}

/// One full posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsDraw {
    pub paths: StatePaths,
    pub hyper: HyperCovariances,
    /// Mixture component per period and equation.
    pub indicators: Vec<Vec<u8>>,
}

impl GibbsDraw {
    pub fn validate(&self, k: usize, lags: usize) -> Result<()> {
        self.paths.validate(k, lags)?;
        self.hyper.validate(k, lags)?;
        if self.indicators.len() != self.paths.len()
            || self.indicators.iter().any(|r| r.len() != k || r.iter().any(|&i| i >= 7))
        {
            return Err(Error::Dimension("mixture indicators".into()));
        }
        Ok(())
    }
}
