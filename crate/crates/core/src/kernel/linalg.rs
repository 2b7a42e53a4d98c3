use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular `L` with strictly positive diagonal and `L * L^T = S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-10;
const JITTER: f64 = 1e-10;

fn check_square(s: &DMatrix<f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

fn factor_lower(s: &DMatrix<f64>, jitter: f64) -> std::result::Result<DMatrix<f64>, usize> {
    let n = s.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// On failure the factorization is retried once with `1e-10 * trace / dim`
/// added to the diagonal.
pub fn cholesky(s: &DMatrix<f64>) -> Result<CholeskyFactor> {
    check_square(s)?;
    let n = s.nrows();
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    match factor_lower(s, 0.0) {
        Ok(l) => Ok(CholeskyFactor { l }),
        Err(_) => {
            let jitter = JITTER * s.trace() / n as f64;
            let retry = if jitter > 0.0 {
                factor_lower(s, jitter)
            } else {
                factor_lower(s, 0.0)
            };
            retry
                .map(|l| CholeskyFactor { l })
                .map_err(|pivot| Error::NotPositiveDefinite { pivot })
        }
    }
}

impl CholeskyFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("cholesky diagonal is positive")
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.forward(b);
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky diagonal is positive")
    }

    /// Solves `S X = B`.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky diagonal is positive");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky diagonal is positive")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let mut inv = self.solve_mat(&DMatrix::identity(self.dim(), self.dim()));
        symmetrize(&mut inv);
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Factor `L` with `L * L^T = S` for a symmetric positive semidefinite `S`.
///
/// Pivots at or below `1e-12 * max(diag)` are treated as exact zeros and
/// their column is cleared; a pivot below `-1e-8 * max(diag)` is rejected.
pub fn psd_factor(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(s)?;
    let n = s.nrows();
    let scale = s.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * scale;
    let neg_tol = -1e-8 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d < neg_tol {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        if d <= zero_tol {
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// Replaces `m` with `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Companion matrix of a VAR(s) whose coefficients are stacked by equation:
/// `beta[j*k*s + l*k + i]` is the effect of lag `l+1` of variable `i` on
/// variable `j`.
pub fn companion_form(beta: &[f64], k: usize, s: usize) -> Result<DMatrix<f64>> {
    let ks = k * s;
    if beta.len() != k * ks {
        return Err(Error::Dimension(format!(
            "coefficient vector has length {}, expected k^2 s = {}",
            beta.len(),
            k * ks
        )));
    }
    let mut c = DMatrix::<f64>::zeros(ks, ks);
    for j in 0..k {
        for col in 0..ks {
            c[(j, col)] = beta[j * ks + col];
        }
    }
    for r in 0..k * (s - 1) {
        c[(k + r, r)] = 1.0;
    }
    Ok(c)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // Triangular matrices (including nilpotent companions) have their
    // eigenvalues on the diagonal.
    let n = m.nrows();
    let lower = (0..n).all(|i| ((i + 1)..n).all(|j| m[(i, j)] == 0.0));
    let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == 0.0));
    if lower || upper {
        return m.diagonal().amax();
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
