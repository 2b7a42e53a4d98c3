use nalgebra::{DMatrix, DVector};

use super::linalg::{cholesky, psd_factor, symmetrize};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Draws from `N(mean, cov)` for a positive semidefinite `cov`.
pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::Dimension(format!(
            "mean has length {d} but covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let l = psd_factor(cov)?;
    let z = DVector::from_fn(d, |_, _| rng.standard_normal());
    Ok(mean + l * z)
}

/// Draws from the inverse-Wishart with scale matrix `scale` and `dof`
/// degrees of freedom (mean `scale / (dof - dim - 1)`), via the Bartlett
/// decomposition of the corresponding Wishart.
pub fn sample_inverse_wishart(scale: &DMatrix<f64>, dof: f64, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if !(dof > d as f64 - 1.0) || !dof.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse-Wishart needs dof > dim - 1 = {}, got {dof}",
            d as f64 - 1.0
        )));
    }
    let c = cholesky(scale)?;
    let mut bartlett = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        bartlett[(i, i)] = (2.0 * rng.gamma(0.5 * (dof - i as f64))).sqrt();
    }
    for i in 0..d {
        for j in 0..i {
            bartlett[(i, j)] = rng.standard_normal();
        }
    }
    let a_inv = bartlett
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Singular("Bartlett factor".into()))?;
    let g = c.l() * a_inv.transpose();
    let mut draw = &g * g.transpose();
    symmetrize(&mut draw);
    Ok(draw)
}

/// Inverse-gamma with density proportional to `x^(-shape-1) exp(-scale/x)`.
pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inverse-gamma needs positive shape and scale, got ({shape}, {scale})"
        )));
    }
    Ok(scale / rng.gamma(shape))
}
