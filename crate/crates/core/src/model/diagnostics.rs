//! Convergence diagnostics for retained chains.

use serde::{Deserialize, Serialize};

use super::store::ChainStore;
use crate::error::{Error, Result};

/// Minimum chain length accepted by the diagnostics.
pub const MIN_DRAWS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub mean: f64,
    pub std: f64,
    /// `1 + 2 * sum of Parzen-weighted autocorrelations`; `None` for a
    /// constant chain.
    pub inefficiency: Option<f64>,
    /// Difference of the first-10% and last-50% means over its standard
    /// error; `None` for a constant chain.
    pub geweke_z: Option<f64>,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub parameter: String,
    #[serde(flatten)]
    pub diagnostics: ChainDiagnostics,
}

fn parzen(x: f64) -> f64 {
    if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else if x <= 1.0 {
        2.0 * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Lag window used for a chain of length `n`.
pub fn bandwidth(n: usize) -> usize {
    (2.0 * (n as f64).sqrt()).ceil().min(500.0) as usize
}

/// Sample mean and Parzen-window long-run variance.
fn long_run_variance(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |l: usize| dev[l..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = gamma(0);
    let b = bandwidth(n).min(n - 1);
    let mut s = g0;
    for l in 1..=b {
        s += 2.0 * parzen(l as f64 / b as f64) * gamma(l);
    }
    (mean, g0, s)
}

pub fn chain_diagnostics(chain: &[f64]) -> Result<ChainDiagnostics> {
    let n = chain.len();
    if n < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            have: n,
            need: MIN_DRAWS,
        });
    }
    if chain.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("chain contains non-finite values".into()));
    }
    let (mean, g0, s) = long_run_variance(chain);
    let scale = mean.abs().max(1.0);
    if g0.sqrt() <= 1e-14 * scale {
        return Ok(ChainDiagnostics {
            mean,
            std: 0.0,
            inefficiency: None,
            geweke_z: None,
            zero_variance: true,
        });
    }
    let first = &chain[..n / 10];
    let last = &chain[n - n / 2..];
    let (ma, _, sa) = long_run_variance(first);
    let (mb, _, sb) = long_run_variance(last);
    let se = (sa.max(0.0) / first.len() as f64 + sb.max(0.0) / last.len() as f64).sqrt();
    Ok(ChainDiagnostics {
        mean,
        std: g0.sqrt(),
        inefficiency: Some(s / g0),
        geweke_z: if se > 0.0 { Some((ma - mb) / se) } else { None },
        zero_variance: false,
    })
}

/// Diagnostics for the time averages of every coefficient, contemporaneous
/// and log-volatility element, and for the diagonals of the innovation
/// covariances.
pub fn convergence_diagnostics(store: &ChainStore) -> Result<Vec<ParameterDiagnostics>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if store.len() < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            have: store.len(),
            need: MIN_DRAWS,
        });
    }
    let meta = store.meta();
    let (n, k) = (store.periods(), store.k());
    let mut out = vec![];
    let mut push = |name: String, chain: Vec<f64>| -> Result<()> {
        out.push(ParameterDiagnostics {
            parameter: name,
            diagnostics: chain_diagnostics(&chain)?,
        });
        Ok(())
    };
    let avg = |f: &dyn Fn(usize, usize) -> f64, d: usize| (0..n).map(|t| f(d, t)).sum::<f64>() / n as f64;
    for e in 0..meta.n_coefficients() {
        let chain = (0..store.len()).map(|d| avg(&|d, t| store.beta(d, t)[e], d)).collect();
        push(format!("beta[{e}]"), chain)?;
    }
    for e in 0..meta.n_a() {
        let chain = (0..store.len()).map(|d| avg(&|d, t| store.a(d, t)[e], d)).collect();
        push(format!("a[{e}]"), chain)?;
    }
    for e in 0..k {
        let chain = (0..store.len()).map(|d| avg(&|d, t| store.h(d, t)[e], d)).collect();
        push(format!("h[{e}]"), chain)?;
    }
    let nb = meta.n_coefficients();
    for e in 0..nb {
        push(format!("Q[{e},{e}]"), store.trace(|s, d| s.hyper_raw(d)[e * nb + e]))?;
    }
    for j in 1..k {
        for e in 0..j {
            push(format!("S{j}[{e},{e}]"), store.trace(|s, d| s.hyper(d).s_blocks[j - 1][(e, e)]))?;
        }
    }
    for e in 0..k {
        push(format!("W[{e}]"), store.trace(|s, d| s.hyper(d).w[e]))?;
    }
    Ok(out)
}
