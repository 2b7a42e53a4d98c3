//! Time-varying-parameter VAR with stochastic volatility.
//!
//! The crate covers the full empirical pipeline: building quarterly model
//! variables from raw CSV series ([`ingest`]), Hamilton-filter detrending and
//! business-cycle statistics ([`cycles`]), Gibbs-sampler estimation of the
//! TVP-VAR-SV model under recursive identification ([`model`]), and
//! time-varying impulse responses and volatility paths ([`irf`]).
//! [`synth`] generates data with known ground truth together with dense
//! brute-force oracles for the state-space kernel.

pub mod cycles;
pub mod error;
pub mod ingest;
pub mod kernel;
pub mod irf;
pub mod model;
pub mod quarter;
pub mod synth;

pub use error::{Error, Result};
pub use quarter::{parse_quarter, QuarterDate};
