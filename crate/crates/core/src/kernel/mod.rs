//! Linear-algebra and sampling primitives shared by the Gibbs sampler.

mod kalman;
mod linalg;
mod rng;
mod sampling;

pub use kalman::{
    ffbs, ffbs_scalar, kalman_filter, kalman_smoother, FilterOutput, ScalarSystem, SmootherOutput,
    StateSpaceModel,
};
pub use linalg::{
    cholesky, companion_form, psd_factor, spectral_radius, symmetrize, CholeskyFactor,
};
pub use rng::{RngStream, RNG_ALGORITHM};
pub use sampling::{sample_inverse_gamma, sample_inverse_wishart, sample_mvn};
