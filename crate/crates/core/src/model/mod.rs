//! TVP-VAR with stochastic volatility: priors, the Gibbs sampler and the
//! archive of retained draws.
//!
//! The model is `y_t = X_t beta_t + A_t^{-1} Sigma_t eps_t` with
//! `X_t = I_k ⊗ (y_{t-1}', ..., y_{t-s}')`, unit lower-triangular `A_t`,
//! `Sigma_t = diag(exp(h_t))`, and random walks for `beta_t`, the free
//! elements `a_t` of `A_t`, and `h_t`.

mod blocks;
mod diagnostics;
mod gibbs;
mod mixture;
mod prior;
mod regressors;
mod spec;
mod state;
mod store;

pub use blocks::{
    draw_a_paths, draw_beta_paths, draw_h_paths, draw_hypercovariances, posterior_scale,
    reduced_form_covariance, structural_residuals, SV_OFFSET,
};
pub use diagnostics::{
    bandwidth, chain_diagnostics, convergence_diagnostics, ChainDiagnostics, ParameterDiagnostics,
    MIN_DRAWS,
};
pub use gibbs::{
    prepare, reduced_form_log_likelihood, run_chain, run_gibbs, structural_factors, GibbsSampler,
    Prepared, EXPLOSIVE_ATTEMPTS,
};
pub use mixture::{MixtureComponent, MixtureTable, LOG_CHI2_MEAN, LOG_CHI2_VARIANCE};
pub use prior::{init_prior, prior_from_fit, training_fit, Prior, TrainingFit};
pub use regressors::{build_regressors, Regressors};
pub use spec::{ModelSpec, PriorSpec};
pub use state::{a_offset, free_a_count, unit_lower, GibbsDraw, HyperCovariances, StatePaths};
pub use store::{ChainStore, StoreMeta};
