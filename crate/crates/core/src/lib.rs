//! Off-policy evaluation for multi-armed bandits with bounded rewards.
//!
//! Given logged action-reward pairs collected under a behavior policy, the
//! estimators in this crate evaluate the mean reward a *target* policy would
//! obtain. Four estimators are provided:
//!
//! - **Plug-in**: empirical mean rewards substituted into the value
//!   functional; needs no knowledge of the behavior policy.
//! - **Importance sampling (IS)**: likelihood-ratio reweighted rewards;
//!   unbiased but high-variance when the policies differ sharply.
//! - **Switch**: plug-in on a set `S` of high-likelihood-ratio actions, IS on
//!   the complement. The [`solver`] module computes the set `S*` that makes
//!   this estimator minimax-optimal, via an exact closed-form solution of the
//!   underlying convex program.
//! - **Chebyshev**: a bias-corrected plug-in for the setting where only the
//!   minimum exploration probability of the behavior policy is known; small
//!   action counts are reweighted using coefficients of a shifted Chebyshev
//!   polynomial.
//!
//! The [`analysis`] module has exact and Monte Carlo MSE computation,
//! competitive-ratio evaluation, and log-log slope regression for scaling
//! experiments; [`sampler`] draws reproducible datasets under multinomial and
//! Poisson observation models.

pub mod analysis;
pub mod bandit;
pub mod chebyshev;
pub mod error;
pub mod estimators;
pub mod sampler;
pub mod solver;

pub use analysis::{
    binomial_inverse_moment, competitive_ratio, loglog_slope, monte_carlo_mse, plugin_mse_exact,
    spearman_rank_correlation, CompetitiveRatioReport, MseReport, SlopeFit,
};
pub use bandit::{
    likelihood_ratio, validate_policy, value_function, ActionSet, BanditInstance, Dataset,
    LikelihoodRatio, Observation, Policy, SamplingMode,
};
pub use chebyshev::{
    chebyshev_bias_oracle, chebyshev_coefficients, chebyshev_estimate, delocalization_gamma,
    ChebyshevConfig, ChebyshevWeights,
};
pub use error::OpeError;
pub use estimators::{importance_sampling, plug_in, switch, truncated_is, EstimatorKind};
pub use sampler::{
    action_counts, derive_seed, draw_multinomial_dataset, draw_poisson_dataset, SeedSpec,
};
pub use solver::{
    brute_force_subset, minimax_risk_surrogate, solve_optimal_subset, subset_objective,
    switch_mse_upper_bound, RiskSurrogate, SwitchSolution,
};
