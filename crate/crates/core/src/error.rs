//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by validation, solving, and estimation.
#[derive(Debug, Error)]
pub enum OpeError {
    #[error("policy weight vector is empty")]
    EmptyPolicy,

    #[error("policy weight at index {index} is negative: {value}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("policy weights sum to {sum}, which deviates from 1 by more than 1e-12")]
    NotNormalized { sum: f64 },

    #[error("dimension mismatch: expected {expected} actions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mean reward {value} at action {index} outside [0, {r_max}]")]
    RewardOutOfRange {
        index: usize,
        value: f64,
        r_max: f64,
    },

    #[error("dataset action index {action} out of range for k = {k}")]
    ActionOutOfRange { action: usize, k: usize },

    #[error("multinomial dataset has {got} pairs but declares n = {n}")]
    SampleCountMismatch { got: usize, n: usize },

    #[error("brute force limited to k <= {k_limit}, got k = {k}")]
    TooLarge { k: usize, k_limit: usize },

    #[error("observed action {action} has zero behavior probability but positive target probability")]
    InfiniteRatioObserved { action: usize },

    #[error("action {action} outside S has infinite likelihood ratio")]
    InfiniteRatioOutsideS { action: usize },

    #[error("degenerate approximation interval: need 0 < ell < r <= 1, got ell = {ell}, r = {r}")]
    DegenerateInterval { ell: f64, r: f64 },

    #[error("log-log regression needs at least 2 strictly positive points")]
    NonPositiveInput,

    #[error("competitive-ratio denominator (Switch surrogate MSE) is zero")]
    ZeroDenominator,

    #[error("{0}")]
    InvalidArgument(String),
}
