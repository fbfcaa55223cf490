//! Value-function estimators: plug-in, importance sampling, Switch, and
//! truncated importance sampling.
//!
//! All estimators share the empirical mean reward
//! `r_hat(a) = (1/n(a)) * sum of rewards observed at a`, with `r_hat(a) = 0`
//! for unobserved actions. The importance-sampling parts divide by the
//! nominal sample size `dataset.n` (these estimators are specified for the
//! multinomial observation model, where that equals the number of pairs).

use crate::bandit::{likelihood_ratio, ActionSet, Dataset, LikelihoodRatio, Policy};
use crate::chebyshev::{chebyshev_estimate, ChebyshevWeights};
use crate::error::OpeError;

/// Per-action reward sums and counts.
fn reward_sums(dataset: &Dataset) -> (Vec<f64>, Vec<u64>) {
    let mut sums = vec![0.0; dataset.k];
    let mut counts = vec![0u64; dataset.k];
    for obs in &dataset.pairs {
        sums[obs.action] += obs.reward;
        counts[obs.action] += 1;
    }
    (sums, counts)
}

/// Empirical mean rewards, zero for unobserved actions.
fn empirical_means(dataset: &Dataset) -> Vec<f64> {
    let (sums, counts) = reward_sums(dataset);
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

/// Plug-in estimator: sum_a pi_t(a) * r_hat(a).
pub fn plug_in(dataset: &Dataset, target: &Policy) -> Result<f64, OpeError> {
    if dataset.k != target.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: dataset.k,
        });
    }
    let means = empirical_means(dataset);
    Ok(target
        .weights()
        .iter()
        .zip(&means)
        .map(|(&w, &r)| w * r)
        .sum())
}

/// Importance sampling estimator: (1/n) * sum_i rho(A_i) R_i.
///
/// Errors if an observed action has an infinite likelihood ratio; such an
/// observation is inconsistent with the declared behavior policy.
pub fn importance_sampling(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
) -> Result<f64, OpeError> {
    switch_impl(dataset, target, behavior, None)
}

/// Switch estimator: plug-in on `s`, importance sampling on its complement.
pub fn switch(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
    s: &ActionSet,
) -> Result<f64, OpeError> {
    let plug_part: f64 = {
        if dataset.k != target.k() {
            return Err(OpeError::DimensionMismatch {
                expected: target.k(),
                got: dataset.k,
            });
        }
        let means = empirical_means(dataset);
        s.indices().map(|a| target.weight(a) * means[a]).sum()
    };
    let is_part = switch_impl(dataset, target, behavior, Some(s))?;
    Ok(plug_part + is_part)
}

/// Truncated importance sampling: the Switch estimator with the plug-in part
/// replaced by zero.
pub fn truncated_is(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
    s: &ActionSet,
) -> Result<f64, OpeError> {
    switch_impl(dataset, target, behavior, Some(s))
}

/// The IS part restricted to actions outside `s` (all actions when `None`).
fn switch_impl(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
    s: Option<&ActionSet>,
) -> Result<f64, OpeError> {
    if dataset.k != target.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: dataset.k,
        });
    }
    let rho = likelihood_ratio(target, behavior)?;
    let mut acc = 0.0;
    for obs in &dataset.pairs {
        if let Some(set) = s {
            if set.contains(obs.action) {
                continue;
            }
        }
        match rho[obs.action] {
            LikelihoodRatio::Finite(r) => acc += r * obs.reward,
            LikelihoodRatio::Infinite => {
                return Err(match s {
                    Some(_) => OpeError::InfiniteRatioOutsideS { action: obs.action },
                    None => OpeError::InfiniteRatioObserved { action: obs.action },
                })
            }
        }
    }
    Ok(acc / dataset.n as f64)
}

/// An estimator selection, carrying whatever side information the estimator
/// needs (the subset for Switch, precomputed weights for Chebyshev).
#[derive(Debug, Clone)]
pub enum EstimatorKind {
    PlugIn,
    ImportanceSampling,
    Switch(ActionSet),
    TruncatedIs(ActionSet),
    Chebyshev(ChebyshevWeights),
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::PlugIn => "plugin",
            EstimatorKind::ImportanceSampling => "is",
            EstimatorKind::Switch(_) => "switch",
            EstimatorKind::TruncatedIs(_) => "truncated-is",
            EstimatorKind::Chebyshev(_) => "chebyshev",
        }
    }

    pub fn estimate(
        &self,
        dataset: &Dataset,
        target: &Policy,
        behavior: &Policy,
    ) -> Result<f64, OpeError> {
        match self {
            EstimatorKind::PlugIn => plug_in(dataset, target),
            EstimatorKind::ImportanceSampling => importance_sampling(dataset, target, behavior),
            EstimatorKind::Switch(s) => switch(dataset, target, behavior, s),
            EstimatorKind::TruncatedIs(s) => truncated_is(dataset, target, behavior, s),
            EstimatorKind::Chebyshev(w) => chebyshev_estimate(dataset, target, w),
        }
    }
}
