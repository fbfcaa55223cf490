//! Domain types: policies, bandit instances, datasets, and action subsets.
//!
//! All types are immutable after construction and all operations here are
//! pure, so values can be shared freely across threads.

use serde::{Deserialize, Serialize};

use crate::error::OpeError;

/// Absolute tolerance on |sum(weights) - 1| accepted by [`validate_policy`].
/// Weights are never silently renormalized; a sum outside this band is a
/// configuration error in the caller.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A randomized policy: a probability distribution over `k` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    weights: Vec<f64>,
}

impl Policy {
    /// Validating constructor; see [`validate_policy`].
    pub fn new(weights: Vec<f64>) -> Result<Self, OpeError> {
        if weights.is_empty() {
            return Err(OpeError::EmptyPolicy);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(OpeError::NegativeWeight { index, value });
            }
        }
        let sum = neumaier_sum(weights.iter().copied());
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(OpeError::NotNormalized { sum });
        }
        Ok(Policy { weights })
    }

    /// Uniform distribution over `k` actions.
    pub fn uniform(k: usize) -> Self {
        Policy {
            weights: vec![1.0 / k as f64; k.max(1)],
        }
    }

    /// Point mass on `action`.
    pub fn point_mass(k: usize, action: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[action] = 1.0;
        Policy { weights }
    }

    /// Number of actions.
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Probability of `action`.
    pub fn weight(&self, action: usize) -> f64 {
        self.weights[action]
    }

    /// All probabilities.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass on a subset of actions.
    pub fn mass_on(&self, set: &ActionSet) -> f64 {
        neumaier_sum(set.indices().map(|a| self.weights[a]))
    }

    /// Number of actions with strictly positive probability.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Validate a weight vector as a probability distribution.
///
/// Weights must be non-negative and sum to 1 within [`NORMALIZATION_TOL`];
/// they are NOT renormalized on the caller's behalf.
pub fn validate_policy(weights: &[f64]) -> Result<Policy, OpeError> {
    Policy::new(weights.to_vec())
}

/// A likelihood ratio pi_t(a) / pi_b(a).
///
/// The case pi_b(a) = 0 < pi_t(a) is a distinguished sentinel rather than a
/// floating-point infinity produced by division: downstream consumers (the
/// subset solver, the Switch bounds) branch on it explicitly. The convention
/// 0/0 = 0 applies, so the ratio is `Finite(0.0)` whenever pi_t(a) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodRatio {
    Finite(f64),
    Infinite,
}

impl LikelihoodRatio {
    pub fn is_infinite(self) -> bool {
        matches!(self, LikelihoodRatio::Infinite)
    }

    /// The ratio as an `f64`, mapping `Infinite` to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            LikelihoodRatio::Finite(v) => v,
            LikelihoodRatio::Infinite => f64::INFINITY,
        }
    }
}

/// Likelihood ratios rho(a) = pi_t(a) / pi_b(a) for every action.
///
/// Follows the convention 0/0 = 0; pi_t(a) > 0 with pi_b(a) = 0 yields
/// [`LikelihoodRatio::Infinite`].
pub fn likelihood_ratio(
    target: &Policy,
    behavior: &Policy,
) -> Result<Vec<LikelihoodRatio>, OpeError> {
    if target.k() != behavior.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: behavior.k(),
        });
    }
    Ok(target
        .weights()
        .iter()
        .zip(behavior.weights())
        .map(|(&pt, &pb)| {
            if pt == 0.0 {
                LikelihoodRatio::Finite(0.0)
            } else if pb == 0.0 {
                LikelihoodRatio::Infinite
            } else {
                LikelihoodRatio::Finite(pt / pb)
            }
        })
        .collect())
}

/// A bandit problem instance: the ground truth for simulation.
///
/// Rewards are simulated as two-point Bernoulli draws on {0, r_max} with
/// success probability `mean_rewards[a] / r_max`, the hardest reward family
/// for this problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub target: Policy,
    pub behavior: Policy,
    pub mean_rewards: Vec<f64>,
    pub r_max: f64,
}

impl BanditInstance {
    pub fn new(
        target: Policy,
        behavior: Policy,
        mean_rewards: Vec<f64>,
        r_max: f64,
    ) -> Result<Self, OpeError> {
        if behavior.k() != target.k() {
            return Err(OpeError::DimensionMismatch {
                expected: target.k(),
                got: behavior.k(),
            });
        }
        if mean_rewards.len() != target.k() {
            return Err(OpeError::DimensionMismatch {
                expected: target.k(),
                got: mean_rewards.len(),
            });
        }
        if !(r_max >= 0.0) {
            return Err(OpeError::InvalidArgument(format!(
                "r_max must be non-negative, got {r_max}"
            )));
        }
        for (index, &value) in mean_rewards.iter().enumerate() {
            if !(0.0..=r_max).contains(&value) {
                return Err(OpeError::RewardOutOfRange {
                    index,
                    value,
                    r_max,
                });
            }
        }
        Ok(BanditInstance {
            target,
            behavior,
            mean_rewards,
            r_max,
        })
    }

    pub fn k(&self) -> usize {
        self.target.k()
    }
}

/// True value of the target policy: sum_a pi_t(a) r(a).
pub fn value_function(instance: &BanditInstance) -> f64 {
    neumaier_sum(
        instance
            .target
            .weights()
            .iter()
            .zip(&instance.mean_rewards)
            .map(|(&w, &r)| w * r),
    )
}

/// Observation model under which a dataset was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Exactly `n` i.i.d. draws from the behavior policy.
    Multinomial,
    /// Per-action counts drawn independently as Poisson(n * pi_b(a)).
    Poisson,
}

/// One logged action-reward pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub action: usize,
    pub reward: f64,
}

/// A logged dataset of action-reward pairs.
///
/// Under multinomial sampling `pairs.len() == n`; under Poisson sampling
/// `pairs.len()` is the realized total count and `n` is the rate parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub k: usize,
    pub n: usize,
    pub mode: SamplingMode,
    pub pairs: Vec<Observation>,
}

impl Dataset {
    pub fn new(
        k: usize,
        n: usize,
        mode: SamplingMode,
        pairs: Vec<Observation>,
    ) -> Result<Self, OpeError> {
        for obs in &pairs {
            if obs.action >= k {
                return Err(OpeError::ActionOutOfRange {
                    action: obs.action,
                    k,
                });
            }
        }
        if mode == SamplingMode::Multinomial && pairs.len() != n {
            return Err(OpeError::SampleCountMismatch {
                got: pairs.len(),
                n,
            });
        }
        Ok(Dataset { k, n, mode, pairs })
    }
}

/// A subset of the action space, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    mask: Vec<bool>,
}

impl ActionSet {
    pub fn empty(k: usize) -> Self {
        ActionSet {
            mask: vec![false; k],
        }
    }

    pub fn full(k: usize) -> Self {
        ActionSet {
            mask: vec![true; k],
        }
    }

    pub fn from_indices(k: usize, indices: &[usize]) -> Self {
        let mut mask = vec![false; k];
        for &a in indices {
            mask[a] = true;
        }
        ActionSet { mask }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        ActionSet { mask }
    }

    pub fn k(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, action: usize) -> bool {
        self.mask[action]
    }

    /// Number of member actions.
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&m| !m)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Member actions in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(a, _)| a)
    }
}

/// Compensated (Neumaier) summation: deterministic and accurate independent
/// of the magnitude ordering of the inputs.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}
