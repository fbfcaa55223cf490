//! Chebyshev bias-corrected estimation for the partial-knowledge setting.
//!
//! When only a lower bound `nu` on the behavior policy's minimum exploration
//! probability is known, the plug-in estimator carries a missing-mass bias of
//! order exp(-n * nu). The Chebyshev estimator reweights arms with small
//! counts by `g_L(n(a))`, built from the coefficients of the shifted and
//! scaled Chebyshev polynomial
//!
//! ```text
//!   P_L(x) = -Q_L((2x - r - ell)/(r - ell)) / Q_L((-r - ell)/(r - ell))
//!          = sum_{d=0..L} a_d x^d,       Q_L(y) = cos(L arccos y),
//! ```
//!
//! the degree-L polynomial with P_L(0) = -1 closest to zero in sup norm on
//! [ell, r]. The weights are `g_L(j) = a_j j!/n^j + 1` for `j <= L` and 1
//! beyond, so `g_L(0) = 0` and well-observed arms are left untouched.
//!
//! The monomial expansion of Q_L in the shifted basis cancels
//! catastrophically, and `a_j j!/n^j` can pass through magnitudes far beyond
//! f64 range, so the three-term recurrence and the weight table are computed
//! in exact rational arithmetic and downcast once at the end.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::bandit::{BanditInstance, Dataset, Policy};
use crate::error::OpeError;
use crate::sampler::action_counts;

/// Default constants for the instance-derived configuration
/// L = max(1, ceil(c0 ln k)), r = min(1, c1 ln k / n).
pub const DEFAULT_C0: f64 = 0.75;
pub const DEFAULT_C1: f64 = 4.0;

/// Parameters of the Chebyshev estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevConfig {
    /// Known lower bound on min_a pi_b(a).
    pub nu: f64,
    /// Left endpoint of the approximation interval (equal to `nu`).
    pub ell: f64,
    /// Right endpoint of the approximation interval.
    pub r: f64,
    /// Polynomial degree L >= 1.
    pub degree_l: usize,
    /// Sample-size / rate parameter entering the weights.
    pub n: usize,
    pub c0: f64,
    pub c1: f64,
}

impl ChebyshevConfig {
    /// Explicit configuration; `ell` is pinned to `nu`.
    pub fn new(nu: f64, r: f64, degree_l: usize, n: usize) -> Result<Self, OpeError> {
        if !(0.0 < nu && nu < r && r <= 1.0) {
            return Err(OpeError::DegenerateInterval { ell: nu, r });
        }
        if degree_l == 0 {
            return Err(OpeError::InvalidArgument(
                "Chebyshev degree must be >= 1".into(),
            ));
        }
        if n == 0 {
            return Err(OpeError::InvalidArgument(
                "sample size must be >= 1".into(),
            ));
        }
        Ok(ChebyshevConfig {
            nu,
            ell: nu,
            r,
            degree_l,
            n,
            c0: DEFAULT_C0,
            c1: DEFAULT_C1,
        })
    }

    /// Instance-derived configuration: ell = nu, r = min(1, c1 ln k / n),
    /// L = max(1, ceil(c0 ln k)).
    ///
    /// Returns `None` when nu >= r (the behavior policy is exploratory
    /// enough that plain plug-in is already optimal) — callers should fall
    /// back to [`ChebyshevWeights::plugin_fallback`].
    pub fn for_instance(k: usize, nu: f64, n: usize, c0: f64, c1: f64) -> Option<Self> {
        if k < 2 || n == 0 {
            return None;
        }
        let ln_k = (k as f64).ln();
        let r = (c1 * ln_k / n as f64).min(1.0);
        if !(nu > 0.0 && nu < r) {
            return None;
        }
        let degree_l = (c0 * ln_k).ceil().max(1.0) as usize;
        Some(ChebyshevConfig {
            nu,
            ell: nu,
            r,
            degree_l,
            n,
            c0,
            c1,
        })
    }
}

/// Coefficients and count-weight table of the Chebyshev estimator.
///
/// `coeffs` holds the exact rational monomial coefficients a_0..a_L of P_L;
/// `coeffs_f64` are their downcasts for inspection. The plug-in fallback is
/// represented by the degree-0 table (g(0) = 0, g(j >= 1) = 1), which makes
/// the estimator coincide with plug-in exactly.
#[derive(Debug, Clone)]
pub struct ChebyshevWeights {
    coeffs: Vec<BigRational>,
    pub coeffs_f64: Vec<f64>,
    g_table: Vec<f64>,
    /// Q_L((-r - ell)/(r - ell)), the normalizer making P_L(0) = -1.
    pub normalizer: f64,
    fallback: bool,
}

impl ChebyshevWeights {
    /// Weight applied to the empirical mean of an arm observed `count` times.
    pub fn g(&self, count: u64) -> f64 {
        if (count as usize) < self.g_table.len() {
            self.g_table[count as usize]
        } else {
            1.0
        }
    }

    /// Degree L of the underlying polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Whether this instance is the graceful plug-in degradation used when
    /// nu >= r.
    pub fn is_plugin_fallback(&self) -> bool {
        self.fallback
    }

    /// Degree-0 weights that reproduce the plug-in estimator exactly.
    pub fn plugin_fallback() -> Self {
        ChebyshevWeights {
            coeffs: vec![-BigRational::one()],
            coeffs_f64: vec![-1.0],
            g_table: vec![0.0],
            normalizer: 1.0,
            fallback: true,
        }
    }

    /// P_L evaluated by Horner's rule in exact rational arithmetic,
    /// downcast once at the end.
    pub fn p_at(&self, x: f64) -> f64 {
        let xq = BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        let mut acc = BigRational::zero();
        for a in self.coeffs.iter().rev() {
            acc = acc * &xq + a;
        }
        rational_to_f64(&acc)
    }
}

/// Expand P_L in the monomial basis and tabulate g_L.
///
/// The recurrence Q_{m+1}(y) = 2 y Q_m(y) - Q_{m-1}(y) is applied to
/// y = alpha x + beta with alpha = 2/(r - ell), beta = -(r + ell)/(r - ell),
/// entirely in exact rational arithmetic; the result is normalized so that
/// P_L(0) = -1 holds exactly.
pub fn chebyshev_coefficients(config: &ChebyshevConfig) -> Result<ChebyshevWeights, OpeError> {
    if !(0.0 < config.ell && config.ell < config.r && config.r <= 1.0) {
        return Err(OpeError::DegenerateInterval {
            ell: config.ell,
            r: config.r,
        });
    }
    let ell = BigRational::from_float(config.ell)
        .ok_or_else(|| OpeError::InvalidArgument("ell is not finite".into()))?;
    let r = BigRational::from_float(config.r)
        .ok_or_else(|| OpeError::InvalidArgument("r is not finite".into()))?;
    let width = &r - &ell;
    let alpha = BigRational::from_integer(2.into()) / &width;
    let beta = -(&r + &ell) / &width;

    let degree = config.degree_l;
    // q holds the monomial coefficients of Q_m(alpha x + beta).
    let mut q_prev = vec![BigRational::one()]; // Q_0 = 1
    let mut q = vec![beta.clone(), alpha.clone()]; // Q_1 = y
    for _ in 1..degree {
        // 2 (alpha x + beta) q - q_prev
        let mut next = vec![BigRational::zero(); q.len() + 1];
        for (i, coeff) in q.iter().enumerate() {
            let doubled = BigRational::from_integer(2.into()) * coeff;
            next[i] += &doubled * &beta;
            next[i + 1] += doubled * &alpha;
        }
        for (i, coeff) in q_prev.iter().enumerate() {
            next[i] -= coeff;
        }
        q_prev = std::mem::replace(&mut q, next);
    }
    if degree == 0 {
        q = q_prev;
    }

    // Normalizer: Q_L at x = 0 is the constant coefficient.
    let normalizer = q[0].clone();
    if normalizer.is_zero() {
        return Err(OpeError::InvalidArgument(
            "Chebyshev normalizer vanished; interval endpoints degenerate".into(),
        ));
    }
    let coeffs: Vec<BigRational> = q.iter().map(|c| -(c / &normalizer)).collect();

    // g_L(j) = a_j j! / n^j + 1, exact until the final downcast.
    let n_big = BigInt::from(config.n);
    let mut g_table = Vec::with_capacity(degree + 1);
    let mut factorial = BigInt::one();
    let mut n_pow = BigInt::one();
    for (j, a) in coeffs.iter().enumerate() {
        if j > 0 {
            factorial *= BigInt::from(j);
            n_pow *= &n_big;
        }
        let g = a * BigRational::from_integer(factorial.clone())
            / BigRational::from_integer(n_pow.clone())
            + BigRational::one();
        g_table.push(rational_to_f64(&g));
    }

    let coeffs_f64 = coeffs.iter().map(rational_to_f64).collect();
    Ok(ChebyshevWeights {
        coeffs,
        coeffs_f64,
        g_table,
        normalizer: rational_to_f64(&normalizer),
        fallback: false,
    })
}

/// The Chebyshev estimate sum_a pi_t(a) r_hat(a) g_L(n(a)).
///
/// The estimator is specified under the Poisson observation model;
/// multinomial datasets are accepted as-is (the risk transfer between the
/// two models costs only a constant factor).
pub fn chebyshev_estimate(
    dataset: &Dataset,
    target: &Policy,
    weights: &ChebyshevWeights,
) -> Result<f64, OpeError> {
    if dataset.k != target.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: dataset.k,
        });
    }
    let mut sums = vec![0.0; dataset.k];
    let counts = action_counts(dataset);
    for obs in &dataset.pairs {
        sums[obs.action] += obs.reward;
    }
    let mut acc = 0.0;
    for a in 0..dataset.k {
        if counts[a] > 0 {
            let mean = sums[a] / counts[a] as f64;
            acc += target.weight(a) * mean * weights.g(counts[a]);
        }
    }
    Ok(acc)
}

/// Exact bias of the Chebyshev estimator under the Poisson model:
/// sum_a pi_t(a) r(a) exp(-n pi_b(a)) P_L(pi_b(a)).
///
/// With the plug-in fallback weights (P === -1) this reduces to the plug-in
/// bias -sum_a pi_t(a) r(a) exp(-n pi_b(a)).
pub fn chebyshev_bias_oracle(
    instance: &BanditInstance,
    weights: &ChebyshevWeights,
    n: usize,
) -> f64 {
    let mut acc = 0.0;
    for a in 0..instance.k() {
        let pt = instance.target.weight(a);
        let rf = instance.mean_rewards[a];
        if pt == 0.0 || rf == 0.0 {
            continue;
        }
        let pb = instance.behavior.weight(a);
        acc += pt * rf * (-(n as f64) * pb).exp() * weights.p_at(pb);
    }
    acc
}

/// De-localization exponent gamma = -log_k(sum_a pi_t(a)^2).
///
/// The Chebyshev risk guarantee assumes sum pi_t^2 <= k^(-gamma) with
/// c0 <= gamma / 7; this is a hypothesis about the target policy, not an
/// algorithm input, so callers report whether it holds rather than reject.
pub fn delocalization_gamma(target: &Policy) -> f64 {
    let k = target.k();
    if k < 2 {
        return 0.0;
    }
    let sum_sq: f64 = target.weights().iter().map(|w| w * w).sum();
    -sum_sq.ln() / (k as f64).ln()
}

/// Downcast an exact rational to f64 by extracting a ~64-bit mantissa and a
/// binary exponent; correct (up to final-rounding ulps) for operands far
/// outside f64 range, where Ratio's own ToPrimitive can produce inf/inf.
fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let negative = q.numer().sign() == Sign::Minus;
    let numer: &BigUint = q.numer().magnitude();
    let denom: &BigUint = q.denom().magnitude();
    let shift: i64 = 64 - (numer.bits() as i64 - denom.bits() as i64);
    let mantissa: BigUint = if shift >= 0 {
        (numer << shift as u64) / denom
    } else {
        numer / (denom << (-shift) as u64)
    };
    let m = mantissa.to_f64().unwrap_or(f64::INFINITY);
    let magnitude = if shift > i32::MAX as i64 {
        0.0
    } else if shift < i32::MIN as i64 {
        f64::INFINITY
    } else {
        m * 2f64.powi(-(shift as i32))
    };
    if negative {
        -magnitude
    } else {
        magnitude
    }
}
