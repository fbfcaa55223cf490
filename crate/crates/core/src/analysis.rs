//! Exact and Monte Carlo MSE computation, competitive-ratio evaluation, and
//! log-log slope regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{neumaier_sum, value_function, BanditInstance, SamplingMode};
use crate::error::OpeError;
use crate::estimators::EstimatorKind;
use crate::sampler::{draw_multinomial_dataset, draw_poisson_dataset, SeedSpec};
use crate::solver::{minimax_risk_surrogate, solve_optimal_subset, RiskSurrogate};

/// Result of a Monte Carlo MSE run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseReport {
    pub estimator_name: String,
    pub mean_squared_error: f64,
    pub std_error: f64,
    pub trials: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

/// Ordinary least squares fit of ln(mse) on ln(n).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Competitive ratio of an estimator against the Switch-at-S* oracle.
#[derive(Debug, Clone)]
pub struct CompetitiveRatioReport {
    pub ratio: f64,
    pub numerator_mse: f64,
    /// Monte Carlo MSE of the Switch estimator at S*, the surrogate for the
    /// (unknown in closed form) minimax risk.
    pub surrogate_mse: f64,
    /// The analytic minimax-rate characterization, reported for diagnostics.
    pub analytic_surrogate: RiskSurrogate,
    pub surrogate_trials: usize,
    pub surrogate_seed: u64,
}

/// E[ 1{X > 0} / X ] for X ~ Binomial(n, p), by direct summation with
/// log-space binomial terms.
pub fn binomial_inverse_moment(n: usize, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "p must be a probability");
    if p <= 0.0 || n == 0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0 / n as f64;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let nf = n as f64;
    let mut ln_binom = 0.0; // ln C(n, 0)
    let terms = (1..=n).map(|j| {
        let jf = j as f64;
        ln_binom += (nf - jf + 1.0).ln() - jf.ln();
        (ln_binom + jf * ln_p + (nf - jf) * ln_q).exp() / jf
    });
    neumaier_sum(terms)
}

/// Exact MSE of the plug-in estimator under the multinomial model with
/// two-point Bernoulli rewards on {0, r_max}.
///
/// Three-term decomposition: squared bias, within-arm sampling variance, and
/// the variance of the observed-arm indicator sum. Powers (1 - p)^n are
/// evaluated as exp(n ln(1 - p)) so deep underflow degrades gracefully.
pub fn plugin_mse_exact(instance: &BanditInstance, n: usize) -> f64 {
    let k = instance.k();
    let nf = n as f64;
    let pt = instance.target.weights();
    let pb = instance.behavior.weights();
    let r = &instance.mean_rewards;

    // P(n(a) = 0) = (1 - pi_b(a))^n.
    let q: Vec<f64> = pb.iter().map(|&p| (nf * (-p).ln_1p()).exp()).collect();

    let bias = neumaier_sum((0..k).map(|a| pt[a] * r[a] * q[a]));

    let within = neumaier_sum((0..k).map(|a| {
        let sigma_sq = r[a] * (instance.r_max - r[a]);
        pt[a] * pt[a] * sigma_sq * binomial_inverse_moment(n, pb[a])
    }));

    // Var( sum_a w_a 1{n(a) > 0} ) with w_a = pi_t(a) r(a), using the
    // pairwise joint P(n(a) = 0, n(b) = 0) = (1 - pi_b(a) - pi_b(b))^n.
    let w: Vec<f64> = (0..k).map(|a| pt[a] * r[a]).collect();
    let mut indicator = neumaier_sum((0..k).map(|a| w[a] * w[a] * (q[a] - q[a] * q[a])));
    let mut cross_terms = Vec::new();
    for a in 0..k {
        if w[a] == 0.0 {
            continue;
        }
        for b in (a + 1)..k {
            if w[b] == 0.0 {
                continue;
            }
            let both = pb[a] + pb[b];
            let q_ab = if both >= 1.0 {
                0.0
            } else {
                (nf * (-both).ln_1p()).exp()
            };
            cross_terms.push(2.0 * w[a] * w[b] * (q_ab - q[a] * q[b]));
        }
    }
    indicator += neumaier_sum(cross_terms.into_iter());

    bias * bias + within + indicator
}

/// Mean of (estimate - V)^2 over `trials` independent seeded trials.
///
/// Trials fan out over the rayon pool; each trial draws its dataset from its
/// own `(base_seed, trial_index)` stream and the reduction is a compensated
/// sum in trial order, so the result is bitwise independent of thread count
/// and scheduling.
pub fn monte_carlo_mse(
    estimator: &EstimatorKind,
    instance: &BanditInstance,
    n: usize,
    trials: usize,
    base_seed: u64,
    mode: SamplingMode,
) -> Result<MseReport, OpeError> {
    if trials < 2 {
        return Err(OpeError::InvalidArgument(
            "monte_carlo_mse needs at least 2 trials".into(),
        ));
    }
    let truth = value_function(instance);
    let squared_errors: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let seed = SeedSpec::new(base_seed, trial);
            let dataset = match mode {
                SamplingMode::Multinomial => draw_multinomial_dataset(instance, n, seed),
                SamplingMode::Poisson => draw_poisson_dataset(instance, n, seed),
            };
            estimator
                .estimate(&dataset, &instance.target, &instance.behavior)
                .map(|est| {
                    let err = est - truth;
                    err * err
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let tf = trials as f64;
    let mean = neumaier_sum(squared_errors.iter().copied()) / tf;
    let var = neumaier_sum(squared_errors.iter().map(|&x| {
        let d = x - mean;
        d * d
    })) / (tf - 1.0);
    Ok(MseReport {
        estimator_name: estimator.name().to_string(),
        mean_squared_error: mean,
        std_error: (var / tf).sqrt(),
        trials,
        n,
        k: instance.k(),
        seed: base_seed,
    })
}

/// Competitive ratio of a measured MSE against the Switch-at-S* Monte Carlo
/// surrogate, with the analytic characterization reported side by side.
pub fn competitive_ratio(
    numerator_mse: f64,
    instance: &BanditInstance,
    n: usize,
    surrogate_trials: usize,
    surrogate_seed: u64,
) -> Result<CompetitiveRatioReport, OpeError> {
    if !(numerator_mse >= 0.0) {
        return Err(OpeError::InvalidArgument(format!(
            "numerator MSE must be non-negative, got {numerator_mse}"
        )));
    }
    let solution = solve_optimal_subset(&instance.target, &instance.behavior, n)?;
    let oracle = EstimatorKind::Switch(solution.s_star);
    let surrogate = monte_carlo_mse(
        &oracle,
        instance,
        n,
        surrogate_trials,
        surrogate_seed,
        SamplingMode::Multinomial,
    )?;
    if surrogate.mean_squared_error == 0.0 {
        return Err(OpeError::ZeroDenominator);
    }
    let analytic =
        minimax_risk_surrogate(&instance.target, &instance.behavior, n, instance.r_max)?;
    Ok(CompetitiveRatioReport {
        ratio: numerator_mse / surrogate.mean_squared_error,
        numerator_mse,
        surrogate_mse: surrogate.mean_squared_error,
        analytic_surrogate: analytic,
        surrogate_trials,
        surrogate_seed,
    })
}

/// Least-squares fit of ln(mse) against ln(n).
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit, OpeError> {
    if points.len() < 2 || points.iter().any(|&(n, mse)| n <= 0.0 || mse <= 0.0) {
        return Err(OpeError::NonPositiveInput);
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx == 0.0 {
        return Err(OpeError::NonPositiveInput);
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let resid = y - (intercept + slope * x);
            resid * resid
        })
        .sum();
    let stderr = if points.len() > 2 {
        (sse / ((m - 2.0) * sxx)).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        stderr,
        intercept,
        points: points.len(),
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        syy += (y - y_mean) * (y - y_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{validate_policy, Policy};

    #[test]
    fn inverse_moment_closed_forms() {
        // n = 1: X in {0, 1}, E = p.
        for p in [0.0, 0.2, 0.7, 1.0] {
            assert!((binomial_inverse_moment(1, p) - p).abs() < 1e-15);
        }
        // n = 2: 2p(1-p) + p^2/2.
        for p in [0.1, 0.5, 0.9] {
            let expected = 2.0 * p * (1.0 - p) + p * p / 2.0;
            assert!((binomial_inverse_moment(2, p) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_moment_bounded_by_five_over_np() {
        for &(n, p) in &[(10usize, 0.1), (10, 0.5), (100, 0.02), (1000, 0.001), (50, 1.0)] {
            let np = n as f64 * p;
            assert!(np >= 1.0);
            let val = binomial_inverse_moment(n, p);
            assert!(
                val <= 5.0 / np,
                "E[1/X] = {val} exceeds 5/(np) = {} for n={n} p={p}",
                5.0 / np
            );
        }
    }

    #[test]
    fn inverse_moment_monotone() {
        // Increasing in p while np <= 1 (mass moves off the excluded X = 0
        // atom); decreasing in n once np >= 1 (X concentrates upward).
        let ps = [0.002, 0.005, 0.01, 0.02];
        for w in ps.windows(2) {
            assert!(binomial_inverse_moment(50, w[0]) < binomial_inverse_moment(50, w[1]));
        }
        let ns = [20usize, 40, 80, 160];
        for w in ns.windows(2) {
            assert!(binomial_inverse_moment(w[0], 0.1) > binomial_inverse_moment(w[1], 0.1));
        }
    }

    #[test]
    fn plugin_mse_single_always_observed_arm() {
        // k = 1, pi_b = (1), r = 1/2, n = 1: no bias, value 0.25 * E[1/n(1)] = 0.25.
        let inst = BanditInstance::new(
            Policy::uniform(1),
            Policy::uniform(1),
            vec![0.5],
            1.0,
        )
        .unwrap();
        assert!((plugin_mse_exact(&inst, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plugin_mse_no_bias_when_support_covered() {
        // Behavior puts mass 1 on the single target-supported arm: the bias
        // term is zero for any n, and variance decays with n.
        let t = validate_policy(&[1.0, 0.0]).unwrap();
        let b = validate_policy(&[1.0, 0.0]).unwrap();
        let inst = BanditInstance::new(t, b, vec![0.5, 0.3], 1.0).unwrap();
        for n in [1usize, 4, 16] {
            let mse = plugin_mse_exact(&inst, n);
            let expected = 0.25 * binomial_inverse_moment(n, 1.0);
            assert!((mse - expected).abs() < 1e-15, "n = {n}");
        }
    }

    #[test]
    fn mc_zero_reward_instance_has_zero_mse() {
        let inst = BanditInstance::new(
            Policy::uniform(2),
            Policy::uniform(2),
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        let report = monte_carlo_mse(
            &EstimatorKind::PlugIn,
            &inst,
            20,
            100,
            7,
            SamplingMode::Multinomial,
        )
        .unwrap();
        assert_eq!(report.mean_squared_error, 0.0);
        assert_eq!(report.std_error, 0.0);
    }

    #[test]
    fn mc_plug_in_agrees_with_exact() {
        let inst = BanditInstance::new(
            validate_policy(&[0.6, 0.4]).unwrap(),
            validate_policy(&[0.3, 0.7]).unwrap(),
            vec![0.8, 0.2],
            1.0,
        )
        .unwrap();
        let n = 6;
        let report = monte_carlo_mse(
            &EstimatorKind::PlugIn,
            &inst,
            n,
            40_000,
            123,
            SamplingMode::Multinomial,
        )
        .unwrap();
        let exact = plugin_mse_exact(&inst, n);
        assert!(
            (report.mean_squared_error - exact).abs() <= 4.0 * report.std_error,
            "mc {} vs exact {exact} (se {})",
            report.mean_squared_error,
            report.std_error
        );
    }

    #[test]
    fn mc_is_on_policy_variance() {
        // On-policy IS is the sample mean of i.i.d. rewards; its MSE is
        // Var(R)/n with Var(R) = r_max V - V^2 for two-point rewards.
        let p = validate_policy(&[0.25, 0.75]).unwrap();
        let inst = BanditInstance::new(p.clone(), p, vec![0.9, 0.3], 1.0).unwrap();
        let v = value_function(&inst);
        let n = 10;
        let expected = (v - v * v) / n as f64;
        let report = monte_carlo_mse(
            &EstimatorKind::ImportanceSampling,
            &inst,
            n,
            40_000,
            99,
            SamplingMode::Multinomial,
        )
        .unwrap();
        assert!(
            (report.mean_squared_error - expected).abs() <= 4.0 * report.std_error,
            "mc {} vs closed form {expected}",
            report.mean_squared_error
        );
    }

    #[test]
    fn mc_deterministic_across_thread_counts() {
        let inst = BanditInstance::new(
            validate_policy(&[0.5, 0.3, 0.2]).unwrap(),
            validate_policy(&[0.2, 0.5, 0.3]).unwrap(),
            vec![0.1, 0.9, 0.4],
            1.0,
        )
        .unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                monte_carlo_mse(
                    &EstimatorKind::PlugIn,
                    &inst,
                    15,
                    500,
                    42,
                    SamplingMode::Multinomial,
                )
                .unwrap()
            })
        };
        let single = run(1);
        let four = run(4);
        assert_eq!(single.mean_squared_error.to_bits(), four.mean_squared_error.to_bits());
        assert_eq!(single.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn loglog_exact_power_law() {
        let points: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 10_000.0]
            .iter()
            .map(|&n| (n, 7.0 / n))
            .collect();
        let fit = loglog_slope(&points).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert!((fit.intercept - 7.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn loglog_constant_has_zero_slope() {
        let points: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&n| (n, 0.3)).collect();
        let fit = loglog_slope(&points).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn loglog_noisy_power_law_recovers_exponent() {
        // mse = c n^(-1/2) with 1% multiplicative noise.
        use rand::Rng;
        let mut rng = crate::sampler::SeedSpec::new(5, 0).rng();
        let points: Vec<(f64, f64)> = (1..=30)
            .map(|i| {
                let n = 10.0 * 1.5f64.powi(i);
                let noise = 1.0 + 0.01 * (rng.random::<f64>() - 0.5);
                (n, 3.0 * n.powf(-0.5) * noise)
            })
            .collect();
        let fit = loglog_slope(&points).unwrap();
        assert!(
            (fit.slope + 0.5).abs() <= 3.0 * fit.stderr.max(1e-4),
            "slope {} +- {}",
            fit.slope,
            fit.stderr
        );
    }

    #[test]
    fn loglog_rejects_bad_input() {
        assert!(matches!(
            loglog_slope(&[(10.0, 1.0)]),
            Err(OpeError::NonPositiveInput)
        ));
        assert!(matches!(
            loglog_slope(&[(10.0, 1.0), (20.0, 0.0)]),
            Err(OpeError::NonPositiveInput)
        ));
        assert!(matches!(
            loglog_slope(&[(-1.0, 1.0), (20.0, 1.0)]),
            Err(OpeError::NonPositiveInput)
        ));
    }

    #[test]
    fn competitive_ratio_of_surrogate_itself_is_one() {
        let inst = BanditInstance::new(
            validate_policy(&[0.5, 0.5]).unwrap(),
            validate_policy(&[0.8, 0.2]).unwrap(),
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let report = competitive_ratio(0.0, &inst, 50, 500, 11).unwrap();
        assert_eq!(report.ratio, 0.0);
        let again = competitive_ratio(report.surrogate_mse, &inst, 50, 500, 11).unwrap();
        assert!((again.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_monotone_and_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [10.0, 20.0, 25.0, 40.0];
        assert!((spearman_rank_correlation(&xs, &ys) - 1.0).abs() < 1e-12);
        let ys_rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rank_correlation(&xs, &ys_rev) + 1.0).abs() < 1e-12);
        let with_ties = [1.0, 1.0, 2.0, 3.0];
        let r = spearman_rank_correlation(&with_ties, &[1.0, 1.0, 2.0, 3.0]);
        assert!((r - 1.0).abs() < 1e-12);
    }
}
