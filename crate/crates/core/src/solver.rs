//! Exact solver for the convex program behind the optimal Switch subset.
//!
//! The program
//!
//! ```text
//!   min_v  sqrt( (1/8n) * sum_a (pi_t(a) - v(a))^2 / pi_b(a) )  +  (1/2) * sum_a |v(a)|
//! ```
//!
//! has a minimizer `v*` with `0 <= v* <= pi_t` whose support `S*` is a suffix
//! of the actions sorted by likelihood ratio. On that suffix the stationarity
//! condition pins `v*(a) = pi_t(a) - c * pi_b(a)` for a single threshold
//! `c = sqrt(2n (T1 + T2))`, which for a candidate suffix `S` has the closed
//! form `c = sqrt(2n T2(S) / (1 - 2n pi_b(S)))`. The solver enumerates all
//! suffixes whose threshold separates the sorted ratios consistently, plus
//! the two boundary solutions `v = 0` and `v = pi_t`, and returns the global
//! minimum. No iterative descent and no tolerance tuning is involved.
//!
//! Actions with `pi_b(a) = 0 < pi_t(a)` make the quadratic term infinite
//! unless `v(a) = pi_t(a)`, so they are pre-assigned to `S*` before the
//! suffix enumeration.

use crate::bandit::{likelihood_ratio, ActionSet, LikelihoodRatio, Policy};
use crate::error::OpeError;

/// Default exhaustive-search limit: 2^15 subsets.
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 15;

/// Solution of the convex program: the optimal subset and its certificates.
#[derive(Debug, Clone)]
pub struct SwitchSolution {
    /// Support of `v_star`: the actions handled by the plug-in part.
    pub s_star: ActionSet,
    /// Threshold level on the likelihood-ratio scale.
    pub c: f64,
    /// The minimizer itself.
    pub v_star: Vec<f64>,
    /// Minimum objective value of the program.
    pub dual_value: f64,
    /// sum over S* of (pi_t - v*)^2 / pi_b.
    pub t1: f64,
    /// sum outside S* of pi_b * rho^2.
    pub t2: f64,
    /// Slack 1 - 2n pi_b(S*), in [0, 1]; strictly interior solutions have
    /// epsilon in (0, 1).
    pub epsilon: f64,
}

/// Minimax-risk characterization evaluated at S*, exact up to the universal
/// constants in the matching upper and lower bounds.
#[derive(Debug, Clone, Copy)]
pub struct RiskSurrogate {
    /// r_max^2 * (pi_t(S*)^2 + T2 / n).
    pub value: f64,
    pub pi_t_sstar: f64,
    pub t2_over_n: f64,
}

/// pi_b(a) * rho(a)^2 with the 0/0 = 0 convention; infinite exactly when
/// pi_b(a) = 0 < pi_t(a).
fn pb_rho_sq(pt: f64, pb: f64) -> f64 {
    if pt == 0.0 {
        0.0
    } else if pb == 0.0 {
        f64::INFINITY
    } else {
        pt * pt / pb
    }
}

/// The objective of the convex program at an arbitrary point `v`.
///
/// Terms with pi_b(a) = 0 contribute 0 if v(a) = pi_t(a) and infinity
/// otherwise (the feasibility limit of the quadratic).
pub fn key_opt_objective(target: &Policy, behavior: &Policy, n: usize, v: &[f64]) -> f64 {
    let mut quad = 0.0;
    for ((&pt, &pb), &va) in target.weights().iter().zip(behavior.weights()).zip(v) {
        let diff = pt - va;
        if pb == 0.0 {
            if diff != 0.0 {
                return f64::INFINITY;
            }
        } else {
            quad += diff * diff / pb;
        }
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    (quad / (8.0 * n as f64)).sqrt() + 0.5 * l1
}

struct Candidate {
    v: Vec<f64>,
    in_set: Vec<bool>,
    c: f64,
    t1: f64,
    t2: f64,
    objective: f64,
}

/// Solve the convex program exactly; see the module docs for the algorithm.
pub fn solve_optimal_subset(
    target: &Policy,
    behavior: &Policy,
    n: usize,
) -> Result<SwitchSolution, OpeError> {
    let k = target.k();
    let rho = likelihood_ratio(target, behavior)?;
    let nf = n as f64;

    // Partition: forced actions (pi_b = 0 < pi_t) always enter S* with
    // v*(a) = pi_t(a); actions with pi_b > 0 take part in the suffix scan.
    let mut forced: Vec<usize> = Vec::new();
    let mut free: Vec<(usize, f64)> = Vec::new(); // (action, rho)
    for a in 0..k {
        match rho[a] {
            LikelihoodRatio::Infinite => forced.push(a),
            LikelihoodRatio::Finite(r) => {
                if behavior.weight(a) > 0.0 {
                    free.push((a, r));
                }
                // pi_b = 0 and pi_t = 0: inert, never in S*.
            }
        }
    }
    free.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));

    let m = free.len();

    // For a suffix of size t (the t largest ratios):
    //   pb_suffix[t]     = pi_b mass on the suffix,
    //   t2_for_suffix[t] = sum of pi_b rho^2 over the excluded prefix,
    // each accumulated from its own end so neither is a lossy subtraction.
    let mut pb_suffix = vec![0.0; m + 1];
    for t in 1..=m {
        let (a, _) = free[m - t];
        pb_suffix[t] = pb_suffix[t - 1] + behavior.weight(a);
    }
    let mut t2_for_suffix = vec![0.0; m + 1];
    for t in (0..m).rev() {
        let (a, r) = free[m - t - 1];
        t2_for_suffix[t] = t2_for_suffix[t + 1] + behavior.weight(a) * r * r;
    }

    let mut best: Option<Candidate> = None;

    let consider = |cand: Candidate, best: &mut Option<Candidate>| {
        let better = match best {
            None => true,
            Some(b) => cand.objective < b.objective,
        };
        if better {
            *best = Some(cand);
        }
    };

    // Boundary solution v = 0 on the free actions (S* = forced only).
    {
        let mut v = vec![0.0; k];
        let mut in_set = vec![false; k];
        for &a in &forced {
            v[a] = target.weight(a);
            in_set[a] = true;
        }
        let t2 = t2_for_suffix[0];
        let objective = key_opt_objective(target, behavior, n, &v);
        consider(
            Candidate {
                v,
                in_set,
                c: (2.0 * nf * t2).sqrt(),
                t1: 0.0,
                t2,
                objective,
            },
            &mut best,
        );
    }

    // Interior candidates: suffixes of size t = 1..=m with pi_b(S) < 1/(2n),
    // accepted when the closed-form threshold separates the sorted ratios.
    for t in 1..=m {
        let pb_s = pb_suffix[t];
        let slack = 1.0 - 2.0 * nf * pb_s;
        if slack <= 0.0 {
            break; // pb_suffix grows with t, so no larger suffix is feasible
        }
        let t2 = t2_for_suffix[t];
        let c = (2.0 * nf * t2 / slack).sqrt();
        let rho_in_min = free[m - t].1;
        let rho_out_max = if t < m { free[m - t - 1].1 } else { 0.0 };
        if !(rho_in_min > c) || (t < m && rho_out_max > c) {
            continue;
        }
        let mut v = vec![0.0; k];
        let mut in_set = vec![false; k];
        for &a in &forced {
            v[a] = target.weight(a);
            in_set[a] = true;
        }
        let mut feasible = true;
        for &(a, _) in &free[m - t..] {
            let va = target.weight(a) - c * behavior.weight(a);
            if va <= 0.0 {
                feasible = false;
                break;
            }
            v[a] = va;
            in_set[a] = true;
        }
        if !feasible {
            continue;
        }
        let t1 = c * c * pb_s;
        let objective = key_opt_objective(target, behavior, n, &v);
        consider(
            Candidate {
                v,
                in_set,
                c,
                t1,
                t2,
                objective,
            },
            &mut best,
        );
    }

    // Boundary solution v = pi_t (S* = supp(pi_t)).
    {
        let mut v = vec![0.0; k];
        let mut in_set = vec![false; k];
        for a in 0..k {
            if target.weight(a) > 0.0 {
                v[a] = target.weight(a);
                in_set[a] = true;
            }
        }
        let objective = key_opt_objective(target, behavior, n, &v);
        consider(
            Candidate {
                v,
                in_set,
                c: 0.0,
                t1: 0.0,
                t2: 0.0,
                objective,
            },
            &mut best,
        );
    }

    let chosen = best.expect("boundary candidates always exist");
    let s_star = ActionSet::from_mask(chosen.in_set);
    let pb_sstar = behavior.mass_on(&s_star);
    let epsilon = (1.0 - 2.0 * nf * pb_sstar).clamp(0.0, 1.0);
    Ok(SwitchSolution {
        s_star,
        c: chosen.c,
        v_star: chosen.v,
        dual_value: chosen.objective,
        t1: chosen.t1,
        t2: chosen.t2,
        epsilon,
    })
}

/// The subset-selection objective pi_t(S)^2 + sum_{a not in S} pi_b rho^2 / n.
///
/// Infinite when some action outside `S` has pi_b(a) = 0 < pi_t(a).
pub fn subset_objective(target: &Policy, behavior: &Policy, n: usize, s: &ActionSet) -> f64 {
    let pi_t_s = target.mass_on(s);
    let tail: f64 = (0..target.k())
        .filter(|&a| !s.contains(a))
        .map(|a| pb_rho_sq(target.weight(a), behavior.weight(a)))
        .sum();
    pi_t_s * pi_t_s + tail / n as f64
}

/// Exhaustive minimization of the subset-selection objective over all 2^k
/// subsets. Actions with infinite likelihood ratio are pinned into every
/// candidate subset. Ties go to the earliest subset in mask order, so the
/// empty set wins exact ties.
pub fn brute_force_subset(
    target: &Policy,
    behavior: &Policy,
    n: usize,
    k_limit: usize,
) -> Result<(ActionSet, f64), OpeError> {
    let k = target.k();
    if k > k_limit {
        return Err(OpeError::TooLarge { k, k_limit });
    }
    if target.k() != behavior.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: behavior.k(),
        });
    }
    let forced: Vec<usize> = (0..k)
        .filter(|&a| behavior.weight(a) == 0.0 && target.weight(a) > 0.0)
        .collect();
    let free: Vec<usize> = (0..k)
        .filter(|&a| !(behavior.weight(a) == 0.0 && target.weight(a) > 0.0))
        .collect();

    let mut best_mask = 0u32;
    let mut best_obj = f64::INFINITY;
    for mask in 0u32..(1u32 << free.len()) {
        let mut indices = forced.clone();
        for (bit, &a) in free.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                indices.push(a);
            }
        }
        let s = ActionSet::from_indices(k, &indices);
        let obj = subset_objective(target, behavior, n, &s);
        if obj < best_obj {
            best_obj = obj;
            best_mask = mask;
        }
    }
    let mut indices = forced;
    for (bit, &a) in free.iter().enumerate() {
        if best_mask & (1 << bit) != 0 {
            indices.push(a);
        }
    }
    Ok((ActionSet::from_indices(k, &indices), best_obj))
}

/// r_max^2 * (pi_t(S*)^2 + sum_{a not in S*} pi_b rho^2 / n) at the solver's S*.
pub fn minimax_risk_surrogate(
    target: &Policy,
    behavior: &Policy,
    n: usize,
    r_max: f64,
) -> Result<RiskSurrogate, OpeError> {
    let sol = solve_optimal_subset(target, behavior, n)?;
    let pi_t_sstar = target.mass_on(&sol.s_star);
    let t2_over_n = sol.t2 / n as f64;
    Ok(RiskSurrogate {
        value: r_max * r_max * (pi_t_sstar * pi_t_sstar + t2_over_n),
        pi_t_sstar,
        t2_over_n,
    })
}

/// The Switch MSE guarantee 3 r_max^2 (pi_t(S)^2 + sum_{a not in S} pi_b rho^2 / n).
///
/// Returns `f64::INFINITY` when some action outside `S` has an infinite
/// likelihood ratio: no finite bound holds for that subset.
pub fn switch_mse_upper_bound(
    target: &Policy,
    behavior: &Policy,
    n: usize,
    r_max: f64,
    s: &ActionSet,
) -> Result<f64, OpeError> {
    if target.k() != behavior.k() {
        return Err(OpeError::DimensionMismatch {
            expected: target.k(),
            got: behavior.k(),
        });
    }
    Ok(3.0 * r_max * r_max * subset_objective(target, behavior, n, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::validate_policy;

    #[test]
    fn on_policy_returns_empty_set() {
        for k in [1usize, 2, 5, 9] {
            let p = Policy::uniform(k);
            for n in [1usize, 3, 10, 1000] {
                let sol = solve_optimal_subset(&p, &p, n).unwrap();
                assert!(sol.s_star.is_empty(), "k={k} n={n}");
                assert!(sol.v_star.iter().all(|&v| v == 0.0));
                // Objective is sqrt(sum pi_t^2 / pi_b / (8n)) = sqrt(1 / (8n)).
                let expect = (1.0 / (8.0 * n as f64)).sqrt();
                assert!((sol.dual_value - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_behavior_probability_forces_membership() {
        let t = validate_policy(&[0.5, 0.5]).unwrap();
        let b = validate_policy(&[1.0, 0.0]).unwrap();
        for n in [1usize, 10, 100] {
            let sol = solve_optimal_subset(&t, &b, n).unwrap();
            assert!(sol.s_star.contains(1));
            assert_eq!(sol.v_star[1], 0.5);
        }
    }

    #[test]
    fn brute_force_single_arm_prefers_empty() {
        let p = validate_policy(&[1.0]).unwrap();
        for n in [1usize, 2, 50] {
            let (s, obj) = brute_force_subset(&p, &p, n, DEFAULT_BRUTE_FORCE_LIMIT).unwrap();
            assert!(s.is_empty());
            assert!((obj - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn brute_force_rejects_large_k() {
        let p = Policy::uniform(16);
        assert!(matches!(
            brute_force_subset(&p, &p, 5, 15),
            Err(OpeError::TooLarge { k: 16, k_limit: 15 })
        ));
    }

    #[test]
    fn large_sample_regime_empty_set() {
        // n well above max rho^2 / sum pi_b rho^2 forces S* = empty and the
        // brute force agrees.
        let t = validate_policy(&[0.6, 0.3, 0.1]).unwrap();
        let b = validate_policy(&[0.2, 0.3, 0.5]).unwrap();
        let n = 10_000;
        let sol = solve_optimal_subset(&t, &b, n).unwrap();
        assert!(sol.s_star.is_empty());
        let (s, _) = brute_force_subset(&t, &b, n, 15).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn surrogate_on_policy_uniform() {
        let p = Policy::uniform(2);
        let sur = minimax_risk_surrogate(&p, &p, 100, 1.0).unwrap();
        assert!((sur.value - 0.01).abs() < 1e-15);
        assert_eq!(sur.pi_t_sstar, 0.0);
    }

    #[test]
    fn surrogate_forced_inclusion_case() {
        let t = validate_policy(&[0.5, 0.5]).unwrap();
        let b = validate_policy(&[1.0, 0.0]).unwrap();
        let sur = minimax_risk_surrogate(&t, &b, 100, 1.0).unwrap();
        // S* = {1}: value = 0.25 + (1 * 0.25) / 100.
        assert!((sur.value - 0.2525).abs() < 1e-12, "value {}", sur.value);
    }

    #[test]
    fn surrogate_scales_with_r_max_squared() {
        let t = validate_policy(&[0.7, 0.3]).unwrap();
        let b = validate_policy(&[0.4, 0.6]).unwrap();
        let one = minimax_risk_surrogate(&t, &b, 37, 1.0).unwrap().value;
        let two = minimax_risk_surrogate(&t, &b, 37, 2.0).unwrap().value;
        assert!((two - 4.0 * one).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_full_and_empty_sets() {
        let p = Policy::uniform(3);
        let full = switch_mse_upper_bound(&p, &p, 10, 1.0, &ActionSet::full(3)).unwrap();
        assert!((full - 3.0).abs() < 1e-12);
        let empty = switch_mse_upper_bound(&p, &p, 10, 1.0, &ActionSet::empty(3)).unwrap();
        assert!((empty - 0.3).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_hand_computed() {
        // S = empty, pi_t = (1,0), pi_b = (.5,.5), n = 10:
        // 3 * (0 + 0.5 * 4 / 10) = 0.6.
        let t = validate_policy(&[1.0, 0.0]).unwrap();
        let b = validate_policy(&[0.5, 0.5]).unwrap();
        let bound = switch_mse_upper_bound(&t, &b, 10, 1.0, &ActionSet::empty(2)).unwrap();
        assert!((bound - 0.6).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_infinite_outside_s() {
        let t = validate_policy(&[0.5, 0.5]).unwrap();
        let b = validate_policy(&[1.0, 0.0]).unwrap();
        let bound = switch_mse_upper_bound(&t, &b, 10, 1.0, &ActionSet::empty(2)).unwrap();
        assert!(bound.is_infinite());
    }

    #[test]
    fn interior_solution_certificates() {
        // The scaling-experiment construction at k = 100 has an interior S*
        // with ten low-probability arms.
        let k = 100usize;
        let root = 10usize;
        let mut b = vec![1.0 / (k * k) as f64; root];
        let high = (1.0 - 1.0 / (k as f64).powf(1.5)) / (k - root) as f64;
        b.extend(std::iter::repeat(high).take(k - root));
        let behavior = validate_policy(&b).unwrap();
        let target = Policy::uniform(k);
        let n = 150;
        let sol = solve_optimal_subset(&target, &behavior, n).unwrap();
        assert_eq!(sol.s_star.len(), root);
        for a in 0..root {
            assert!(sol.s_star.contains(a));
        }
        assert!(sol.epsilon > 0.0 && sol.epsilon < 1.0);
        // KKT residual (b): c^2 = 2n (T1 + T2).
        let lhs = sol.c * sol.c;
        let rhs = 2.0 * n as f64 * (sol.t1 + sol.t2);
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        // property (b) of the optimum: T1 = (1 - eps)/eps * T2.
        let t1_expect = (1.0 - sol.epsilon) / sol.epsilon * sol.t2;
        assert!((sol.t1 - t1_expect).abs() <= 1e-9 * sol.t1.max(1.0));
        // Optimal-value identity: dual = pi_t(S*)/2 + sqrt(eps T2 / 8n).
        let closed =
            0.5 * target.mass_on(&sol.s_star) + (sol.epsilon * sol.t2 / (8.0 * n as f64)).sqrt();
        assert!((sol.dual_value - closed).abs() <= 1e-12);
    }
}
