//! Operator-level properties of the robust Bellman machinery, each checked
//! against quantities computed by independent means: monotonicity,
//! constant-shift covariance, the ordering under larger ambiguity sets,
//! and the local-to-global identity evaluated by exact finite-horizon
//! enumeration of the extracted stationary pair.

mod common;

use rand::Rng;
use robust_mdp::bellman::{tabular_bellman, tabular_solve, FiniteMdp};
use robust_mdp::rng::stream_rng;
use robust_mdp::selfcheck::random_finite_mdp;

const SEED: u64 = 4321;

#[test]
fn operator_is_monotone() {
    for i in 0..50u64 {
        let mut rng = stream_rng(SEED, &[1, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 4);
        let alpha = rng.random_range(0.1..0.9);
        let v: Vec<f64> = (0..mdp.n_states).map(|_| rng.random_range(-5.0..5.0)).collect();
        // w dominates v componentwise
        let w: Vec<f64> = v.iter().map(|x| x + rng.random_range(0.0..3.0)).collect();
        let (tv, _, _) = tabular_bellman(&mdp, &v, alpha);
        let (tw, _, _) = tabular_bellman(&mdp, &w, alpha);
        for s in 0..mdp.n_states {
            assert!(
                tv[s] <= tw[s] + 1e-12,
                "mdp {i} state {s}: Tv = {} above Tw = {}",
                tv[s],
                tw[s]
            );
        }
    }
}

#[test]
fn operator_shifts_constants_by_alpha() {
    for i in 0..50u64 {
        let mut rng = stream_rng(SEED, &[2, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 4);
        let alpha = rng.random_range(0.1..0.9);
        let v: Vec<f64> = (0..mdp.n_states).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = rng.random_range(-4.0..4.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let (tv, _, _) = tabular_bellman(&mdp, &v, alpha);
        let (t_shifted, _, _) = tabular_bellman(&mdp, &shifted, alpha);
        for s in 0..mdp.n_states {
            assert!(
                (t_shifted[s] - (tv[s] + alpha * c)).abs() < 1e-10,
                "mdp {i} state {s}: shift identity violated"
            );
        }
    }
}

#[test]
fn larger_ambiguity_sets_never_raise_the_value() {
    for i in 0..40u64 {
        let mut rng = stream_rng(SEED, &[3, i]);
        let base = random_finite_mdp(&mut rng, 5, 3, 3);
        let alpha = rng.random_range(0.1..0.85);
        let solved_base = tabular_solve(&base, alpha, 1e-10).unwrap();

        // enlarge a few ambiguity sets with fresh measures
        let mut enlarged = base.clone();
        for _ in 0..3 {
            let s = rng.random_range(0..enlarged.n_states);
            let a = rng.random_range(0..enlarged.n_actions);
            let raw: Vec<f64> =
                (0..enlarged.n_states).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut p: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let correction: f64 = 1.0 - p.iter().sum::<f64>();
            p[0] += correction;
            enlarged.ambiguity[s][a].push(p);
        }
        let solved_enlarged = tabular_solve(&enlarged, alpha, 1e-10).unwrap();
        for s in 0..base.n_states {
            assert!(
                solved_enlarged.values[s] <= solved_base.values[s] + 1e-8,
                "mdp {i} state {s}: value rose after enlarging the ambiguity set"
            );
        }
    }
}

/// Exact n-step expected discounted reward of a fixed stationary
/// (policy, kernel) pair by distribution-vector propagation.
fn stationary_pair_value(
    mdp: &FiniteMdp,
    policy: &[usize],
    kernel: &[usize],
    s0: usize,
    alpha: f64,
    horizon: usize,
) -> f64 {
    let n = mdp.n_states;
    let mut dist = vec![0.0; n];
    dist[s0] = 1.0;
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        let mut step_reward = 0.0;
        let mut next_dist = vec![0.0; n];
        for s in 0..n {
            if dist[s] == 0.0 {
                continue;
            }
            let a = policy[s];
            let p = &mdp.ambiguity[s][a][kernel[s]];
            for (sn, &prob) in p.iter().enumerate() {
                if prob > 0.0 {
                    step_reward += dist[s] * prob * mdp.reward[s][a][sn];
                    next_dist[sn] += dist[s] * prob;
                }
            }
        }
        total += discount * step_reward;
        discount *= alpha;
        dist = next_dist;
    }
    total
}

#[test]
fn stationary_pair_attains_the_solved_value() {
    // the greedy action and worst kernel extracted at the fixed point,
    // followed forever, reproduce the robust value; checked by exact
    // finite-horizon expectation plus the geometric tail bound
    let horizon = 40;
    for i in 0..40u64 {
        let mut rng = stream_rng(SEED, &[4, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 4);
        let alpha = [0.3, 0.45, 0.7][(i % 3) as usize];
        let tol = 1e-11;
        let table = tabular_solve(&mdp, alpha, tol).unwrap();
        let r_max = mdp.max_abs_reward();
        let tail = alpha.powi(horizon as i32) * r_max / (1.0 - alpha);
        let slack = tail + tol / alpha + 1e-9;
        for s0 in 0..mdp.n_states {
            let truncated =
                stationary_pair_value(&mdp, &table.policy, &table.worst_kernel, s0, alpha, horizon);
            assert!(
                (truncated - table.values[s0]).abs() <= slack,
                "mdp {i} state {s0}: stationary pair value {truncated} vs solved {} (slack {slack})",
                table.values[s0]
            );
        }
    }
}

#[test]
fn singleton_reduction_matches_textbook_iteration() {
    for i in 0..30u64 {
        let mut rng = stream_rng(SEED, &[5, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 1);
        let alpha = rng.random_range(0.1..0.9);
        let robust = tabular_solve(&mdp, alpha, 1e-10).unwrap();
        let classic = common::classic_value_iteration(&mdp, alpha, 1e-10);
        for s in 0..mdp.n_states {
            assert!((robust.values[s] - classic[s]).abs() < 1e-8);
        }
    }
}
