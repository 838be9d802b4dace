#![allow(dead_code)] // each test target uses its own subset

//! Shared oracles for the integration suites. These stay independent of
//! the library's solver code paths: plain textbook implementations the
//! robust machinery is checked against.

use robust_mdp::bellman::FiniteMdp;

/// Standard non-robust value iteration for MDPs whose every pair carries a
/// single transition measure. Written against the textbook recursion, not
/// the library operator.
pub fn classic_value_iteration(mdp: &FiniteMdp, alpha: f64, tol: f64) -> Vec<f64> {
    assert!(mdp.ambiguity.iter().flatten().all(|set| set.len() == 1));
    let mut values = vec![0.0; mdp.n_states];
    let threshold = tol * (1.0 - alpha) / alpha;
    loop {
        let mut next = vec![f64::NEG_INFINITY; mdp.n_states];
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let p = &mdp.ambiguity[s][a][0];
                let q_value: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(sn, &prob)| prob * (mdp.reward[s][a][sn] + alpha * values[sn]))
                    .sum();
                if q_value > next[s] {
                    next[s] = q_value;
                }
            }
        }
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        values = next;
        if delta <= threshold {
            return values;
        }
    }
}

/// Componentwise maximizer of `a . r - lambda a' Sigma a` over the box
/// `[-budget, budget]^d` for diagonal or zero penalties: with lambda = 0
/// this is `budget * sign(r)`.
pub fn myopic_box_maximizer(next_return: &[f64], lambda: f64, sigma_diag: &[f64], budget: f64) -> Vec<f64> {
    next_return
        .iter()
        .zip(sigma_diag)
        .map(|(&r, &s)| {
            if lambda * s > 0.0 {
                (r / (2.0 * lambda * s)).clamp(-budget, budget)
            } else if r > 0.0 {
                budget
            } else if r < 0.0 {
                -budget
            } else {
                0.0
            }
        })
        .collect()
}
