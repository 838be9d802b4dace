//! Runnable certification suites: the oracle and invariant checks a build
//! must pass, callable without the test harness (the CLI `selftest`
//! subcommand runs them end to end).
//!
//! Each suite returns a [`CheckOutcome`] with a pass flag and a short
//! diagnostic, never panicking on failure, so a binary can print one line
//! per suite and exit nonzero if any failed.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::ambiguity::{
    cp_bound, gaussian_ambiguity_sample, wasserstein_ball_sample, wasserstein_distance,
    DiscreteMeasure,
};
use crate::bellman::{brute_force_value, mc_bellman_target, tabular_bellman, tabular_solve, FiniteMdp};
use crate::core::{ActionVector, MdpConfig, ModeKind, RewardSpec, StateWindow};
use crate::linalg;
use crate::par;
use crate::rng::stream_rng;

/// Result of one certification suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self { name, passed: true, detail }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self { name, passed: false, detail }
    }
}

/// A random finite robust MDP with `1..=max_s` states, `1..=max_a` actions,
/// `1..=max_k` measures per pair, and rewards uniform on `(-1, 1)`.
pub fn random_finite_mdp(
    rng: &mut ChaCha12Rng,
    max_s: usize,
    max_a: usize,
    max_k: usize,
) -> FiniteMdp {
    let n_states = rng.random_range(1..=max_s);
    let n_actions = rng.random_range(1..=max_a);
    let mut reward = Vec::with_capacity(n_states);
    let mut ambiguity = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let mut r_row = Vec::with_capacity(n_actions);
        let mut p_row = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            r_row.push((0..n_states).map(|_| rng.random_range(-1.0..1.0)).collect());
            let n_measures = rng.random_range(1..=max_k);
            let measures: Vec<Vec<f64>> = (0..n_measures)
                .map(|_| random_probability_vector(rng, n_states))
                .collect();
            p_row.push(measures);
        }
        reward.push(r_row);
        ambiguity.push(p_row);
    }
    FiniteMdp { n_states, n_actions, reward, ambiguity }
}

fn random_probability_vector(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // pin the sum to exactly one against accumulated rounding
    let correction: f64 = 1.0 - p.iter().sum::<f64>();
    p[0] += correction;
    p
}

/// A random discrete measure with `1..=max_k` atoms in `R^dim`.
pub fn random_measure(rng: &mut ChaCha12Rng, max_k: usize, dim: usize) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_k);
    let atoms: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let weights = random_probability_vector(rng, k);
    DiscreteMeasure::new(atoms, weights).expect("constructed weights are a distribution")
}

/// Solved values must lie inside the brute-force horizon interval for
/// every state of every random MDP.
pub fn check_oracle_equivalence(n_mdps: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "oracle-equivalence";
    let alphas = [0.3, 0.45, 0.9];
    let failures: Vec<String> = par::map_indexed(n_mdps, |i| {
        let mut rng = stream_rng(seed, &[100, i as u64]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 4);
        let alpha = alphas[i % alphas.len()];
        let table = match tabular_solve(&mdp, alpha, 1e-10) {
            Ok(t) => t,
            Err(e) => return Some(format!("mdp {i}: solve failed: {e}")),
        };
        for s in 0..mdp.n_states {
            match brute_force_value(&mdp, s, alpha, 6) {
                Ok((lo, hi)) => {
                    let v = table.values[s];
                    if v < lo || v > hi {
                        return Some(format!("mdp {i} state {s}: {v} outside [{lo}, {hi}]"));
                    }
                }
                Err(e) => return Some(format!("mdp {i}: brute force failed: {e}")),
            }
        }
        None
    })
    .into_iter()
    .flatten()
    .collect();
    if failures.is_empty() {
        CheckOutcome::pass(NAME, format!("{n_mdps} random MDPs inside brute-force intervals"))
    } else {
        CheckOutcome::fail(NAME, failures.join("; "))
    }
}

/// `||Tv - Tw||_inf <= alpha ||v - w||_inf` on random pairs.
pub fn check_contraction(n_trials: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "contraction";
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..n_trials as u64 {
        let mut rng = stream_rng(seed, &[101, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 4);
        let alpha = rng.random_range(0.05..0.95);
        let v: Vec<f64> = (0..mdp.n_states).map(|_| rng.random_range(-10.0..10.0)).collect();
        let w: Vec<f64> = (0..mdp.n_states).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (tv, _, _) = tabular_bellman(&mdp, &v, alpha);
        let (tw, _, _) = tabular_bellman(&mdp, &w, alpha);
        let lhs = tv
            .iter()
            .zip(&tw)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let rhs = alpha
            * v.iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
        worst_excess = worst_excess.max(lhs - rhs);
    }
    if worst_excess <= 1e-12 {
        CheckOutcome::pass(NAME, format!("worst excess {worst_excess:.3e} over {n_trials} trials"))
    } else {
        CheckOutcome::fail(NAME, format!("contraction violated by {worst_excess:.3e}"))
    }
}

/// With singleton ambiguity the robust solver must agree with a plain
/// textbook value iteration, and the Monte-Carlo target must coincide for
/// the non-robust mode and a zero-radius ball under one shared stream.
pub fn check_non_robust_reduction(n_mdps: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "non-robust-reduction";
    for i in 0..n_mdps as u64 {
        let mut rng = stream_rng(seed, &[102, i]);
        let mdp = random_finite_mdp(&mut rng, 5, 3, 1);
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                debug_assert_eq!(mdp.ambiguity[s][a].len(), 1);
            }
        }
        let alpha = rng.random_range(0.1..0.9);
        let robust = match tabular_solve(&mdp, alpha, 1e-10) {
            Ok(t) => t,
            Err(e) => return CheckOutcome::fail(NAME, format!("solve failed: {e}")),
        };
        let classic = classic_value_iteration(&mdp, alpha, 1e-10);
        for s in 0..mdp.n_states {
            if (robust.values[s] - classic[s]).abs() > 1e-8 {
                return CheckOutcome::fail(
                    NAME,
                    format!(
                        "mdp {i} state {s}: robust {} vs classic {}",
                        robust.values[s], classic[s]
                    ),
                );
            }
        }
    }

    // estimator side: shared stream, one measure
    let history = vec![
        vec![0.004],
        vec![-0.002],
        vec![0.01],
        vec![-0.006],
        vec![0.007],
        vec![0.001],
    ];
    let x = StateWindow::from_rows(&[vec![0.003], vec![-0.001]]).unwrap();
    let cfg = MdpConfig {
        alpha: 0.45,
        c_p: 1.0,
        epsilon: 0.0,
        q: 1,
        lambda_risk: 0.5,
        budget: 1.0,
        m: 2,
        d: 1,
        mode: ModeKind::NonRobust,
        n_measures: 1,
        n_mc: 16,
        batch: 1,
        epochs: 1,
        iter_a: 1,
        iter_v: 1,
        lr: 0.001,
        hidden: 8,
        tilde_epsilon: 1e-9,
        seed,
    };
    let spec = RewardSpec::new(0.5, vec![4e-5], 1).expect("valid spec");
    let action = ActionVector(vec![0.6]);
    let value = |w: &StateWindow| w.flat().iter().sum::<f64>();
    let non_robust = crate::ambiguity::AmbiguityMode::NonRobust {
        history: history.clone(),
        tilde_epsilon: 1e-9,
    };
    let zero_ball = crate::ambiguity::AmbiguityMode::WassersteinBall {
        history,
        epsilon: 0.0,
        q: 1,
        tilde_epsilon: 1e-9,
    };
    let mut rng_a = stream_rng(seed, &[103]);
    let mut rng_b = stream_rng(seed, &[103]);
    let t_a = mc_bellman_target(&x, &action, &value, &non_robust, &spec, &cfg, &mut rng_a)
        .expect("target evaluates");
    let t_b = mc_bellman_target(&x, &action, &value, &zero_ball, &spec, &cfg, &mut rng_b)
        .expect("target evaluates");
    if (t_a - t_b).abs() > 1e-12 {
        return CheckOutcome::fail(NAME, format!("mc targets diverge: {t_a} vs {t_b}"));
    }
    CheckOutcome::pass(NAME, format!("{n_mdps} singleton MDPs match textbook iteration"))
}

/// Plain non-robust value iteration, written independently of the robust
/// operator: expects exactly one measure per pair.
fn classic_value_iteration(mdp: &FiniteMdp, alpha: f64, tol: f64) -> Vec<f64> {
    let mut v = vec![0.0; mdp.n_states];
    let threshold = tol * (1.0 - alpha) / alpha;
    loop {
        let mut next = vec![f64::NEG_INFINITY; mdp.n_states];
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let p = &mdp.ambiguity[s][a][0];
                let q_value: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(sn, &prob)| prob * (mdp.reward[s][a][sn] + alpha * v[sn]))
                    .sum();
                if q_value > next[s] {
                    next[s] = q_value;
                }
            }
        }
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if delta <= threshold {
            return v;
        }
    }
}

/// Every ball sample must pass the exact-LP membership check.
pub fn check_ball_certification(n_samples: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "ball-certification";
    let radii = [0.01, 0.05, 0.1, 0.3];
    let failures: Vec<String> = par::map_indexed(n_samples, |i| {
        let mut rng = stream_rng(seed, &[104, i as u64]);
        let dim = rng.random_range(1..=5);
        let reference = random_measure(&mut rng, 20, dim);
        let q = if i % 2 == 0 { 1 } else { 2 };
        let epsilon = radii[i % radii.len()];
        let sample = match wasserstein_ball_sample(&reference, epsilon, q, &mut rng) {
            Ok(s) => s,
            Err(e) => return Some(format!("sample {i}: {e}")),
        };
        match wasserstein_distance(&sample, &reference, q) {
            Ok(dist) if dist <= epsilon + 1e-9 => None,
            Ok(dist) => Some(format!("sample {i}: W_{q} = {dist} > {epsilon}")),
            Err(e) => Some(format!("sample {i}: LP failed: {e}")),
        }
    })
    .into_iter()
    .flatten()
    .collect();
    if failures.is_empty() {
        CheckOutcome::pass(NAME, format!("{n_samples} samples certified by the exact LP"))
    } else {
        CheckOutcome::fail(NAME, format!("{} violations: {}", failures.len(), failures[0].clone()))
    }
}

/// Every Gaussian parameter draw must satisfy both moment inequalities and
/// the combined growth bound.
pub fn check_moment_bounds(n_samples: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "moment-bounds";
    let radii = [0.005, 0.025, 0.05, 0.15];
    let m = 10usize;
    let failures: Vec<String> = par::map_indexed(n_samples, |i| {
        let mut rng = stream_rng(seed, &[105, i as u64]);
        let d = rng.random_range(1..=5);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let x = StateWindow::from_rows(&rows).expect("rows are rectangular");
        let epsilon = radii[i % radii.len()];
        let g = match gaussian_ambiguity_sample(&x, epsilon, &mut rng) {
            Ok(g) => g,
            Err(e) => return Some(format!("sample {i}: {e}")),
        };
        let xn = x.norm();
        let mf = m as f64;
        let mu_sq = linalg::l2_norm(g.mu()).powi(2);
        if mu_sq > (epsilon * epsilon + 1.0 / mf) * (1.0 + xn * xn) + 1e-10 {
            return Some(format!("sample {i}: mean bound violated"));
        }
        let tr = g.trace();
        if tr > 4.0 * (epsilon * epsilon + 1.0) / (mf - 1.0) * (1.0 + xn * xn) + 1e-10 {
            return Some(format!("sample {i}: trace bound violated"));
        }
        let c_p = cp_bound(epsilon, m).expect("m >= 2");
        if 1.0 + xn + (mu_sq + tr).sqrt() > c_p * (1.0 + xn) + 1e-10 {
            return Some(format!("sample {i}: combined growth bound violated"));
        }
        None
    })
    .into_iter()
    .flatten()
    .collect();
    if failures.is_empty() {
        CheckOutcome::pass(NAME, format!("{n_samples} parameter draws within the proof bounds"))
    } else {
        CheckOutcome::fail(NAME, format!("{} violations: {}", failures.len(), failures[0].clone()))
    }
}

/// The full certification run at the documented scales.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_oracle_equivalence(200, seed),
        check_contraction(100, seed),
        check_non_robust_reduction(50, seed),
        check_ball_certification(10_000, seed),
        check_moment_bounds(10_000, seed),
    ]
}
