//! The robust Bellman operator and its solvers.
//!
//! On a finite state/action space with finitely many transition measures
//! per pair, the operator
//!
//! ```text
//! Tv(s) = max_a min_{P in ambiguity(s,a)} sum_{s'} P(s') (r(s,a,s') + alpha v(s'))
//! ```
//!
//! is an `alpha`-contraction in the sup norm, so iterating from zero
//! converges to the unique robust value, and the greedy action / worst
//! kernel at the fixed point are the stationary optimizers.
//!
//! [`brute_force_value`] re-derives the same quantity by direct recursion
//! on the horizon, sharing no code with the iterative path, and brackets
//! the infinite-horizon value with the geometric tail bound. It exists to
//! cross-check the solver, not to be fast.
//!
//! [`mc_bellman_target`] is the Monte-Carlo estimator of `Tv` on the
//! continuous window space used during neural training: sample measures
//! from the ambiguity set, estimate the inner expectation with a common
//! set of next-state draws for the reward and continuation terms, take the
//! minimum.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{sample_next_state, AmbiguityError, AmbiguityMode};
use crate::core::{reward, ActionVector, CoreError, MdpConfig, RewardSpec, StateWindow};
use crate::par;

#[derive(Debug, Error)]
pub enum BellmanError {
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// An explicit finite robust MDP: a reward tensor and, for every
/// state/action pair, a non-empty list of candidate transition laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `reward[s][a][s']`
    pub reward: Vec<Vec<Vec<f64>>>,
    /// `ambiguity[s][a]` is the list of transition distributions over states.
    pub ambiguity: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FiniteMdp {
    pub fn validate(&self) -> Result<(), BellmanError> {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        if s_n == 0 || a_n == 0 {
            return Err(BellmanError::InvalidMdp("empty state or action space".into()));
        }
        if self.reward.len() != s_n || self.ambiguity.len() != s_n {
            return Err(BellmanError::InvalidMdp("outer dimension disagrees with n_states".into()));
        }
        for s in 0..s_n {
            if self.reward[s].len() != a_n || self.ambiguity[s].len() != a_n {
                return Err(BellmanError::InvalidMdp(format!(
                    "state {s}: action dimension disagrees with n_actions"
                )));
            }
            for a in 0..a_n {
                if self.reward[s][a].len() != s_n {
                    return Err(BellmanError::InvalidMdp(format!(
                        "reward[{s}][{a}] has wrong successor count"
                    )));
                }
                if self.reward[s][a].iter().any(|r| !r.is_finite()) {
                    return Err(BellmanError::InvalidMdp(format!(
                        "reward[{s}][{a}] contains non-finite entries"
                    )));
                }
                if self.ambiguity[s][a].is_empty() {
                    return Err(BellmanError::InvalidMdp(format!(
                        "ambiguity[{s}][{a}] is empty; every pair needs at least one measure"
                    )));
                }
                for (k, p) in self.ambiguity[s][a].iter().enumerate() {
                    if p.len() != s_n {
                        return Err(BellmanError::InvalidMdp(format!(
                            "ambiguity[{s}][{a}][{k}] has wrong length"
                        )));
                    }
                    if p.iter().any(|&w| w < 0.0 || !w.is_finite()) {
                        return Err(BellmanError::InvalidMdp(format!(
                            "ambiguity[{s}][{a}][{k}] has negative entries"
                        )));
                    }
                    let total: f64 = p.iter().sum();
                    if (total - 1.0).abs() > 1e-12 {
                        return Err(BellmanError::InvalidMdp(format!(
                            "ambiguity[{s}][{a}][{k}] sums to {total}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |acc, &r| acc.max(r.abs()))
    }

    pub fn max_measures(&self) -> usize {
        self.ambiguity.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }
}

/// Solved values with the greedy stationary policy and the worst-case
/// kernel selection (a measure index per state).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub worst_kernel: Vec<usize>,
    pub iterations: usize,
}

/// One application of the robust Bellman operator. Inner minimum and outer
/// maximum by exhaustive scan; exact ties keep the lowest index.
pub fn tabular_bellman(
    mdp: &FiniteMdp,
    v: &[f64],
    alpha: f64,
) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let updated = par::map_indexed(mdp.n_states, |s| {
        let mut best_value = f64::NEG_INFINITY;
        let mut best_action = 0usize;
        let mut best_kernel = 0usize;
        for a in 0..mdp.n_actions {
            let mut worst = f64::INFINITY;
            let mut worst_idx = 0usize;
            for (k, p) in mdp.ambiguity[s][a].iter().enumerate() {
                let mut expect = 0.0;
                for (s_next, &prob) in p.iter().enumerate() {
                    if prob > 0.0 {
                        expect += prob * (mdp.reward[s][a][s_next] + alpha * v[s_next]);
                    }
                }
                if expect < worst {
                    worst = expect;
                    worst_idx = k;
                }
            }
            if worst > best_value {
                best_value = worst;
                best_action = a;
                best_kernel = worst_idx;
            }
        }
        (best_value, best_action, best_kernel)
    });
    let mut values = Vec::with_capacity(mdp.n_states);
    let mut policy = Vec::with_capacity(mdp.n_states);
    let mut kernel = Vec::with_capacity(mdp.n_states);
    for (val, act, ker) in updated {
        values.push(val);
        policy.push(act);
        kernel.push(ker);
    }
    (values, policy, kernel)
}

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

/// Value iteration from `v = 0` until the successive difference certifies
/// `||v - v*||_inf <= tol` via the contraction bound
/// `||v* - T^n v|| <= alpha/(1-alpha) ||T^n v - T^{n-1} v||`.
pub fn tabular_solve(mdp: &FiniteMdp, alpha: f64, tol: f64) -> Result<ValueTable, BellmanError> {
    tabular_solve_capped(mdp, alpha, tol, DEFAULT_ITERATION_CAP)
}

pub fn tabular_solve_capped(
    mdp: &FiniteMdp,
    alpha: f64,
    tol: f64,
    cap: usize,
) -> Result<ValueTable, BellmanError> {
    mdp.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BellmanError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(tol > 0.0) {
        return Err(BellmanError::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let threshold = tol * (1.0 - alpha) / alpha;
    let mut v = vec![0.0; mdp.n_states];
    let mut residual = f64::INFINITY;
    for iteration in 1..=cap {
        let (next, policy, kernel) = tabular_bellman(mdp, &v, alpha);
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if residual <= threshold {
            return Ok(ValueTable { values: v, policy, worst_kernel: kernel, iterations: iteration });
        }
    }
    Err(BellmanError::NoConvergence { iterations: cap, residual })
}

const BRUTE_FORCE_CAP: f64 = 1e8;

/// Finite-horizon minimax value by direct recursion, plus the geometric
/// tail bound: returns `[v_n(s0) - slack, v_n(s0) + slack]` with
/// `slack = alpha^n R_max / (1 - alpha)`, which contains the true robust
/// value. Independent of the iterative solver by construction.
pub fn brute_force_value(
    mdp: &FiniteMdp,
    s0: usize,
    alpha: f64,
    horizon: usize,
) -> Result<(f64, f64), BellmanError> {
    mdp.validate()?;
    if s0 >= mdp.n_states {
        return Err(BellmanError::InvalidArgument(format!("state {s0} out of range")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BellmanError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let branching = (mdp.n_actions * mdp.max_measures()) as f64;
    if horizon as f64 * branching.powi(horizon as i32) > BRUTE_FORCE_CAP {
        return Err(BellmanError::TooLarge(format!(
            "horizon {horizon} with branching {branching} exceeds the enumeration cap"
        )));
    }

    fn recurse(
        mdp: &FiniteMdp,
        s: usize,
        depth: usize,
        alpha: f64,
        memo: &mut Vec<Vec<Option<f64>>>,
    ) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        if let Some(cached) = memo[depth][s] {
            return cached;
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions {
            let mut worst = f64::INFINITY;
            for p in &mdp.ambiguity[s][a] {
                let mut expect = 0.0;
                for (s_next, &prob) in p.iter().enumerate() {
                    if prob > 0.0 {
                        let continuation = recurse(mdp, s_next, depth - 1, alpha, memo);
                        expect += prob * (mdp.reward[s][a][s_next] + alpha * continuation);
                    }
                }
                worst = worst.min(expect);
            }
            best = best.max(worst);
        }
        memo[depth][s] = Some(best);
        best
    }

    let mut memo = vec![vec![None; mdp.n_states]; horizon + 1];
    let center = recurse(mdp, s0, horizon, alpha, &mut memo);
    let slack = alpha.powi(horizon as i32) * mdp.max_abs_reward() / (1.0 - alpha);
    Ok((center - slack, center + slack))
}

/// Monte-Carlo estimate of the robust Bellman target at `(x, a)`:
/// the minimum over sampled measures of the draw-averaged
/// `r(x, a, X1) + alpha v(X1)`, with the same draws feeding both terms.
/// Deterministic given the generator's stream.
pub fn mc_bellman_target(
    x: &StateWindow,
    a: &ActionVector,
    v: &(dyn Fn(&StateWindow) -> f64 + Sync),
    mode: &AmbiguityMode,
    reward_spec: &RewardSpec,
    cfg: &MdpConfig,
    rng: &mut ChaCha12Rng,
) -> Result<f64, BellmanError> {
    let measures = mode.sample_measures(x, cfg.n_measures, rng)?;
    let mut best = f64::INFINITY;
    for measure in &measures {
        let mut acc = 0.0;
        for _ in 0..cfg.n_mc {
            let x_next = sample_next_state(x, measure, rng)?;
            let r = reward(x, a, &x_next, reward_spec)?;
            acc += r + cfg.alpha * v(&x_next);
        }
        let avg = acc / cfg.n_mc as f64;
        if avg < best {
            best = avg;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ModeKind;
    use crate::rng::stream_rng;

    fn single_state_mdp(reward_value: f64) -> FiniteMdp {
        FiniteMdp {
            n_states: 1,
            n_actions: 1,
            reward: vec![vec![vec![reward_value]]],
            ambiguity: vec![vec![vec![vec![1.0]]]],
        }
    }

    #[test]
    fn zero_rewards_fix_zero() {
        let mdp = single_state_mdp(0.0);
        let (v, _, _) = tabular_bellman(&mdp, &[0.0], 0.5);
        assert_eq!(v, vec![0.0]);
        let table = tabular_solve(&mdp, 0.5, 1e-10).unwrap();
        assert_eq!(table.values, vec![0.0]);
        assert_eq!(table.iterations, 1);
    }

    #[test]
    fn one_step_reward_from_zero_values() {
        let mdp = single_state_mdp(1.0);
        let (v, _, _) = tabular_bellman(&mdp, &[0.0], 0.5);
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn geometric_series_fixed_point() {
        let mdp = single_state_mdp(1.0);
        for alpha in [0.3, 0.5, 0.9] {
            let table = tabular_solve(&mdp, alpha, 1e-10).unwrap();
            assert!(
                (table.values[0] - 1.0 / (1.0 - alpha)).abs() < 1e-9,
                "alpha={alpha}"
            );
        }
    }

    #[test]
    fn solver_rejects_bad_arguments() {
        let mdp = single_state_mdp(1.0);
        assert!(matches!(
            tabular_solve(&mdp, 0.5, 0.0).unwrap_err(),
            BellmanError::InvalidArgument(_)
        ));
        assert!(matches!(
            tabular_solve(&mdp, 1.0, 1e-8).unwrap_err(),
            BellmanError::InvalidArgument(_)
        ));
    }

    #[test]
    fn no_convergence_is_reported() {
        let mdp = single_state_mdp(1.0);
        assert!(matches!(
            tabular_solve_capped(&mdp, 0.9, 1e-12, 3).unwrap_err(),
            BellmanError::NoConvergence { iterations: 3, .. }
        ));
    }

    #[test]
    fn adversary_picks_the_worse_measure() {
        // two measures: stay (value keeps accruing) vs jump to an absorbing
        // zero-reward state; the adversary must pick the jump
        let mdp = FiniteMdp {
            n_states: 2,
            n_actions: 1,
            reward: vec![
                vec![vec![1.0, 1.0]],
                vec![vec![0.0, 0.0]],
            ],
            ambiguity: vec![
                vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
                vec![vec![vec![0.0, 1.0]]],
            ],
        };
        let table = tabular_solve(&mdp, 0.5, 1e-10).unwrap();
        // worst case: earn 1 once, then absorb at zero
        assert!((table.values[0] - 1.0).abs() < 1e-9);
        assert_eq!(table.worst_kernel[0], 1);
    }

    #[test]
    fn brute_force_horizon_zero_is_the_vacuous_interval() {
        let mdp = single_state_mdp(1.0);
        let (lo, hi) = brute_force_value(&mdp, 0, 0.5, 0).unwrap();
        assert_eq!((lo, hi), (-2.0, 2.0));
    }

    #[test]
    fn brute_force_contains_geometric_value() {
        let mdp = single_state_mdp(1.0);
        for horizon in 0..6 {
            let (lo, hi) = brute_force_value(&mdp, 0, 0.5, horizon).unwrap();
            assert!(lo <= 2.0 && 2.0 <= hi, "horizon={horizon}");
        }
    }

    #[test]
    fn brute_force_rejects_oversized_enumeration() {
        let mdp = FiniteMdp {
            n_states: 1,
            n_actions: 40,
            reward: vec![vec![vec![0.0]; 40]],
            ambiguity: vec![vec![vec![vec![1.0]; 40]; 40]],
        };
        assert!(matches!(
            brute_force_value(&mdp, 0, 0.5, 6).unwrap_err(),
            BellmanError::TooLarge(_)
        ));
    }

    #[test]
    fn validate_rejects_broken_measures() {
        let mut mdp = single_state_mdp(1.0);
        mdp.ambiguity[0][0][0] = vec![0.9];
        assert!(mdp.validate().is_err());
        let mut mdp = single_state_mdp(1.0);
        mdp.ambiguity[0][0].clear();
        assert!(mdp.validate().is_err());
    }

    fn smoke_config(m: usize, d: usize) -> MdpConfig {
        MdpConfig {
            alpha: 0.45,
            c_p: 1.0,
            epsilon: 0.0,
            q: 1,
            lambda_risk: 0.0,
            budget: 1.0,
            m,
            d,
            mode: ModeKind::NonRobust,
            n_measures: 1,
            n_mc: 4,
            batch: 8,
            epochs: 1,
            iter_a: 1,
            iter_v: 1,
            lr: 0.001,
            hidden: 8,
            tilde_epsilon: 1e-9,
            seed: 0,
        }
    }

    #[test]
    fn mc_target_on_dirac_kernel_is_exact_reward() {
        // history with one candidate window -> Dirac kernel
        let x = StateWindow::from_rows(&[vec![0.1], vec![0.2]]).unwrap();
        let history = vec![vec![0.0], vec![0.05], vec![0.3]];
        let mode = AmbiguityMode::NonRobust { history, tilde_epsilon: 1e-9 };
        let cfg = smoke_config(2, 1);
        let spec = RewardSpec::risk_neutral(1);
        let a = ActionVector(vec![0.5]);
        let mut rng = stream_rng(0, &[]);
        let got = mc_bellman_target(&x, &a, &|_| 0.0, &mode, &spec, &cfg, &mut rng).unwrap();
        let expected = reward(&x, &a, &x.advanced(&[0.3]).unwrap(), &spec).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn mc_target_alpha_zero_ignores_continuation() {
        let x = StateWindow::from_rows(&[vec![0.1], vec![0.2]]).unwrap();
        let history = vec![vec![0.0], vec![0.05], vec![0.3]];
        let mode = AmbiguityMode::NonRobust { history, tilde_epsilon: 1e-9 };
        let mut cfg = smoke_config(2, 1);
        cfg.alpha = 0.0;
        let spec = RewardSpec::risk_neutral(1);
        let a = ActionVector(vec![1.0]);
        let huge = |_: &StateWindow| 1.0e6;
        let mut rng = stream_rng(0, &[]);
        let with_huge =
            mc_bellman_target(&x, &a, &huge, &mode, &spec, &cfg, &mut rng).unwrap();
        let mut rng = stream_rng(0, &[]);
        let with_zero = mc_bellman_target(&x, &a, &|_| 0.0, &mode, &spec, &cfg, &mut rng).unwrap();
        assert_eq!(with_huge, with_zero);
    }

    #[test]
    fn wasserstein_zero_radius_matches_non_robust_under_shared_stream() {
        let x = StateWindow::from_rows(&[vec![0.01], vec![-0.02]]).unwrap();
        let history = vec![vec![0.0], vec![0.01], vec![-0.01], vec![0.02], vec![0.005]];
        let cfg = smoke_config(2, 1);
        let spec = RewardSpec::risk_neutral(1);
        let a = ActionVector(vec![0.7]);
        let nr = AmbiguityMode::NonRobust { history: history.clone(), tilde_epsilon: 1e-9 };
        let wb = AmbiguityMode::WassersteinBall {
            history,
            epsilon: 0.0,
            q: 1,
            tilde_epsilon: 1e-9,
        };
        let v = |x: &StateWindow| x.flat().iter().sum::<f64>();
        let mut rng1 = stream_rng(42, &[7]);
        let mut rng2 = stream_rng(42, &[7]);
        let t1 = mc_bellman_target(&x, &a, &v, &nr, &spec, &cfg, &mut rng1).unwrap();
        let t2 = mc_bellman_target(&x, &a, &v, &wb, &spec, &cfg, &mut rng2).unwrap();
        assert!((t1 - t2).abs() < 1e-12);
    }

    #[test]
    fn mdp_json_round_trip() {
        let mdp = single_state_mdp(1.5);
        let text = serde_json::to_string(&mdp).unwrap();
        let back: FiniteMdp = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.reward, mdp.reward);
    }
}
