//! Distributionally robust Markov decision processes over a sliding window
//! of asset returns.
//!
//! The library solves the infinite-horizon control problem
//!
//! ```text
//! V(x) = sup_a inf_{P ∈ P(x,a)} E_P[ Σ_t α^t r(X_t, a_t, X_{t+1}) ]
//! ```
//!
//! where the adversary picks, at every step, a transition law from an
//! ambiguity set `P(x,a)`. A one-step robust Bellman operator is a
//! contraction, so value iteration converges to the unique fixed point and
//! the greedy one-step action, applied stationarily, is optimal for the
//! whole horizon.
//!
//! Modules:
//! - [`core`]: domain types, configuration, reward function.
//! - [`ambiguity`]: empirical kernels, Wasserstein balls with certified
//!   membership, parametric Gaussian ambiguity.
//! - [`bellman`]: exact tabular solver, brute-force oracle, Monte-Carlo
//!   Bellman targets.
//! - [`neural`]: from-scratch MLPs with reverse-mode gradients and Adam,
//!   alternating actor/critic value iteration.
//! - [`data`]: CSV price ingestion, returns, sliding windows, splits.
//! - [`backtest`]: policy evaluation and performance metrics.
//! - [`selfcheck`]: runnable certification suites (oracle equivalence,
//!   contraction, ball membership).
//!
//! With the default `parallel` feature, batch-level inner loops run on
//! rayon; disabling it yields a dependency-free sequential fallback with
//! identical numerical results (all randomness is derived from per-task
//! seed streams, never from execution order).

pub mod ambiguity;
pub mod backtest;
pub mod bellman;
pub mod core;
pub mod data;
pub mod neural;
pub mod selfcheck;

mod linalg;
mod par;
pub mod rng;

pub use crate::core::{ActionVector, MdpConfig, ModeKind, RewardSpec, StateWindow};
