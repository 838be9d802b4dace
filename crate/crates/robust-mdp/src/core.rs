//! Domain types, configuration, and validation of the standing assumptions
//! of the robust control problem: a state is the window of the last `m`
//! return vectors of `d` assets, actions are monetary positions in a box
//! `[-C, C]^d`, and the discount factor must satisfy `alpha * c_p < 1` for
//! the robust Bellman operator to contract.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity;
use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("discount too large: alpha={alpha} with c_p={c_p} violates 0 < alpha*c_p < 1")]
    DiscountTooLarge { alpha: f64, c_p: f64 },
    #[error("invalid dimension: m={m}, d={d} (both must be >= 1)")]
    InvalidDimension { m: usize, d: usize },
    #[error("negative ambiguity radius: {epsilon}")]
    NegativeRadius { epsilon: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },
}

/// A point of the state space: the last `m` return vectors of `d` assets,
/// stored row-major (row 0 is the oldest return).
#[derive(Debug, Clone, PartialEq)]
pub struct StateWindow {
    returns: Vec<f64>,
    m: usize,
    d: usize,
}

impl StateWindow {
    pub fn new(m: usize, d: usize, returns: Vec<f64>) -> Result<Self, CoreError> {
        if m < 1 || d < 1 {
            return Err(CoreError::InvalidDimension { m, d });
        }
        if returns.len() != m * d {
            return Err(CoreError::DimensionMismatch {
                context: format!("window data has {} entries, expected {}x{}", returns.len(), m, d),
            });
        }
        if returns.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::InvalidParameter {
                name: "returns",
                detail: "window entries must be finite".into(),
            });
        }
        Ok(Self { returns, m, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CoreError> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(CoreError::DimensionMismatch {
                context: "window rows have unequal lengths".into(),
            });
        }
        Self::new(m, d, rows.concat())
    }

    pub fn window_len(&self) -> usize {
        self.m
    }

    pub fn n_assets(&self) -> usize {
        self.d
    }

    /// Flattened length `m * d`, the dimension of the state space.
    pub fn dim(&self) -> usize {
        self.m * self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.returns[i * self.d..(i + 1) * self.d]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.m - 1)
    }

    pub fn flat(&self) -> &[f64] {
        &self.returns
    }

    /// Euclidean norm of the flattened window.
    pub fn norm(&self) -> f64 {
        linalg::l2_norm(&self.returns)
    }

    /// Drops the oldest row and appends `next` as the newest: the
    /// deterministic part of the one-step transition, which keeps the
    /// already-observed last `m - 1` returns and only draws the next one.
    pub fn advanced(&self, next: &[f64]) -> Result<Self, CoreError> {
        if next.len() != self.d {
            return Err(CoreError::DimensionMismatch {
                context: format!("next return has {} entries, expected {}", next.len(), self.d),
            });
        }
        let mut returns = Vec::with_capacity(self.m * self.d);
        returns.extend_from_slice(&self.returns[self.d..]);
        returns.extend_from_slice(next);
        Ok(Self { returns, m: self.m, d: self.d })
    }
}

/// Monetary positions in the `d` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector(pub Vec<f64>);

impl ActionVector {
    pub fn zero(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// True when every component lies in `[-budget, budget]`.
    pub fn within_budget(&self, budget: f64) -> bool {
        self.0.iter().all(|a| a.abs() <= budget)
    }
}

/// Which ambiguity construction drives the adversary.
///
/// The growth exponent of the value-function space is implied by the mode
/// (compactly supported Wasserstein balls need no growth control, the
/// Gaussian family needs linear growth), so it is never configured
/// separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    NonRobust,
    Wasserstein,
    Parametric,
}

impl ModeKind {
    /// Growth exponent `p` of the value-function space.
    pub fn growth_exponent(self) -> u32 {
        match self {
            ModeKind::NonRobust | ModeKind::Wasserstein => 0,
            ModeKind::Parametric => 1,
        }
    }
}

fn default_c_p() -> f64 {
    1.0
}

fn default_budget() -> f64 {
    1.0
}

fn default_tilde_epsilon() -> f64 {
    1e-9
}

fn default_hidden() -> usize {
    128
}

/// Full configuration of the solver and the training loop. Maps one-to-one
/// onto the JSON configuration file; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    /// Discount factor; must satisfy `0 < alpha * c_p < 1`.
    pub alpha: f64,
    /// Growth constant of the ambiguity set (`>= 1`). For the parametric
    /// mode the CLI recomputes it from the closed form before validating.
    #[serde(default = "default_c_p")]
    pub c_p: f64,
    /// Ambiguity radius.
    pub epsilon: f64,
    /// Wasserstein order.
    pub q: u32,
    /// Risk-aversion weight on the variance penalty.
    pub lambda_risk: f64,
    /// Budget bound: positions live in `[-budget, budget]^d`.
    #[serde(default = "default_budget")]
    pub budget: f64,
    /// Window length (number of past returns in a state).
    pub m: usize,
    /// Number of assets.
    pub d: usize,
    /// Ambiguity construction.
    pub mode: ModeKind,
    /// Measures sampled from the ambiguity set per Bellman target.
    pub n_measures: usize,
    /// Monte-Carlo draws per measure.
    pub n_mc: usize,
    /// Batch size per training iteration.
    pub batch: usize,
    /// Training epochs.
    pub epochs: usize,
    /// Actor iterations per epoch.
    pub iter_a: usize,
    /// Critic iterations per epoch.
    pub iter_v: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// Hidden width of both networks.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Tie-break constant of the empirical-kernel weights.
    #[serde(default = "default_tilde_epsilon")]
    pub tilde_epsilon: f64,
    /// RNG seed; fully determines every randomized run.
    pub seed: u64,
}

impl MdpConfig {
    /// The growth constant implied by the ambiguity mode: the closed-form
    /// bound for the Gaussian family, 1 for compactly supported modes.
    pub fn mode_c_p(&self) -> Result<f64, ambiguity::AmbiguityError> {
        match self.mode {
            ModeKind::Parametric => ambiguity::cp_bound(self.epsilon, self.m),
            ModeKind::NonRobust | ModeKind::Wasserstein => Ok(1.0),
        }
    }

    pub fn growth_exponent(&self) -> u32 {
        self.mode.growth_exponent()
    }
}

/// Checks every invariant of [`MdpConfig`]; returns the config unchanged
/// iff all of them hold.
pub fn validate_config(cfg: MdpConfig) -> Result<MdpConfig, CoreError> {
    if cfg.m < 1 || cfg.d < 1 {
        return Err(CoreError::InvalidDimension { m: cfg.m, d: cfg.d });
    }
    if cfg.epsilon < 0.0 || !cfg.epsilon.is_finite() {
        return Err(CoreError::NegativeRadius { epsilon: cfg.epsilon });
    }
    if !(cfg.c_p >= 1.0) || !cfg.c_p.is_finite() {
        return Err(CoreError::InvalidParameter {
            name: "c_p",
            detail: format!("must be >= 1, got {}", cfg.c_p),
        });
    }
    if !(cfg.alpha > 0.0) || !(cfg.alpha * cfg.c_p < 1.0) {
        return Err(CoreError::DiscountTooLarge { alpha: cfg.alpha, c_p: cfg.c_p });
    }
    if !(cfg.lambda_risk >= 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "lambda_risk",
            detail: format!("must be >= 0, got {}", cfg.lambda_risk),
        });
    }
    if !(cfg.budget > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "budget",
            detail: format!("must be > 0, got {}", cfg.budget),
        });
    }
    if cfg.q < 1 {
        return Err(CoreError::InvalidParameter {
            name: "q",
            detail: "Wasserstein order must be >= 1".into(),
        });
    }
    if !(cfg.lr > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "lr",
            detail: format!("must be > 0, got {}", cfg.lr),
        });
    }
    if !(cfg.tilde_epsilon > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "tilde_epsilon",
            detail: format!("must be > 0, got {}", cfg.tilde_epsilon),
        });
    }
    for (name, value) in [
        ("n_measures", cfg.n_measures),
        ("n_mc", cfg.n_mc),
        ("batch", cfg.batch),
        ("epochs", cfg.epochs),
        ("iter_a", cfg.iter_a),
        ("iter_v", cfg.iter_v),
        ("hidden", cfg.hidden),
    ] {
        if value < 1 {
            return Err(CoreError::InvalidParameter {
                name,
                detail: "must be >= 1".into(),
            });
        }
    }
    Ok(cfg)
}

/// Reward parameters: the variance penalty weight and the return
/// covariance it is taken against. The covariance is estimated once from
/// the training series and frozen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardSpec {
    pub lambda_risk: f64,
    /// Row-major `d x d` return covariance.
    pub sigma_r: Vec<f64>,
    pub d: usize,
}

impl RewardSpec {
    pub fn new(lambda_risk: f64, sigma_r: Vec<f64>, d: usize) -> Result<Self, CoreError> {
        if sigma_r.len() != d * d {
            return Err(CoreError::DimensionMismatch {
                context: format!("sigma_r has {} entries, expected {d}x{d}", sigma_r.len()),
            });
        }
        if lambda_risk < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "lambda_risk",
                detail: format!("must be >= 0, got {lambda_risk}"),
            });
        }
        if linalg::max_asymmetry(&sigma_r, d) > 1e-12 {
            return Err(CoreError::InvalidParameter {
                name: "sigma_r",
                detail: "covariance must be symmetric within 1e-12".into(),
            });
        }
        let min_eig = linalg::sym_eigenvalues(&sigma_r, d)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(CoreError::InvalidParameter {
                name: "sigma_r",
                detail: format!("covariance must be PSD, min eigenvalue {min_eig}"),
            });
        }
        Ok(Self { lambda_risk, sigma_r, d })
    }

    /// Risk-neutral spec with a zero covariance.
    pub fn risk_neutral(d: usize) -> Self {
        Self { lambda_risk: 0.0, sigma_r: vec![0.0; d * d], d }
    }
}

/// One-period trading profit: position times realized next return, minus
/// the variance penalty `lambda * aᵀ Σ_R a`.
pub fn reward(
    x: &StateWindow,
    a: &ActionVector,
    x_next: &StateWindow,
    spec: &RewardSpec,
) -> Result<f64, CoreError> {
    let d = x.n_assets();
    if a.len() != d || x_next.n_assets() != d || spec.d != d || x_next.window_len() != x.window_len()
    {
        return Err(CoreError::DimensionMismatch {
            context: format!(
                "reward inputs disagree: state d={}, action d={}, next d={}, spec d={}",
                d,
                a.len(),
                x_next.n_assets(),
                spec.d
            ),
        });
    }
    let realized = x_next.last_row();
    let gain = linalg::dot(a.as_slice(), realized);
    let penalty = spec.lambda_risk * linalg::quadratic_form(a.as_slice(), &spec.sigma_r, d);
    Ok(gain - penalty)
}
