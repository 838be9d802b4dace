//! Data-driven ambiguity sets over the next asset return.
//!
//! Two constructions are provided. The fully data-driven one centers a
//! q-Wasserstein ball of radius `epsilon` on an empirical kernel whose
//! atoms are historical next returns, weighted by inverse distance between
//! the current window and each historical window. The semi-parametric one
//! is a family of multivariate normals whose mean may drift `epsilon` away
//! from the window's sample mean and whose covariance is the sample
//! covariance of some window within `epsilon` of the current one.
//!
//! Both are wrapped in the autocorrelated-time-series structure: the next
//! state keeps the observed last `m - 1` returns and only the newest
//! return is drawn from the sampled measure.
//!
//! Every ball sample is certifiable: the sampler bounds the identity
//! coupling's cost by construction, and [`wasserstein_distance`] solves
//! the exact transportation LP to verify membership independently.

mod transport;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::core::{CoreError, StateWindow};
use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum AmbiguityError {
    #[error("history too short: {n} returns cannot form any window of length {m} plus a successor")]
    HistoryTooShort { n: usize, m: usize },
    #[error("support too large: {k} atoms exceeds the exact-LP cap of {cap}")]
    SupportTooLarge { k: usize, cap: usize },
    #[error("window too short: m={m}, need m >= 2 for covariance estimation")]
    WindowTooShort { m: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid measure: {detail}")]
    InvalidMeasure { detail: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Support cap for the exact transportation LP.
pub const LP_SUPPORT_CAP: usize = 512;

/// A finitely supported probability measure on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, AmbiguityError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(AmbiguityError::InvalidMeasure {
                detail: format!("{} atoms vs {} weights", atoms.len(), weights.len()),
            });
        }
        let d = atoms[0].len();
        if atoms.iter().any(|a| a.len() != d) {
            return Err(AmbiguityError::InvalidMeasure {
                detail: "atoms live in different dimensions".into(),
            });
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(AmbiguityError::InvalidMeasure {
                detail: "weights must be non-negative and finite".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AmbiguityError::InvalidMeasure {
                detail: format!("weights sum to {total}, expected 1"),
            });
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self { atoms: vec![point], weights: vec![1.0] }
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws one atom by weight via inverse-CDF on a single uniform.
    pub fn sample_atom(&self, rng: &mut ChaCha12Rng) -> &[f64] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (atom, &w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return atom;
            }
        }
        self.atoms.last().expect("measure is non-empty")
    }
}

/// Mean and covariance of a multivariate normal over the next return.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianSpec {
    mu: Vec<f64>,
    /// Row-major `d x d`.
    sigma: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, AmbiguityError> {
        let d = mu.len();
        if sigma.len() != d * d {
            return Err(AmbiguityError::DimensionMismatch {
                context: format!("sigma has {} entries, expected {d}x{d}", sigma.len()),
            });
        }
        if linalg::max_asymmetry(&sigma, d) > 1e-12 {
            return Err(AmbiguityError::InvalidMeasure {
                detail: "covariance must be symmetric within 1e-12".into(),
            });
        }
        let min_eig = linalg::sym_eigenvalues(&sigma, d)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(AmbiguityError::InvalidMeasure {
                detail: format!("covariance must be PSD, min eigenvalue {min_eig}"),
            });
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.sigma, self.dim())
    }

    /// One draw via the semidefinite Cholesky factor. Degenerate
    /// directions receive exactly zero noise, so a zero covariance yields
    /// the mean itself.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Result<Vec<f64>, AmbiguityError> {
        let d = self.dim();
        let l = linalg::cholesky_psd(&self.sigma, d).ok_or_else(|| AmbiguityError::InvalidMeasure {
            detail: "covariance not PSD at sampling time".into(),
        })?;
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut out = self.mu.clone();
        for i in 0..d {
            for k in 0..=i {
                out[i] += l[i * d + k] * z[k];
            }
        }
        Ok(out)
    }
}

/// A sampled measure over the next return, in either construction.
#[derive(Debug, Clone, PartialEq)]
pub enum NextReturnMeasure {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianSpec),
}

impl NextReturnMeasure {
    pub fn dim(&self) -> usize {
        match self {
            NextReturnMeasure::Discrete(m) => m.dim(),
            NextReturnMeasure::Gaussian(g) => g.dim(),
        }
    }
}

/// The ambiguity correspondence `P(x, a)`: which measures the adversary may
/// choose at a state. Both portfolio constructions are action-independent.
///
/// Carries the training history the empirical kernel needs; the parametric
/// mode derives everything from the window itself.
#[derive(Debug, Clone)]
pub enum AmbiguityMode {
    /// Singleton set: just the empirical kernel.
    NonRobust { history: Vec<Vec<f64>>, tilde_epsilon: f64 },
    /// q-Wasserstein ball of radius `epsilon` around the empirical kernel.
    WassersteinBall {
        history: Vec<Vec<f64>>,
        epsilon: f64,
        q: u32,
        tilde_epsilon: f64,
    },
    /// Multivariate normals with window-estimated parameter ambiguity.
    ParametricGaussian { epsilon: f64 },
}

impl AmbiguityMode {
    /// Samples `n` measures from the set at `x`. The non-robust set is a
    /// singleton, so it always yields exactly one measure.
    pub fn sample_measures(
        &self,
        x: &StateWindow,
        n: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<NextReturnMeasure>, AmbiguityError> {
        match self {
            AmbiguityMode::NonRobust { history, tilde_epsilon } => {
                let kernel = empirical_kernel(x, history, *tilde_epsilon)?;
                Ok(vec![NextReturnMeasure::Discrete(kernel)])
            }
            AmbiguityMode::WassersteinBall { history, epsilon, q, tilde_epsilon } => {
                let kernel = empirical_kernel(x, history, *tilde_epsilon)?;
                (0..n)
                    .map(|_| {
                        wasserstein_ball_sample(&kernel, *epsilon, *q, rng)
                            .map(NextReturnMeasure::Discrete)
                    })
                    .collect()
            }
            AmbiguityMode::ParametricGaussian { epsilon } => (0..n)
                .map(|_| {
                    gaussian_ambiguity_sample(x, *epsilon, rng).map(NextReturnMeasure::Gaussian)
                })
                .collect(),
        }
    }
}

/// The empirical kernel: atoms are the historical successors of every
/// length-`m` window in `history`, weighted by inverse distance between
/// that window and `x`, so the most similar stretches of history dominate
/// the prediction.
pub fn empirical_kernel(
    x: &StateWindow,
    history: &[Vec<f64>],
    tilde_epsilon: f64,
) -> Result<DiscreteMeasure, AmbiguityError> {
    let m = x.window_len();
    let d = x.n_assets();
    let n = history.len();
    if n < m + 1 {
        return Err(AmbiguityError::HistoryTooShort { n, m });
    }
    if !(tilde_epsilon > 0.0) {
        return Err(AmbiguityError::InvalidMeasure {
            detail: format!("tilde_epsilon must be > 0, got {tilde_epsilon}"),
        });
    }
    if history.iter().any(|r| r.len() != d) {
        return Err(AmbiguityError::DimensionMismatch {
            context: "history returns disagree with the window's asset count".into(),
        });
    }
    let candidates = n - m;
    let mut inv = Vec::with_capacity(candidates);
    for j in 0..candidates {
        let mut dist_sq = 0.0;
        for (i, row) in history[j..j + m].iter().enumerate() {
            let xr = x.row(i);
            for k in 0..d {
                let diff = row[k] - xr[k];
                dist_sq += diff * diff;
            }
        }
        inv.push(1.0 / (dist_sq.sqrt() + tilde_epsilon));
    }
    let total: f64 = inv.iter().sum();
    let mut weights: Vec<f64> = inv.iter().map(|w| w / total).collect();
    // long histories accumulate enough rounding to miss the sum-to-one
    // tolerance; absorb the deficit into the heaviest weight
    let deficit: f64 = 1.0 - weights.iter().sum::<f64>();
    let heaviest = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("weights are finite"))
        .map(|(j, _)| j)
        .expect("at least one candidate");
    weights[heaviest] += deficit;
    let atoms: Vec<Vec<f64>> = (0..candidates).map(|j| history[j + m].clone()).collect();
    DiscreteMeasure::new(atoms, weights)
}

fn check_support(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<(), AmbiguityError> {
    for m in [p, q] {
        if m.support_size() > LP_SUPPORT_CAP {
            return Err(AmbiguityError::SupportTooLarge {
                k: m.support_size(),
                cap: LP_SUPPORT_CAP,
            });
        }
    }
    if p.dim() != q.dim() {
        return Err(AmbiguityError::DimensionMismatch {
            context: format!("measures over R^{} vs R^{}", p.dim(), q.dim()),
        });
    }
    Ok(())
}

/// Exact q-Wasserstein distance between two discrete measures under
/// Euclidean ground cost: the transportation LP on the coupling polytope,
/// solved to optimality.
pub fn wasserstein_distance(
    p: &DiscreteMeasure,
    q_measure: &DiscreteMeasure,
    q: u32,
) -> Result<f64, AmbiguityError> {
    check_support(p, q_measure)?;
    let cost = |i: usize, j: usize| {
        let a = &p.atoms()[i];
        let b = &q_measure.atoms()[j];
        let dist: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        dist.powi(q as i32)
    };
    let total = transport::min_cost_transport(p.weights(), q_measure.weights(), cost);
    Ok(total.max(0.0).powf(1.0 / f64::from(q)))
}

/// q-Wasserstein distance between measures on the line via quantile
/// matching, an independent route used to cross-check the LP.
pub fn wasserstein_distance_1d_quantile(
    p: &DiscreteMeasure,
    q_measure: &DiscreteMeasure,
    q: u32,
) -> Result<f64, AmbiguityError> {
    if p.dim() != 1 || q_measure.dim() != 1 {
        return Err(AmbiguityError::DimensionMismatch {
            context: "quantile route requires one-dimensional atoms".into(),
        });
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut pairs: Vec<(f64, f64)> = m
            .atoms()
            .iter()
            .map(|a| a[0])
            .zip(m.weights().iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs
    };
    let pa = sorted(p);
    let pb = sorted(q_measure);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut used_a, mut used_b) = (0.0f64, 0.0f64);
    let mut level = 0.0f64;
    let mut total = 0.0f64;
    while i < pa.len() && j < pb.len() {
        let room_a = pa[i].1 - used_a;
        let room_b = pb[j].1 - used_b;
        let step = room_a.min(room_b);
        total += step * (pa[i].0 - pb[j].0).abs().powi(q as i32);
        used_a += step;
        used_b += step;
        level += step;
        if used_a >= pa[i].1 - 1e-15 {
            i += 1;
            used_a = 0.0;
        }
        if used_b >= pb[j].1 - 1e-15 {
            j += 1;
            used_b = 0.0;
        }
        if level >= 1.0 {
            break;
        }
    }
    Ok(total.max(0.0).powf(1.0 / f64::from(q)))
}

/// Draws a measure from the q-Wasserstein ball of radius `epsilon` around
/// `reference`, with membership guaranteed by construction.
///
/// Atoms are displaced along independent Gaussian directions, jointly
/// rescaled so the identity coupling costs `rho * epsilon` with `rho`
/// uniform on `[0, 1]`; the identity coupling upper-bounds the true
/// distance, so the sample is certified to lie inside the ball. Radius
/// zero returns the reference unchanged without touching the generator.
pub fn wasserstein_ball_sample(
    reference: &DiscreteMeasure,
    epsilon: f64,
    q: u32,
    rng: &mut ChaCha12Rng,
) -> Result<DiscreteMeasure, AmbiguityError> {
    if epsilon < 0.0 {
        return Err(AmbiguityError::InvalidMeasure {
            detail: format!("ball radius must be >= 0, got {epsilon}"),
        });
    }
    if epsilon == 0.0 {
        return Ok(reference.clone());
    }
    let d = reference.dim();
    let k = reference.support_size();
    let mut displacements = vec![vec![0.0f64; d]; k];
    for disp in &mut displacements {
        for entry in disp.iter_mut() {
            *entry = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let rho: f64 = rng.random();
    // identity-coupling cost of the raw field
    let raw_cost: f64 = reference
        .weights()
        .iter()
        .zip(&displacements)
        .map(|(&w, disp)| w * linalg::l2_norm(disp).powi(q as i32))
        .sum();
    let raw = raw_cost.powf(1.0 / f64::from(q));
    if raw < 1e-300 {
        return Ok(reference.clone());
    }
    let scale = rho * epsilon / raw;
    let atoms: Vec<Vec<f64>> = reference
        .atoms()
        .iter()
        .zip(&displacements)
        .map(|(atom, disp)| atom.iter().zip(disp).map(|(a, dx)| a + scale * dx).collect())
        .collect();
    DiscreteMeasure::new(atoms, reference.weights().to_vec())
}

/// Row mean of the window.
pub fn mean_estimator(x: &StateWindow) -> Vec<f64> {
    let (m, d) = (x.window_len(), x.n_assets());
    let mut mu = vec![0.0; d];
    for i in 0..m {
        for (k, v) in x.row(i).iter().enumerate() {
            mu[k] += v;
        }
    }
    for v in &mut mu {
        *v /= m as f64;
    }
    mu
}

/// Unbiased sample covariance of the window rows (two-pass).
pub fn cov_estimator(x: &StateWindow) -> Result<Vec<f64>, AmbiguityError> {
    let (m, d) = (x.window_len(), x.n_assets());
    if m < 2 {
        return Err(AmbiguityError::WindowTooShort { m });
    }
    let mu = mean_estimator(x);
    let mut cov = vec![0.0; d * d];
    for i in 0..m {
        let row = x.row(i);
        for a in 0..d {
            let da = row[a] - mu[a];
            for b in 0..d {
                cov[a * d + b] += da * (row[b] - mu[b]);
            }
        }
    }
    for v in &mut cov {
        *v /= (m - 1) as f64;
    }
    Ok(cov)
}

fn unit_sphere(dim: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = linalg::l2_norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws a parameter pair from the Gaussian ambiguity set at `x`: a mean
/// within `epsilon` of the window's sample mean, and the sample covariance
/// of a perturbed window within `epsilon` of `x`. Radius zero returns the
/// point estimates without touching the generator.
pub fn gaussian_ambiguity_sample(
    x: &StateWindow,
    epsilon: f64,
    rng: &mut ChaCha12Rng,
) -> Result<GaussianSpec, AmbiguityError> {
    let (m, d) = (x.window_len(), x.n_assets());
    if m < 2 {
        return Err(AmbiguityError::WindowTooShort { m });
    }
    if epsilon < 0.0 {
        return Err(AmbiguityError::InvalidMeasure {
            detail: format!("ambiguity radius must be >= 0, got {epsilon}"),
        });
    }
    let base_mu = mean_estimator(x);
    if epsilon == 0.0 {
        let sigma = cov_estimator(x)?;
        return GaussianSpec::new(base_mu, sigma);
    }
    let dir_mu = unit_sphere(d, rng);
    let rho_mu: f64 = rng.random();
    let mu: Vec<f64> = base_mu
        .iter()
        .zip(&dir_mu)
        .map(|(b, u)| b + epsilon * rho_mu * u)
        .collect();

    let dir_y = unit_sphere(m * d, rng);
    let rho_y: f64 = rng.random();
    let perturbed: Vec<f64> = x
        .flat()
        .iter()
        .zip(&dir_y)
        .map(|(v, u)| v + epsilon * rho_y * u)
        .collect();
    let y = StateWindow::new(m, d, perturbed)?;
    let sigma = cov_estimator(&y)?;
    GaussianSpec::new(mu, sigma)
}

/// Growth constant of the Gaussian ambiguity set:
/// `1 + sqrt(eps^2 + 1/m + 4 (eps^2 + 1) / (m - 1))`.
pub fn cp_bound(epsilon: f64, m: usize) -> Result<f64, AmbiguityError> {
    if m < 2 {
        return Err(AmbiguityError::WindowTooShort { m });
    }
    if epsilon < 0.0 {
        return Err(AmbiguityError::InvalidMeasure {
            detail: format!("radius must be >= 0, got {epsilon}"),
        });
    }
    let mf = m as f64;
    let e2 = epsilon * epsilon;
    Ok(1.0 + (e2 + 1.0 / mf + 4.0 * (e2 + 1.0) / (mf - 1.0)).sqrt())
}

/// One transition step: keeps the last `m - 1` rows of `x` and draws the
/// newest return from the given measure.
pub fn sample_next_state(
    x: &StateWindow,
    measure: &NextReturnMeasure,
    rng: &mut ChaCha12Rng,
) -> Result<StateWindow, AmbiguityError> {
    if measure.dim() != x.n_assets() {
        return Err(AmbiguityError::DimensionMismatch {
            context: format!(
                "measure over R^{}, window has {} assets",
                measure.dim(),
                x.n_assets()
            ),
        });
    }
    let next: Vec<f64> = match measure {
        NextReturnMeasure::Discrete(m) => m.sample_atom(rng).to_vec(),
        NextReturnMeasure::Gaussian(g) => g.sample(rng)?,
    };
    Ok(x.advanced(&next)?)
}
