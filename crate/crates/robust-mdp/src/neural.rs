//! From-scratch feedforward networks and the alternating actor/critic
//! value-iteration loop.
//!
//! Two rectifier hidden layers; the value net has an identity output, the
//! action net a tanh output scaled by the budget so every emitted position
//! is feasible by construction. Gradients are exact reverse-mode (rectifier
//! kinks take the one-sided derivative, zero at zero), updates are plain
//! Adam.
//!
//! Each epoch freezes the previous value net, runs `iter_a` ascent steps on
//! the mean Monte-Carlo Bellman target over a sampled batch, then `iter_v`
//! regression steps of the value net onto those targets. The target is
//! non-smooth in the action through the minimum over sampled measures;
//! gradients flow through the argmin measure only. All randomness comes
//! from per-(epoch, iteration, slot) seed streams, so batch evaluation can
//! run data-parallel without changing any number.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{sample_next_state, AmbiguityMode};
use crate::bellman::BellmanError;
use crate::core::{reward, ActionVector, MdpConfig, RewardSpec, StateWindow};
use crate::linalg;
use crate::par;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Bellman(#[from] BellmanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `scale * tanh(z)` per component; keeps outputs in `[-scale, scale]`.
    ScaledTanh { scale: f64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    step: u64,
}

/// A fully connected network with rectifier hidden layers.
///
/// Adam moment buffers live alongside the parameters but are not part of
/// the serialized form; a reloaded network optimizes from fresh moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpNetwork {
    sizes: Vec<usize>,
    /// Per layer, row-major `out x in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    output: OutputActivation,
    #[serde(skip)]
    adam: Option<AdamState>,
}

/// Gradients with the same shape as the network parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.weights.iter_mut().zip(&other.weights) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        for (dst, src) in self.biases.iter_mut().zip(&other.biases) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }
}

impl MlpNetwork {
    /// He-style uniform fan-in initialization for the weights, fan-in
    /// scaled uniform biases. Nonzero biases keep preactivations off the
    /// exact rectifier kink even when a whole layer starts inactive.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut ChaCha12Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(w);
            let bias_limit = 1.0 / (fan_in as f64).sqrt();
            let b: Vec<f64> = (0..fan_out)
                .map(|_| rng.random_range(-bias_limit..bias_limit))
                .collect();
            biases.push(b);
        }
        Self { sizes: sizes.to_vec(), weights, biases, output, adam: None }
    }

    /// Value network: two hidden layers, scalar identity output.
    pub fn value_net(input: usize, hidden: usize, rng: &mut ChaCha12Rng) -> Self {
        Self::new(&[input, hidden, hidden, 1], OutputActivation::Identity, rng)
    }

    /// Action network: two hidden layers, one bounded output per asset.
    pub fn action_net(
        input: usize,
        hidden: usize,
        d: usize,
        budget: f64,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        Self::new(&[input, hidden, hidden, d], OutputActivation::ScaledTanh { scale: budget }, rng)
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if x.len() != self.input_len() {
            return Err(NeuralError::DimensionMismatch {
                context: format!("input has {} entries, expected {}", x.len(), self.input_len()),
            });
        }
        let n_layers = self.weights.len();
        let mut activation = x.to_vec();
        for l in 0..n_layers {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let mut z = self.biases[l].clone();
            for r in 0..rows {
                z[r] += linalg::dot(&self.weights[l][r * cols..(r + 1) * cols], &activation);
            }
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            } else {
                match self.output {
                    OutputActivation::Identity => {}
                    OutputActivation::ScaledTanh { scale } => {
                        for v in z.iter_mut() {
                            *v = scale * v.tanh();
                        }
                    }
                }
            }
            activation = z;
        }
        Ok(activation)
    }

    /// Exact reverse-mode gradients of a scalar loss on the output.
    ///
    /// The closure sees the network output and returns the loss value and
    /// its gradient with respect to each output coordinate.
    pub fn gradient<F>(&self, x: &[f64], loss: F) -> Result<(f64, Gradients), NeuralError>
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        if x.len() != self.input_len() {
            return Err(NeuralError::DimensionMismatch {
                context: format!("input has {} entries, expected {}", x.len(), self.input_len()),
            });
        }
        let n_layers = self.weights.len();
        // forward pass recording post-activation values per layer
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for l in 0..n_layers {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let prev = &activations[l];
            let mut z = self.biases[l].clone();
            for r in 0..rows {
                z[r] += linalg::dot(&self.weights[l][r * cols..(r + 1) * cols], prev);
            }
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            } else if let OutputActivation::ScaledTanh { scale } = self.output {
                for v in z.iter_mut() {
                    *v = scale * v.tanh();
                }
            }
            activations.push(z);
        }

        let output = activations.last().unwrap();
        let (loss_value, output_grad) = loss(output);
        assert_eq!(output_grad.len(), output.len(), "loss gradient has wrong arity");

        let mut grads = Gradients::zeros_like(self);
        // delta through the output activation
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Identity => output_grad,
            OutputActivation::ScaledTanh { scale } => output_grad
                .iter()
                .zip(output)
                .map(|(g, y)| {
                    // y = s*tanh(z) => dy/dz = s*(1 - tanh^2) = s - y^2/s
                    g * (scale - y * y / scale)
                })
                .collect(),
        };
        for l in (0..n_layers).rev() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let prev = &activations[l];
            for r in 0..rows {
                let d = delta[r];
                grads.biases[l][r] = d;
                if d != 0.0 {
                    for c in 0..cols {
                        grads.weights[l][r * cols + c] = d * prev[c];
                    }
                }
            }
            if l > 0 {
                let mut next_delta = vec![0.0; cols];
                for r in 0..rows {
                    let d = delta[r];
                    if d != 0.0 {
                        for c in 0..cols {
                            next_delta[c] += self.weights[l][r * cols + c] * d;
                        }
                    }
                }
                // rectifier: pass gradient only where the unit fired
                for (c, nd) in next_delta.iter_mut().enumerate() {
                    if activations[l][c] <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
        Ok((loss_value, grads))
    }

    /// Standard Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias
    /// correction); increments the step counter.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        if self.adam.is_none() {
            self.adam = Some(AdamState {
                m_weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
                v_weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
                m_biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
                v_biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
                step: 0,
            });
        }
        let adam = self.adam.as_mut().unwrap();
        adam.step += 1;
        let corr1 = 1.0 - BETA1.powi(adam.step as i32);
        let corr2 = 1.0 - BETA2.powi(adam.step as i32);
        let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..param.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
        };
        for l in 0..self.weights.len() {
            update(
                &mut self.weights[l],
                &grads.weights[l],
                &mut adam.m_weights[l],
                &mut adam.v_weights[l],
            );
            update(
                &mut self.biases[l],
                &grads.biases[l],
                &mut adam.m_biases[l],
                &mut adam.v_biases[l],
            );
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter view, weights first, layer by layer, then biases.
    pub fn get_param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for w in &self.weights {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
        }
        for b in &self.biases {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn nudge_param(&mut self, idx: usize, delta: f64) {
        let mut i = idx;
        for w in &mut self.weights {
            if i < w.len() {
                w[i] += delta;
                return;
            }
            i -= w.len();
        }
        for b in &mut self.biases {
            if i < b.len() {
                b[i] += delta;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat view of a gradient in the same order as `get_param`.
    pub fn flat_gradient(&self, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in &grads.weights {
            out.extend_from_slice(w);
        }
        for b in &grads.biases {
            out.extend_from_slice(b);
        }
        out
    }
}

/// Per-feature affine standardization fitted on the training windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(windows: &[StateWindow]) -> Result<Self, NeuralError> {
        let first = windows.first().ok_or(NeuralError::EmptyTrainingSet)?;
        let dim = first.dim();
        let n = windows.len() as f64;
        let mut mean = vec![0.0; dim];
        for w in windows {
            for (m, v) in mean.iter_mut().zip(w.flat()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for w in windows {
            for (s, (v, m)) in var.iter_mut().zip(w.flat().iter().zip(&mean)) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &StateWindow) -> Vec<f64> {
        x.flat()
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean Monte-Carlo Bellman target over the actor batches, per epoch.
    pub actor_objective: Vec<f64>,
    /// Mean squared critic regression error, per epoch.
    pub critic_loss: Vec<f64>,
    /// Wall-clock seconds per epoch. Timing only; excluded from any
    /// determinism comparison.
    pub wall_clock_secs: Vec<f64>,
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub value_net: MlpNetwork,
    pub action_net: MlpNetwork,
    pub normalizer: Normalizer,
    pub report: TrainReport,
}

/// The Bellman target together with its gradient in the action, both from
/// the same draws. The ambiguity sets here never depend on the action and
/// the continuation term is action-free, so the gradient is the
/// draw-averaged `dr/da = R_next - 2 lambda Sigma_R a` of the argmin
/// measure.
fn target_and_action_grad(
    x: &StateWindow,
    a: &ActionVector,
    frozen_value: &(dyn Fn(&StateWindow) -> f64 + Sync),
    mode: &AmbiguityMode,
    reward_spec: &RewardSpec,
    cfg: &MdpConfig,
    rng: &mut ChaCha12Rng,
) -> Result<(f64, Vec<f64>), BellmanError> {
    let d = x.n_assets();
    let measures = mode.sample_measures(x, cfg.n_measures, rng)?;
    let mut best = f64::INFINITY;
    let mut best_mean_return = vec![0.0; d];
    for measure in &measures {
        let mut acc = 0.0;
        let mut mean_return = vec![0.0; d];
        for _ in 0..cfg.n_mc {
            let x_next = sample_next_state(x, measure, rng)?;
            let r = reward(x, a, &x_next, reward_spec)?;
            acc += r + cfg.alpha * frozen_value(&x_next);
            for (mr, v) in mean_return.iter_mut().zip(x_next.last_row()) {
                *mr += v;
            }
        }
        let avg = acc / cfg.n_mc as f64;
        if avg < best {
            best = avg;
            for v in &mut mean_return {
                *v /= cfg.n_mc as f64;
            }
            best_mean_return = mean_return;
        }
    }
    // d/da of [a . R_mean - lambda a' Sigma_R a]
    let mut grad = best_mean_return;
    for i in 0..d {
        let mut sigma_a = 0.0;
        for j in 0..d {
            sigma_a += reward_spec.sigma_r[i * d + j] * a.as_slice()[j];
        }
        grad[i] -= 2.0 * reward_spec.lambda_risk * sigma_a;
    }
    Ok((best, grad))
}

// stream derivation tags
const TAG_VALUE_INIT: u64 = 0;
const TAG_ACTION_INIT: u64 = 1;
const TAG_ACTOR_BATCH: u64 = 2;
const TAG_ACTOR_SLOT: u64 = 3;
const TAG_CRITIC_BATCH: u64 = 4;
const TAG_CRITIC_SLOT: u64 = 5;

/// Runs the alternating actor/critic value iteration on the training
/// windows. Fully determined by `(cfg, mode, train_windows, reward_spec)`:
/// every draw comes from a stream derived from `cfg.seed` and the
/// position (epoch, iteration, batch slot) that consumes it.
pub fn train(
    cfg: &MdpConfig,
    mode: &AmbiguityMode,
    train_windows: &[StateWindow],
    reward_spec: &RewardSpec,
) -> Result<TrainOutput, NeuralError> {
    if train_windows.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let input = cfg.m * cfg.d;
    if train_windows.iter().any(|w| w.dim() != input) {
        return Err(NeuralError::DimensionMismatch {
            context: "training windows disagree with the configured m x d".into(),
        });
    }
    let normalizer = Normalizer::fit(train_windows)?;
    let mut value_net =
        MlpNetwork::value_net(input, cfg.hidden, &mut stream_rng(cfg.seed, &[TAG_VALUE_INIT]));
    let mut action_net = MlpNetwork::action_net(
        input,
        cfg.hidden,
        cfg.d,
        cfg.budget,
        &mut stream_rng(cfg.seed, &[TAG_ACTION_INIT]),
    );

    let mut report = TrainReport {
        actor_objective: Vec::with_capacity(cfg.epochs),
        critic_loss: Vec::with_capacity(cfg.epochs),
        wall_clock_secs: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs as u64 {
        let started = Instant::now();
        let frozen = value_net.clone();
        let frozen_ref = &frozen;
        let normalizer_ref = &normalizer;
        let frozen_value = move |x: &StateWindow| -> f64 {
            frozen_ref
                .forward(&normalizer_ref.apply(x))
                .expect("frozen value net evaluates its own input shape")[0]
        };

        // actor: ascend the mean target in the action-net parameters
        let mut epoch_objective = 0.0;
        for iter in 0..cfg.iter_a as u64 {
            let mut batch_rng = stream_rng(cfg.seed, &[TAG_ACTOR_BATCH, epoch, iter]);
            let batch: Vec<usize> = (0..cfg.batch)
                .map(|_| batch_rng.random_range(0..train_windows.len()))
                .collect();
            let action_ref = &action_net;
            let slot_results: Vec<(f64, Gradients)> = par::map_indexed(cfg.batch, |slot| {
                let x = &train_windows[batch[slot]];
                let x_norm = normalizer_ref.apply(x);
                let a = ActionVector(
                    action_ref.forward(&x_norm).expect("shape fixed at construction"),
                );
                let mut slot_rng =
                    stream_rng(cfg.seed, &[TAG_ACTOR_SLOT, epoch, iter, slot as u64]);
                let (target, grad_a) = target_and_action_grad(
                    x,
                    &a,
                    &frozen_value,
                    mode,
                    reward_spec,
                    cfg,
                    &mut slot_rng,
                )
                .expect("target evaluation failed in actor step");
                // ascend: feed the negated gradient to the minimizer
                let (_, grads) = action_ref
                    .gradient(&x_norm, |_| (-target, grad_a.iter().map(|g| -g).collect()))
                    .expect("shape fixed at construction");
                (target, grads)
            });
            let mut total = Gradients::zeros_like(&action_net);
            let mut objective = 0.0;
            for (target, grads) in &slot_results {
                objective += target;
                total.add_assign(grads);
            }
            total.scale(1.0 / cfg.batch as f64);
            objective /= cfg.batch as f64;
            epoch_objective += objective;
            action_net.adam_step(&total, cfg.lr);
        }
        epoch_objective /= cfg.iter_a.max(1) as f64;

        // critic: regress the value net onto the targets
        let mut epoch_loss = 0.0;
        for iter in 0..cfg.iter_v as u64 {
            let mut batch_rng = stream_rng(cfg.seed, &[TAG_CRITIC_BATCH, epoch, iter]);
            let batch: Vec<usize> = (0..cfg.batch)
                .map(|_| batch_rng.random_range(0..train_windows.len()))
                .collect();
            let action_ref = &action_net;
            let targets: Vec<f64> = par::map_indexed(cfg.batch, |slot| {
                let x = &train_windows[batch[slot]];
                let x_norm = normalizer_ref.apply(x);
                let a = ActionVector(
                    action_ref.forward(&x_norm).expect("shape fixed at construction"),
                );
                let mut slot_rng =
                    stream_rng(cfg.seed, &[TAG_CRITIC_SLOT, epoch, iter, slot as u64]);
                let (target, _) = target_and_action_grad(
                    x,
                    &a,
                    &frozen_value,
                    mode,
                    reward_spec,
                    cfg,
                    &mut slot_rng,
                )
                .expect("target evaluation failed in critic step");
                target
            });
            let value_ref = &value_net;
            let slot_grads: Vec<(f64, Gradients)> = par::map_indexed(cfg.batch, |slot| {
                let x_norm = normalizer_ref.apply(&train_windows[batch[slot]]);
                let target = targets[slot];
                value_ref
                    .gradient(&x_norm, |out| {
                        let err = out[0] - target;
                        (err * err, vec![2.0 * err])
                    })
                    .expect("shape fixed at construction")
            });
            let mut total = Gradients::zeros_like(&value_net);
            let mut loss = 0.0;
            for (sq_err, grads) in &slot_grads {
                loss += sq_err;
                total.add_assign(grads);
            }
            total.scale(1.0 / cfg.batch as f64);
            loss /= cfg.batch as f64;
            epoch_loss += loss;
            value_net.adam_step(&total, cfg.lr);
        }
        epoch_loss /= cfg.iter_v.max(1) as f64;

        report.actor_objective.push(epoch_objective);
        report.critic_loss.push(epoch_loss);
        report.wall_clock_secs.push(started.elapsed().as_secs_f64());
    }

    Ok(TrainOutput { value_net, action_net, normalizer, report })
}

/// FNV-1a fingerprint of the canonical JSON form of the configuration.
pub fn config_fingerprint(cfg: &MdpConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// The trained model artifact: everything a backtest needs to reproduce
/// the policy, including the covariance frozen at train time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub m: usize,
    pub d: usize,
    pub budget: f64,
    pub lambda_risk: f64,
    pub alpha: f64,
    pub sigma_r: Vec<f64>,
    pub normalizer: Normalizer,
    pub value_net: MlpNetwork,
    pub action_net: MlpNetwork,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_training(cfg: &MdpConfig, spec: &RewardSpec, out: &TrainOutput) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_fingerprint(cfg),
            m: cfg.m,
            d: cfg.d,
            budget: cfg.budget,
            lambda_risk: cfg.lambda_risk,
            alpha: cfg.alpha,
            sigma_r: spec.sigma_r.clone(),
            normalizer: out.normalizer.clone(),
            value_net: out.value_net.clone(),
            action_net: out.action_net.clone(),
        }
    }

    /// The stationary policy: normalize, run the action net.
    pub fn action(&self, x: &StateWindow) -> Result<ActionVector, NeuralError> {
        if x.window_len() != self.m || x.n_assets() != self.d {
            return Err(NeuralError::DimensionMismatch {
                context: format!(
                    "model expects {}x{} windows, got {}x{}",
                    self.m,
                    self.d,
                    x.window_len(),
                    x.n_assets()
                ),
            });
        }
        Ok(ActionVector(self.action_net.forward(&self.normalizer.apply(x))?))
    }

    pub fn reward_spec(&self) -> RewardSpec {
        RewardSpec {
            lambda_risk: self.lambda_risk,
            sigma_r: self.sigma_r.clone(),
            d: self.d,
        }
    }
}
