//! Clipped-surrogate PPO with a diagonal Gaussian policy and separate
//! actor/critic MLPs.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg_err, Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, Batch, DenseNet, GradientSet};
use crate::seed;

const LOG_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub normalize_advantages: bool,
    /// Multiplier on the initial weights of the actor's output layer.
    pub actor_output_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            epochs: 4,
            minibatches: 4,
            learning_rate: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            log_std_init: 0.0,
            log_std_min: -5.0,
            log_std_max: 2.0,
            normalize_advantages: true,
            actor_output_scale: 0.01,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Configuration("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.clip_range > 0.0) || self.epochs == 0 || self.minibatches == 0 {
            return Err(Error::Configuration("clip_range, epochs and minibatches must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.hidden.contains(&0) {
            return Err(Error::Configuration("learning rate and hidden widths must be positive".into()));
        }
        if self.log_std_min > self.log_std_max {
            return Err(Error::Configuration("log_std_min exceeds log_std_max".into()));
        }
        Ok(())
    }
}

/// Running mean/variance of observations, merged batch-wise.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub clip: f64,
}

impl ObsNormalizer {
    pub fn new(size: usize) -> Self {
        Self { mean: vec![0.0; size], var: vec![1.0; size], count: 1e-4, clip: 10.0 }
    }

    pub fn update(&mut self, rows: &[&[f64]]) {
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for j in 0..self.mean.len() {
            let bm = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let bv = rows.iter().map(|r| (r[j] - bm) * (r[j] - bm)).sum::<f64>() / n;
            let total = self.count + n;
            let delta = bm - self.mean[j];
            let m2 = self.var[j] * self.count + bv * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count += n;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(&v, (&m, &var))| ((v - m) / libm::sqrt(var + 1e-8)).clamp(-self.clip, self.clip))
            .collect()
    }
}

/// Gaussian actor, state-independent log standard deviation, and critic.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Policy {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub log_std: Vec<f64>,
}

/// Gradients matching the layout of [`Policy::flat_parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    pub actor: GradientSet,
    pub log_std: Vec<f64>,
    pub critic: GradientSet,
}

impl PolicyGradients {
    pub fn flat(&self) -> Vec<f64> {
        self.actor.iter().chain(self.log_std.iter()).chain(self.critic.iter()).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.flat().iter().map(|g| g * g).sum())
    }
}

impl Policy {
    pub fn init(observation: usize, action: usize, config: &PpoConfig, seed: u64) -> Result<Self> {
        let mut sizes = vec![observation];
        sizes.extend_from_slice(&config.hidden);
        let mut acts = vec![Activation::Tanh; config.hidden.len()];
        acts.push(Activation::Identity);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(action);
        sizes.push(1);
        let mut rng = seed::stream_rng(seed, seed::POLICY_INIT);
        let mut actor = DenseNet::init(&actor_sizes, &acts, rng.random())?;
        let last = actor.layers.len() - 1;
        actor.scale_layer(last, config.actor_output_scale);
        let critic = DenseNet::init(&sizes, &acts, rng.random())?;
        Ok(Self { actor, critic, log_std: vec![config.log_std_init; action] })
    }

    pub fn observation_size(&self) -> usize {
        self.actor.input_size()
    }

    pub fn action_size(&self) -> usize {
        self.log_std.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.actor.parameter_count() + self.log_std.len() + self.critic.parameter_count()
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        self.actor.parameters().chain(self.log_std.iter()).chain(self.critic.parameters()).copied().collect()
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(arg_err!("{} values for {} parameters", values.len(), self.parameter_count()));
        }
        let params = self.actor.parameters_mut().chain(self.log_std.iter_mut()).chain(self.critic.parameters_mut());
        for (p, v) in params.zip(values) {
            *p = *v;
        }
        Ok(())
    }

    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.predict_row(obs)
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.predict_row(obs)[0]
    }

    /// Draws `a ~ N(μ(obs), σ²)`; returns the action, its log-probability and the value estimate.
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> (Vec<f64>, f64, f64) {
        let mean = self.mean_action(obs);
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| m + libm::exp(ls) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        (action, lp, self.value(obs))
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + LOG_2PI)).sum()
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / libm::exp(ls);
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

/// Generalised advantage estimation along one environment's trajectory.
///
/// `dones[t]` marks that the episode ended at step `t`, cutting the
/// bootstrap from `t + 1`. Returns `(advantages, returns)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(arg_err!("rewards, values and dones must have equal length"));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, live) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], 1.0)
        } else {
            (bootstrap_value, 1.0)
        };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Flattened on-policy samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBatch {
    pub observation_size: usize,
    pub action_size: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn new(observation_size: usize, action_size: usize) -> Self {
        Self { observation_size, action_size, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], log_prob: f64, advantage: f64, ret: f64) {
        self.observations.extend_from_slice(obs);
        self.actions.extend_from_slice(action);
        self.log_probs.push(log_prob);
        self.advantages.push(advantage);
        self.returns.push(ret);
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.observation_size..(i + 1) * self.observation_size]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_size..(i + 1) * self.action_size]
    }

    /// Shifts advantages to zero mean and (population) unit variance.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len() as f64;
        if n == 0.0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n;
        let var = self.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
        self.advantages.iter_mut().for_each(|a| *a = (*a - mean) * scale);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// PPO loss on the samples `indices` of `batch` and its exact gradient.
pub fn loss_and_grads(
    policy: &Policy,
    batch: &RolloutBatch,
    indices: &[usize],
    config: &PpoConfig,
) -> Result<(LossStats, PolicyGradients)> {
    if indices.is_empty() {
        return Err(arg_err!("empty minibatch"));
    }
    let b = indices.len() as f64;
    let rows: Vec<&[f64]> = indices.iter().map(|&i| batch.observation(i)).collect();
    let x = Batch::from_rows(&rows)?;
    let (mean, actor_cache) = policy.actor.forward(&x)?;
    let (values, critic_cache) = policy.critic.forward(&x)?;

    let inv_var: Vec<f64> = policy.log_std.iter().map(|ls| libm::exp(-2.0 * ls)).collect();
    let mut mean_grad = Batch::zeros(x.rows, policy.action_size());
    let mut value_grad = Batch::zeros(x.rows, 1);
    let mut log_std_grad = vec![-config.entropy_coef; policy.action_size()];
    let mut stats = LossStats::default();

    for (r, &i) in indices.iter().enumerate() {
        let mu = mean.row(r);
        let action = batch.action(i);
        let logp = gaussian_log_prob(mu, &policy.log_std, action);
        let log_ratio = logp - batch.log_probs[i];
        let ratio = libm::exp(log_ratio);
        let adv = batch.advantages[i];
        let clipped = ratio.clamp(1.0 - config.clip_range, 1.0 + config.clip_range);
        let surrogate = (ratio * adv).min(clipped * adv);
        stats.policy_loss -= surrogate / b;
        stats.approx_kl += (-log_ratio) / b;
        if (ratio - 1.0).abs() > config.clip_range {
            stats.clip_fraction += 1.0 / b;
        }
        // d(-surrogate)/d(logp) is nonzero only when the unclipped branch is active
        let dlogp = if ratio * adv <= clipped * adv { -ratio * adv / b } else { 0.0 };
        if dlogp != 0.0 {
            let g = mean_grad.row_mut(r);
            for j in 0..policy.action_size() {
                let diff = action[j] - mu[j];
                g[j] = dlogp * diff * inv_var[j];
                log_std_grad[j] += dlogp * (diff * diff * inv_var[j] - 1.0);
            }
        }
        let err = values.row(r)[0] - batch.returns[i];
        stats.value_loss += err * err / b;
        value_grad.row_mut(r)[0] = config.value_coef * 2.0 * err / b;
    }
    stats.entropy = policy.entropy();
    stats.loss = stats.policy_loss + config.value_coef * stats.value_loss - config.entropy_coef * stats.entropy;

    let (actor, _) = policy.actor.backward(&actor_cache, &mean_grad)?;
    let (critic, _) = policy.critic.backward(&critic_cache, &value_grad)?;
    let grads = PolicyGradients { actor, log_std: log_std_grad, critic };
    stats.grad_norm = grads.norm();
    Ok((stats, grads))
}

/// Optimiser state for [`ppo_update`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpoOptimizer {
    pub adam: AdamConfig,
    pub state: AdamState,
}

impl PpoOptimizer {
    pub fn new(policy: &Policy, config: &PpoConfig) -> Self {
        Self {
            adam: AdamConfig::with_learning_rate(config.learning_rate),
            state: AdamState::new(policy.parameter_count()),
        }
    }
}

/// Clipped-gradient Adam step on one minibatch.
pub fn apply_gradients(
    policy: &mut Policy,
    grads: &PolicyGradients,
    optimizer: &mut PpoOptimizer,
    config: &PpoConfig,
) -> Result<()> {
    let mut flat = grads.flat();
    if flat.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("policy gradient".into()));
    }
    let norm = libm::sqrt(flat.iter().map(|g| g * g).sum());
    if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
        let s = config.max_grad_norm / norm;
        flat.iter_mut().for_each(|g| *g *= s);
    }
    let params = policy.actor.parameters_mut().chain(policy.log_std.iter_mut()).chain(policy.critic.parameters_mut());
    optimizer.state.update(&optimizer.adam, params, flat);
    for ls in &mut policy.log_std {
        *ls = ls.clamp(config.log_std_min, config.log_std_max);
    }
    Ok(())
}

/// Several epochs of shuffled minibatch updates. Returns stats averaged over minibatches.
pub fn ppo_update<R: Rng>(
    policy: &mut Policy,
    optimizer: &mut PpoOptimizer,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(arg_err!("empty rollout batch"));
    }
    let mut batch = batch.clone();
    if config.normalize_advantages {
        batch.normalize_advantages();
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let chunk = batch.len().div_ceil(config.minibatches);
    let mut total = LossStats::default();
    let mut count = 0.0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for idx in order.chunks(chunk) {
            let (stats, grads) = loss_and_grads(policy, &batch, idx, config)?;
            apply_gradients(policy, &grads, optimizer, config)?;
            total.loss += stats.loss;
            total.policy_loss += stats.policy_loss;
            total.value_loss += stats.value_loss;
            total.entropy += stats.entropy;
            total.approx_kl += stats.approx_kl;
            total.clip_fraction += stats.clip_fraction;
            total.grad_norm += stats.grad_norm;
            count += 1.0;
        }
    }
    for v in [
        &mut total.loss,
        &mut total.policy_loss,
        &mut total.value_loss,
        &mut total.entropy,
        &mut total.approx_kl,
        &mut total.clip_fraction,
        &mut total.grad_norm,
    ] {
        *v /= count;
    }
    Ok(total)
}
