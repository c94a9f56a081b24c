//! Discrete object-state clusters from a binarising autoencoder followed by
//! a fixed random-hyperplane (SimHash) projection.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg_err, Result};
use crate::geometry::Pose;
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, Batch, DenseNet, GradientSet};
use crate::seed;
use crate::vector::Vector;

/// Cluster index in `[0, 2^H)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct HashIndex(pub u32);

/// Current-pose points followed by goal-pose points, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState(pub Vec<f64>);

impl ObjectState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn build_object_state<const D: usize>(
    canonical_points: &[Vector<D>],
    current: &Pose<D>,
    goal: &Pose<D>,
) -> Result<ObjectState> {
    if canonical_points.is_empty() {
        return Err(arg_err!("object state needs at least one canonical point"));
    }
    let mut v = Vec::with_capacity(2 * canonical_points.len() * D);
    for pose in [current, goal] {
        for p in canonical_points {
            v.extend_from_slice(&pose.apply_point(p));
        }
    }
    Ok(ObjectState(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HasherConfig {
    /// Hash bits `H`.
    pub bits: usize,
    /// Latent width `D`.
    pub latent: usize,
    /// Weight of the push-away-from-0.5 penalty.
    pub binarization_weight: f64,
    pub hidden: usize,
    pub learning_rate: f64,
    /// States per autoencoder step.
    pub batch_size: usize,
}

impl Default for HasherConfig {
    fn default() -> Self {
        Self { bits: 5, latent: 32, binarization_weight: 1.0, hidden: 64, learning_rate: 1e-3, batch_size: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateHasher {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    /// `H × D`, row-major. Never modified after construction.
    projection: Vec<f64>,
    pub projection_seed: u64,
    pub bits: usize,
    pub latent: usize,
    pub binarization_weight: f64,
}

/// Adam moments for both halves of the autoencoder.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HasherOptimizer {
    pub config: AdamConfig,
    pub encoder: AdamState,
    pub decoder: AdamState,
}

impl HasherOptimizer {
    pub fn new(hasher: &StateHasher, learning_rate: f64) -> Self {
        Self {
            config: AdamConfig::with_learning_rate(learning_rate),
            encoder: AdamState::for_net(&hasher.encoder),
            decoder: AdamState::for_net(&hasher.decoder),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutoencoderGradients {
    pub encoder: GradientSet,
    pub decoder: GradientSet,
}

/// `min((1−b)², b²)`
#[inline]
fn binarization_term(b: f64) -> f64 {
    let hi = 1.0 - b;
    (hi * hi).min(b * b)
}

#[inline]
fn binarization_derivative(b: f64) -> f64 {
    if b > 0.5 {
        -2.0 * (1.0 - b)
    } else {
        2.0 * b
    }
}

impl StateHasher {
    /// Encoder `[input, hidden, D]` (tanh, sigmoid), mirrored decoder, and a
    /// standard-normal projection drawn from `projection_seed`.
    pub fn new(input: usize, config: &HasherConfig, init_seed: u64, projection_seed: u64) -> Result<Self> {
        if config.bits == 0 || config.bits > config.latent || config.bits > 31 {
            return Err(arg_err!("hash bits {} must be in 1..=min(latent {}, 31)", config.bits, config.latent));
        }
        if !(config.binarization_weight >= 0.0) {
            return Err(arg_err!("binarization weight must be nonnegative"));
        }
        let encoder = DenseNet::init(
            &[input, config.hidden, config.latent],
            &[Activation::Tanh, Activation::Sigmoid],
            seed::derive_seed(init_seed, 0),
        )?;
        let decoder = DenseNet::init(
            &[config.latent, config.hidden, input],
            &[Activation::Tanh, Activation::Identity],
            seed::derive_seed(init_seed, 1),
        )?;
        let projection = Self::draw_projection(config.bits, config.latent, projection_seed);
        Ok(Self {
            encoder,
            decoder,
            projection,
            projection_seed,
            bits: config.bits,
            latent: config.latent,
            binarization_weight: config.binarization_weight,
        })
    }

    /// Replaces the random projection with explicit rows (`H × D`).
    pub fn with_projection(mut self, projection: Vec<f64>) -> Result<Self> {
        if projection.len() != self.bits * self.latent {
            return Err(arg_err!("projection must be {}x{}", self.bits, self.latent));
        }
        self.projection = projection;
        Ok(self)
    }

    pub fn draw_projection(bits: usize, latent: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::stream_rng(seed, seed::HASH_PROJECTION);
        (0..bits * latent).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn input_size(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn cluster_count(&self) -> u32 {
        1 << self.bits
    }

    fn check_state(&self, state: &ObjectState) -> Result<()> {
        if state.len() != self.input_size() {
            return Err(arg_err!("state length {} != hasher input {}", state.len(), self.input_size()));
        }
        Ok(())
    }

    /// Encoder output `b ∈ (0,1)^D`.
    pub fn encode(&self, state: &ObjectState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        Ok(self.encoder.predict_row(&state.0))
    }

    /// `b_i > 0.5`; an exact tie maps to `false`.
    pub fn binary_code(&self, state: &ObjectState) -> Result<Vec<bool>> {
        Ok(self.encode(state)?.into_iter().map(|b| b > 0.5).collect())
    }

    /// SimHash of a binary code: bit `i` is set iff row `i` of the projection
    /// has a positive dot product with the code mapped to ±1.
    pub fn hash_code(&self, code: &[bool]) -> HashIndex {
        let mut index = 0u32;
        for i in 0..self.bits {
            let row = &self.projection[i * self.latent..(i + 1) * self.latent];
            let dot: f64 = row.iter().zip(code).map(|(a, &c)| if c { *a } else { -*a }).sum();
            if dot > 0.0 {
                index |= 1 << i;
            }
        }
        HashIndex(index)
    }

    pub fn hash_state(&self, state: &ObjectState) -> Result<HashIndex> {
        Ok(self.hash_code(&self.binary_code(state)?))
    }

    /// Mean over states of `(1/D) Σ_i min((1−b_i)², b_i²)`.
    pub fn binarization_penalty(&self, states: &[ObjectState]) -> Result<f64> {
        if states.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for s in states {
            let b = self.encode(s)?;
            total += b.iter().map(|&v| binarization_term(v)).sum::<f64>() / self.latent as f64;
        }
        Ok(total / states.len() as f64)
    }

    /// Mean over the batch of `‖f(b) − s‖² + (λ/D) Σ_i min((1−b_i)², b_i²)`
    /// and its exact gradient with respect to both networks.
    pub fn loss_and_grads(&self, states: &[ObjectState]) -> Result<(f64, AutoencoderGradients)> {
        if states.is_empty() {
            return Err(arg_err!("autoencoder batch is empty"));
        }
        for s in states {
            self.check_state(s)?;
        }
        let n = states.len() as f64;
        let input = Batch::from_rows(&states.iter().map(|s| s.0.as_slice()).collect::<Vec<_>>())?;
        let (codes, enc_cache) = self.encoder.forward(&input)?;
        let (recon, dec_cache) = self.decoder.forward(&codes)?;

        let mut loss = 0.0;
        let mut d_recon = Batch::zeros(recon.rows, recon.cols);
        for (i, (r, s)) in recon.data.iter().zip(&input.data).enumerate() {
            let diff = r - s;
            loss += diff * diff;
            d_recon.data[i] = 2.0 * diff / n;
        }
        let lam_d = self.binarization_weight / self.latent as f64;
        for &b in &codes.data {
            loss += lam_d * binarization_term(b);
        }
        loss /= n;

        let (decoder_grads, mut d_codes) = self.decoder.backward(&dec_cache, &d_recon)?;
        for (d, &b) in d_codes.data.iter_mut().zip(&codes.data) {
            *d += lam_d * binarization_derivative(b) / n;
        }
        let (encoder_grads, _) = self.encoder.backward(&enc_cache, &d_codes)?;
        Ok((loss, AutoencoderGradients { encoder: encoder_grads, decoder: decoder_grads }))
    }

    /// One Adam step on the autoencoder loss. The projection is untouched.
    pub fn train_step(&mut self, states: &[ObjectState], optimizer: &mut HasherOptimizer) -> Result<f64> {
        let (loss, grads) = self.loss_and_grads(states)?;
        if !loss.is_finite() || !grads.encoder.is_finite() || !grads.decoder.is_finite() {
            return Err(crate::Error::NonFinite("autoencoder loss".into()));
        }
        adam_step(&mut self.encoder, &grads.encoder, &optimizer.config, &mut optimizer.encoder)?;
        adam_step(&mut self.decoder, &grads.decoder, &optimizer.config, &mut optimizer.decoder)?;
        Ok(loss)
    }
}

/// Always-zero hash used by the single-counter ablation.
pub fn forced_index() -> HashIndex {
    HashIndex(0)
}

/// Samples `count` states uniformly (with replacement) from `pool`.
pub fn sample_batch<R: Rng>(pool: &[ObjectState], count: usize, rng: &mut R) -> Vec<ObjectState> {
    if pool.is_empty() {
        return vec![];
    }
    (0..count).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
}
