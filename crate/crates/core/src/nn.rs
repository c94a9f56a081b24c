//! Dense feed-forward networks with hand-written reverse-mode gradients and Adam.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Row-major batch of vectors: one sample per row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Batch {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(arg_err!("batch data length {} != {rows}x{cols}", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(arg_err!("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    #[inline]
    fn affine_row(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let w = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            let mut acc = self.bias[j];
            for (a, b) in w.iter().zip(x) {
                acc += a * b;
            }
            *o = self.activation.apply(acc);
        }
    }
}

/// Multi-layer perceptron.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    /// Changes on every parameter mutation so stale caches can be detected.
    #[cfg_attr(feature = "serde", serde(skip, default = "fresh_stamp"))]
    stamp: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`DenseNet::forward`] for use in [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    stamp: u64,
    /// Input followed by the output of every layer.
    activations: Vec<Batch>,
}

impl Cache {
    pub fn input(&self) -> &Batch {
        &self.activations[0]
    }

    pub fn output(&self) -> &Batch {
        self.activations.last().expect("cache holds at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// One gradient array per parameter array of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn scale(&mut self, s: f64) {
        self.iter_mut().for_each(|g| *g *= s);
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }
}

impl DenseNet {
    /// Fan-in scaled uniform initialisation: weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(arg_err!("a network needs at least an input and an output layer"));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(arg_err!(
                "{} activations for {} layers",
                activations.len(),
                layer_sizes.len() - 1
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(arg_err!("layer sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(io, &activation)| {
                let (inputs, outputs) = (io[0], io[1]);
                let bound = libm::sqrt(6.0 / inputs as f64);
                let weights = (0..inputs * outputs).map(|_| rng.random_range(-bound..bound)).collect();
                Layer { inputs, outputs, weights, bias: vec![0.0; outputs], activation }
            })
            .collect();
        Ok(Self { layers, stamp: fresh_stamp() })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(arg_err!("layer widths do not chain"));
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(arg_err!("layer parameter shapes do not match widths"));
            }
        }
        if layers.is_empty() {
            return Err(arg_err!("no layers"));
        }
        Ok(Self { layers, stamp: fresh_stamp() })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    /// Mutable access to every parameter; invalidates outstanding caches.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.stamp = fresh_stamp();
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Multiplies one layer's weights and bias by `factor`.
    pub fn scale_layer(&mut self, layer: usize, factor: f64) {
        self.stamp = fresh_stamp();
        let l = &mut self.layers[layer];
        l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
    }

    fn check_width(&self, x: &Batch) -> Result<()> {
        if x.cols != self.input_size() {
            return Err(arg_err!("input width {} != network input {}", x.cols, self.input_size()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Batch) -> Result<(Batch, Cache)> {
        self.check_width(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let input = activations.last().expect("nonempty");
            let mut out = Batch::zeros(input.rows, layer.outputs);
            for r in 0..input.rows {
                layer.affine_row(input.row(r), out.row_mut(r));
            }
            activations.push(out);
        }
        let output = activations.last().expect("nonempty").clone();
        Ok((output, Cache { stamp: self.stamp, activations }))
    }

    /// Forward pass without recording a cache.
    pub fn predict(&self, x: &Batch) -> Result<Batch> {
        self.check_width(x)?;
        let mut out = Batch::zeros(x.rows, self.output_size());
        let mut scratch = Vec::new();
        for r in 0..x.rows {
            self.predict_row_into(x.row(r), &mut scratch);
            out.row_mut(r).copy_from_slice(&scratch);
        }
        Ok(out)
    }

    /// Single-sample forward pass.
    pub fn predict_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.predict_row_into(x, &mut out);
        out
    }

    fn predict_row_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let mut current: Vec<f64> = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.outputs];
            layer.affine_row(&current, &mut next);
            current = next;
        }
        *out = current;
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient with
    /// respect to the network input.
    pub fn backward(&self, cache: &Cache, output_gradient: &Batch) -> Result<(GradientSet, Batch)> {
        if cache.stamp != self.stamp {
            return Err(Error::Contract("cache was produced by a different parameter state".into()));
        }
        let out = cache.output();
        if output_gradient.rows != out.rows || output_gradient.cols != out.cols {
            return Err(arg_err!("output gradient shape does not match cached output"));
        }
        let mut grads = GradientSet::zeros_like(self);
        let mut upstream = output_gradient.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[li];
            let output = &cache.activations[li + 1];
            let lg = &mut grads.layers[li];
            let mut downstream = Batch::zeros(input.rows, layer.inputs);
            for r in 0..input.rows {
                let x = input.row(r);
                let y = output.row(r);
                let up = upstream.row(r);
                let dx = downstream.row_mut(r);
                for j in 0..layer.outputs {
                    let dz = up[j] * layer.activation.derivative_from_output(y[j]);
                    if dz == 0.0 {
                        continue;
                    }
                    lg.bias[j] += dz;
                    let w = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    let gw = &mut lg.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    for i in 0..layer.inputs {
                        gw[i] += dz * x[i];
                        dx[i] += dz * w[i];
                    }
                }
            }
            upstream = downstream;
        }
        Ok((grads, upstream))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_learning_rate(1e-3)
    }
}

/// First and second moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        Self { m: vec![0.0; parameter_count], v: vec![0.0; parameter_count], step: 0 }
    }

    pub fn for_net(net: &DenseNet) -> Self {
        Self::new(net.parameter_count())
    }

    /// Bias-corrected Adam update over paired parameter/gradient streams.
    pub fn update<'a, P, G>(&mut self, config: &AdamConfig, params: P, grads: G)
    where
        P: IntoIterator<Item = &'a mut f64>,
        G: IntoIterator<Item = f64>,
    {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(config.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(config.beta2, t as f64);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
        }
    }
}

/// One Adam step on `net` using `grads`.
pub fn adam_step(net: &mut DenseNet, grads: &GradientSet, config: &AdamConfig, state: &mut AdamState) -> Result<()> {
    if state.m.len() != net.parameter_count() || grads.layers.len() != net.layers.len() {
        return Err(arg_err!("optimizer state does not match network"));
    }
    let g: Vec<f64> = grads.iter().copied().collect();
    state.update(config, net.parameters_mut(), g);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_batch(rows: usize, cols: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let acts = [Activation::Tanh, Activation::Identity];
        let a = DenseNet::init(&[4, 8, 2], &acts, 7).unwrap();
        let b = DenseNet::init(&[4, 8, 2], &acts, 7).unwrap();
        let bits = |n: &DenseNet| n.parameters().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!((a.layers[0].outputs, a.layers[0].inputs), (8, 4));
        assert_eq!((a.layers[1].outputs, a.layers[1].inputs), (2, 8));
        assert_eq!(a.layers[0].weights.len(), 32);
        assert!(DenseNet::init(&[4], &[], 0).is_err());
        assert!(DenseNet::init(&[4, 2], &acts, 0).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = DenseNet::init(&[100, 50], &[Activation::Tanh], 1).unwrap();
        let bound = libm::sqrt(6.0 / 100.0);
        assert!(net.layers[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn forward_basics() {
        let mut zero = DenseNet::init(&[3, 5, 2], &[Activation::Tanh, Activation::Identity], 2).unwrap();
        zero.parameters_mut().for_each(|p| *p = 0.0);
        let x = rand_batch(4, 3, 0);
        assert!(zero.predict(&x).unwrap().data.iter().all(|&v| v == 0.0));

        let ident = DenseNet::from_layers(vec![Layer {
            inputs: 3,
            outputs: 3,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            bias: vec![0.0; 3],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(ident.predict(&x).unwrap(), x);

        let sig = DenseNet::init(&[3, 4], &[Activation::Sigmoid], 3).unwrap();
        let y = sig.predict(&rand_batch(10, 3, 4)).unwrap();
        assert!(y.data.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(sig.forward(&rand_batch(1, 2, 0)).is_err());
    }

    #[test]
    fn forward_rows_are_independent() {
        let net = DenseNet::init(&[3, 6, 2], &[Activation::Tanh, Activation::Sigmoid], 5).unwrap();
        let x = rand_batch(5, 3, 9);
        let y = net.predict(&x).unwrap();
        for r in 0..5 {
            assert_eq!(net.predict_row(x.row(r)), y.row(r));
        }
    }

    #[test]
    fn backward_linearity_and_stale_cache() {
        let mut net = DenseNet::init(&[3, 4, 2], &[Activation::Tanh, Activation::Identity], 6).unwrap();
        let x = rand_batch(3, 3, 1);
        let (_, cache) = net.forward(&x).unwrap();
        let (zero, _) = net.backward(&cache, &Batch::zeros(3, 2)).unwrap();
        assert!(zero.iter().all(|&g| g == 0.0));
        let up = rand_batch(3, 2, 2);
        let (g1, _) = net.backward(&cache, &up).unwrap();
        let mut up2 = up.clone();
        up2.scale(2.0);
        let (g2, _) = net.backward(&cache, &up2).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        net.scale_layer(0, 1.0);
        assert!(matches!(net.backward(&cache, &up), Err(Error::Contract(_))));
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut net = DenseNet::init(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 8).unwrap();
        let before = net.clone();
        let mut state = AdamState::for_net(&net);
        let zeros = GradientSet::zeros_like(&net);
        for _ in 0..5 {
            adam_step(&mut net, &zeros, &AdamConfig::default(), &mut state).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut params = [1.0, -2.0, 0.5];
        let grads = [0.3, -7.0, 1e-3];
        let mut state = AdamState::new(3);
        state.update(&cfg, params.iter_mut(), grads.iter().copied());
        let expected = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01];
        for (p, e) in params.iter().zip(expected) {
            assert!((p - e).abs() < 1e-6, "{p} vs {e}");
        }
    }

    #[test]
    fn adam_constant_gradient_step_converges_to_learning_rate() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut p = [0.0];
        let mut state = AdamState::new(1);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            state.update(&cfg, p.iter_mut(), [0.25]);
            last = before - p[0];
        }
        assert!((last - 0.01).abs() < 1e-6);
    }
}
