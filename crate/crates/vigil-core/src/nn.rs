//! Dense feed-forward networks trained from scratch with minibatch SGD.
//!
//! Weights are row-major `f64` matrices, backpropagation is hand-derived,
//! and [`numerical_gradient_check`] verifies it against central finite
//! differences. Training is a pure function of `(data, config, seed)`: two
//! runs with the same inputs produce bitwise-identical weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gradcheck;
use crate::math;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Softmax,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Cross entropy over a softmax head; targets must be one-hot.
    CrossEntropy,
    /// Squared error averaged over output dimensions and batch.
    Mse,
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 50,
            learning_rate: 0.01,
            seed: 0,
            loss: Loss::CrossEntropy,
        }
    }
}

impl TrainConfig {
    fn validate(&self, n_samples: usize) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.batch_size > n_samples {
            return Err(Error::invalid(format!(
                "batch_size {} exceeds training-set size {}",
                self.batch_size, n_samples
            )));
        }
        Ok(())
    }
}

/// Per-layer weight and bias gradients, matching a network's shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Metadata frozen into a trained artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    pub final_loss: f64,
}

/// A trained dense network plus its training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub network: DenseNetwork,
    pub meta: TrainMeta,
}

/// Fully connected network: ReLU hidden layers, softmax or identity head.
///
/// Layer `k` maps `layer_sizes[k]` inputs to `layer_sizes[k + 1]` outputs
/// through a row-major `(out, in)` weight matrix and a bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
}

impl DenseNetwork {
    /// Glorot-uniform initialization from a seeded generator.
    ///
    /// Biases get a small uniform jitter rather than zeros: with all-zero
    /// biases a layer whose inputs all die under ReLU has pre-activations
    /// exactly at the kink, which breaks finite-difference verification and
    /// stalls training on narrow layers.
    pub fn seeded(layer_sizes: &[usize], output: OutputActivation, seed: u64) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let mut rng = Rng::seed_from(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[k], layer_sizes[k + 1]);
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let mut w = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                w.push(rng.uniform(-limit, limit));
            }
            weights.push(w);
            biases.push((0..fan_out).map(|_| rng.uniform(-0.05, 0.05)).collect());
        }
        Ok(DenseNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: HiddenActivation::Relu,
            output_activation: output,
        })
    }

    /// All-zero weights and biases; useful as a degenerate reference.
    pub fn zeroed(layer_sizes: &[usize], output: OutputActivation) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let weights = (0..layer_sizes.len() - 1)
            .map(|k| vec![0.0; layer_sizes[k] * layer_sizes[k + 1]])
            .collect();
        let biases = (1..layer_sizes.len()).map(|k| vec![0.0; layer_sizes[k]]).collect();
        Ok(DenseNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: HiddenActivation::Relu,
            output_activation: output,
        })
    }

    /// Rebuilds a network from stored parts, validating every shape.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        output: OutputActivation,
    ) -> Result<Self> {
        Self::validate_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != layer_sizes.len() - 1 {
            return Err(Error::invalid("layer count mismatch between sizes and parameters"));
        }
        for k in 0..weights.len() {
            if weights[k].len() != layer_sizes[k] * layer_sizes[k + 1] {
                return Err(Error::invalid(format!("weight matrix {k} has the wrong shape")));
            }
            if biases[k].len() != layer_sizes[k + 1] {
                return Err(Error::invalid(format!("bias vector {k} has the wrong length")));
            }
        }
        Ok(DenseNetwork {
            layer_sizes,
            weights,
            biases,
            hidden_activation: HiddenActivation::Relu,
            output_activation: output,
        })
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a network needs at least input and output layers"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Activations of the final layer for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let trace = self.forward_trace(x);
        Ok(trace.activations.into_iter().last().unwrap())
    }

    /// Forward pass keeping pre-activations and activations per layer.
    fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        let mut pre = Vec::with_capacity(self.layer_count());
        activations.push(x.to_vec());
        for k in 0..self.layer_count() {
            let input = &activations[k];
            let out_dim = self.layer_sizes[k + 1];
            let in_dim = self.layer_sizes[k];
            let mut z = self.biases[k].clone();
            for o in 0..out_dim {
                let row = &self.weights[k][o * in_dim..(o + 1) * in_dim];
                let mut sum = z[o];
                for (w, xi) in row.iter().zip(input.iter()) {
                    sum += w * xi;
                }
                z[o] = sum;
            }
            let a = if k + 1 == self.layer_count() {
                match self.output_activation {
                    OutputActivation::Softmax => softmax(&z),
                    OutputActivation::Identity => z.clone(),
                }
            } else {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        Trace { activations, pre }
    }

    /// Gradient of the mean batch loss with respect to every parameter.
    pub fn backprop(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        loss: Loss,
    ) -> Result<Gradients> {
        self.check_batch(inputs, targets, loss)?;
        let mut grads = self.zero_grads();
        for (x, t) in inputs.iter().zip(targets) {
            let trace = self.forward_trace(x);
            self.backward_sample(&trace, t, loss, &mut grads);
        }
        let scale = 1.0 / inputs.len() as f64;
        for layer in grads.weights.iter_mut().chain(grads.biases.iter_mut()) {
            for g in layer.iter_mut() {
                *g *= scale;
            }
        }
        Ok(grads)
    }

    fn check_batch(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: Loss) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::invalid("inputs and targets differ in length"));
        }
        if loss == Loss::CrossEntropy && self.output_activation != OutputActivation::Softmax {
            return Err(Error::invalid("cross entropy requires a softmax head"));
        }
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            if x.iter().any(|v| v.is_nan()) {
                return Err(Error::invalid(format!("NaN in input {i}")));
            }
        }
        for t in targets {
            if t.len() != self.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.output_dim(),
                    got: t.len(),
                });
            }
        }
        Ok(())
    }

    fn zero_grads(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Accumulates one sample's parameter gradients (un-normalized).
    fn backward_sample(&self, trace: &Trace, target: &[f64], loss: Loss, grads: &mut Gradients) {
        let last = self.layer_count() - 1;
        let output = &trace.activations[last + 1];
        let m = output.len() as f64;

        // dL/dz for the output layer.
        let mut dz: Vec<f64> = match (loss, self.output_activation) {
            (Loss::CrossEntropy, OutputActivation::Softmax) => {
                output.iter().zip(target).map(|(&p, &t)| p - t).collect()
            }
            (Loss::Mse, OutputActivation::Identity) => output
                .iter()
                .zip(target)
                .map(|(&a, &t)| 2.0 * (a - t) / m)
                .collect(),
            (Loss::Mse, OutputActivation::Softmax) => {
                let da: Vec<f64> = output
                    .iter()
                    .zip(target)
                    .map(|(&a, &t)| 2.0 * (a - t) / m)
                    .collect();
                let dot: f64 = da.iter().zip(output).map(|(&d, &p)| d * p).sum();
                output.iter().zip(&da).map(|(&p, &d)| p * (d - dot)).collect()
            }
            (Loss::CrossEntropy, OutputActivation::Identity) => unreachable!("rejected in check_batch"),
        };

        for k in (0..=last).rev() {
            let input = &trace.activations[k];
            let in_dim = self.layer_sizes[k];
            let out_dim = self.layer_sizes[k + 1];
            for o in 0..out_dim {
                let g = dz[o];
                grads.biases[k][o] += g;
                let row = &mut grads.weights[k][o * in_dim..(o + 1) * in_dim];
                for (gw, xi) in row.iter_mut().zip(input.iter()) {
                    *gw += g * xi;
                }
            }
            if k == 0 {
                break;
            }
            // Propagate through the ReLU of the previous hidden layer.
            let mut prev = vec![0.0; in_dim];
            for o in 0..out_dim {
                let g = dz[o];
                let row = &self.weights[k][o * in_dim..(o + 1) * in_dim];
                for (p, w) in prev.iter_mut().zip(row.iter()) {
                    *p += g * w;
                }
            }
            let pre = &trace.pre[k - 1];
            for (p, &z) in prev.iter_mut().zip(pre.iter()) {
                if z <= 0.0 {
                    *p = 0.0;
                }
            }
            dz = prev;
        }
    }

    /// `w <- w - lr * g` elementwise; this network is the sole state.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        for (w, gw) in self.weights.iter_mut().zip(&grads.weights) {
            for (wi, gi) in w.iter_mut().zip(gw) {
                *wi -= learning_rate * gi;
            }
        }
        for (b, gb) in self.biases.iter_mut().zip(&grads.biases) {
            for (bi, gi) in b.iter_mut().zip(gb) {
                *bi -= learning_rate * gi;
            }
        }
    }

    /// Mean batch loss under the given criterion.
    pub fn batch_loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: Loss) -> Result<f64> {
        self.check_batch(inputs, targets, loss)?;
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let out = self.forward(x)?;
            total += sample_loss(&out, t, loss);
        }
        Ok(total / inputs.len() as f64)
    }

    /// Flat parameter vector: per layer, row-major weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for k in 0..self.layer_count() {
            p.extend_from_slice(&self.weights[k]);
            p.extend_from_slice(&self.biases[k]);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let expected: usize = self
            .weights
            .iter()
            .map(|w| w.len())
            .chain(self.biases.iter().map(|b| b.len()))
            .sum();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut offset = 0;
        for k in 0..self.layer_count() {
            let wl = self.weights[k].len();
            self.weights[k].copy_from_slice(&params[offset..offset + wl]);
            offset += wl;
            let bl = self.biases[k].len();
            self.biases[k].copy_from_slice(&params[offset..offset + bl]);
            offset += bl;
        }
        Ok(())
    }

    /// Flattens gradients in the same order as [`DenseNetwork::params`].
    pub fn flatten_grads(&self, grads: &Gradients) -> Vec<f64> {
        let mut g = Vec::new();
        for k in 0..self.layer_count() {
            g.extend_from_slice(&grads.weights[k]);
            g.extend_from_slice(&grads.biases[k]);
        }
        g
    }
}

struct Trace {
    /// `activations[0]` is the input; one entry per layer after it.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

/// Softmax with max subtraction so large logits cannot overflow.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| math::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn sample_loss(output: &[f64], target: &[f64], loss: Loss) -> f64 {
    match loss {
        Loss::CrossEntropy => -target
            .iter()
            .zip(output)
            .map(|(&t, &p)| t * math::ln(p.max(1e-15)))
            .sum::<f64>(),
        Loss::Mse => {
            let m = output.len() as f64;
            output
                .iter()
                .zip(target)
                .map(|(&a, &t)| (a - t) * (a - t))
                .sum::<f64>()
                / m
        }
    }
}

/// Minibatch SGD with a per-epoch seeded shuffle.
///
/// Returns the trained artifact and the mean epoch losses (computed from the
/// forward passes that produced each update, i.e. before the step). With
/// `epochs = 0` the returned weights equal the initialization.
pub fn train(
    net: DenseNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(ModelArtifact, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::invalid("empty training data"));
    }
    cfg.validate(inputs.len())?;
    net.check_batch(inputs, targets, cfg.loss)?;
    if cfg.loss == Loss::CrossEntropy {
        for (i, t) in targets.iter().enumerate() {
            let sum: f64 = t.iter().sum();
            let one_hot = t.iter().all(|&v| v == 0.0 || v == 1.0) && sum == 1.0;
            if !one_hot {
                return Err(Error::invalid(format!(
                    "target {i} is not one-hot (cross entropy requires one-hot labels)"
                )));
            }
        }
    }

    let mut net = net;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    let mut batch_x: Vec<Vec<f64>> = Vec::new();
    let mut batch_t: Vec<Vec<f64>> = Vec::new();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_t.clear();
            for &i in chunk {
                batch_x.push(inputs[i].clone());
                batch_t.push(targets[i].clone());
            }
            epoch_loss += net.batch_loss(&batch_x, &batch_t, cfg.loss)? * chunk.len() as f64;
            let grads = net.backprop(&batch_x, &batch_t, cfg.loss)?;
            net.sgd_step(&grads, cfg.learning_rate);
        }
        history.push(epoch_loss / inputs.len() as f64);
    }

    let final_loss = history.last().copied().unwrap_or(f64::NAN);
    let meta = TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        loss: cfg.loss,
        final_loss,
    };
    Ok((ModelArtifact { network: net, meta }, history))
}

/// Compares analytic and central-difference gradients over every parameter.
///
/// Returns the max relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn numerical_gradient_check(
    net: &DenseNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    loss: Loss,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::invalid("step h must lie in (0, 1e-3]"));
    }
    let analytic = net.flatten_grads(&net.backprop(inputs, targets, loss)?);
    let params = net.params();
    let mut probe = net.clone();
    let numeric = gradcheck::central_difference(
        |p| {
            probe.set_params(p).unwrap();
            probe.batch_loss(inputs, targets, loss).unwrap()
        },
        &params,
        h,
    );
    Ok(gradcheck::max_relative_error(&analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut Rng, n: usize, in_dim: usize, out_dim: usize, one_hot: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let inputs = (0..n)
            .map(|_| (0..in_dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let targets = (0..n)
            .map(|_| {
                if one_hot {
                    let mut t = vec![0.0; out_dim];
                    t[rng.below(out_dim)] = 1.0;
                    t
                } else {
                    (0..out_dim).map(|_| rng.uniform(-1.0, 1.0)).collect()
                }
            })
            .collect();
        (inputs, targets)
    }

    /// Independent triple-loop affine chain used as the forward oracle.
    fn forward_oracle(net: &DenseNetwork, x: &[f64]) -> Vec<f64> {
        let sizes = net.layer_sizes();
        let mut a = x.to_vec();
        for k in 0..sizes.len() - 1 {
            let mut z = vec![0.0; sizes[k + 1]];
            for o in 0..sizes[k + 1] {
                let mut acc = net.biases()[k][o];
                for i in 0..sizes[k] {
                    acc += net.weights()[k][o * sizes[k] + i] * a[i];
                }
                z[o] = acc;
            }
            if k + 1 == sizes.len() - 1 {
                a = match net.output_activation() {
                    OutputActivation::Softmax => softmax(&z),
                    OutputActivation::Identity => z,
                };
            } else {
                a = z.into_iter().map(|v| v.max(0.0)).collect();
            }
        }
        a
    }

    #[test]
    fn softmax_head_is_uniform_at_zero() {
        let net = DenseNetwork::zeroed(&[4, 3], OutputActivation::Softmax).unwrap();
        let out = net.forward(&[0.3, -2.0, 5.5, 0.0]).unwrap();
        for &p in &out {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_head_is_affine() {
        let net = DenseNetwork::from_parts(
            vec![1, 1],
            vec![vec![2.0]],
            vec![vec![1.0]],
            OutputActivation::Identity,
        )
        .unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn forward_matches_matmul_oracle() {
        let mut rng = Rng::seed_from(11);
        for case in 0..20 {
            let net = DenseNetwork::seeded(&[5, 7, 4, 3], OutputActivation::Softmax, case).unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let got = net.forward(&x).unwrap();
            let want = forward_oracle(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = DenseNetwork::zeroed(&[3, 2], OutputActivation::Identity).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        // Test-local central-difference oracle, independent of gradcheck.
        let mut rng = Rng::seed_from(3);
        for (loss, out_act) in [
            (Loss::CrossEntropy, OutputActivation::Softmax),
            (Loss::Mse, OutputActivation::Identity),
            (Loss::Mse, OutputActivation::Softmax),
        ] {
            let net = DenseNetwork::seeded(&[4, 6, 3], out_act, 99).unwrap();
            let (inputs, targets) = random_batch(&mut rng, 5, 4, 3, loss == Loss::CrossEntropy);
            let analytic = net.flatten_grads(&net.backprop(&inputs, &targets, loss).unwrap());
            let params = net.params();
            let h = 1e-6;
            let mut probe = net.clone();
            for (i, &a) in analytic.iter().enumerate() {
                let mut p = params.clone();
                p[i] += h;
                probe.set_params(&p).unwrap();
                let plus = probe.batch_loss(&inputs, &targets, loss).unwrap();
                p[i] -= 2.0 * h;
                probe.set_params(&p).unwrap();
                let minus = probe.batch_loss(&inputs, &targets, loss).unwrap();
                let numeric = (plus - minus) / (2.0 * h);
                let denom = a.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (a - numeric).abs() / denom < 1e-5,
                    "{loss:?}/{out_act:?} param {i}: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn mse_gradient_zero_at_targets() {
        let net = DenseNetwork::seeded(&[3, 5, 2], OutputActivation::Identity, 7).unwrap();
        let mut rng = Rng::seed_from(8);
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x).unwrap()).collect();
        let grads = net.backprop(&inputs, &targets, Loss::Mse).unwrap();
        for g in net.flatten_grads(&grads) {
            assert!(g.abs() <= 1e-12, "{g}");
        }
    }

    #[test]
    fn duplicating_batch_preserves_mean_gradient() {
        let net = DenseNetwork::seeded(&[3, 4, 2], OutputActivation::Softmax, 21).unwrap();
        let mut rng = Rng::seed_from(22);
        let (inputs, targets) = random_batch(&mut rng, 6, 3, 2, true);
        let g1 = net.flatten_grads(&net.backprop(&inputs, &targets, Loss::CrossEntropy).unwrap());
        let doubled_x: Vec<Vec<f64>> = inputs.iter().chain(&inputs).cloned().collect();
        let doubled_t: Vec<Vec<f64>> = targets.iter().chain(&targets).cloned().collect();
        let g2 = net.flatten_grads(&net.backprop(&doubled_x, &doubled_t, Loss::CrossEntropy).unwrap());
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn backprop_rejects_nan_inputs() {
        let net = DenseNetwork::zeroed(&[2, 2], OutputActivation::Identity).unwrap();
        let err = net
            .backprop(&[vec![f64::NAN, 0.0]], &[vec![0.0, 0.0]], Loss::Mse)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn sgd_zero_learning_rate_is_identity() {
        let mut net = DenseNetwork::seeded(&[2, 3, 2], OutputActivation::Softmax, 5).unwrap();
        let before = net.params();
        let grads = net
            .backprop(&[vec![0.5, -0.5]], &[vec![1.0, 0.0]], Loss::CrossEntropy)
            .unwrap();
        net.sgd_step(&grads, 0.0);
        assert_eq!(net.params(), before);
    }

    #[test]
    fn sgd_scalar_arithmetic() {
        let mut net = DenseNetwork::from_parts(
            vec![1, 1],
            vec![vec![1.0]],
            vec![vec![0.0]],
            OutputActivation::Identity,
        )
        .unwrap();
        let grads = Gradients {
            weights: vec![vec![0.5]],
            biases: vec![vec![0.0]],
        };
        net.sgd_step(&grads, 0.1);
        assert!((net.weights()[0][0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn two_steps_differ_from_one_summed_step_on_nonlinear_net() {
        let base = DenseNetwork::seeded(&[2, 8, 2], OutputActivation::Softmax, 31).unwrap();
        let inputs = vec![vec![0.7, -1.2], vec![-0.4, 0.9]];
        let targets = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let lr = 0.5;

        // Route A: recompute the gradient between two steps.
        let mut a = base.clone();
        let g0 = a.backprop(&inputs, &targets, Loss::CrossEntropy).unwrap();
        a.sgd_step(&g0, lr);
        let g1 = a.backprop(&inputs, &targets, Loss::CrossEntropy).unwrap();
        a.sgd_step(&g1, lr);

        // Route B: one step with the initial gradient applied twice.
        let mut b = base.clone();
        let g0b = b.backprop(&inputs, &targets, Loss::CrossEntropy).unwrap();
        b.sgd_step(&g0b, 2.0 * lr);

        let pa = a.params();
        let pb = b.params();
        assert!(
            pa.iter().zip(&pb).any(|(x, y)| (x - y).abs() > 1e-9),
            "nonlinear loss surface should separate the two routes"
        );
    }

    /// Plain gradient-descent logistic regression; the independence oracle
    /// that proves the blob task is learnable to >= 0.99 train accuracy.
    fn logistic_oracle_accuracy(inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut w = [0.0f64; 2];
        let mut b = 0.0f64;
        for _ in 0..500 {
            let mut gw = [0.0f64; 2];
            let mut gb = 0.0f64;
            for (x, &y) in inputs.iter().zip(labels) {
                let z = w[0] * x[0] + w[1] * x[1] + b;
                let p = math::sigmoid(z);
                let d = p - y as f64;
                gw[0] += d * x[0];
                gw[1] += d * x[1];
                gb += d;
            }
            let n = inputs.len() as f64;
            w[0] -= 0.5 * gw[0] / n;
            w[1] -= 0.5 * gw[1] / n;
            b -= 0.5 * gb / n;
        }
        let correct = inputs
            .iter()
            .zip(labels)
            .filter(|(x, &y)| {
                let z = w[0] * x[0] + w[1] * x[1] + b;
                (z > 0.0) as usize == y
            })
            .count();
        correct as f64 / inputs.len() as f64
    }

    fn gaussian_blobs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
        // Two 2D blobs, centers 6 sigma apart.
        let mut rng = Rng::seed_from(seed);
        let sigma = 1.0;
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let cx = if class == 0 { -3.0 } else { 3.0 };
            inputs.push(vec![rng.normal(cx, sigma), rng.normal(0.0, sigma)]);
            let mut t = vec![0.0; 2];
            t[class] = 1.0;
            targets.push(t);
            labels.push(class);
        }
        (inputs, targets, labels)
    }

    #[test]
    fn train_separates_gaussian_blobs() {
        let (inputs, targets, labels) = gaussian_blobs(42, 200);
        assert!(
            logistic_oracle_accuracy(&inputs, &labels) >= 0.99,
            "oracle must certify the data is separable"
        );

        let net = DenseNetwork::seeded(&[2, 16, 2], OutputActivation::Softmax, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 20,
            learning_rate: 0.1,
            seed: 0,
            loss: Loss::CrossEntropy,
        };
        let (artifact, history) = train(net, &inputs, &targets, &cfg).unwrap();
        let correct = inputs
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| {
                let out = artifact.network.forward(x).unwrap();
                let pred = if out[1] > out[0] { 1 } else { 0 };
                pred == y
            })
            .count();
        assert!(correct as f64 / inputs.len() as f64 >= 0.99, "{correct}/200");
        assert!(history.last().unwrap() < &history[0]);
    }

    #[test]
    fn full_batch_loss_history_is_monotone_on_separable_data() {
        let (inputs, targets, _) = gaussian_blobs(7, 100);
        let net = DenseNetwork::seeded(&[2, 8, 2], OutputActivation::Softmax, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 100,
            learning_rate: 0.05,
            seed: 1,
            loss: Loss::CrossEntropy,
        };
        let (_, history) = train(net, &inputs, &targets, &cfg).unwrap();
        for pair in history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let net = DenseNetwork::seeded(&[3, 4, 2], OutputActivation::Softmax, 77).unwrap();
        let init = net.params();
        let mut rng = Rng::seed_from(1);
        let (inputs, targets) = random_batch(&mut rng, 10, 3, 2, true);
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let (artifact, history) = train(net, &inputs, &targets, &cfg).unwrap();
        assert_eq!(artifact.network.params(), init);
        assert!(history.is_empty());
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let mut rng = Rng::seed_from(2);
        let (inputs, targets) = random_batch(&mut rng, 30, 3, 2, true);
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 8,
            learning_rate: 0.05,
            seed: 1234,
            loss: Loss::CrossEntropy,
        };
        let run = || {
            let net = DenseNetwork::seeded(&[3, 6, 2], OutputActivation::Softmax, cfg.seed).unwrap();
            train(net, &inputs, &targets, &cfg).unwrap()
        };
        let (a1, h1) = run();
        let (a2, h2) = run();
        assert_eq!(a1.network.params(), a2.network.params());
        assert_eq!(h1, h2);
        assert_eq!(a1.meta.final_loss.to_bits(), a2.meta.final_loss.to_bits());
    }

    #[test]
    fn train_rejects_empty_data_and_oversized_batch() {
        let net = DenseNetwork::zeroed(&[2, 2], OutputActivation::Softmax).unwrap();
        assert!(train(net.clone(), &[], &[], &TrainConfig::default()).is_err());
        let cfg = TrainConfig {
            batch_size: 10,
            ..TrainConfig::default()
        };
        let err = train(net, &[vec![0.0, 0.0]], &[vec![1.0, 0.0]], &cfg).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn gradient_check_small_net_passes() {
        let net = DenseNetwork::seeded(&[4, 8, 3], OutputActivation::Softmax, 5).unwrap();
        let mut rng = Rng::seed_from(6);
        let (inputs, targets) = random_batch(&mut rng, 4, 4, 3, true);
        let err = numerical_gradient_check(&net, &inputs, &targets, Loss::CrossEntropy, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn gradient_check_linear_net_is_tight() {
        // No hidden layer, identity head: the loss is quadratic in the
        // parameters, so central differences are exact up to roundoff.
        let net = DenseNetwork::seeded(&[3, 2], OutputActivation::Identity, 9).unwrap();
        let mut rng = Rng::seed_from(10);
        let (inputs, targets) = random_batch(&mut rng, 6, 3, 2, false);
        let err = numerical_gradient_check(&net, &inputs, &targets, Loss::Mse, 1e-4).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn gradient_check_detects_injected_fault() {
        let net = DenseNetwork::seeded(&[3, 5, 2], OutputActivation::Softmax, 13).unwrap();
        let mut rng = Rng::seed_from(14);
        let (inputs, targets) = random_batch(&mut rng, 4, 3, 2, true);
        let mut analytic =
            net.flatten_grads(&net.backprop(&inputs, &targets, Loss::CrossEntropy).unwrap());
        // Corrupt the largest component by a factor of two.
        let (idx, _) = analytic
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        analytic[idx] *= 2.0;
        let params = net.params();
        let mut probe = net.clone();
        let numeric = gradcheck::central_difference(
            |p| {
                probe.set_params(p).unwrap();
                probe.batch_loss(&inputs, &targets, Loss::CrossEntropy).unwrap()
            },
            &params,
            1e-6,
        );
        let err = gradcheck::max_relative_error(&analytic, &numeric);
        assert!(err > 0.3, "{err}");
    }

    #[test]
    fn gradient_check_rejects_bad_step() {
        let net = DenseNetwork::zeroed(&[2, 2], OutputActivation::Identity).unwrap();
        let r = numerical_gradient_check(&net, &[vec![1.0, 1.0]], &[vec![0.0, 0.0]], Loss::Mse, 1e-2);
        assert!(r.is_err());
    }

    #[test]
    fn gradient_check_holds_on_wide_architectures() {
        // Random nets up to 4 layers and 64 units.
        let mut rng = Rng::seed_from(404);
        for case in 0..5u64 {
            let mut sizes = vec![3 + rng.below(4)];
            for _ in 0..1 + rng.below(2) {
                sizes.push(8 + rng.below(57));
            }
            sizes.push(2 + rng.below(3));
            let net = DenseNetwork::seeded(&sizes, OutputActivation::Softmax, 4000 + case).unwrap();
            let out_dim = *sizes.last().unwrap();
            let inputs: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..sizes[0]).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect();
            let targets: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let mut t = vec![0.0; out_dim];
                    t[rng.below(out_dim)] = 1.0;
                    t
                })
                .collect();
            let err =
                numerical_gradient_check(&net, &inputs, &targets, Loss::CrossEntropy, 1e-6).unwrap();
            assert!(err < 1e-4, "sizes {sizes:?}: {err}");
        }
    }

    #[test]
    fn relu_path_computes_elementwise_max() {
        // A network wired as two identity affine layers exposes the hidden
        // ReLU directly: output = max(0, x).
        let mut rng = Rng::seed_from(55);
        let n = 6;
        let eye = |dim: usize| -> Vec<f64> {
            let mut w = vec![0.0; dim * dim];
            for i in 0..dim {
                w[i * dim + i] = 1.0;
            }
            w
        };
        let net = DenseNetwork::from_parts(
            vec![n, n, n],
            vec![eye(n), eye(n)],
            vec![vec![0.0; n], vec![0.0; n]],
            OutputActivation::Identity,
        )
        .unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let out = net.forward(&x).unwrap();
            for (o, &v) in out.iter().zip(&x) {
                assert_eq!(*o, v.max(0.0));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one_for_bounded_logits(
            logits in proptest::collection::vec(-500.0f64..500.0, 1..16)
        ) {
            let p = softmax(&logits);
            let sum: f64 = p.iter().sum();
            proptest::prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
            proptest::prop_assert!(p.iter().all(|&v| v >= 0.0));
        }
    }
}
