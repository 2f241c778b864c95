//! Fully-connected classifier built from a candidate architecture, trained
//! with manual backpropagation under plain or adaptive-moments mini-batch
//! gradient descent. Dropout uses inverted scaling during training, so
//! inference needs no weight rescaling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::evaluator::dataset::Dataset;
use crate::seeding::{derive_seed, Stream};
use crate::types::{ArchitectureSpec, BlockFamily, Optimizer, PipelineConfig};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// One dense sub-layer. Hidden sub-layers apply a rectifier and dropout;
/// `skip_from` adds an earlier activation to this sub-layer's output.
#[derive(Debug, Clone)]
struct SubLayer {
    weights: Vec<f64>, // out_dim x in_dim, row-major
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    hidden: bool,
    skip_from: Option<usize>,
}

/// A feed-forward classifier: a chain of sub-layers ending in linear logits
/// over the classes.
#[derive(Debug, Clone)]
pub struct Network {
    sublayers: Vec<SubLayer>,
    pub n_inputs: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
}

/// Per-sample forward pass state kept for backpropagation.
struct Trace {
    activations: Vec<Vec<f64>>,     // one per activation index, [0] = input
    pre_activations: Vec<Vec<f64>>, // z per sub-layer
    masks: Vec<Option<Vec<f64>>>,   // scaled dropout mask per sub-layer
}

impl Trace {
    fn logits(&self) -> &[f64] {
        self.activations.last().expect("non-empty trace")
    }
}

/// Gradient accumulator shaped like the network parameters.
struct GradientBuffer {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl GradientBuffer {
    fn zeros(network: &Network) -> Self {
        Self {
            weights: network
                .sublayers
                .iter()
                .map(|s| vec![0.0; s.weights.len()])
                .collect(),
            biases: network
                .sublayers
                .iter()
                .map(|s| vec![0.0; s.bias.len()])
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for grad in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for g in grad {
                *g *= factor;
            }
        }
    }
}

/// Sub-layer widths for one architecture layer, by block family. Bottleneck
/// blocks run every sub-layer except the last at half width.
fn block_widths(family: BlockFamily, width: u32, blocks: u32) -> Vec<usize> {
    match family {
        BlockFamily::Plain | BlockFamily::Residual => vec![width as usize; blocks as usize],
        BlockFamily::Bottleneck => {
            let mut widths = vec![(width / 2).max(1) as usize; blocks.saturating_sub(1) as usize];
            widths.push(width as usize);
            widths
        }
    }
}

impl Network {
    /// Build an untrained network for an architecture, He-initialized from
    /// the given rng.
    pub fn build(
        arch: &ArchitectureSpec,
        n_inputs: usize,
        n_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Network {
        let mut sublayers: Vec<SubLayer> = Vec::new();
        let mut activation_dims = vec![n_inputs];

        for layer in 0..arch.depth() {
            let widths = block_widths(
                arch.block_family,
                arch.widths_per_layer[layer],
                arch.blocks_per_layer[layer],
            );
            let block_start = sublayers.len();
            for width in &widths {
                let in_dim = *activation_dims.last().unwrap();
                sublayers.push(SubLayer {
                    weights: he_init(rng, *width, in_dim),
                    bias: vec![0.0; *width],
                    in_dim,
                    out_dim: *width,
                    hidden: true,
                    skip_from: None,
                });
                activation_dims.push(*width);
            }
            if arch.block_family == BlockFamily::Residual {
                // Identity skip over each full sub-layer pair when the pair's
                // input and output dimensions agree.
                let mut first = block_start;
                while first + 1 < block_start + widths.len() {
                    let second = first + 1;
                    if activation_dims[first] == activation_dims[second + 1] {
                        sublayers[second].skip_from = Some(first);
                    }
                    first += 2;
                }
            }
        }

        let in_dim = *activation_dims.last().unwrap();
        sublayers.push(SubLayer {
            weights: he_init(rng, n_classes, in_dim),
            bias: vec![0.0; n_classes],
            in_dim,
            out_dim: n_classes,
            hidden: false,
            skip_from: None,
        });

        Network {
            sublayers,
            n_inputs,
            n_classes,
            dropout_rate: arch.dropout_rate,
        }
    }

    fn forward_traced(&self, x: &[f64], mut dropout_rng: Option<&mut ChaCha8Rng>) -> Trace {
        debug_assert_eq!(x.len(), self.n_inputs);
        let keep = 1.0 - self.dropout_rate;
        let mut activations = Vec::with_capacity(self.sublayers.len() + 1);
        activations.push(x.to_vec());
        let mut pre_activations = Vec::with_capacity(self.sublayers.len());
        let mut masks = Vec::with_capacity(self.sublayers.len());

        for (index, layer) in self.sublayers.iter().enumerate() {
            let input = &activations[index];
            let mut z = layer.bias.clone();
            for (weights, z_row) in layer.weights.chunks_exact(layer.in_dim).zip(z.iter_mut()) {
                let mut sum = 0.0;
                for (w, v) in weights.iter().zip(input.iter()) {
                    sum += w * v;
                }
                *z_row += sum;
            }

            let mut out;
            let mask = if layer.hidden {
                out = z.iter().map(|v| v.max(0.0)).collect::<Vec<f64>>();
                match dropout_rng.as_deref_mut() {
                    Some(rng) if self.dropout_rate > 0.0 => {
                        let mask: Vec<f64> = (0..layer.out_dim)
                            .map(|_| {
                                if rng.random::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        for (o, m) in out.iter_mut().zip(&mask) {
                            *o *= m;
                        }
                        Some(mask)
                    }
                    _ => None,
                }
            } else {
                out = z.clone();
                None
            };

            if let Some(from) = layer.skip_from {
                debug_assert_eq!(activations[from].len(), out.len());
                for (o, s) in out.iter_mut().zip(&activations[from]) {
                    *o += s;
                }
            }

            pre_activations.push(z);
            masks.push(mask);
            activations.push(out);
        }

        Trace {
            activations,
            pre_activations,
            masks,
        }
    }

    /// Accumulate one sample's parameter gradients of the cross-entropy loss.
    fn backward(&self, trace: &Trace, label: usize, grads: &mut GradientBuffer) {
        let n_sub = self.sublayers.len();
        let mut grad_activation: Vec<Vec<f64>> = trace
            .activations
            .iter()
            .map(|a| vec![0.0; a.len()])
            .collect();

        let mut output_grad = softmax(trace.logits());
        output_grad[label] -= 1.0;
        grad_activation[n_sub] = output_grad;

        for index in (0..n_sub).rev() {
            let layer = &self.sublayers[index];
            let grad_out = std::mem::take(&mut grad_activation[index + 1]);

            if let Some(from) = layer.skip_from {
                for (g, o) in grad_activation[from].iter_mut().zip(&grad_out) {
                    *g += o;
                }
            }

            let grad_z: Vec<f64> = if layer.hidden {
                let z = &trace.pre_activations[index];
                match &trace.masks[index] {
                    Some(mask) => grad_out
                        .iter()
                        .zip(mask)
                        .zip(z)
                        .map(|((g, m), z)| if *z > 0.0 { g * m } else { 0.0 })
                        .collect(),
                    None => grad_out
                        .iter()
                        .zip(z)
                        .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                        .collect(),
                }
            } else {
                grad_out
            };

            let input = &trace.activations[index];
            let weight_grad = &mut grads.weights[index];
            for (row, gz) in grad_z.iter().enumerate() {
                let offset = row * layer.in_dim;
                for (column, value) in input.iter().enumerate() {
                    weight_grad[offset + column] += gz * value;
                }
                grads.biases[index][row] += gz;
            }
            let upstream = &mut grad_activation[index];
            for (row, gz) in grad_z.iter().enumerate() {
                let weights = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (column, w) in weights.iter().enumerate() {
                    upstream[column] += gz * w;
                }
            }
        }
    }

    /// Logits with dropout disabled.
    pub fn logits_eval(&self, x: &[f64]) -> Vec<f64> {
        self.forward_traced(x, None)
            .activations
            .pop()
            .expect("non-empty")
    }

    /// Class probabilities from one stochastic forward pass (dropout active).
    pub fn probs_dropout(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        softmax(
            &self
                .forward_traced(x, Some(rng))
                .activations
                .pop()
                .expect("non-empty"),
        )
    }

    pub fn param_count(&self) -> usize {
        self.sublayers
            .iter()
            .map(|s| s.weights.len() + s.bias.len())
            .sum()
    }

    pub fn get_param(&self, index: usize) -> f64 {
        let mut remaining = index;
        for layer in &self.sublayers {
            if remaining < layer.weights.len() {
                return layer.weights[remaining];
            }
            remaining -= layer.weights.len();
            if remaining < layer.bias.len() {
                return layer.bias[remaining];
            }
            remaining -= layer.bias.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut remaining = index;
        for layer in &mut self.sublayers {
            if remaining < layer.weights.len() {
                layer.weights[remaining] = value;
                return;
            }
            remaining -= layer.weights.len();
            if remaining < layer.bias.len() {
                layer.bias[remaining] = value;
                return;
            }
            remaining -= layer.bias.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Mean cross-entropy over a batch, dropout disabled.
    pub fn batch_loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| cross_entropy(self.forward_traced(x, None).logits(), *y))
            .sum();
        total / xs.len() as f64
    }

    /// Analytic gradient of `batch_loss` as a flat vector in parameter order.
    pub fn batch_gradients(&self, xs: &[Vec<f64>], ys: &[usize]) -> Vec<f64> {
        let mut grads = GradientBuffer::zeros(self);
        for (x, y) in xs.iter().zip(ys) {
            let trace = self.forward_traced(x, None);
            self.backward(&trace, *y, &mut grads);
        }
        grads.scale(1.0 / xs.len() as f64);
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        flat
    }
}

fn he_init(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> Vec<f64> {
    let std = (2.0 / in_dim as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    (0..out_dim * in_dim).map(|_| normal.sample(rng)).collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}

enum OptimizerState {
    Plain,
    Adam {
        m: GradientBuffer,
        v: GradientBuffer,
        step: u64,
    },
}

impl OptimizerState {
    fn for_config(config: &PipelineConfig, network: &Network) -> Self {
        match config.optimizer {
            Optimizer::PlainGradientDescent => OptimizerState::Plain,
            Optimizer::AdaptiveMoments => OptimizerState::Adam {
                m: GradientBuffer::zeros(network),
                v: GradientBuffer::zeros(network),
                step: 0,
            },
        }
    }

    fn apply(&mut self, network: &mut Network, grads: &GradientBuffer, learning_rate: f64) {
        match self {
            OptimizerState::Plain => {
                for (index, layer) in network.sublayers.iter_mut().enumerate() {
                    for (w, g) in layer.weights.iter_mut().zip(&grads.weights[index]) {
                        *w -= learning_rate * g;
                    }
                    for (b, g) in layer.bias.iter_mut().zip(&grads.biases[index]) {
                        *b -= learning_rate * g;
                    }
                }
            }
            OptimizerState::Adam { m, v, step } => {
                *step += 1;
                let t = *step as f64;
                let correction1 = 1.0 - ADAM_BETA1.powf(t);
                let correction2 = 1.0 - ADAM_BETA2.powf(t);
                for (index, layer) in network.sublayers.iter_mut().enumerate() {
                    adam_update(
                        &mut layer.weights,
                        &grads.weights[index],
                        &mut m.weights[index],
                        &mut v.weights[index],
                        learning_rate,
                        correction1,
                        correction2,
                    );
                    adam_update(
                        &mut layer.bias,
                        &grads.biases[index],
                        &mut m.biases[index],
                        &mut v.biases[index],
                        learning_rate,
                        correction1,
                        correction2,
                    );
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    learning_rate: f64,
    correction1: f64,
    correction2: f64,
) {
    for i in 0..params.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grads[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let m_hat = m[i] / correction1;
        let v_hat = v[i] / correction2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

/// A trained classifier plus training provenance.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub final_train_loss: f64,
    pub seed: u64,
    pub updates: usize,
}

/// Construct and train a classifier for the candidate on the dataset's
/// training split. Deterministic for a fixed seed.
pub fn build_and_train(
    arch: &ArchitectureSpec,
    config: &PipelineConfig,
    data: &Dataset,
    seed: u64,
) -> Result<TrainedModel> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::TrainInit, 0));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::TrainShuffle, 0));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::TrainDropout, 0));

    let mut network = Network::build(arch, data.n_features(), data.n_classes, &mut init_rng);
    let mut optimizer = OptimizerState::for_config(config, &network);
    let mut indices = data.train_idx.clone();
    let mut updates = 0usize;
    let mut final_train_loss = f64::NAN;

    for epoch in 0..config.epochs as usize {
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(config.batch_size as usize) {
            let mut grads = GradientBuffer::zeros(&network);
            for i in batch {
                let trace = network.forward_traced(&data.features[*i], Some(&mut dropout_rng));
                epoch_loss += cross_entropy(trace.logits(), data.labels[*i]);
                network.backward(&trace, data.labels[*i], &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.apply(&mut network, &grads, config.learning_rate);
            updates += 1;
        }
        final_train_loss = epoch_loss / indices.len() as f64;
        if !final_train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }

    Ok(TrainedModel {
        network,
        final_train_loss,
        seed,
        updates,
    })
}
