//! End-to-end candidate evaluation: preprocess the data, build and train the
//! network, then score prediction error and dropout-based predictive
//! uncertainty. Also hosts a deterministic closed-form oracle that stands in
//! for training during search-loop tests.

pub mod dataset;
pub mod network;

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use dataset::Dataset;
pub use network::{build_and_train, Network, TrainedModel};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, Stream};
use crate::types::{
    validate_candidate, Candidate, EvaluationRecord, ObjectiveVector, Optimizer, Preprocessing,
};

/// Objectives recorded when training diverges, keeping the record usable by
/// the surrogate.
pub const DIVERGED_ERROR: f64 = 1.0;
pub const DIVERGED_UNCERTAINTY: f64 = 1.0;

pub const DEFAULT_PROBES: usize = 32;
pub const DEFAULT_MC_PASSES: usize = 20;

const ORACLE_NOISE_STD: f64 = 0.005;

/// Apply one preprocessing mode. Statistics always come from the training
/// split only; the test split is never resampled or augmented.
pub fn preprocess(data: &Dataset, mode: Preprocessing, seed: u64) -> Dataset {
    match mode {
        Preprocessing::None => data.clone(),
        Preprocessing::Standardize => {
            let stats = train_feature_stats(data);
            let mut out = data.clone();
            for row in &mut out.features {
                for (feature, value) in row.iter_mut().enumerate() {
                    let (mean, std) = stats[feature];
                    *value -= mean;
                    if std > 0.0 {
                        *value /= std;
                    }
                }
            }
            out
        }
        Preprocessing::NoiseAugment => {
            let stats = train_feature_stats(data);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = data.clone();
            for i in data.train_idx.clone() {
                let mut copy = data.features[i].clone();
                for (feature, value) in copy.iter_mut().enumerate() {
                    let sigma = 0.1 * stats[feature].1;
                    if sigma > 0.0 {
                        let noise = Normal::new(0.0, sigma).expect("valid std");
                        *value += noise.sample(&mut rng);
                    }
                }
                out.features.push(copy);
                out.labels.push(data.labels[i]);
                out.train_idx.push(out.features.len() - 1);
            }
            out
        }
    }
}

/// Per-feature (mean, population std) over the training split.
fn train_feature_stats(data: &Dataset) -> Vec<(f64, f64)> {
    let n = data.train_idx.len() as f64;
    let width = data.n_features();
    let mut stats = vec![(0.0, 0.0); width];
    for i in &data.train_idx {
        for (feature, value) in data.features[*i].iter().enumerate() {
            stats[feature].0 += value;
        }
    }
    for stat in &mut stats {
        stat.0 /= n;
    }
    for i in &data.train_idx {
        for (feature, value) in data.features[*i].iter().enumerate() {
            let d = value - stats[feature].0;
            stats[feature].1 += d * d;
        }
    }
    for stat in &mut stats {
        stat.1 = (stat.1 / n).sqrt();
    }
    stats
}

/// Fraction of test samples whose argmax prediction (dropout disabled)
/// matches the label.
pub fn accuracy(model: &TrainedModel, data: &Dataset) -> Result<f64> {
    if data.test_idx.is_empty() {
        return Err(Error::Contract(
            "accuracy requires a non-empty test split".into(),
        ));
    }
    let mut correct = 0usize;
    for i in &data.test_idx {
        let logits = model.network.logits_eval(&data.features[*i]);
        let prediction = argmax(&logits);
        correct += usize::from(prediction == data.labels[*i]);
    }
    Ok(correct as f64 / data.test_idx.len() as f64)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-class predictive mean and biased (1/N) variance over N stochastic
/// passes.
pub fn posterior_mean_and_variance(passes: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!passes.is_empty(), "at least one pass required");
    let n = passes.len() as f64;
    let width = passes[0].len();
    let mut mean = vec![0.0; width];
    for pass in passes {
        debug_assert_eq!(pass.len(), width);
        for (m, v) in mean.iter_mut().zip(pass) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = vec![0.0; width];
    for pass in passes {
        for ((var, v), m) in variance.iter_mut().zip(pass).zip(&mean) {
            let d = v - m;
            *var += d * d;
        }
    }
    for var in &mut variance {
        *var /= n;
    }
    (mean, variance)
}

/// Scalar epistemic uncertainty estimate; `uninformative` is set when the
/// model has no dropout and the passes are deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyEstimate {
    pub value: f64,
    pub uninformative: bool,
}

/// Mean over probes of the mean per-class predictive variance across
/// `n_passes` dropout-active forward passes.
pub fn mc_dropout_uncertainty(
    model: &TrainedModel,
    probes: &[Vec<f64>],
    n_passes: usize,
    seed: u64,
) -> Result<UncertaintyEstimate> {
    if n_passes < 2 {
        return Err(Error::Contract(
            "mc_dropout_uncertainty requires n_passes >= 2".into(),
        ));
    }
    if probes.is_empty() {
        return Err(Error::Contract(
            "mc_dropout_uncertainty requires at least one probe".into(),
        ));
    }
    if model.network.dropout_rate == 0.0 {
        // Without dropout every pass is identical and the variance is exactly
        // zero; skip the passes and flag the estimate.
        return Ok(UncertaintyEstimate {
            value: 0.0,
            uninformative: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for probe in probes {
        let passes: Vec<Vec<f64>> = (0..n_passes)
            .map(|_| model.network.probs_dropout(probe, &mut rng))
            .collect();
        let (_, variance) = posterior_mean_and_variance(&passes);
        total += variance.iter().sum::<f64>() / variance.len() as f64;
    }
    Ok(UncertaintyEstimate {
        value: total / probes.len() as f64,
        uninformative: false,
    })
}

/// Knobs for one end-to-end evaluation.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub n_probes: usize,
    pub mc_passes: usize,
    pub seed: u64,
    pub iteration: u32,
    pub heuristic_id: String,
}

impl EvalOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            n_probes: DEFAULT_PROBES,
            mc_passes: DEFAULT_MC_PASSES,
            seed,
            iteration: 0,
            heuristic_id: "adhoc".into(),
        }
    }
}

/// An evaluation record plus any warnings raised while producing it.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub record: EvaluationRecord,
    pub warnings: Vec<String>,
}

/// Uniform probe vectors inside the per-feature training bounding box.
fn sample_probes(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            bounds
                .iter()
                .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect()
        })
        .collect()
}

/// Run the full pipeline for one candidate: preprocess, train, score error
/// on the test split, and probe uncertainty. Diverged training yields a
/// penalty record instead of an error.
pub fn evaluate(candidate: &Candidate, data: &Dataset, opts: &EvalOptions) -> Result<EvalOutcome> {
    validate_candidate(candidate)?;
    let started = Instant::now();
    let mut warnings = Vec::new();

    let prepped = preprocess(
        data,
        candidate.config.preprocessing,
        derive_seed(opts.seed, Stream::Preprocess, 0),
    );

    let objectives =
        match network::build_and_train(&candidate.arch, &candidate.config, &prepped, opts.seed) {
            Ok(model) => {
                let acc = accuracy(&model, &prepped)?;
                let bounds = prepped.train_feature_bounds();
                let probes = sample_probes(
                    &bounds,
                    opts.n_probes,
                    derive_seed(opts.seed, Stream::Probes, 0),
                );
                let estimate = mc_dropout_uncertainty(
                    &model,
                    &probes,
                    opts.mc_passes,
                    derive_seed(opts.seed, Stream::McDropout, 0),
                )?;
                if estimate.uninformative {
                    warnings.push("uncertainty is uninformative: dropout rate is 0".into());
                }
                ObjectiveVector::new(1.0 - acc, estimate.value)
            }
            Err(Error::TrainingDiverged { epoch }) => {
                warnings.push(format!(
                    "training diverged at epoch {epoch}; penalty objectives recorded"
                ));
                ObjectiveVector::new(DIVERGED_ERROR, DIVERGED_UNCERTAINTY)
            }
            Err(other) => return Err(other),
        };

    let record = EvaluationRecord {
        candidate: candidate.clone(),
        objectives,
        wall_seconds: started.elapsed().as_secs_f64(),
        seed: opts.seed,
        iteration: opts.iteration,
        heuristic_id: opts.heuristic_id.clone(),
    };
    Ok(EvalOutcome { record, warnings })
}

/// Noise-free oracle objectives: a smooth bowl over total blocks and mean
/// log2 width with optimizer/preprocessing offsets, plus a dropout-centered
/// uncertainty term.
pub fn oracle_components(candidate: &Candidate) -> ObjectiveVector {
    let total_blocks = candidate.arch.total_blocks() as f64;
    let mean_width = candidate.arch.mean_log2_width();
    let block_gap = (total_blocks - 6.0).abs() / 6.0;
    let width_gap = (mean_width - 5.0).abs() / 5.0;

    let mut error = 0.05 + 0.4 * block_gap * block_gap + 0.4 * width_gap * width_gap;
    if candidate.config.optimizer == Optimizer::PlainGradientDescent {
        error += 0.05;
    }
    if candidate.config.preprocessing == Preprocessing::None {
        error += 0.03;
    }

    let uncertainty = 0.02 + 0.3 * (candidate.arch.dropout_rate - 0.3).abs() + 0.1 * width_gap;
    ObjectiveVector::new(error.clamp(0.0, 1.0), uncertainty.clamp(0.0, 1.0))
}

/// Oracle objectives with seeded Gaussian noise added to both components.
pub fn oracle_evaluate(candidate: &Candidate, noise_seed: u64) -> ObjectiveVector {
    let base = oracle_components(candidate);
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, ORACLE_NOISE_STD).expect("valid std");
    let error = (base.error + noise.sample(&mut rng)).clamp(0.0, 1.0);
    let uncertainty = (base.uncertainty + noise.sample(&mut rng)).clamp(0.0, 1.0);
    ObjectiveVector::new(error, uncertainty)
}

/// Deterministic synthetic cost of an oracle evaluation, so oracle history
/// files are byte-identical across runs.
pub fn oracle_wall_seconds(candidate: &Candidate) -> f64 {
    let width_sum: f64 = candidate
        .arch
        .widths_per_layer
        .iter()
        .map(|w| (*w as f64).log2())
        .sum();
    0.05 * candidate.arch.total_blocks() as f64 + 0.01 * width_sum
}

/// Full oracle evaluation as a history record.
pub fn oracle_record(
    candidate: &Candidate,
    noise_seed: u64,
    iteration: u32,
    heuristic_id: &str,
) -> EvaluationRecord {
    EvaluationRecord {
        candidate: candidate.clone(),
        objectives: oracle_evaluate(candidate, noise_seed),
        wall_seconds: oracle_wall_seconds(candidate),
        seed: noise_seed,
        iteration,
        heuristic_id: heuristic_id.to_string(),
    }
}
