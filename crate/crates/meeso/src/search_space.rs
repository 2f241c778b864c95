//! Initial candidate-space generation from growth heuristics, fixed-length
//! numeric encoding of candidates for the surrogate, and edit-distance-1
//! neighborhood mutation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, Stream};
use crate::types::{
    validate_candidate, ArchitectureSpec, Candidate, GrowthPolicy, Heuristic, Optimizer,
    PipelineConfig, Preprocessing, MAX_DROPOUT, MAX_LAYERS, MAX_WIDTH, MIN_WIDTH,
};

/// Length of the candidate encoding.
pub const FEATURE_LEN: usize = 19;

/// Maximum normalized gap between depth index and width index under balanced
/// growth; permits one step of slack on a three-step grid.
pub const BALANCE_BOUND: f64 = 0.34;

/// Block counts explored by mutation, per layer.
const MAX_BLOCKS_PER_LAYER: u32 = 6;

const DROPOUT_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

const EPOCH_STEP: u32 = 10;
const MAX_EPOCHS: u32 = 1000;
const MAX_BATCH: u32 = 1024;

/// Fixed-length numeric representation of a candidate.
///
/// Layout: `[0]` = layer count, `[1..=8]` = widths zero-padded to 8,
/// `[9..=16]` = blocks zero-padded to 8, `[17]` = dropout rate,
/// `[18]` = (preprocessing, optimizer) ordinal.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_LEN],
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A generated set of distinct, valid candidates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchSpace {
    pub heuristic_id: String,
    pub candidates: Vec<Candidate>,
    pub generated_seed: u64,
}

impl SearchSpace {
    /// Export the candidates as a JSON array.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.candidates)?)
    }

    /// Import a space from a JSON array of candidates.
    pub fn from_json(json: &str, heuristic_id: &str) -> Result<Self> {
        let candidates: Vec<Candidate> = serde_json::from_str(json)?;
        for candidate in &candidates {
            validate_candidate(candidate)?;
        }
        Ok(Self {
            heuristic_id: heuristic_id.to_string(),
            candidates,
            generated_seed: 0,
        })
    }
}

/// Result of a neighborhood mutation; `short_count` is set when fewer than
/// the requested number of distinct neighbors exist.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub neighbors: Vec<Candidate>,
    pub short_count: bool,
}

fn depth_grid(h: &Heuristic) -> Result<Vec<u32>> {
    let lo = h.depth_range.0.max(1);
    let hi = h.depth_range.1.min(MAX_LAYERS as u32);
    if lo > hi {
        return Err(Error::Contract(format!(
            "heuristic `{}`: depth range {:?} admits no depth in [1, {MAX_LAYERS}]",
            h.id, h.depth_range
        )));
    }
    Ok((lo..=hi).collect())
}

fn width_grid(h: &Heuristic) -> Result<Vec<u32>> {
    let lo = h.width_range.0.max(MIN_WIDTH);
    let hi = h.width_range.1.min(MAX_WIDTH);
    let mut grid = Vec::new();
    let mut w = MIN_WIDTH;
    while w <= MAX_WIDTH {
        if w >= lo && w <= hi {
            grid.push(w);
        }
        w *= 2;
    }
    if grid.is_empty() {
        return Err(Error::Contract(format!(
            "heuristic `{}`: width range {:?} contains no power of two in [{MIN_WIDTH}, {MAX_WIDTH}]",
            h.id, h.width_range
        )));
    }
    Ok(grid)
}

/// Position of a grid index normalized to [0,1]; a single-point grid sits at 0.
fn norm_index(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// (depth index, width index) pairs the heuristic's growth policy admits, in
/// canonical depth-major order.
fn admissible_pairs(h: &Heuristic, depths: &[u32], widths: &[u32]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    match h.growth_policy {
        GrowthPolicy::BalancedScale => {
            for di in 0..depths.len() {
                for wi in 0..widths.len() {
                    let gap = (norm_index(di, depths.len()) - norm_index(wi, widths.len())).abs();
                    if gap <= BALANCE_BOUND {
                        pairs.push((di, wi));
                    }
                }
            }
        }
        GrowthPolicy::DepthFirst => {
            pairs.extend((0..depths.len()).map(|di| (di, 0)));
        }
        GrowthPolicy::WidthFirst => {
            pairs.extend((0..widths.len()).map(|wi| (0, wi)));
        }
    }
    pairs
}

/// Number of distinct candidates the heuristic's constrained space admits.
pub fn admissible_count(h: &Heuristic) -> Result<usize> {
    h.validate()?;
    let depths = depth_grid(h)?;
    let widths = width_grid(h)?;
    Ok(admissible_pairs(h, &depths, &widths).len() * CONFIG_PRODUCT.len())
}

/// The (preprocessing, optimizer) product in ordinal order.
const CONFIG_PRODUCT: [(Preprocessing, Optimizer); 6] = [
    (Preprocessing::None, Optimizer::PlainGradientDescent),
    (Preprocessing::None, Optimizer::AdaptiveMoments),
    (Preprocessing::Standardize, Optimizer::PlainGradientDescent),
    (Preprocessing::Standardize, Optimizer::AdaptiveMoments),
    (Preprocessing::NoiseAugment, Optimizer::PlainGradientDescent),
    (Preprocessing::NoiseAugment, Optimizer::AdaptiveMoments),
];

/// An architecture is a pure function of its (depth, width-level) pair:
/// uniform widths, one block per layer, dropout cycled over a fixed grid.
/// Variation in blocks and dropout enters the search through mutation.
fn arch_for_pair(
    h: &Heuristic,
    depths: &[u32],
    widths: &[u32],
    di: usize,
    wi: usize,
) -> ArchitectureSpec {
    let depth = depths[di] as usize;
    ArchitectureSpec {
        block_family: h.block_family,
        blocks_per_layer: vec![1; depth],
        widths_per_layer: vec![widths[wi]; depth],
        dropout_rate: DROPOUT_GRID[(di + wi) % DROPOUT_GRID.len()],
    }
}

/// Generate exactly `count` distinct candidates from a heuristic.
///
/// Architecture pairs are drawn in seeded-shuffled order; pipeline configs
/// enumerate the (preprocessing x optimizer) product round-robin so small
/// spaces still cover it. Fails with `ExhaustedSpace` when the constrained
/// space admits fewer than `count` candidates.
pub fn generate(h: &Heuristic, count: usize, seed: u64) -> Result<SearchSpace> {
    h.validate()?;
    if count == 0 {
        return Err(Error::Contract("generate requires count >= 1".into()));
    }
    let depths = depth_grid(h)?;
    let widths = width_grid(h)?;
    let mut pairs = admissible_pairs(h, &depths, &widths);
    let admissible = pairs.len() * CONFIG_PRODUCT.len();
    if count > admissible {
        return Err(Error::ExhaustedSpace {
            admissible,
            requested: count,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::SpaceGeneration, 0));
    pairs.shuffle(&mut rng);

    let defaults = &h.defaults;
    let candidates = (0..count)
        .map(|i| {
            let (di, wi) = pairs[i / CONFIG_PRODUCT.len()];
            let (preprocessing, optimizer) = CONFIG_PRODUCT[i % CONFIG_PRODUCT.len()];
            Candidate {
                arch: arch_for_pair(h, &depths, &widths, di, wi),
                config: PipelineConfig {
                    preprocessing,
                    optimizer,
                    epochs: defaults.epochs,
                    learning_rate: defaults.learning_rate,
                    batch_size: defaults.batch_size,
                },
            }
        })
        .collect();

    Ok(SearchSpace {
        heuristic_id: h.id.clone(),
        candidates,
        generated_seed: seed,
    })
}

/// Encode a valid candidate as a fixed-length feature vector. Deterministic
/// and injective over any single generated space.
pub fn encode(candidate: &Candidate) -> FeatureVector {
    let arch = &candidate.arch;
    debug_assert!(arch.depth() <= MAX_LAYERS);
    let mut values = [0.0; FEATURE_LEN];
    values[0] = arch.depth() as f64;
    for (i, w) in arch.widths_per_layer.iter().take(MAX_LAYERS).enumerate() {
        values[1 + i] = *w as f64;
    }
    for (i, b) in arch.blocks_per_layer.iter().take(MAX_LAYERS).enumerate() {
        values[9 + i] = *b as f64;
    }
    values[17] = arch.dropout_rate;
    values[18] = candidate.config_ordinal() as f64;
    FeatureVector { values }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// All distinct edit-distance-1 moves from a candidate, in canonical order.
fn enumerate_moves(c: &Candidate, h: &Heuristic) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut push = |candidate: Candidate| {
        if candidate != *c && validate_candidate(&candidate).is_ok() && !out.contains(&candidate) {
            out.push(candidate);
        }
    };

    let width_lo = h.width_range.0.max(MIN_WIDTH);
    let width_hi = h.width_range.1.min(MAX_WIDTH);

    for layer in 0..c.arch.depth() {
        let blocks = c.arch.blocks_per_layer[layer];
        if blocks < MAX_BLOCKS_PER_LAYER {
            let mut n = c.clone();
            n.arch.blocks_per_layer[layer] += 1;
            push(n);
        }
        if blocks > 1 {
            let mut n = c.clone();
            n.arch.blocks_per_layer[layer] -= 1;
            push(n);
        }
        let width = c.arch.widths_per_layer[layer];
        if width.saturating_mul(2) <= width_hi {
            let mut n = c.clone();
            n.arch.widths_per_layer[layer] = width * 2;
            push(n);
        }
        if width / 2 >= width_lo {
            let mut n = c.clone();
            n.arch.widths_per_layer[layer] = width / 2;
            push(n);
        }
    }

    let dropout = c.arch.dropout_rate;
    for step in [0.1, -0.1] {
        let stepped = round2((dropout + step).clamp(0.0, MAX_DROPOUT));
        if stepped != dropout {
            let mut n = c.clone();
            n.arch.dropout_rate = stepped;
            push(n);
        }
    }

    for preprocessing in Preprocessing::ALL {
        if preprocessing != c.config.preprocessing {
            let mut n = c.clone();
            n.config.preprocessing = preprocessing;
            push(n);
        }
    }
    for optimizer in Optimizer::ALL {
        if optimizer != c.config.optimizer {
            let mut n = c.clone();
            n.config.optimizer = optimizer;
            push(n);
        }
    }

    let epochs = c.config.epochs;
    if epochs.saturating_add(EPOCH_STEP) <= MAX_EPOCHS {
        let mut n = c.clone();
        n.config.epochs = epochs + EPOCH_STEP;
        push(n);
    }
    if epochs.saturating_sub(EPOCH_STEP).max(1) != epochs {
        let mut n = c.clone();
        n.config.epochs = epochs.saturating_sub(EPOCH_STEP).max(1);
        push(n);
    }

    for factor in [2.0, 0.5] {
        let mut n = c.clone();
        n.config.learning_rate = c.config.learning_rate * factor;
        push(n);
    }

    let batch = c.config.batch_size;
    if batch.saturating_mul(2) <= MAX_BATCH {
        let mut n = c.clone();
        n.config.batch_size = batch * 2;
        push(n);
    }
    if batch / 2 >= 1 && batch / 2 != batch {
        let mut n = c.clone();
        n.config.batch_size = batch / 2;
        push(n);
    }

    out
}

/// Draw up to `k` distinct valid candidates at edit distance 1 from `c`,
/// each within the heuristic's ranges. When the neighborhood is smaller than
/// `k` the full neighborhood is returned with `short_count` set.
pub fn mutate_neighbors(c: &Candidate, h: &Heuristic, k: usize, seed: u64) -> Result<Neighborhood> {
    validate_candidate(c)?;
    h.validate()?;
    if k == 0 {
        return Err(Error::Contract("mutate_neighbors requires k >= 1".into()));
    }
    if !h.contains_arch(&c.arch) {
        return Err(Error::Contract(format!(
            "candidate lies outside heuristic `{}` depth/width ranges",
            h.id
        )));
    }

    let mut moves = enumerate_moves(c, h);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::NeighborMutation, 0));
    moves.shuffle(&mut rng);
    let short_count = moves.len() < k;
    moves.truncate(k);
    Ok(Neighborhood {
        neighbors: moves,
        short_count,
    })
}
