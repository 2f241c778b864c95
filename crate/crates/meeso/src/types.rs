//! Domain types shared by every module: candidate architectures and pipeline
//! configurations, objective vectors, evaluation records, and the generation
//! heuristics that describe a search space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generation caps: layer count and width bounds for candidate networks.
pub const MAX_LAYERS: usize = 8;
pub const MIN_WIDTH: u32 = 4;
pub const MAX_WIDTH: u32 = 512;
pub const MAX_DROPOUT: f64 = 0.9;

/// Unit block family used to grow a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockFamily {
    Plain,
    Residual,
    Bottleneck,
}

impl FromStr for BlockFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(BlockFamily::Plain),
            "residual" => Ok(BlockFamily::Residual),
            "bottleneck" => Ok(BlockFamily::Bottleneck),
            other => Err(Error::Usage(format!(
                "unknown block family `{other}` (expected plain, residual, or bottleneck)"
            ))),
        }
    }
}

impl fmt::Display for BlockFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BlockFamily::Plain => "plain",
            BlockFamily::Residual => "residual",
            BlockFamily::Bottleneck => "bottleneck",
        };
        f.write_str(name)
    }
}

/// Data preprocessing stage choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    None,
    Standardize,
    NoiseAugment,
}

impl Preprocessing {
    pub const ALL: [Preprocessing; 3] = [
        Preprocessing::None,
        Preprocessing::Standardize,
        Preprocessing::NoiseAugment,
    ];

    /// Stable ordinal used by the candidate encoding.
    pub fn ordinal(self) -> u8 {
        match self {
            Preprocessing::None => 0,
            Preprocessing::Standardize => 1,
            Preprocessing::NoiseAugment => 2,
        }
    }
}

/// Training function choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    PlainGradientDescent,
    AdaptiveMoments,
}

impl Optimizer {
    pub const ALL: [Optimizer; 2] = [Optimizer::PlainGradientDescent, Optimizer::AdaptiveMoments];

    /// Stable ordinal used by the candidate encoding.
    pub fn ordinal(self) -> u8 {
        match self {
            Optimizer::PlainGradientDescent => 0,
            Optimizer::AdaptiveMoments => 1,
        }
    }
}

/// A candidate network: per-layer block counts and widths plus block family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub block_family: BlockFamily,
    pub blocks_per_layer: Vec<u32>,
    pub widths_per_layer: Vec<u32>,
    pub dropout_rate: f64,
}

impl ArchitectureSpec {
    /// Number of layers.
    pub fn depth(&self) -> usize {
        self.blocks_per_layer.len()
    }

    /// Total block count across layers.
    pub fn total_blocks(&self) -> u32 {
        self.blocks_per_layer.iter().sum()
    }

    /// Mean base-2 logarithm of the per-layer widths.
    pub fn mean_log2_width(&self) -> f64 {
        if self.widths_per_layer.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .widths_per_layer
            .iter()
            .map(|w| (*w as f64).log2())
            .sum();
        sum / self.widths_per_layer.len() as f64
    }
}

/// One point of the pipeline-stage product: preprocessing, optimizer, and
/// training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocessing: Preprocessing,
    pub optimizer: Optimizer,
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: u32,
}

/// One element of the full search product: an architecture paired with a
/// pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub arch: ArchitectureSpec,
    pub config: PipelineConfig,
}

impl Candidate {
    /// Ordinal of the (preprocessing, optimizer) pair in the stage product.
    pub fn config_ordinal(&self) -> u8 {
        self.config.preprocessing.ordinal() * 2 + self.config.optimizer.ordinal()
    }

    /// Canonical identity key (stable JSON serialization of all fields).
    pub fn key(&self) -> CandidateKey {
        CandidateKey(serde_json::to_string(self).expect("candidate serializes"))
    }
}

/// Value-identity key for a candidate, usable in hash sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateKey(String);

impl CandidateKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// A pair of objectives, both minimized: prediction error in [0,1] and
/// non-negative predictive uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub error: f64,
    pub uncertainty: f64,
}

impl ObjectiveVector {
    pub fn new(error: f64, uncertainty: f64) -> Self {
        Self { error, uncertainty }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.error, self.uncertainty]
    }

    pub fn is_finite(&self) -> bool {
        self.error.is_finite() && self.uncertainty.is_finite()
    }
}

/// One row of the evaluation history: a candidate, its measured objectives,
/// and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub candidate: Candidate,
    pub objectives: ObjectiveVector,
    pub wall_seconds: f64,
    pub seed: u64,
    pub iteration: u32,
    pub heuristic_id: String,
}

/// How a heuristic couples network depth and width when growing candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPolicy {
    BalancedScale,
    DepthFirst,
    WidthFirst,
}

/// Training hyper-parameter defaults a heuristic hands to generated configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDefaults {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: u32,
}

impl Default for TrainingDefaults {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 32,
        }
    }
}

/// A space-generation heuristic: block family, depth/width ranges, and the
/// growth policy coupling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heuristic {
    pub id: String,
    pub block_family: BlockFamily,
    pub depth_range: (u32, u32),
    pub width_range: (u32, u32),
    pub growth_policy: GrowthPolicy,
    #[serde(default)]
    pub defaults: TrainingDefaults,
}

impl Heuristic {
    /// Preset heuristic for a block family: depth 2..6, widths 8..64,
    /// balanced growth.
    pub fn preset(family: BlockFamily) -> Self {
        Self {
            id: family.to_string(),
            block_family: family,
            depth_range: (2, 6),
            width_range: (8, 64),
            growth_policy: GrowthPolicy::BalancedScale,
            defaults: TrainingDefaults::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Contract("heuristic id must be non-empty".into()));
        }
        if self.depth_range.0 > self.depth_range.1 {
            return Err(Error::Contract(format!(
                "heuristic `{}`: depth range {:?} is empty",
                self.id, self.depth_range
            )));
        }
        if self.width_range.0 > self.width_range.1 {
            return Err(Error::Contract(format!(
                "heuristic `{}`: width range {:?} is empty",
                self.id, self.width_range
            )));
        }
        Ok(())
    }

    /// Whether an architecture lies within this heuristic's depth and width
    /// ranges.
    pub fn contains_arch(&self, arch: &ArchitectureSpec) -> bool {
        let depth = arch.depth() as u32;
        depth >= self.depth_range.0
            && depth <= self.depth_range.1
            && arch
                .widths_per_layer
                .iter()
                .all(|w| *w >= self.width_range.0 && *w <= self.width_range.1)
    }
}

/// Candidate invariant violations, one message per violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateInvalid {
    pub violations: Vec<String>,
}

impl fmt::Display for CandidateInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid candidate: {}", self.violations.join("; "))
    }
}

impl std::error::Error for CandidateInvalid {}

/// Check every type invariant of a candidate. Total: returns the full list
/// of violations rather than stopping at the first.
pub fn validate_candidate(candidate: &Candidate) -> Result<(), CandidateInvalid> {
    let mut violations = Vec::new();
    let arch = &candidate.arch;
    let config = &candidate.config;

    if arch.blocks_per_layer.len() != arch.widths_per_layer.len() {
        violations.push(format!(
            "length mismatch: blocks_per_layer has {} entries, widths_per_layer has {}",
            arch.blocks_per_layer.len(),
            arch.widths_per_layer.len()
        ));
    }
    let depth = arch.blocks_per_layer.len().max(arch.widths_per_layer.len());
    if arch.blocks_per_layer.is_empty() || arch.widths_per_layer.is_empty() {
        violations.push("at least one layer is required".into());
    } else if depth > MAX_LAYERS {
        violations.push(format!(
            "layer count {depth} exceeds the maximum of {MAX_LAYERS}"
        ));
    }
    if arch.blocks_per_layer.contains(&0) {
        violations.push("blocks_per_layer entries must be positive".into());
    }
    for width in &arch.widths_per_layer {
        if !width.is_power_of_two() || *width < MIN_WIDTH || *width > MAX_WIDTH {
            violations.push(format!(
                "width {width} is not a power of two within [{MIN_WIDTH}, {MAX_WIDTH}]"
            ));
            break;
        }
    }
    if !arch.dropout_rate.is_finite() || arch.dropout_rate < 0.0 || arch.dropout_rate > MAX_DROPOUT
    {
        violations.push(format!(
            "dropout out of range: {} not in [0.0, {MAX_DROPOUT}]",
            arch.dropout_rate
        ));
    }
    if config.epochs == 0 {
        violations.push("epochs must be >= 1".into());
    }
    if config.batch_size == 0 {
        violations.push("batch_size must be >= 1".into());
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        violations.push(format!(
            "learning_rate must be positive, got {}",
            config.learning_rate
        ));
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(CandidateInvalid { violations })
    }
}
