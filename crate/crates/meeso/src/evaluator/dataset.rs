//! Tabular classification datasets with train/test splits: a seeded
//! two-blob synthetic generator and a CSV loader (features first, integer
//! label in the last column).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, Stream};

const BLOB_SAMPLES: usize = 400;
const BLOB_FEATURES: usize = 10;
const BLOB_STD: f64 = 0.5;
const TRAIN_FRACTION: f64 = 0.75;

/// Feature matrix, class labels, and disjoint train/test index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Check the structural invariants: rectangular finite features, labels
    /// within range, in-bounds disjoint splits, every class in the train split.
    pub fn validate(&self) -> Result<()> {
        let n = self.features.len();
        if n == 0 || self.labels.len() != n {
            return Err(Error::Contract(
                "features and labels must be non-empty and aligned".into(),
            ));
        }
        let width = self.n_features();
        for row in &self.features {
            if row.len() != width || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract(
                    "feature matrix must be rectangular and finite".into(),
                ));
            }
        }
        if self.labels.iter().any(|l| *l >= self.n_classes) {
            return Err(Error::Contract("label exceeds declared class count".into()));
        }
        let train: HashSet<usize> = self.train_idx.iter().copied().collect();
        let test: HashSet<usize> = self.test_idx.iter().copied().collect();
        if train.iter().chain(test.iter()).any(|i| *i >= n) {
            return Err(Error::Contract("split index out of range".into()));
        }
        if train.intersection(&test).next().is_some() {
            return Err(Error::Contract(
                "train and test index sets must be disjoint".into(),
            ));
        }
        let train_classes: HashSet<usize> =
            self.train_idx.iter().map(|i| self.labels[*i]).collect();
        if train_classes.len() != self.n_classes {
            return Err(Error::Contract(
                "every class must appear in the training split".into(),
            ));
        }
        Ok(())
    }

    /// Seeded two-cluster synthetic set: two classes of Gaussian blobs with
    /// component means at -1 and +1.
    pub fn synthetic_blobs(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, BLOB_STD).expect("valid std");
        let mut features = Vec::with_capacity(BLOB_SAMPLES);
        let mut labels = Vec::with_capacity(BLOB_SAMPLES);
        for i in 0..BLOB_SAMPLES {
            let class = i % 2;
            let mean = if class == 0 { -1.0 } else { 1.0 };
            features.push(
                (0..BLOB_FEATURES)
                    .map(|_| mean + noise.sample(&mut rng))
                    .collect(),
            );
            labels.push(class);
        }
        let (train_idx, test_idx) = stratified_split(&labels, 2, seed);
        let dataset = Dataset {
            features,
            labels,
            train_idx,
            test_idx,
            n_classes: 2,
        };
        debug_assert!(dataset.validate().is_ok());
        dataset
    }

    /// Load a CSV of feature columns followed by one integer label column.
    /// Labels are remapped to dense ids in sorted order; the split is
    /// stratified 75/25 with a seeded shuffle.
    pub fn from_csv(path: &Path, has_header: bool, seed: u64) -> Result<Dataset> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let reader = BufReader::new(File::open(path)?);
        let mut features: Vec<Vec<f64>> = Vec::new();
        let mut raw_labels: Vec<i64> = Vec::new();
        for (index, line) in reader.lines().enumerate() {
            let line_no = index + 1;
            let line = line?;
            if index == 0 && has_header {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: "expected at least one feature and a label".into(),
                });
            }
            let mut row = Vec::with_capacity(fields.len() - 1);
            for field in &fields[..fields.len() - 1] {
                let value: f64 = field.trim().parse().map_err(|_| Error::MalformedLine {
                    line: line_no,
                    message: format!("feature `{field}` is not a number"),
                })?;
                row.push(value);
            }
            let label: i64 =
                fields[fields.len() - 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedLine {
                        line: line_no,
                        message: format!("label `{}` is not an integer", fields[fields.len() - 1]),
                    })?;
            if let Some(previous) = features.last() {
                if previous.len() != row.len() {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: format!(
                            "row has {} features, expected {}",
                            row.len(),
                            previous.len()
                        ),
                    });
                }
            }
            features.push(row);
            raw_labels.push(label);
        }
        if features.is_empty() {
            return Err(Error::Contract(format!(
                "dataset {} contains no rows",
                path.display()
            )));
        }

        let mut distinct: Vec<i64> = raw_labels
            .iter()
            .copied()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        distinct.sort_unstable();
        let labels: Vec<usize> = raw_labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("label present"))
            .collect();
        let n_classes = distinct.len();

        let (train_idx, test_idx) = stratified_split(&labels, n_classes, seed);
        let dataset = Dataset {
            features,
            labels,
            train_idx,
            test_idx,
            n_classes,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Per-feature (min, max) over the training split; the sampling box for
    /// uncertainty probes.
    pub fn train_feature_bounds(&self) -> Vec<(f64, f64)> {
        let width = self.n_features();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); width];
        for i in &self.train_idx {
            for (feature, value) in self.features[*i].iter().enumerate() {
                bounds[feature].0 = bounds[feature].0.min(*value);
                bounds[feature].1 = bounds[feature].1.max(*value);
            }
        }
        bounds
    }
}

/// Per-class 75/25 split with a seeded shuffle; every class lands at least
/// one training sample.
fn stratified_split(labels: &[usize], n_classes: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::DatasetSplit, 0));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == class).collect();
        members.shuffle(&mut rng);
        let take =
            ((members.len() as f64 * TRAIN_FRACTION).round() as usize).clamp(1, members.len());
        train.extend(&members[..take]);
        test.extend(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
