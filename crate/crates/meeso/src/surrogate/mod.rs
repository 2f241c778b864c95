//! Learn-to-rank surrogate: assigns history records to ordered rank groups
//! per objective and trains a boosted-tree model predicting a candidate's
//! fractional group score from its feature encoding. Lower scores are better.

mod gbrt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{encode, FeatureVector};
use crate::types::EvaluationRecord;
use gbrt::GradientBoostedTrees;

/// Which objective a rank model approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    Error,
    Uncertainty,
}

impl ObjectiveId {
    pub fn value_of(self, record: &EvaluationRecord) -> f64 {
        match self {
            ObjectiveId::Error => record.objectives.error,
            ObjectiveId::Uncertainty => record.objectives.uncertainty,
        }
    }
}

/// A trained per-objective ranker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankModel {
    pub objective_id: ObjectiveId,
    pub n_groups: usize,
    pub training_size: usize,
    /// Set when every training objective value was identical; the model then
    /// predicts group 0 for any input.
    pub degenerate: bool,
    fitted: bool,
    model_state: Option<GradientBoostedTrees>,
}

impl RankModel {
    /// Fractional group score for an encoded candidate; lower predicts a
    /// better objective value.
    pub fn predict_group(&self, features: &FeatureVector) -> Result<f64> {
        if !self.fitted {
            return Err(Error::Contract(
                "predict_group called on an untrained rank model".into(),
            ));
        }
        if self.degenerate {
            return Ok(0.0);
        }
        let model = self
            .model_state
            .as_ref()
            .ok_or_else(|| Error::Contract("rank model has no fitted state".into()))?;
        Ok(model.predict(features.as_slice()))
    }
}

/// Sort records ascending by the chosen objective (ties keep history order)
/// and partition them into `n_groups` contiguous buckets whose sizes differ
/// by at most one, larger buckets first. Label 0 is the best group.
pub fn assign_groups(
    records: &[EvaluationRecord],
    n_groups: usize,
    objective: ObjectiveId,
) -> Result<Vec<(FeatureVector, usize)>> {
    if n_groups == 0 {
        return Err(Error::Contract(
            "assign_groups requires n_groups >= 1".into(),
        ));
    }
    if records.len() < n_groups {
        return Err(Error::InsufficientHistory {
            required: n_groups,
            actual: records.len(),
        });
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    // Stable sort: equal objective values keep insertion order.
    order.sort_by(|a, b| {
        objective
            .value_of(&records[*a])
            .total_cmp(&objective.value_of(&records[*b]))
    });

    let n = records.len();
    let base = n / n_groups;
    let remainder = n % n_groups;
    let mut labeled = Vec::with_capacity(n);
    let mut cursor = 0;
    for group in 0..n_groups {
        let size = base + usize::from(group < remainder);
        for _ in 0..size {
            let record = &records[order[cursor]];
            labeled.push((encode(&record.candidate), group));
            cursor += 1;
        }
    }
    debug_assert_eq!(cursor, n);
    Ok(labeled)
}

/// Train a rank model for one objective on the full history.
///
/// Deterministic given the record order. When every objective value is
/// identical the result is a constant model flagged `degenerate` rather than
/// an error.
pub fn train(
    records: &[EvaluationRecord],
    n_groups: usize,
    objective: ObjectiveId,
) -> Result<RankModel> {
    if n_groups == 0 {
        return Err(Error::Contract("train requires n_groups >= 1".into()));
    }
    let required = (2 * n_groups).max(10);
    if records.len() < required {
        return Err(Error::InsufficientHistory {
            required,
            actual: records.len(),
        });
    }

    let first = objective.value_of(&records[0]);
    if records.iter().all(|r| objective.value_of(r) == first) {
        return Ok(RankModel {
            objective_id: objective,
            n_groups,
            training_size: records.len(),
            degenerate: true,
            fitted: true,
            model_state: None,
        });
    }

    let labeled = assign_groups(records, n_groups, objective)?;
    let xs: Vec<Vec<f64>> = labeled.iter().map(|(f, _)| f.as_slice().to_vec()).collect();
    let ys: Vec<f64> = labeled.iter().map(|(_, label)| *label as f64).collect();
    let model = GradientBoostedTrees::fit(&xs, &ys);

    Ok(RankModel {
        objective_id: objective,
        n_groups,
        training_size: records.len(),
        degenerate: false,
        fitted: true,
        model_state: Some(model),
    })
}
