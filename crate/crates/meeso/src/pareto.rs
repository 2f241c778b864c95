//! Dominance relation, Pareto-front computation, an incrementally maintained
//! non-dominated archive, and a two-objective hypervolume indicator.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::{EvaluationRecord, ObjectiveVector};

/// True iff `h` dominates `k`: no component worse, at least one strictly
/// better. Both vectors are minimized.
pub fn dominates(h: &[f64], k: &[f64]) -> Result<bool> {
    if h.len() != k.len() {
        return Err(Error::Contract(format!(
            "dominance requires equal dimensionality, got {} vs {}",
            h.len(),
            k.len()
        )));
    }
    debug_assert!(h.iter().chain(k.iter()).all(|v| v.is_finite()));
    let mut strictly_better = false;
    for (a, b) in h.iter().zip(k.iter()) {
        if a > b {
            return Ok(false);
        }
        if a < b {
            strictly_better = true;
        }
    }
    Ok(strictly_better)
}

/// Indices of the non-dominated vectors, in input order. Duplicates in
/// objective space never dominate each other, so all of them survive.
pub fn non_dominated_indices(vectors: &[Vec<f64>]) -> Result<Vec<usize>> {
    if let Some(first) = vectors.first() {
        let dim = first.len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Contract(
                "objective vectors differ in dimensionality".into(),
            ));
        }
    }
    let mut kept = Vec::new();
    'outer: for (i, v) in vectors.iter().enumerate() {
        for (j, other) in vectors.iter().enumerate() {
            if i != j && dominates(other, v)? {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

/// The non-dominated subset of `records` over (error, uncertainty), in input
/// order.
pub fn pareto_front(records: &[EvaluationRecord]) -> Vec<EvaluationRecord> {
    let vectors: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.objectives.as_array().to_vec())
        .collect();
    let kept = non_dominated_indices(&vectors).expect("fixed 2-d objectives");
    kept.into_iter().map(|i| records[i].clone()).collect()
}

/// The non-dominated subset under a caller-chosen objective extraction, e.g.
/// (error, uncertainty, wall_seconds).
pub fn pareto_front_by<F>(
    records: &[EvaluationRecord],
    objectives: F,
) -> Result<Vec<EvaluationRecord>>
where
    F: Fn(&EvaluationRecord) -> Vec<f64>,
{
    let vectors: Vec<Vec<f64>> = records.iter().map(&objectives).collect();
    let kept = non_dominated_indices(&vectors)?;
    Ok(kept.into_iter().map(|i| records[i].clone()).collect())
}

/// Mutually non-dominated set of evaluation records over (error, uncertainty).
///
/// Every record ever offered is either a member or dominated by (or, with
/// `dedupe`, objective-equal to) a member.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    members: Vec<EvaluationRecord>,
    dedupe: bool,
}

impl ParetoArchive {
    pub fn new(dedupe: bool) -> Self {
        Self {
            members: Vec::new(),
            dedupe,
        }
    }

    pub fn members(&self) -> &[EvaluationRecord] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Offer a record. Returns whether it was accepted; dominated members are
    /// evicted on acceptance. Objective-equal records are kept unless the
    /// archive was built with `dedupe`.
    pub fn insert(&mut self, record: EvaluationRecord) -> bool {
        let incoming = record.objectives.as_array();
        for member in &self.members {
            let held = member.objectives.as_array();
            if dominates(&held, &incoming).expect("2-d") {
                return false;
            }
            if self.dedupe && held == incoming {
                return false;
            }
        }
        self.members
            .retain(|member| !dominates(&incoming, &member.objectives.as_array()).expect("2-d"));
        self.members.push(record);
        true
    }

    /// Objective pairs of the current members.
    pub fn objective_points(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.objectives).collect()
    }
}

/// Area dominated by a 2-d front relative to `reference`, computed by sorting
/// on the first objective and summing rectangle strips. Every point must be
/// component-wise <= the reference.
pub fn hypervolume_2d(front: &[ObjectiveVector], reference: &ObjectiveVector) -> Result<f64> {
    for point in front {
        if !(point.error <= reference.error && point.uncertainty <= reference.uncertainty) {
            return Err(Error::Contract(format!(
                "front point ({}, {}) exceeds reference ({}, {})",
                point.error, point.uncertainty, reference.error, reference.uncertainty
            )));
        }
    }
    let vectors: Vec<Vec<f64>> = front.iter().map(|p| p.as_array().to_vec()).collect();
    let kept = non_dominated_indices(&vectors)?;
    let mut points: Vec<[f64; 2]> = kept.into_iter().map(|i| front[i].as_array()).collect();
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));

    let mut area = 0.0;
    for (i, point) in points.iter().enumerate() {
        let next_x = points.get(i + 1).map_or(reference.error, |p| p[0]);
        area += (next_x - point[0]) * (reference.uncertainty - point[1]);
    }
    Ok(area)
}

/// CSV export of front members: fixed header, one row per record, candidate
/// serialized as JSON in the final column.
pub fn write_front_csv<W: Write>(members: &[EvaluationRecord], writer: W) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record([
        "error",
        "uncertainty",
        "wall_seconds",
        "heuristic_id",
        "iteration",
        "candidate_json",
    ])?;
    for record in members {
        csv_writer.write_record([
            record.objectives.error.to_string(),
            record.objectives.uncertainty.to_string(),
            record.wall_seconds.to_string(),
            record.heuristic_id.clone(),
            record.iteration.to_string(),
            serde_json::to_string(&record.candidate)?,
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}
