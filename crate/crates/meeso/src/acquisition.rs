//! Batch acquisition: score every unevaluated candidate with the per-objective
//! rank models, non-dominated sort the predicted score vectors, and fill the
//! batch from the best front upward.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::pareto::non_dominated_indices;
use crate::search_space::encode;
use crate::surrogate::RankModel;
use crate::types::{Candidate, CandidateKey};

/// Select up to `k` promising unevaluated candidates from the pool.
///
/// Candidates are ranked by non-dominated sorting of their predicted score
/// vectors (one score per model, lower better) and taken front by front.
/// Within a front, order is ascending score under the first model — by
/// convention the error model — with ties broken by the lexicographic order
/// of the encoding and finally by candidate identity, so selection is fully
/// deterministic.
pub fn select(
    models: &[RankModel],
    pool: &[Candidate],
    evaluated: &HashSet<CandidateKey>,
    k: usize,
) -> Result<Vec<Candidate>> {
    if models.is_empty() {
        return Err(Error::Contract(
            "select requires at least one trained model".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Contract("select requires k >= 1".into()));
    }

    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    for candidate in pool {
        let key = candidate.key();
        if evaluated.contains(&key) || !seen.insert(key) {
            continue;
        }
        candidates.push(candidate.clone());
    }
    if candidates.is_empty() {
        return Err(Error::EmptySpace);
    }

    let encodings: Vec<_> = candidates.iter().map(encode).collect();
    let scores: Vec<Vec<f64>> = encodings
        .iter()
        .map(|features| models.iter().map(|m| m.predict_group(features)).collect())
        .collect::<Result<_>>()?;

    let ranks = front_ranks(&scores)?;

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|a, b| {
        ranks[*a]
            .cmp(&ranks[*b])
            .then_with(|| scores[*a][0].total_cmp(&scores[*b][0]))
            .then_with(|| lex_cmp(encodings[*a].as_slice(), encodings[*b].as_slice()))
            .then_with(|| candidates[*a].key().cmp(&candidates[*b].key()))
    });

    Ok(order
        .into_iter()
        .take(k)
        .map(|i| candidates[i].clone())
        .collect())
}

/// Non-dominated sorting: rank 0 for the first front, and so on.
fn front_ranks(scores: &[Vec<f64>]) -> Result<Vec<usize>> {
    let mut ranks = vec![usize::MAX; scores.len()];
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut rank = 0;
    while !remaining.is_empty() {
        let vectors: Vec<Vec<f64>> = remaining.iter().map(|i| scores[*i].clone()).collect();
        let front = non_dominated_indices(&vectors)?;
        let front_set: HashSet<usize> = front.iter().map(|i| remaining[*i]).collect();
        for i in &front_set {
            ranks[*i] = rank;
        }
        remaining.retain(|i| !front_set.contains(i));
        rank += 1;
    }
    Ok(ranks)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ordering = x.total_cmp(y);
        if ordering != std::cmp::Ordering::Equal {
            return ordering;
        }
    }
    std::cmp::Ordering::Equal
}
