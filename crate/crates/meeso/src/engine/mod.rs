//! The self-optimizing outer loop: per heuristic, generate an initial space,
//! evaluate it, then iterate surrogate training, batch acquisition, and
//! evaluation while maintaining the history database and the Pareto archive.
//! Heuristics advance round-robin in declared order until the satisfaction
//! thresholds are met or the list is exhausted.

pub mod history;

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use history::{read_checkpoint, CheckpointHeader, HistoryDB, ResumedState, RunSink};

use crate::acquisition;
use crate::error::{Error, Result};
use crate::evaluator::{self, Dataset, EvalOptions, DEFAULT_MC_PASSES, DEFAULT_PROBES};
use crate::logging;
use crate::pareto::{self, ParetoArchive};
use crate::search_space::{self, SearchSpace};
use crate::seeding::{derive_seed, Stream};
use crate::surrogate::{self, ObjectiveId};
use crate::types::{Candidate, CandidateKey, EvaluationRecord, Heuristic};

/// Neighbors drawn around each archive member when building the acquisition
/// pool.
const NEIGHBORS_PER_MEMBER: usize = 5;

/// Which true objective backs the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Trainer,
    Oracle,
}

/// How candidates are picked each inner iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    Surrogate,
    Random,
}

fn default_jobs() -> usize {
    1
}

fn default_probes() -> usize {
    DEFAULT_PROBES
}

fn default_mc_passes() -> usize {
    DEFAULT_MC_PASSES
}

/// Full configuration of a search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub heuristics: Vec<Heuristic>,
    /// Candidates truly evaluated per inner iteration.
    pub arches_per_iter: usize,
    /// Inner surrogate/acquisition iterations per heuristic.
    pub inner_iterations: usize,
    pub initial_space_size: usize,
    pub n_groups: usize,
    /// Stop once some archive member meets both (max_error, max_uncertainty).
    pub satisfied_thresholds: Option<(f64, f64)>,
    pub run_seed: u64,
    pub evaluator_kind: EvaluatorKind,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub selection: SelectionPolicy,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    #[serde(default = "default_mc_passes")]
    pub mc_passes: usize,
    #[serde(default)]
    pub dedupe_archive: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heuristics.is_empty() {
            return Err(Error::Contract("at least one heuristic is required".into()));
        }
        for heuristic in &self.heuristics {
            heuristic.validate()?;
        }
        if self.arches_per_iter == 0
            || self.inner_iterations == 0
            || self.initial_space_size == 0
            || self.n_groups == 0
            || self.jobs == 0
        {
            return Err(Error::Contract(
                "arches_per_iter, inner_iterations, initial_space_size, n_groups, and jobs must all be >= 1"
                    .into(),
            ));
        }
        if let Some((max_error, max_uncertainty)) = self.satisfied_thresholds {
            for (name, value) in [
                ("max_error", max_error),
                ("max_uncertainty", max_uncertainty),
            ] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Contract(format!(
                        "{name} must lie in [0,1], got {value}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Final state of a run.
#[derive(Debug)]
pub struct RunOutput {
    pub archive: ParetoArchive,
    pub history: HistoryDB,
    /// Some archive member met the satisfaction thresholds.
    pub satisfied: bool,
    /// The heuristic list ran out without satisfying the thresholds.
    pub exhausted: bool,
}

/// Execute a fresh run. `data` is required for the trainer evaluator; `sink`
/// receives every committed record as it lands.
pub fn run(rc: &RunConfig, data: Option<&Dataset>, sink: Option<RunSink>) -> Result<RunOutput> {
    run_replaying(rc, data, Vec::new(), sink)
}

/// Reconstruct engine state from a checkpoint file.
pub fn resume(path: &Path) -> Result<ResumedState> {
    history::read_checkpoint(path)
}

/// Resume a checkpointed run and drive it to completion. Already-evaluated
/// records are replayed (never re-measured), so the finished history is
/// identical to an uninterrupted run with the same seeds. When `out_dir` is
/// given, fresh history/checkpoint files are written there (the directory of
/// the original run may be reused).
pub fn resume_run(
    path: &Path,
    data: Option<&Dataset>,
    out_dir: Option<&Path>,
) -> Result<RunOutput> {
    let state = history::read_checkpoint(path)?;
    let sink = match out_dir {
        Some(dir) => Some(RunSink::create(dir, &state.config)?),
        None => None,
    };
    run_replaying(&state.config, data, state.history.into_records(), sink)
}

/// K records with the lowest error, ties resolved toward earlier insertion.
pub fn best_k_by_accuracy(history: &HistoryDB, k: usize) -> Result<Vec<EvaluationRecord>> {
    if k == 0 {
        return Err(Error::Contract("best_k_by_accuracy requires k >= 1".into()));
    }
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|a, b| {
        history.records()[*a]
            .objectives
            .error
            .total_cmp(&history.records()[*b].objectives.error)
    });
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| history.records()[i].clone())
        .collect())
}

struct EngineState<'a> {
    rc: &'a RunConfig,
    data: Option<&'a Dataset>,
    replay: VecDeque<EvaluationRecord>,
    history: HistoryDB,
    archive: ParetoArchive,
    evaluated: HashSet<CandidateKey>,
    sink: Option<RunSink>,
}

fn run_replaying(
    rc: &RunConfig,
    data: Option<&Dataset>,
    existing: Vec<EvaluationRecord>,
    sink: Option<RunSink>,
) -> Result<RunOutput> {
    rc.validate()?;
    if rc.evaluator_kind == EvaluatorKind::Trainer && data.is_none() {
        return Err(Error::Contract(
            "the trainer evaluator requires a dataset".into(),
        ));
    }

    let mut state = EngineState {
        rc,
        data,
        replay: existing.into(),
        history: HistoryDB::new(),
        archive: ParetoArchive::new(rc.dedupe_archive),
        evaluated: HashSet::new(),
        sink,
    };
    let mut satisfied = false;

    'heuristics: for (h_index, heuristic) in rc.heuristics.iter().enumerate() {
        let space_seed = derive_seed(rc.run_seed, Stream::SpaceGeneration, h_index as u64);
        let admissible = search_space::admissible_count(heuristic)?;
        let init_size = rc.initial_space_size.min(admissible);
        if init_size < rc.initial_space_size {
            logging::info(&format!(
                "heuristic `{}` admits only {admissible} candidates; clamping initial batch from {}",
                heuristic.id, rc.initial_space_size
            ));
        }
        // The whole constrained space backs acquisition; `init_size`
        // candidates are evaluated up front, strided across the space so the
        // first surrogates see many architectures, not many configs of few.
        let mut space = search_space::generate(heuristic, admissible, space_seed)?;
        let initial: Vec<Candidate> = (0..init_size)
            .map(|i| space.candidates[i * space.candidates.len() / init_size].clone())
            .collect();
        evaluate_batch(&mut state, initial, 0, heuristic)?;

        let mut regenerated = false;
        'inner: for iteration in 1..=rc.inner_iterations {
            let selected = loop {
                let pool = build_pool(&state, &space, heuristic, h_index, iteration)?;
                match select_candidates(&state, &pool, h_index, iteration) {
                    Ok(selected) => break selected,
                    Err(Error::EmptySpace) if !regenerated => {
                        regenerated = true;
                        logging::info(&format!(
                            "heuristic `{}`: pool exhausted, regenerating space with bumped seed",
                            heuristic.id
                        ));
                        space = search_space::generate(
                            heuristic,
                            admissible,
                            space_seed.wrapping_add(1),
                        )?;
                    }
                    Err(Error::EmptySpace) => {
                        logging::info(&format!(
                            "heuristic `{}`: pool exhausted after regeneration, advancing",
                            heuristic.id
                        ));
                        break 'inner;
                    }
                    Err(other) => return Err(other),
                }
            };
            if selected.len() < rc.arches_per_iter {
                logging::info(&format!(
                    "short-count acquisition at iteration {iteration}: {} of {} candidates",
                    selected.len(),
                    rc.arches_per_iter
                ));
            }
            evaluate_batch(&mut state, selected, iteration as u32, heuristic)?;
        }

        // Satisfaction is checked only after the inner loop completes.
        if let Some((max_error, max_uncertainty)) = rc.satisfied_thresholds {
            let met = state.archive.members().iter().any(|m| {
                m.objectives.error <= max_error && m.objectives.uncertainty <= max_uncertainty
            });
            if met {
                logging::info(&format!(
                    "satisfaction thresholds met after heuristic `{}`",
                    heuristic.id
                ));
                satisfied = true;
                break 'heuristics;
            }
        }
    }

    Ok(RunOutput {
        archive: state.archive,
        history: state.history,
        satisfied,
        exhausted: !satisfied,
    })
}

/// Acquisition pool: the current space plus a few edit-distance-1 neighbors
/// of each archive member that still fits the heuristic's ranges.
fn build_pool(
    state: &EngineState<'_>,
    space: &SearchSpace,
    heuristic: &Heuristic,
    h_index: usize,
    iteration: usize,
) -> Result<Vec<Candidate>> {
    let mut pool = space.candidates.clone();
    for (member_index, member) in state.archive.members().iter().enumerate() {
        if !heuristic.contains_arch(&member.candidate.arch) {
            continue;
        }
        let stream_index =
            ((h_index as u64) << 40) | ((iteration as u64) << 20) | member_index as u64;
        let seed = derive_seed(state.rc.run_seed, Stream::NeighborMutation, stream_index);
        let neighborhood = search_space::mutate_neighbors(
            &member.candidate,
            heuristic,
            NEIGHBORS_PER_MEMBER,
            seed,
        )?;
        let parent_encoding = search_space::encode(&member.candidate);
        // Mutations the surrogate cannot distinguish from their parent
        // (epoch/rate/batch steps share the parent's encoding) would inherit
        // its score and soak up batch slots; leave them out of the pool.
        pool.extend(
            neighborhood
                .neighbors
                .into_iter()
                .filter(|n| search_space::encode(n) != parent_encoding),
        );
    }
    Ok(pool)
}

fn select_candidates(
    state: &EngineState<'_>,
    pool: &[Candidate],
    h_index: usize,
    iteration: usize,
) -> Result<Vec<Candidate>> {
    let rc = state.rc;
    match rc.selection {
        SelectionPolicy::Random => random_select(state, pool, h_index, iteration),
        SelectionPolicy::Surrogate => {
            let records = state.history.records();
            match surrogate::train(records, rc.n_groups, ObjectiveId::Error) {
                Ok(error_model) => {
                    let uncertainty_model =
                        surrogate::train(records, rc.n_groups, ObjectiveId::Uncertainty)?;
                    acquisition::select(
                        &[error_model, uncertainty_model],
                        pool,
                        &state.evaluated,
                        rc.arches_per_iter,
                    )
                }
                Err(Error::InsufficientHistory { required, actual }) => {
                    logging::info(&format!(
                        "surrogate needs {required} records but history has {actual}; \
                         falling back to random selection"
                    ));
                    random_select(state, pool, h_index, iteration)
                }
                Err(other) => Err(other),
            }
        }
    }
}

fn random_select(
    state: &EngineState<'_>,
    pool: &[Candidate],
    h_index: usize,
    iteration: usize,
) -> Result<Vec<Candidate>> {
    let mut seen = HashSet::new();
    let mut unevaluated: Vec<Candidate> = Vec::new();
    for candidate in pool {
        let key = candidate.key();
        if state.evaluated.contains(&key) || !seen.insert(key) {
            continue;
        }
        unevaluated.push(candidate.clone());
    }
    if unevaluated.is_empty() {
        return Err(Error::EmptySpace);
    }
    let stream_index = ((h_index as u64) << 32) | iteration as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        state.rc.run_seed,
        Stream::RandomSelection,
        stream_index,
    ));
    unevaluated.shuffle(&mut rng);
    unevaluated.truncate(state.rc.arches_per_iter);
    Ok(unevaluated)
}

/// Evaluate a batch (serving records from the replay queue when resuming) and
/// commit results in candidate order regardless of worker completion order.
fn evaluate_batch(
    state: &mut EngineState<'_>,
    candidates: Vec<Candidate>,
    iteration: u32,
    heuristic: &Heuristic,
) -> Result<()> {
    let base_index = state.history.len() as u64;
    let mut results: Vec<Option<EvaluationRecord>> = vec![None; candidates.len()];
    let mut pending: Vec<(usize, &Candidate, u64)> = Vec::new();

    for (offset, candidate) in candidates.iter().enumerate() {
        let seed = derive_seed(
            state.rc.run_seed,
            Stream::Evaluation,
            base_index + offset as u64,
        );
        if let Some(existing) = state.replay.pop_front() {
            if existing.candidate != *candidate {
                return Err(Error::Contract(
                    "checkpoint does not match the run schedule; was it produced by a different \
                     configuration?"
                        .into(),
                ));
            }
            results[offset] = Some(existing);
        } else {
            pending.push((offset, candidate, seed));
        }
    }

    let rc = state.rc;
    let data = state.data;
    if rc.jobs <= 1 || pending.len() <= 1 {
        for (offset, candidate, seed) in pending {
            results[offset] = Some(evaluate_one(
                rc, data, candidate, seed, iteration, heuristic,
            )?);
        }
    } else {
        let chunks: Vec<Vec<(usize, &Candidate, u64)>> = {
            let n_chunks = rc.jobs.min(pending.len());
            let mut chunks = vec![Vec::new(); n_chunks];
            for (i, item) in pending.into_iter().enumerate() {
                chunks[i % n_chunks].push(item);
            }
            chunks
        };
        let outcomes: Vec<Result<Vec<(usize, EvaluationRecord)>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(offset, candidate, seed)| {
                                evaluate_one(rc, data, candidate, seed, iteration, heuristic)
                                    .map(|record| (offset, record))
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for outcome in outcomes {
            for (offset, record) in outcome? {
                results[offset] = Some(record);
            }
        }
    }

    for record in results.into_iter().map(|r| r.expect("every slot filled")) {
        if let Some(sink) = state.sink.as_mut() {
            sink.append(&record)?;
        }
        state.evaluated.insert(record.candidate.key());
        state.archive.insert(record.clone());
        state.history.push(record);
    }

    #[cfg(debug_assertions)]
    verify_archive_matches_front(&state.archive, &state.history);

    Ok(())
}

fn evaluate_one(
    rc: &RunConfig,
    data: Option<&Dataset>,
    candidate: &Candidate,
    seed: u64,
    iteration: u32,
    heuristic: &Heuristic,
) -> Result<EvaluationRecord> {
    match rc.evaluator_kind {
        EvaluatorKind::Oracle => Ok(evaluator::oracle_record(
            candidate,
            seed,
            iteration,
            &heuristic.id,
        )),
        EvaluatorKind::Trainer => {
            let opts = EvalOptions {
                n_probes: rc.n_probes,
                mc_passes: rc.mc_passes,
                seed,
                iteration,
                heuristic_id: heuristic.id.clone(),
            };
            let outcome = evaluator::evaluate(candidate, data.expect("validated earlier"), &opts)?;
            for warning in &outcome.warnings {
                logging::info(warning);
            }
            Ok(outcome.record)
        }
    }
}

/// Test-mode integrity check: the archive must equal the Pareto front of the
/// whole history (as a multiset keyed by evaluation seed).
#[cfg(debug_assertions)]
fn verify_archive_matches_front(archive: &ParetoArchive, history: &HistoryDB) {
    let mut archived: Vec<u64> = archive.members().iter().map(|r| r.seed).collect();
    let mut fronted: Vec<u64> = pareto::pareto_front(history.records())
        .iter()
        .map(|r| r.seed)
        .collect();
    archived.sort_unstable();
    fronted.sort_unstable();
    debug_assert_eq!(
        archived, fronted,
        "archive diverged from the history's Pareto front"
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BlockFamily, ObjectiveVector};

    fn oracle_config(seed: u64) -> RunConfig {
        RunConfig {
            heuristics: vec![Heuristic::preset(BlockFamily::Residual)],
            arches_per_iter: 4,
            inner_iterations: 5,
            initial_space_size: 20,
            n_groups: 5,
            satisfied_thresholds: None,
            run_seed: seed,
            evaluator_kind: EvaluatorKind::Oracle,
            jobs: 1,
            selection: SelectionPolicy::Surrogate,
            n_probes: DEFAULT_PROBES,
            mc_passes: DEFAULT_MC_PASSES,
            dedupe_archive: false,
        }
    }

    #[test]
    fn oracle_run_has_expected_history_size() {
        let output = run(&oracle_config(7), None, None).unwrap();
        assert_eq!(output.history.len(), 20 + 4 * 5);
        assert!(!output.satisfied);
        assert!(output.exhausted);

        // Archive must equal the brute-force front of the full history.
        let mut archived: Vec<u64> = output.archive.members().iter().map(|r| r.seed).collect();
        let mut fronted: Vec<u64> = pareto::pareto_front(output.history.records())
            .iter()
            .map(|r| r.seed)
            .collect();
        archived.sort_unstable();
        fronted.sort_unstable();
        assert_eq!(archived, fronted);
    }

    #[test]
    fn runs_are_deterministic_across_job_counts() {
        let serial = run(&oracle_config(13), None, None).unwrap();
        let mut parallel_config = oracle_config(13);
        parallel_config.jobs = 4;
        let parallel = run(&parallel_config, None, None).unwrap();
        assert_eq!(serial.history.records(), parallel.history.records());
        let repeat = run(&oracle_config(13), None, None).unwrap();
        assert_eq!(serial.history.records(), repeat.history.records());
    }

    #[test]
    fn satisfaction_stops_after_current_heuristic() {
        let mut rc = oracle_config(5);
        rc.heuristics = vec![
            Heuristic::preset(BlockFamily::Residual),
            Heuristic::preset(BlockFamily::Plain),
        ];
        // Generous thresholds any initial-space record meets.
        rc.satisfied_thresholds = Some((1.0, 1.0));
        let output = run(&rc, None, None).unwrap();
        assert!(output.satisfied);
        assert!(!output.exhausted);
        // The full inner loop of the first heuristic still ran; the second
        // heuristic never started.
        assert_eq!(output.history.len(), 20 + 4 * 5);
        assert!(output
            .history
            .records()
            .iter()
            .all(|r| r.heuristic_id == "residual"));
    }

    #[test]
    fn zero_inner_iterations_is_rejected() {
        let mut rc = oracle_config(1);
        rc.inner_iterations = 0;
        assert!(matches!(run(&rc, None, None), Err(Error::Contract(_))));
    }

    #[test]
    fn trainer_without_dataset_is_rejected() {
        let mut rc = oracle_config(1);
        rc.evaluator_kind = EvaluatorKind::Trainer;
        assert!(matches!(run(&rc, None, None), Err(Error::Contract(_))));
    }

    #[test]
    fn trainer_runs_agree_across_job_counts_except_wall_time() {
        let data = crate::evaluator::Dataset::synthetic_blobs(9);
        let mut rc = oracle_config(21);
        rc.evaluator_kind = EvaluatorKind::Trainer;
        rc.heuristics[0].depth_range = (2, 3);
        rc.heuristics[0].width_range = (8, 16);
        rc.heuristics[0].defaults.epochs = 3;
        rc.initial_space_size = 10;
        rc.arches_per_iter = 2;
        rc.inner_iterations = 2;
        rc.n_probes = 4;
        rc.mc_passes = 4;
        let serial = run(&rc, Some(&data), None).unwrap();
        rc.jobs = 3;
        let parallel = run(&rc, Some(&data), None).unwrap();
        assert_eq!(serial.history.len(), parallel.history.len());
        for (a, b) in serial.history.records().iter().zip(parallel.history.records()) {
            assert_eq!(a.candidate, b.candidate);
            assert_eq!(a.objectives, b.objectives);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn random_policy_matches_budget() {
        let mut rc = oracle_config(3);
        rc.selection = SelectionPolicy::Random;
        let output = run(&rc, None, None).unwrap();
        assert_eq!(output.history.len(), 40);
    }

    #[test]
    fn tiny_heuristic_clamps_and_falls_back() {
        let mut rc = oracle_config(2);
        rc.heuristics[0].depth_range = (4, 4);
        rc.heuristics[0].width_range = (16, 16);
        rc.inner_iterations = 2;
        // Admissible space is 6 candidates; the initial space clamps and the
        // surrogate falls back to random selection over mutation neighbors.
        let output = run(&rc, None, None).unwrap();
        assert!(output.history.len() >= 6);
    }

    fn record(error: f64, index: u64) -> EvaluationRecord {
        let candidate = search_space::generate(&Heuristic::preset(BlockFamily::Plain), 1, 0)
            .unwrap()
            .candidates
            .remove(0);
        EvaluationRecord {
            candidate,
            objectives: ObjectiveVector::new(error, 0.1),
            wall_seconds: 0.0,
            seed: index,
            iteration: 0,
            heuristic_id: "fixture".into(),
        }
    }

    #[test]
    fn best_k_takes_lowest_errors() {
        let history = HistoryDB::from_records(vec![
            record(0.9, 0),
            record(0.2, 1),
            record(0.5, 2),
            record(0.1, 3),
            record(0.7, 4),
        ]);
        let best = best_k_by_accuracy(&history, 2).unwrap();
        assert_eq!(best[0].seed, 3);
        assert_eq!(best[1].seed, 1);
        let single = best_k_by_accuracy(&history, 1).unwrap();
        assert_eq!(single[0].seed, 3);
    }

    #[test]
    fn best_k_ties_resolve_by_insertion_and_overflow_returns_all() {
        let history = HistoryDB::from_records(vec![record(0.5, 0), record(0.5, 1), record(0.5, 2)]);
        let best = best_k_by_accuracy(&history, 2).unwrap();
        assert_eq!(best.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1]);
        let all = best_k_by_accuracy(&history, 10).unwrap();
        assert_eq!(all.len(), 3);
        assert!(best_k_by_accuracy(&history, 0).is_err());
    }

    #[test]
    fn best_five_of_benchmark_fixture_rows() {
        // Accuracy-% fixture rows in error form; K=5 returns all five in
        // ascending-error order.
        let errors = [0.53, 0.63, 0.63, 0.64, 0.71];
        let history = HistoryDB::from_records(
            errors
                .iter()
                .enumerate()
                .map(|(i, e)| record(*e, i as u64))
                .collect(),
        );
        let best = best_k_by_accuracy(&history, 5).unwrap();
        let picked: Vec<f64> = best.iter().map(|r| r.objectives.error).collect();
        assert_eq!(picked, vec![0.53, 0.63, 0.63, 0.64, 0.71]);
        // The tied 0.63 rows keep their insertion order.
        assert_eq!(best[1].seed, 1);
        assert_eq!(best[2].seed, 2);
    }

    #[test]
    fn resume_replays_to_identical_history() {
        let dir = tempfile::tempdir().unwrap();
        let rc = oracle_config(11);
        let sink = RunSink::create(dir.path(), &rc).unwrap();
        let full = run(&rc, None, Some(sink)).unwrap();
        let history_path = dir.path().join("history.jsonl");
        let checkpoint_path = dir.path().join("checkpoint.jsonl");
        let full_bytes = std::fs::read(&history_path).unwrap();

        // Simulate an interrupt: keep the header and the first 17 records.
        let checkpoint = std::fs::read_to_string(&checkpoint_path).unwrap();
        let truncated: Vec<&str> = checkpoint.lines().take(18).collect();
        let interrupted_dir = tempfile::tempdir().unwrap();
        let interrupted_path = interrupted_dir.path().join("checkpoint.jsonl");
        std::fs::write(&interrupted_path, truncated.join("\n") + "\n").unwrap();

        let resumed = resume_run(&interrupted_path, None, Some(interrupted_dir.path())).unwrap();
        assert_eq!(resumed.history.records(), full.history.records());
        let resumed_bytes = std::fs::read(interrupted_dir.path().join("history.jsonl")).unwrap();
        assert_eq!(resumed_bytes, full_bytes);
    }

    #[test]
    fn resume_recovers_from_partial_final_line() {
        let dir = tempfile::tempdir().unwrap();
        let rc = oracle_config(11);
        let sink = RunSink::create(dir.path(), &rc).unwrap();
        let full = run(&rc, None, Some(sink)).unwrap();
        let checkpoint_path = dir.path().join("checkpoint.jsonl");
        let checkpoint = std::fs::read_to_string(&checkpoint_path).unwrap();
        let mut lines: Vec<&str> = checkpoint.lines().take(10).collect();
        lines.push("{\"candidate\": {\"arch\"");
        let damaged_dir = tempfile::tempdir().unwrap();
        let damaged_path = damaged_dir.path().join("checkpoint.jsonl");
        std::fs::write(&damaged_path, lines.join("\n")).unwrap();

        let state = resume(&damaged_path).unwrap();
        assert_eq!(state.cursor, 9);
        let resumed = resume_run(&damaged_path, None, Some(damaged_dir.path())).unwrap();
        assert_eq!(resumed.history.records(), full.history.records());
    }

    #[test]
    fn resume_of_completed_run_returns_final_state() {
        let dir = tempfile::tempdir().unwrap();
        let rc = oracle_config(4);
        let sink = RunSink::create(dir.path(), &rc).unwrap();
        let full = run(&rc, None, Some(sink)).unwrap();
        let resumed = resume_run(&dir.path().join("checkpoint.jsonl"), None, None).unwrap();
        assert_eq!(resumed.history.records(), full.history.records());
    }

    #[test]
    fn resume_missing_file_is_not_found() {
        assert!(matches!(
            resume(Path::new("/nonexistent/checkpoint.jsonl")),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn resume_rejects_mid_file_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let rc = oracle_config(11);
        let sink = RunSink::create(dir.path(), &rc).unwrap();
        run(&rc, None, Some(sink)).unwrap();
        let checkpoint_path = dir.path().join("checkpoint.jsonl");
        let checkpoint = std::fs::read_to_string(&checkpoint_path).unwrap();
        let mut lines: Vec<String> = checkpoint.lines().map(str::to_string).collect();
        lines[5] = "not json".into();
        std::fs::write(&checkpoint_path, lines.join("\n") + "\n").unwrap();
        assert!(matches!(
            resume(&checkpoint_path),
            Err(Error::MalformedLine { line: 6, .. })
        ));
    }

    #[test]
    fn checkpoint_from_other_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rc = oracle_config(11);
        let sink = RunSink::create(dir.path(), &rc).unwrap();
        run(&rc, None, Some(sink)).unwrap();
        let checkpoint_path = dir.path().join("checkpoint.jsonl");

        // Rewrite the header to claim a different run seed; the replayed
        // records no longer match the schedule.
        let content = std::fs::read_to_string(&checkpoint_path).unwrap();
        let mut lines: Vec<String> = content.lines().map(str::to_string).collect();
        let mut header: CheckpointHeader = serde_json::from_str(&lines[0]).unwrap();
        header.config.run_seed = 999;
        lines[0] = serde_json::to_string(&header).unwrap();
        std::fs::write(&checkpoint_path, lines.join("\n") + "\n").unwrap();

        assert!(matches!(
            resume_run(&checkpoint_path, None, None),
            Err(Error::Contract(_))
        ));
    }
}
