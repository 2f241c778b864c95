//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).

use std::collections::HashSet;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meeso::engine::{self, EvaluatorKind, RunConfig, RunSink, SelectionPolicy};
use meeso::evaluator::{self, Dataset, EvalOptions};
use meeso::pareto::{hypervolume_2d, non_dominated_indices, pareto_front};
use meeso::search_space::generate;
use meeso::surrogate::{assign_groups, train, ObjectiveId};
use meeso::types::{
    ArchitectureSpec, BlockFamily, Candidate, EvaluationRecord, GrowthPolicy, Heuristic,
    ObjectiveVector, Optimizer, PipelineConfig, Preprocessing,
};

fn verdict(number: u32, name: &str, ok: bool) {
    println!(
        "[acceptance {number}] {name}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn fixture_record(error: f64, uncertainty: f64, tag: u64) -> EvaluationRecord {
    EvaluationRecord {
        candidate: plain_candidate(
            vec![1],
            vec![16],
            0.1,
            Preprocessing::None,
            Optimizer::AdaptiveMoments,
        ),
        objectives: ObjectiveVector::new(error, uncertainty),
        wall_seconds: 0.0,
        seed: tag,
        iteration: 0,
        heuristic_id: "fixture".into(),
    }
}

fn plain_candidate(
    blocks: Vec<u32>,
    widths: Vec<u32>,
    dropout: f64,
    preprocessing: Preprocessing,
    optimizer: Optimizer,
) -> Candidate {
    Candidate {
        arch: ArchitectureSpec {
            block_family: BlockFamily::Plain,
            blocks_per_layer: blocks,
            widths_per_layer: widths,
            dropout_rate: dropout,
        },
        config: PipelineConfig {
            preprocessing,
            optimizer,
            epochs: 10,
            learning_rate: 0.02,
            batch_size: 32,
        },
    }
}

/// Independent O(n^2) double-loop front oracle.
fn brute_force_front(vectors: &[Vec<f64>]) -> Vec<usize> {
    let mut kept = Vec::new();
    for i in 0..vectors.len() {
        let mut dominated = false;
        for j in 0..vectors.len() {
            if i == j {
                continue;
            }
            let all_le = vectors[j].iter().zip(&vectors[i]).all(|(a, b)| a <= b);
            let any_lt = vectors[j].iter().zip(&vectors[i]).any(|(a, b)| a < b);
            if all_le && any_lt {
                dominated = true;
                break;
            }
        }
        if !dominated {
            kept.push(i);
        }
    }
    kept
}

#[test]
fn acceptance_1_pareto_front_matches_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let mut ok = true;
    for case in 0..500 {
        let n = rng.random_range(1..=200);
        let dims = if case % 2 == 0 { 2 } else { 3 };
        // Coarse grids provoke ties and objective-space duplicates.
        let resolution = rng.random_range(4..=64);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dims)
                    .map(|_| rng.random_range(0..resolution) as f64 / resolution as f64)
                    .collect()
            })
            .collect();
        if non_dominated_indices(&vectors).unwrap() != brute_force_front(&vectors) {
            ok = false;
            break;
        }
    }

    // The record-level wrapper agrees on 2-d objective pairs as well.
    for _ in 0..50 {
        let n = rng.random_range(1..=60);
        let records: Vec<EvaluationRecord> = (0..n)
            .map(|i| {
                fixture_record(
                    rng.random_range(0..10) as f64 / 10.0,
                    rng.random_range(0..10) as f64 / 10.0,
                    i as u64,
                )
            })
            .collect();
        let vectors: Vec<Vec<f64>> = records
            .iter()
            .map(|r| r.objectives.as_array().to_vec())
            .collect();
        let expected: Vec<u64> = brute_force_front(&vectors)
            .into_iter()
            .map(|i| records[i].seed)
            .collect();
        let got: Vec<u64> = pareto_front(&records).iter().map(|r| r.seed).collect();
        if got != expected {
            ok = false;
            break;
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let in_budget = elapsed < 10.0;
    verdict(
        1,
        "pareto front matches the brute-force oracle on 500 seeded sets",
        ok && in_budget,
    );
    assert!(ok, "front mismatch against brute force");
    assert!(in_budget, "took {elapsed:.2}s, budget is 10s");
}

#[test]
fn acceptance_2_fixture_front_is_the_two_point_set() {
    let rows = [
        (0.53, 8.59),
        (0.63, 3.94),
        (0.63, 16.44),
        (0.64, 5.07),
        (0.71, 5.08),
    ];
    let records: Vec<EvaluationRecord> = rows
        .iter()
        .enumerate()
        .map(|(i, (e, m))| fixture_record(*e, *m, i as u64))
        .collect();
    let front: Vec<(f64, f64)> = pareto_front(&records)
        .iter()
        .map(|r| (r.objectives.error, r.objectives.uncertainty))
        .collect();
    let ok = front == vec![(0.53, 8.59), (0.63, 3.94)];
    verdict(
        2,
        "benchmark fixture rows reduce to the expected two-point front",
        ok,
    );
    assert!(ok, "front was {front:?}");
}

#[test]
fn acceptance_3_mc_dropout_formulas() {
    // Hand case: two passes {0.4, 0.6} -> mean 0.5, variance 0.01 (1/N).
    let (mean, variance) = evaluator::posterior_mean_and_variance(&[vec![0.4], vec![0.6]]);
    let hand_ok = (mean[0] - 0.5).abs() < 1e-12 && (variance[0] - 0.01).abs() < 1e-12;

    // 1/N, not 1/(N-1): passes {0, 1} give 0.25.
    let (_, biased) = evaluator::posterior_mean_and_variance(&[vec![0.0], vec![1.0]]);
    let biased_ok = (biased[0] - 0.25).abs() < 1e-12;

    // A dropout-free model is deterministic: uncertainty is exactly zero.
    let data = Dataset::synthetic_blobs(42);
    let candidate = plain_candidate(
        vec![1, 1],
        vec![8, 8],
        0.0,
        Preprocessing::None,
        Optimizer::AdaptiveMoments,
    );
    let model = evaluator::build_and_train(&candidate.arch, &candidate.config, &data, 42).unwrap();
    let estimate = evaluator::mc_dropout_uncertainty(
        &model,
        &[data.features[0].clone(), data.features[1].clone()],
        16,
        9,
    )
    .unwrap();
    let zero_ok = estimate.value == 0.0 && estimate.uninformative;

    let ok = hand_ok && biased_ok && zero_ok;
    verdict(
        3,
        "dropout-uncertainty hand cases and exact-zero deterministic case",
        ok,
    );
    assert!(
        hand_ok,
        "hand case failed: mean {mean:?}, variance {variance:?}"
    );
    assert!(biased_ok, "biased normalizer failed: {biased:?}");
    assert!(zero_ok, "deterministic model gave {estimate:?}");
}

#[test]
fn acceptance_4_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4_000);
    let arch = ArchitectureSpec {
        block_family: BlockFamily::Plain,
        blocks_per_layer: vec![1, 1],
        widths_per_layer: vec![8, 8],
        dropout_rate: 0.0,
    };
    let mut network = evaluator::Network::build(&arch, 10, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..16)
        .map(|_| (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let ys: Vec<usize> = (0..16).map(|_| rng.random_range(0..2)).collect();

    let analytic = network.batch_gradients(&xs, &ys);
    let h = 1e-5;
    let total = network.param_count();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let index = rng.random_range(0..total);
        let original = network.get_param(index);
        network.set_param(index, original + h);
        let plus = network.batch_loss(&xs, &ys);
        network.set_param(index, original - h);
        let minus = network.batch_loss(&xs, &ys);
        network.set_param(index, original);
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[index].abs().max(numeric.abs());
        if denom < 1e-12 {
            continue;
        }
        worst = worst.max((analytic[index] - numeric).abs() / denom);
    }
    let ok = worst <= 1e-4;
    verdict(
        4,
        "analytic gradients within 1e-4 of central finite differences",
        ok,
    );
    assert!(ok, "worst relative error {worst}");
}

#[test]
fn acceptance_5_trainer_reaches_ninety_percent_on_blobs() {
    let started = Instant::now();
    let data = Dataset::synthetic_blobs(7);
    let heuristic = Heuristic {
        id: "sanity".into(),
        block_family: BlockFamily::Residual,
        depth_range: (2, 4),
        width_range: (8, 32),
        growth_policy: GrowthPolicy::BalancedScale,
        defaults: Default::default(),
    };
    // A seeded sample of generated architectures stands in for the universal
    // quantifier; 200-epoch budget per the criterion.
    let space = generate(&heuristic, 12, 55).unwrap();
    let sample: Vec<Candidate> = space.candidates.into_iter().step_by(4).collect();
    let mut ok = true;
    for (i, mut candidate) in sample.into_iter().enumerate() {
        candidate.config.epochs = 200;
        let model = evaluator::build_and_train(&candidate.arch, &candidate.config, &data, i as u64)
            .unwrap();
        let acc = evaluator::accuracy(&model, &data).unwrap();
        if acc < 0.90 {
            ok = false;
            eprintln!("architecture {i} reached only {acc}");
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let in_budget = elapsed < 30.0;
    verdict(
        5,
        "generated architectures reach 0.90 accuracy within 200 epochs",
        ok && in_budget,
    );
    assert!(ok);
    assert!(in_budget, "took {elapsed:.2}s, budget is 30s");
}

/// Grid of distinct candidates spanning depth, width, blocks, and dropout.
fn oracle_corpus(count: usize) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut index = 0usize;
    for depth in 1..=8u32 {
        for exp in 2..=9u32 {
            for blocks in 1..=2u32 {
                for dropout in [0.1, 0.3, 0.5] {
                    let preprocessing = Preprocessing::ALL[index % 3];
                    let optimizer = Optimizer::ALL[index / 3 % 2];
                    out.push(plain_candidate(
                        vec![blocks; depth as usize],
                        vec![1 << exp; depth as usize],
                        dropout,
                        preprocessing,
                        optimizer,
                    ));
                    index += 1;
                }
            }
        }
    }
    assert!(out.len() >= count, "corpus too small: {}", out.len());
    out.truncate(count);
    out
}

#[test]
fn acceptance_6_surrogate_learnability_and_grouping_invariants() {
    // 300 seeded oracle records: 200 train, 100 held out.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut candidates = oracle_corpus(300);
    use rand::seq::SliceRandom;
    candidates.shuffle(&mut rng);
    let records: Vec<EvaluationRecord> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| EvaluationRecord {
            candidate: c.clone(),
            objectives: evaluator::oracle_evaluate(c, 9_000 + i as u64),
            wall_seconds: evaluator::oracle_wall_seconds(c),
            seed: i as u64,
            iteration: 0,
            heuristic_id: "oracle".into(),
        })
        .collect();
    let (train_records, held_out) = records.split_at(200);

    let model = train(train_records, 5, ObjectiveId::Error).unwrap();
    let scores: Vec<f64> = held_out
        .iter()
        .map(|r| {
            model
                .predict_group(&meeso::search_space::encode(&r.candidate))
                .unwrap()
        })
        .collect();
    let mut agreements = 0usize;
    let mut comparable = 0usize;
    for i in 0..held_out.len() {
        for j in i + 1..held_out.len() {
            let (a, b) = (held_out[i].objectives.error, held_out[j].objectives.error);
            if a == b {
                continue;
            }
            comparable += 1;
            if (scores[i] < scores[j]) == (a < b) {
                agreements += 1;
            }
        }
    }
    let agreement = agreements as f64 / comparable as f64;
    let learnable = agreement >= 0.70;

    // 1000 fuzzed group assignments: partition sizes and label monotonicity.
    let mut fuzz_ok = true;
    let mut invocations = 0usize;
    'fuzz: while invocations < 1000 {
        let n = rng.random_range(1..=60);
        let set: Vec<EvaluationRecord> = (0..n)
            .map(|i| {
                fixture_record(
                    rng.random_range(0..12) as f64 / 12.0,
                    rng.random_range(0..12) as f64 / 12.0,
                    i as u64,
                )
            })
            .collect();
        let n_groups = rng.random_range(1..=n.min(8));
        let objective = if invocations.is_multiple_of(2) {
            ObjectiveId::Error
        } else {
            ObjectiveId::Uncertainty
        };
        let labeled = assign_groups(&set, n_groups, objective).unwrap();
        invocations += 1;

        if labeled.len() != n {
            fuzz_ok = false;
            break 'fuzz;
        }
        let mut sizes = vec![0usize; n_groups];
        for (_, label) in &labeled {
            sizes[*label] += 1;
        }
        let (min_size, max_size) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if max_size - min_size > 1 || !sizes.windows(2).all(|w| w[0] >= w[1]) {
            fuzz_ok = false;
            break 'fuzz;
        }
        // Bucket value ranges must be non-decreasing across labels.
        let mut sorted_values: Vec<f64> = set.iter().map(|r| objective.value_of(r)).collect();
        sorted_values.sort_by(f64::total_cmp);
        let mut cursor = 0usize;
        let mut previous_max = f64::NEG_INFINITY;
        for size in sizes {
            let bucket = &sorted_values[cursor..cursor + size];
            if bucket[0] < previous_max {
                fuzz_ok = false;
                break 'fuzz;
            }
            previous_max = bucket[size - 1];
            cursor += size;
        }
    }

    let ok = learnable && fuzz_ok;
    verdict(
        6,
        "surrogate held-out order agreement and grouping invariants",
        ok,
    );
    assert!(
        learnable,
        "held-out pairwise agreement {agreement:.3} < 0.70"
    );
    assert!(fuzz_ok, "group assignment invariant violated");
}

#[test]
fn acceptance_7_guided_search_beats_random() {
    let started = Instant::now();
    let reference = ObjectiveVector::new(1.0, 1.0);
    // A space far larger than the 60-evaluation budget, shared by both arms.
    let wide = Heuristic {
        id: "wide".into(),
        block_family: BlockFamily::Residual,
        depth_range: (1, 8),
        width_range: (4, 512),
        growth_policy: GrowthPolicy::BalancedScale,
        defaults: Default::default(),
    };
    let budget_config = |seed: u64, selection: SelectionPolicy| RunConfig {
        heuristics: vec![wide.clone()],
        arches_per_iter: 4,
        inner_iterations: 10,
        initial_space_size: 20,
        n_groups: 5,
        satisfied_thresholds: None,
        run_seed: seed,
        evaluator_kind: EvaluatorKind::Oracle,
        jobs: 1,
        selection,
        n_probes: 4,
        mc_passes: 4,
        dedupe_archive: false,
    };

    let mut wins = 0usize;
    for seed in 0..20u64 {
        let guided =
            engine::run(&budget_config(seed, SelectionPolicy::Surrogate), None, None).unwrap();
        let random =
            engine::run(&budget_config(seed, SelectionPolicy::Random), None, None).unwrap();
        assert_eq!(guided.history.len(), 60);
        assert_eq!(random.history.len(), 60);
        let hv = |output: &engine::RunOutput| {
            let points: Vec<ObjectiveVector> = output
                .archive
                .members()
                .iter()
                .map(|m| m.objectives)
                .collect();
            hypervolume_2d(&points, &reference).unwrap()
        };
        if hv(&guided) >= hv(&random) {
            wins += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = wins >= 16;
    let in_budget = elapsed < 120.0;
    verdict(
        7,
        "surrogate guidance beats random selection in hypervolume on >= 16/20 runs",
        ok && in_budget,
    );
    assert!(ok, "guided won only {wins}/20 runs");
    assert!(in_budget, "took {elapsed:.2}s, budget is 120s");
}

#[test]
fn acceptance_8_determinism_and_resume() {
    let binary = env!("CARGO_BIN_EXE_meeso");
    let base = tempfile::tempdir().unwrap();
    let run_search = |out: &str, jobs: &str| {
        let status = Command::new(binary)
            .args([
                "search",
                "--evaluator",
                "oracle",
                "--heuristics",
                "residual",
                "--init",
                "20",
                "--k",
                "4",
                "--iters",
                "5",
                "--groups",
                "5",
                "--seed",
                "7",
                "--jobs",
                jobs,
                "--out",
            ])
            .arg(base.path().join(out))
            .env("MEESO_LOG", "error")
            .output()
            .unwrap();
        assert!(status.status.success(), "search failed: {status:?}");
        std::fs::read(base.path().join(out).join("history.jsonl")).unwrap()
    };

    let first = run_search("a", "1");
    let repeat = run_search("b", "1");
    let parallel = run_search("c", "4");
    let rerun_identical = first == repeat;
    let jobs_identical = first == parallel;

    // Interrupt after 17 records and resume; the finished history must be
    // byte-identical to the uninterrupted run.
    let rc = RunConfig {
        heuristics: vec![Heuristic::preset(BlockFamily::Residual)],
        arches_per_iter: 4,
        inner_iterations: 5,
        initial_space_size: 20,
        n_groups: 5,
        satisfied_thresholds: None,
        run_seed: 7,
        evaluator_kind: EvaluatorKind::Oracle,
        jobs: 1,
        selection: SelectionPolicy::Surrogate,
        n_probes: 4,
        mc_passes: 4,
        dedupe_archive: false,
    };
    let full_dir = tempfile::tempdir().unwrap();
    let sink = RunSink::create(full_dir.path(), &rc).unwrap();
    engine::run(&rc, None, Some(sink)).unwrap();
    let full_history = std::fs::read(full_dir.path().join("history.jsonl")).unwrap();

    let interrupted_dir = tempfile::tempdir().unwrap();
    let checkpoint = std::fs::read_to_string(full_dir.path().join("checkpoint.jsonl")).unwrap();
    let prefix: Vec<&str> = checkpoint.lines().take(1 + 17).collect();
    let interrupted_checkpoint = interrupted_dir.path().join("checkpoint.jsonl");
    std::fs::write(&interrupted_checkpoint, prefix.join("\n") + "\n").unwrap();
    engine::resume_run(&interrupted_checkpoint, None, Some(interrupted_dir.path())).unwrap();
    let resumed_history = std::fs::read(interrupted_dir.path().join("history.jsonl")).unwrap();
    let resume_identical = resumed_history == full_history;

    let ok = rerun_identical && jobs_identical && resume_identical;
    verdict(
        8,
        "byte-identical history across reruns, job counts, and interrupt/resume",
        ok,
    );
    assert!(rerun_identical, "rerun produced different history bytes");
    assert!(jobs_identical, "--jobs 4 produced different history bytes");
    assert!(resume_identical, "resume produced different history bytes");
}

#[test]
fn acceptance_9_pipeline_stages_change_outcomes() {
    let data = Dataset::synthetic_blobs(31);
    let heuristic = Heuristic {
        id: "effect".into(),
        block_family: BlockFamily::Plain,
        depth_range: (2, 3),
        width_range: (8, 16),
        growth_policy: GrowthPolicy::BalancedScale,
        defaults: Default::default(),
    };
    let archs: Vec<ArchitectureSpec> = {
        let space = generate(&heuristic, 12, 3).unwrap();
        let mut seen = HashSet::new();
        space
            .candidates
            .into_iter()
            .map(|c| c.arch)
            .filter(|a| seen.insert(format!("{a:?}")))
            .take(3)
            .collect()
    };

    let mut witnessed = false;
    'archs: for arch in archs {
        let mut objectives = Vec::new();
        for preprocessing in Preprocessing::ALL {
            for optimizer in Optimizer::ALL {
                let candidate = Candidate {
                    arch: arch.clone(),
                    config: PipelineConfig {
                        preprocessing,
                        optimizer,
                        epochs: 10,
                        learning_rate: 0.02,
                        batch_size: 32,
                    },
                };
                let opts = EvalOptions {
                    n_probes: 8,
                    mc_passes: 8,
                    ..EvalOptions::new(77)
                };
                let outcome = evaluator::evaluate(&candidate, &data, &opts).unwrap();
                objectives.push(outcome.record.objectives);
            }
        }
        assert_eq!(objectives.len(), 6);
        let all_distinct = (0..6).all(|i| (i + 1..6).all(|j| objectives[i] != objectives[j]));
        if all_distinct {
            witnessed = true;
            break 'archs;
        }
    }

    verdict(
        9,
        "an architecture's objectives differ across all six stage configs",
        witnessed,
    );
    assert!(
        witnessed,
        "no architecture produced six pairwise-distinct objective vectors"
    );
}
