//! End-to-end runner behavior on a small synthetic task stream.

use std::sync::OnceLock;

use replaycl_core::continuum::SourceData;
use replaycl_core::memory::MemoryPolicy;
use replaycl_core::runner::{
    run_experiment_with_sources, run_sweep, seed_rng, ExperimentConfig, SweepAxis,
};
use replaycl_core::strategies::StrategyKind;
use replaycl_core::synth::render_source;

fn sources() -> &'static (SourceData, SourceData) {
    static DATA: OnceLock<(SourceData, SourceData)> = OnceLock::new();
    DATA.get_or_init(|| {
        let mut train_rng = seed_rng(70, "synth/train");
        let mut test_rng = seed_rng(70, "synth/test");
        (render_source(900, &mut train_rng), render_source(300, &mut test_rng))
    })
}

/// 3 tasks x 20 batches of 10, small splits: seconds, not minutes.
fn small_config(kind: StrategyKind) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.strategy.kind = kind;
    config.n_tasks = 3;
    config.batches_per_task = 20;
    config.test_per_task = 200;
    config.memory.units_per_task = 50;
    config.memory.total_units = 60;
    config.hidden_dims = vec![32, 32];
    config
}

#[test]
fn identical_config_and_seed_reproduce_every_output_byte() {
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::MetaSgdCl);
    config.export_beta = true;
    config.export_memory = true;
    let a = run_experiment_with_sources(&config, 5, train, test).unwrap();
    let b = run_experiment_with_sources(&config, 5, train, test).unwrap();
    assert_eq!(a.matrix.to_csv(), b.matrix.to_csv());
    assert_eq!(a.beta_stats.to_csv(), b.beta_stats.to_csv());
    assert_eq!(a.beta_snapshots, b.beta_snapshots);
    assert_eq!(a.memory_export, b.memory_export);
    assert_eq!(a.config_hash, b.config_hash);

    let c = run_experiment_with_sources(&config, 6, train, test).unwrap();
    assert_ne!(a.matrix.to_csv(), c.matrix.to_csv());
}

#[test]
fn update_count_is_tasks_times_batches() {
    let (train, test) = sources();
    let config = small_config(StrategyKind::Singular);
    let record = run_experiment_with_sources(&config, 1, train, test).unwrap();
    assert_eq!(record.updates, 3 * 20);
}

#[test]
fn iteration_cap_reduces_update_count() {
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::Er);
    config.iteration_cap = Some(5);
    let record = run_experiment_with_sources(&config, 1, train, test).unwrap();
    assert_eq!(record.updates, 3 * 5);
}

#[test]
fn single_task_singular_run_degenerates_to_supervised_training() {
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::Singular);
    config.n_tasks = 1;
    let record = run_experiment_with_sources(&config, 2, train, test).unwrap();
    assert_eq!(record.matrix.n(), 1);
    assert_eq!(record.matrix.rows_filled(), 1);
    assert_eq!(record.fa1().unwrap(), record.acc().unwrap());
    // Two hundred samples through a [32, 32] net already beat the 10%
    // ten-class chance level.
    assert!(record.acc().unwrap() > 0.13, "acc {}", record.acc().unwrap());
}

#[test]
fn memory_contents_are_identical_across_update_rules() {
    // Streams are keyed by label, not by strategy, so runs differing only
    // in the update rule insert the same samples in the same order.
    let (train, test) = sources();
    let mut er = small_config(StrategyKind::Er);
    er.export_memory = true;
    let mut meta = small_config(StrategyKind::MetaSgdCl);
    meta.export_memory = true;
    let mut singular = small_config(StrategyKind::Singular);
    singular.export_memory = true;

    let a = run_experiment_with_sources(&er, 3, train, test).unwrap();
    let b = run_experiment_with_sources(&meta, 3, train, test).unwrap();
    let c = run_experiment_with_sources(&singular, 3, train, test).unwrap();
    assert_eq!(a.memory_export, b.memory_export);
    assert_eq!(a.memory_export, c.memory_export);
}

#[test]
fn replay_draws_are_identical_across_update_rules() {
    // Both replay consumers pull from the same labelled stream once per
    // iteration, so the draws agree independent of the update rule.
    use replaycl_core::memory::{EpisodicMemory, MemoryConfig, StoredSample};
    let config = MemoryConfig::default();
    let mut memory = EpisodicMemory::new(config, 10);
    for task in 1..=2 {
        for i in 0..30 {
            memory
                .insert(task, StoredSample { input: vec![(task * 100 + i) as f64], label: 0 })
                .unwrap();
        }
    }
    let draws = |label: &str| -> Vec<Vec<u64>> {
        let mut rng = seed_rng(9, label);
        (0..20)
            .map(|_| {
                let batch = memory.sample_replay(3, &mut rng).unwrap();
                (0..batch.len()).map(|i| batch.input(i)[0].to_bits()).collect()
            })
            .collect()
    };
    assert_eq!(draws("replay/task03"), draws("replay/task03"));
}

#[test]
fn frozen_rate_vectors_stay_bit_identical_through_later_tasks() {
    use replaycl_core::memory::{EpisodicMemory, MemoryConfig, StoredSample};
    use replaycl_core::nn::{init_params, MlpArchitecture};
    use replaycl_core::strategies::{Strategy, StrategyConfig};

    let arch = MlpArchitecture::new(16, vec![8], 4).unwrap();
    let mut params = init_params(&arch, 4);
    let mut strategy = Strategy::new(StrategyConfig::default(), params.len()).unwrap();
    let mut memory = EpisodicMemory::new(MemoryConfig::default(), 3);
    let mut rng = seed_rng(4, "data");

    let mut batch_for = |task: usize| {
        use rand::Rng;
        let mut batch = replaycl_core::nn::MiniBatch::new(16);
        for _ in 0..6 {
            let x: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
            batch.push(&x, rng.gen_range(0..4), task);
        }
        batch
    };

    // Task 1.
    strategy.begin_task(1).unwrap();
    let mut replay_rng = seed_rng(4, "replay/task01");
    for _ in 0..10 {
        let batch = batch_for(1);
        for i in 0..batch.len() {
            memory
                .insert(1, StoredSample { input: batch.input(i).to_vec(), label: batch.label(i) })
                .unwrap();
        }
        params = strategy.step(&params, &arch, &batch, &memory, 1, &mut replay_rng).unwrap();
    }
    strategy.finish_task(1).unwrap();
    let frozen: Vec<u64> = strategy
        .bank()
        .unwrap()
        .raw(1)
        .unwrap()
        .iter()
        .map(|v| v.to_bits())
        .collect();

    // Task 2 trains for a while; the frozen vector must not move.
    strategy.begin_task(2).unwrap();
    let mut replay_rng = seed_rng(4, "replay/task02");
    for _ in 0..25 {
        let batch = batch_for(2);
        for i in 0..batch.len() {
            memory
                .insert(2, StoredSample { input: batch.input(i).to_vec(), label: batch.label(i) })
                .unwrap();
        }
        params = strategy.step(&params, &arch, &batch, &memory, 2, &mut replay_rng).unwrap();
    }
    let after: Vec<u64> = strategy
        .bank()
        .unwrap()
        .raw(1)
        .unwrap()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    assert_eq!(frozen, after);

    // And the active vector did move.
    let b2 = strategy.bank().unwrap().raw(2).unwrap();
    assert!(b2.iter().any(|&v| v != replaycl_core::strategies::BETA_INIT));
}

#[test]
fn effective_rates_stay_inside_the_clamp_throughout_a_run() {
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::MetaSgdCl);
    config.export_beta = true;
    let record = run_experiment_with_sources(&config, 7, train, test).unwrap();
    for bytes in &record.beta_snapshots {
        let snap = replaycl_core::strategies::BetaSnapshot::parse(bytes).unwrap();
        let beta = replaycl_core::strategies::clamp_beta(&snap.raw, snap.kappa);
        assert!(beta.iter().all(|&b| (0.0..=snap.kappa).contains(&b)));
    }
}

#[test]
fn boundary_snapshots_agree_with_final_bank_statistics() {
    // Frozen vectors cannot change after their boundary, so statistics
    // recomputed from the exported snapshots equal the end-of-run ones.
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::MetaSgdCl);
    config.export_beta = true;
    let record = run_experiment_with_sources(&config, 8, train, test).unwrap();
    let snaps: Vec<_> = record
        .beta_snapshots
        .iter()
        .map(|b| replaycl_core::strategies::BetaSnapshot::parse(b).unwrap())
        .collect();
    let from_snaps = replaycl_core::metrics::beta_stats_from_snapshots(&snaps).unwrap();
    assert_eq!(from_snaps, record.beta_stats);
}

#[test]
fn sweep_with_no_values_is_an_empty_success() {
    let config = small_config(StrategyKind::Er);
    let (runs, summaries) = run_sweep(&config, SweepAxis::NoiseFraction, &[], &[1]).unwrap();
    assert!(runs.is_empty());
    assert!(summaries.is_empty());
}

#[test]
fn sweep_records_per_run_failures_and_continues() {
    // Ring size 0 gives every task a zero quota, so replay at task 2 finds
    // nothing and that run fails; its sibling value still completes.
    let (train, test) = sources();
    let mut config = small_config(StrategyKind::Er);
    // Sweep loads sources itself through the data config, so this test
    // drives the axis application directly instead.
    let bad = SweepAxis::RingBufferSize.apply(&config, "0").unwrap();
    let err = run_experiment_with_sources(&bad, 1, train, test).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("task 2"), "missing context: {text}");

    config.memory.policy = MemoryPolicy::RingBuffer;
    config.memory.total_units = 60;
    let good = run_experiment_with_sources(&config, 1, train, test);
    assert!(good.is_ok());
}

#[test]
fn feature_csv_sources_run_through_the_whole_pipeline() {
    use std::io::Write;
    // A 24-dimensional, 4-class synthetic feature problem.
    let dir = tempfile::tempdir().unwrap();
    let write_csv = |name: &str, rows: usize, seed: u64| -> std::path::PathBuf {
        use rand::Rng;
        let mut rng = seed_rng(seed, "features");
        let path = dir.path().join(name);
        let mut file = std::fs::File::create(&path).unwrap();
        for _ in 0..rows {
            let label = rng.gen_range(0..4usize);
            let features: Vec<String> = (0..24)
                .map(|j| {
                    let center = if j % 4 == label { 1.0 } else { 0.0 };
                    format!("{:.4}", center + rng.gen::<f64>() * 0.4)
                })
                .collect();
            writeln!(file, "{label},{}", features.join(",")).unwrap();
        }
        path
    };
    let train_path = write_csv("train.csv", 400, 1);
    let test_path = write_csv("test.csv", 100, 2);

    let mut config = ExperimentConfig::default();
    config.strategy.kind = StrategyKind::Er;
    config.n_tasks = 2;
    config.batches_per_task = 15;
    config.batch_size = 10;
    config.test_per_task = 100;
    config.memory.units_per_task = 40;
    config.hidden_dims = vec![16];
    config.data.format = replaycl_core::runner::DataFormat::FeatureCsv;
    config.data.features_train = Some(train_path);
    config.data.features_test = Some(test_path);

    let (train, test) = config.data.load_sources().unwrap();
    assert_eq!(train.input_dim, 24);
    assert_eq!(train.n_classes, 4);
    let record = run_experiment_with_sources(&config, 1, &train, &test).unwrap();
    assert_eq!(record.matrix.n(), 2);
    assert!(record.acc().unwrap() > 0.3, "acc {}", record.acc().unwrap());
}

#[test]
fn noisy_runs_complete_and_differ_from_clean_runs() {
    let (train, test) = sources();
    let clean = small_config(StrategyKind::Er);
    let mut noisy = small_config(StrategyKind::Er);
    noisy.noise.fraction = 0.5;
    let a = run_experiment_with_sources(&clean, 9, train, test).unwrap();
    let b = run_experiment_with_sources(&noisy, 9, train, test).unwrap();
    assert_ne!(a.matrix.to_csv(), b.matrix.to_csv());
}
