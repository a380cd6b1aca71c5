//! Experiment orchestration: the sequential training loop, sweeps, and
//! self-checks.

pub mod config;
pub mod seeding;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;

use crate::continuum::noise::apply_noise_in_place;
use crate::continuum::{build_permuted_continuum, iterate_batches, ContinuumConfig, SourceData};
use crate::error::{Error, Result};
use crate::memory::{EpisodicMemory, StoredSample};
use crate::metrics::{beta_stats, evaluate_row, AccuracyMatrix, BetaStats};
use crate::nn::{init_params, MlpArchitecture, ParamLayout};
use crate::strategies::{beta_summary_csv, BetaSnapshot, Strategy, StrategyKind};

pub use config::{parse_config, load_config, DataConfig, DataFormat, ExperimentConfig};
pub use seeding::{derive_seed, seed_rng};

/// Everything a single run produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub strategy: StrategyKind,
    pub matrix: AccuracyMatrix,
    pub beta_stats: BetaStats,
    /// Parameter updates applied over the whole run.
    pub updates: u64,
    pub wall_time: Duration,
    pub engine_version: String,
    /// Exported learning-rate snapshots, one per task boundary, when the
    /// configuration asks for them.
    pub beta_snapshots: Vec<Vec<u8>>,
    /// Final memory snapshot (csv, binary sidecar) when asked for.
    pub memory_export: Option<(Vec<u8>, Vec<u8>)>,
}

impl RunRecord {
    pub fn fa1(&self) -> Result<f64> {
        self.matrix.fa1()
    }

    pub fn acc(&self) -> Result<f64> {
        self.matrix.acc()
    }
}

fn run_context(task: usize, iteration: usize) -> impl Fn(Error) -> Error {
    move |source| Error::Run {
        task,
        iteration,
        source: Box::new(source),
    }
}

/// Loads the configured data sources and executes one run.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let (train, test) = config.data.load_sources()?;
    run_experiment_with_sources(config, seed, &train, &test)
}

/// Executes one run against already-loaded sources. Fully determined by
/// `(config, seed)`.
pub fn run_experiment_with_sources(
    config: &ExperimentConfig,
    seed: u64,
    train: &SourceData,
    test: &SourceData,
) -> Result<RunRecord> {
    let start = Instant::now();
    config.validate()?;

    let n_classes = train.n_classes.max(test.n_classes);
    let arch = MlpArchitecture::new(train.input_dim, config.hidden_dims.clone(), n_classes)?;
    let continuum_config = ContinuumConfig {
        n_tasks: config.n_tasks,
        batches_per_task: config.batches_per_task,
        batch_size: config.batch_size,
        test_per_task: config.test_per_task,
        identity_permutations: false,
    };
    let continuum = build_permuted_continuum(train, test, &continuum_config, seed)?;

    let mut params = init_params(&arch, derive_seed(seed, "init"));
    let mut memory = EpisodicMemory::new(config.memory, config.n_tasks);
    let mut strategy = Strategy::new(config.strategy.clone(), params.len())?;
    let mut matrix = AccuracyMatrix::new(config.n_tasks);
    let mut updates = 0u64;
    let mut beta_snapshots = Vec::new();
    let layout = ParamLayout::from_arch(&arch);

    for task in continuum.tasks() {
        let v = task.task_id;
        strategy.begin_task(v).map_err(run_context(v, 0))?;
        let mut batch_rng = seed_rng(seed, &format!("batching/task{v:02}"));
        let mut replay_rng = seed_rng(seed, &format!("replay/task{v:02}"));
        let mut train_noise_rng = seed_rng(seed, &format!("noise/train/task{v:02}"));
        let mut memory_noise_rng = seed_rng(seed, &format!("noise/memory/task{v:02}"));

        let batches = iterate_batches(task, config.batch_size, config.iteration_cap, &mut batch_rng);
        for (iteration, mut batch) in batches.enumerate() {
            let ctx = run_context(v, iteration + 1);
            // Memory keeps its own independently-noised copies, so stored
            // entries and training inputs see separate noise events.
            for i in 0..batch.len() {
                let mut input = batch.input(i).to_vec();
                if config.noise.is_active() && config.noise.apply_to_memory {
                    apply_noise_in_place(&mut input, config.noise.fraction, &mut memory_noise_rng);
                }
                memory
                    .insert(v, StoredSample { input, label: batch.label(i) })
                    .map_err(&ctx)?;
            }
            if config.noise.is_active() && config.noise.apply_to_train {
                for i in 0..batch.len() {
                    apply_noise_in_place(
                        batch.input_mut(i),
                        config.noise.fraction,
                        &mut train_noise_rng,
                    );
                }
            }
            params = strategy
                .step(&params, &arch, &batch, &memory, v, &mut replay_rng)
                .map_err(&ctx)?;
            updates += 1;
        }

        strategy.finish_task(v).map_err(run_context(v, 0))?;
        if config.export_beta {
            if let Some(bank) = strategy.bank() {
                beta_snapshots.push(bank.export_task_snapshot(v, &layout)?);
            }
        }
        let row = evaluate_row(&params, &arch, &continuum).map_err(run_context(v, 0))?;
        matrix.push_row(row)?;
    }

    let stats = strategy
        .bank()
        .map(|bank| beta_stats(bank, &layout))
        .unwrap_or_else(BetaStats::empty);
    let memory_export = config.export_memory.then(|| memory.export_snapshot());

    Ok(RunRecord {
        config_hash: config.semantic_hash(),
        seed,
        strategy: config.strategy.kind,
        matrix,
        beta_stats: stats,
        updates,
        wall_time: start.elapsed(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        beta_snapshots,
        memory_export,
    })
}

/// Writes a run's deterministic outputs under
/// `<out_dir>/<strategy>-<hash>-seed<seed>/` and returns that directory.
pub fn write_run_outputs(record: &RunRecord, config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = config.out_dir.join(format!(
        "{}-{}-seed{}",
        record.strategy, record.config_hash, record.seed
    ));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.txt"), config.canonical_text())?;
    std::fs::write(dir.join("r_matrix.csv"), record.matrix.to_csv())?;
    std::fs::write(dir.join("beta_stats.csv"), record.beta_stats.to_csv())?;
    let report = crate::metrics::render_report(
        record.strategy.name(),
        &record.matrix,
        &record.beta_stats,
        &config.canonical_text(),
    )?;
    std::fs::write(dir.join("report.md"), report)?;
    if !record.beta_snapshots.is_empty() {
        let beta_dir = dir.join("beta");
        std::fs::create_dir_all(&beta_dir)?;
        let mut snapshots = Vec::new();
        for bytes in &record.beta_snapshots {
            let snap = BetaSnapshot::parse(bytes)?;
            std::fs::write(
                beta_dir.join(format!("beta_task_{:02}.bin", snap.task_id)),
                bytes,
            )?;
            snapshots.push(snap);
        }
        std::fs::write(beta_dir.join("beta_summary.csv"), beta_summary_csv(&snapshots))?;
    }
    if let Some((csv, bin)) = &record.memory_export {
        std::fs::write(dir.join("memory_snapshot.csv"), csv)?;
        std::fs::write(dir.join("memory_snapshot.bin"), bin)?;
    }
    Ok(dir)
}

/// Sweepable configuration axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    RingBufferSize,
    NoiseFraction,
    IterationCap,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring_buffer_size" => Ok(SweepAxis::RingBufferSize),
            "noise_fraction" => Ok(SweepAxis::NoiseFraction),
            "iteration_cap" => Ok(SweepAxis::IterationCap),
            other => Err(Error::config(format!(
                "unknown sweep axis {other:?}; supported: ring_buffer_size, noise_fraction, iteration_cap"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RingBufferSize => "ring_buffer_size",
            SweepAxis::NoiseFraction => "noise_fraction",
            SweepAxis::IterationCap => "iteration_cap",
        }
    }

    /// Returns the config with this axis set to `value`.
    pub fn apply(&self, config: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut out = config.clone();
        match self {
            SweepAxis::RingBufferSize => {
                let units: usize = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad ring buffer size {value:?}")))?;
                out.memory.policy = crate::memory::MemoryPolicy::RingBuffer;
                out.memory.total_units = units;
            }
            SweepAxis::NoiseFraction => {
                out.noise.fraction = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad noise fraction {value:?}")))?;
            }
            SweepAxis::IterationCap => {
                let cap: usize = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad iteration cap {value:?}")))?;
                out.iteration_cap = Some(cap);
            }
        }
        Ok(out)
    }
}

/// One (value, seed) cell of a sweep.
#[derive(Debug)]
pub struct SweepRun {
    pub value: String,
    pub seed: u64,
    pub outcome: Result<RunRecord>,
}

/// Aggregate row over the seeds of one axis value.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub value: String,
    pub ok: usize,
    pub failed: usize,
    pub fa1_median: f64,
    pub fa1_mean: f64,
    pub fa1_min: f64,
    pub fa1_max: f64,
    pub acc_median: f64,
    pub acc_mean: f64,
    pub acc_min: f64,
    pub acc_max: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn summarize(value: &str, runs: &[&SweepRun]) -> SweepSummary {
    let mut fa1: Vec<f64> = Vec::new();
    let mut acc: Vec<f64> = Vec::new();
    let mut failed = 0;
    for run in runs {
        match &run.outcome {
            Ok(record) => {
                fa1.push(record.fa1().unwrap_or(f64::NAN));
                acc.push(record.acc().unwrap_or(f64::NAN));
            }
            Err(_) => failed += 1,
        }
    }
    fa1.sort_by(f64::total_cmp);
    acc.sort_by(f64::total_cmp);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    SweepSummary {
        value: value.to_string(),
        ok: fa1.len(),
        failed,
        fa1_median: if fa1.is_empty() { f64::NAN } else { median(&fa1) },
        fa1_mean: mean(&fa1),
        fa1_min: fa1.first().copied().unwrap_or(f64::NAN),
        fa1_max: fa1.last().copied().unwrap_or(f64::NAN),
        acc_median: if acc.is_empty() { f64::NAN } else { median(&acc) },
        acc_mean: mean(&acc),
        acc_min: acc.first().copied().unwrap_or(f64::NAN),
        acc_max: acc.last().copied().unwrap_or(f64::NAN),
    }
}

/// Aggregate CSV: one row per axis value with mean and min/max bands.
pub fn sweep_csv(axis: SweepAxis, summaries: &[SweepSummary]) -> String {
    let mut out = String::from(
        "axis,value,ok,failed,fa1_median,fa1_mean,fa1_min,fa1_max,acc_median,acc_mean,acc_min,acc_max\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            axis.name(),
            s.value,
            s.ok,
            s.failed,
            s.fa1_median * 100.0,
            s.fa1_mean * 100.0,
            s.fa1_min * 100.0,
            s.fa1_max * 100.0,
            s.acc_median * 100.0,
            s.acc_mean * 100.0,
            s.acc_min * 100.0,
            s.acc_max * 100.0,
        ));
    }
    out
}

/// Runs `values x seeds` independent experiments. Individual failures are
/// recorded and do not abort sibling runs. `REPLAYCL_THREADS` caps the
/// number of concurrent runs.
pub fn run_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    seeds: &[u64],
) -> Result<(Vec<SweepRun>, Vec<SweepSummary>)> {
    if values.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let (train, test) = config.data.load_sources()?;
    let mut cells = Vec::new();
    for value in values {
        for &seed in seeds {
            cells.push((value.clone(), seed));
        }
    }

    let worker = |(value, seed): &(String, u64)| -> SweepRun {
        let outcome = axis
            .apply(config, value)
            .and_then(|cfg| run_experiment_with_sources(&cfg, *seed, &train, &test));
        SweepRun {
            value: value.clone(),
            seed: *seed,
            outcome,
        }
    };

    let threads = std::env::var("REPLAYCL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let runs: Vec<SweepRun> = match threads {
        Some(1) => cells.iter().map(worker).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(|| {
                use rayon::prelude::*;
                cells.par_iter().map(worker).collect()
            }),
        None => {
            use rayon::prelude::*;
            cells.par_iter().map(worker).collect()
        }
    };

    let summaries = values
        .iter()
        .map(|value| {
            let group: Vec<&SweepRun> = runs.iter().filter(|r| &r.value == value).collect();
            summarize(value, &group)
        })
        .collect();
    Ok((runs, summaries))
}

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Backward pass versus central finite differences on a 6-4-3 net, batch 3.
pub fn check_gradient_fidelity() -> CheckReport {
    let arch = MlpArchitecture::new(6, vec![4], 3).expect("valid arch");
    let params = init_params(&arch, 2024);
    let mut rng = seed_rng(2024, "check/gradient");
    let mut batch = crate::nn::MiniBatch::new(6);
    for _ in 0..3 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
        batch.push(&x, rng.gen_range(0..3), 1);
    }
    let (_, grad) = match crate::nn::backward(&params, &arch, &batch) {
        Ok(v) => v,
        Err(e) => {
            return CheckReport {
                name: "gradient_fidelity".into(),
                passed: false,
                detail: format!("backward failed: {e}"),
            }
        }
    };
    let h = 1e-5;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let orig = probe.values()[k];
        probe.values_mut()[k] = orig + h;
        let lp = crate::nn::batch_loss(&probe, &arch, &batch).expect("loss");
        probe.values_mut()[k] = orig - h;
        let lm = crate::nn::batch_loss(&probe, &arch, &batch).expect("loss");
        probe.values_mut()[k] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let analytic = grad.values()[k];
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    CheckReport {
        name: "gradient_fidelity".into(),
        passed: worst < 1e-4,
        detail: format!("max relative error {worst:.3e} (tolerance 1e-4)"),
    }
}

/// Pooled loss and gradient versus their task-weighted recombinations over
/// 100 random instances.
pub fn check_decomposition_identities() -> CheckReport {
    let arch = MlpArchitecture::new(6, vec![5], 4).expect("valid arch");
    let mut rng = seed_rng(7, "check/decomposition");
    let mut worst_loss = 0.0f64;
    let mut worst_grad = 0.0f64;
    for instance in 0..100 {
        let params = init_params(&arch, 10_000 + instance);
        let n_tasks = rng.gen_range(2..5usize);
        let mut combined = crate::nn::MiniBatch::new(6);
        for task in 1..=n_tasks {
            for _ in 0..rng.gen_range(1..6usize) {
                let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
                combined.push(&x, rng.gen_range(0..4), task);
            }
        }
        let pooled_loss = crate::nn::batch_loss(&params, &arch, &combined).expect("loss");
        let (_, pooled_grad) = crate::nn::backward(&params, &arch, &combined).expect("grad");
        let grads =
            crate::strategies::compute_task_gradients(&params, &arch, &combined).expect("grads");
        let total = combined.len() as f64;

        let recombined_loss: f64 = grads
            .per_task
            .values()
            .map(|tg| tg.rows as f64 * tg.loss)
            .sum::<f64>()
            / total;
        worst_loss = worst_loss
            .max((pooled_loss - recombined_loss).abs() / pooled_loss.abs().max(1e-300));

        let mut recombined = vec![0.0; params.len()];
        for tg in grads.per_task.values() {
            let w = tg.rows as f64 / total;
            for (r, &g) in recombined.iter_mut().zip(tg.grad.values()) {
                *r += w * g;
            }
        }
        let grad_err = pooled_grad
            .values()
            .iter()
            .zip(&recombined)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-12))
            .fold(0.0, f64::max);
        worst_grad = worst_grad.max(grad_err);
    }
    let passed = worst_loss < 1e-10 && worst_grad < 1e-10;
    CheckReport {
        name: "decomposition_identities".into(),
        passed,
        detail: format!(
            "loss relative error {worst_loss:.3e}, gradient relative error {worst_grad:.3e} (tolerance 1e-10)"
        ),
    }
}

/// The self-test behind the `check` subcommand.
pub fn self_check() -> Vec<CheckReport> {
    vec![check_gradient_fidelity(), check_decomposition_identities()]
}

/// Reads every `beta_task_*.bin` under `dir` in name order.
pub fn load_beta_snapshots(dir: &Path) -> Result<Vec<BetaSnapshot>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("beta_task_") && n.ends_with(".bin"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!(
            "no beta_task_*.bin snapshots under {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| BetaSnapshot::load(p)).collect()
}
