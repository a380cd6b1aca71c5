//! `replaycl`: reproducible continual-learning experiments from the shell.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use replaycl_core::metrics::beta_stats_from_snapshots;
use replaycl_core::runner::{
    load_config, load_beta_snapshots, run_experiment, run_sweep, self_check, sweep_csv,
    write_run_outputs, ExperimentConfig, SweepAxis,
};
use replaycl_core::strategies::StrategyKind;
use replaycl_core::synth;

#[derive(Parser)]
#[command(
    name = "replaycl",
    version,
    about = "Sequential MLP training over task streams with replay and meta-learned learning rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment from a config file.
    Run {
        /// Path to a `key = value` config document.
        #[arg(long)]
        config: PathBuf,
        /// Master seed; defaults to the first seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a cross product of axis values and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: ring_buffer_size, noise_fraction, iteration_cap.
        #[arg(long)]
        axis: SweepAxisArg,
        /// Comma-separated axis values, e.g. `1000,250,100`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Number of seeds (uses 1..=N); defaults to the config's seed list.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace-old-rates ablation table over the config's seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Constants substituted for every finished task's rates.
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1")]
        constants: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute learning-rate statistics from exported snapshots.
    BetaStats {
        /// Directory holding `beta_task_*.bin` files.
        #[arg(long)]
        snapshots: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-test: gradient fidelity and loss-decomposition identities.
    Check,
    /// Generate the synthetic digit dataset as standard IDX files.
    Datagen {
        /// Target directory for the four IDX files.
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 60_000)]
        train: usize,
        #[arg(long, default_value_t = 10_000)]
        test: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy)]
struct SweepAxisArg(SweepAxis);

impl std::str::FromStr for SweepAxisArg {
    type Err = replaycl_core::Error;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse().map(SweepAxisArg)
    }
}

fn main() {
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            out,
        } => cmd_sweep(&config, axis.0, &values, seeds, out),
        Command::Ablate {
            config,
            constants,
            out,
        } => cmd_ablate(&config, &constants, out),
        Command::BetaStats { snapshots, out } => cmd_beta_stats(&snapshots, out),
        Command::Check => cmd_check(),
        Command::Datagen {
            out,
            train,
            test,
            seed,
        } => {
            synth::write_idx_dataset(&out, train, test, seed)?;
            println!(
                "wrote {train} train and {test} test images (seed {seed}) to {}",
                out.display()
            );
            Ok(())
        }
    }
}

fn load(config_path: &PathBuf, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut config = load_config(config_path)
        .with_context(|| format!("loading config {}", config_path.display()))?;
    if let Some(dir) = out {
        config.out_dir = dir;
    }
    Ok(config)
}

fn cmd_run(config_path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let config = load(config_path, out)?;
    let seed = seed.unwrap_or(config.seeds[0]);
    let record = run_experiment(&config, seed)?;
    let dir = write_run_outputs(&record, &config)?;
    println!(
        "{} seed {}: FA1 {:.2}%  ACC {:.2}%  ({} updates, {:.1?})",
        record.strategy,
        seed,
        record.fa1()? * 100.0,
        record.acc()? * 100.0,
        record.updates,
        record.wall_time
    );
    println!("outputs: {}", dir.display());
    Ok(())
}

fn cmd_sweep(
    config_path: &PathBuf,
    axis: SweepAxis,
    values: &[String],
    seeds: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let config = load(config_path, out)?;
    let seed_list: Vec<u64> = match seeds {
        Some(n) => (1..=n).collect(),
        None => config.seeds.clone(),
    };
    let (runs, summaries) = run_sweep(&config, axis, values, &seed_list)?;

    std::fs::create_dir_all(&config.out_dir)?;
    let mut failed = 0usize;
    for run in &runs {
        match &run.outcome {
            Ok(record) => {
                write_run_outputs(record, &config)?;
            }
            Err(err) => {
                failed += 1;
                eprintln!("{}={} seed {}: {err}", axis.name(), run.value, run.seed);
            }
        }
    }
    let csv = sweep_csv(axis, &summaries);
    let csv_path = config.out_dir.join(format!("sweep_{}.csv", axis.name()));
    std::fs::write(&csv_path, &csv)?;
    print!("{csv}");
    println!("aggregate: {}", csv_path.display());
    if failed > 0 {
        bail!("{failed} of {} runs failed", runs.len());
    }
    Ok(())
}

fn cmd_ablate(config_path: &PathBuf, constants: &[f64], out: Option<PathBuf>) -> Result<()> {
    let base = load(config_path, out)?;
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    };

    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let mut evaluate = |label: String, config: ExperimentConfig| -> Result<()> {
        let mut fa1 = Vec::new();
        let mut acc = Vec::new();
        for &seed in &config.seeds {
            let record = run_experiment(&config, seed)?;
            fa1.push(record.fa1()? * 100.0);
            acc.push(record.acc()? * 100.0);
        }
        rows.push((label, median(fa1), median(acc)));
        Ok(())
    };

    let mut unablated = base.clone();
    unablated.strategy.kind = StrategyKind::MetaSgdCl;
    unablated.strategy.ablation = None;
    evaluate("metasgd_cl".into(), unablated)?;

    let mut singular = base.clone();
    singular.strategy.kind = StrategyKind::Singular;
    singular.strategy.ablation = None;
    evaluate("singular".into(), singular)?;

    for &c in constants {
        let mut ablated = base.clone();
        ablated.strategy.kind = StrategyKind::MetaSgdCl;
        ablated.strategy.ablation = Some(c);
        evaluate(format!("replace_old_beta_with_{c}"), ablated)?;
    }

    let mut csv = String::from("method,fa1_median,acc_median\n");
    let mut table = String::from("| Methods | FA1 (%) | ACC (%) |\n|---|---|---|\n");
    for (label, fa1, acc) in &rows {
        csv.push_str(&format!("{label},{fa1:.2},{acc:.2}\n"));
        table.push_str(&format!("| {label} | {fa1:.2} | {acc:.2} |\n"));
    }
    std::fs::create_dir_all(&base.out_dir)?;
    std::fs::write(base.out_dir.join("ablation.csv"), &csv)?;
    std::fs::write(base.out_dir.join("ablation.md"), &table)?;
    print!("{table}");
    println!("outputs: {}", base.out_dir.display());
    Ok(())
}

fn cmd_beta_stats(snapshots: &PathBuf, out: Option<PathBuf>) -> Result<()> {
    let snaps = load_beta_snapshots(snapshots)?;
    let stats = beta_stats_from_snapshots(&snaps)?;
    let csv = stats.to_csv();
    match out {
        Some(path) => {
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_check() -> Result<()> {
    let reports = self_check();
    let mut all_passed = true;
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", report.name, report.detail);
        all_passed &= report.passed;
    }
    if !all_passed {
        bail!("self-check failed");
    }
    Ok(())
}
