//! Experiment configuration: parsing, canonical serialization, hashing.
//!
//! The on-disk format is a flat `key = value` document with `#` comments.
//! Unknown keys are rejected and every field defaults to the benchmark
//! protocol, so an empty file is a complete configuration.

use std::path::{Path, PathBuf};

use crate::continuum::{default_data_dir, load_feature_csv, load_idx_pair, NoiseSpec, SourceData};
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, MemoryPolicy};
use crate::strategies::StrategyConfig;

/// Where the task stream's raw samples come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataFormat {
    /// The standard four-file IDX set under the data directory.
    Idx,
    /// A pair of `label,f1,...,fD` CSV files.
    FeatureCsv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataConfig {
    pub format: DataFormat,
    /// Overrides `$REPLAYCL_DATA_DIR` / `./data` when set.
    pub dir: Option<PathBuf>,
    pub features_train: Option<PathBuf>,
    pub features_test: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            format: DataFormat::Idx,
            dir: None,
            features_train: None,
            features_test: None,
        }
    }
}

pub const IDX_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const IDX_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const IDX_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const IDX_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

impl DataConfig {
    pub fn resolved_dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(default_data_dir)
    }

    /// Loads the train and test sources.
    pub fn load_sources(&self) -> Result<(SourceData, SourceData)> {
        match self.format {
            DataFormat::Idx => {
                let dir = self.resolved_dir();
                let train = load_idx_pair(&dir.join(IDX_TRAIN_IMAGES), &dir.join(IDX_TRAIN_LABELS))?;
                let test = load_idx_pair(&dir.join(IDX_TEST_IMAGES), &dir.join(IDX_TEST_LABELS))?;
                Ok((train, test))
            }
            DataFormat::FeatureCsv => {
                let train_path = self.features_train.as_ref().ok_or_else(|| {
                    Error::config("features_train is required with data_format = features")
                })?;
                let test_path = self.features_test.as_ref().ok_or_else(|| {
                    Error::config("features_test is required with data_format = features")
                })?;
                Ok((load_feature_csv(train_path)?, load_feature_csv(test_path)?))
            }
        }
    }
}

/// Everything a run needs; defaults reproduce the benchmark protocol
/// (10 tasks, batch 10, 100 batches/task, alpha 0.01, kappa 0.02,
/// meta_lr 0.01, hard storage 250/task, replay sample 10).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: StrategyConfig,
    pub memory: MemoryConfig,
    pub n_tasks: usize,
    pub batch_size: usize,
    pub batches_per_task: usize,
    /// Caps the number of batches consumed per task; `None` runs them all.
    pub iteration_cap: Option<usize>,
    pub noise: NoiseSpec,
    pub test_per_task: usize,
    pub hidden_dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub data: DataConfig,
    pub out_dir: PathBuf,
    /// Write per-task learning-rate snapshots at task boundaries.
    pub export_beta: bool,
    /// Write the final episodic-memory snapshot.
    pub export_memory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyConfig::default(),
            memory: MemoryConfig::default(),
            n_tasks: 10,
            batch_size: 10,
            batches_per_task: 100,
            iteration_cap: None,
            noise: NoiseSpec::default(),
            test_per_task: 1000,
            hidden_dims: vec![100, 100],
            seeds: vec![1, 2, 3],
            data: DataConfig::default(),
            out_dir: PathBuf::from("runs"),
            export_beta: false,
            export_memory: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.noise.validate()?;
        if self.n_tasks == 0 || self.batch_size == 0 || self.batches_per_task == 0 {
            return Err(Error::config("n_tasks, batch_size, batches_per_task must be > 0"));
        }
        if self.test_per_task == 0 {
            return Err(Error::config("test_per_task must be > 0"));
        }
        if self.memory.replay_sample_size == 0 {
            return Err(Error::config("replay_sample_size must be > 0"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        Ok(())
    }

    /// Canonical text form: every key explicit, fixed order. Parsing this
    /// text reproduces the configuration exactly.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("strategy", self.strategy.kind.to_string());
        push("alpha", trim_float(self.strategy.alpha));
        push("kappa", trim_float(self.strategy.kappa));
        push("meta_lr", trim_float(self.strategy.meta_lr));
        push(
            "replace_old_beta_with",
            self.strategy
                .ablation
                .map_or_else(|| "none".into(), trim_float),
        );
        push(
            "memory_policy",
            match self.memory.policy {
                MemoryPolicy::HardStorage => "hard_storage".into(),
                MemoryPolicy::RingBuffer => "ring_buffer".into(),
            },
        );
        push("units_per_task", self.memory.units_per_task.to_string());
        push("total_units", self.memory.total_units.to_string());
        push("replay_sample_size", self.memory.replay_sample_size.to_string());
        push("n_tasks", self.n_tasks.to_string());
        push("batch_size", self.batch_size.to_string());
        push("batches_per_task", self.batches_per_task.to_string());
        push(
            "iteration_cap",
            self.iteration_cap.map_or_else(|| "none".into(), |c| c.to_string()),
        );
        push("noise_fraction", trim_float(self.noise.fraction));
        push("noise_targets", noise_targets_text(&self.noise));
        push("test_per_task", self.test_per_task.to_string());
        push("hidden", join(&self.hidden_dims));
        push("seeds", join(&self.seeds));
        push(
            "data_format",
            match self.data.format {
                DataFormat::Idx => "idx".into(),
                DataFormat::FeatureCsv => "features".into(),
            },
        );
        if let Some(dir) = &self.data.dir {
            push("data_dir", dir.display().to_string());
        }
        if let Some(p) = &self.data.features_train {
            push("features_train", p.display().to_string());
        }
        if let Some(p) = &self.data.features_test {
            push("features_test", p.display().to_string());
        }
        push("out_dir", self.out_dir.display().to_string());
        push("export_beta", self.export_beta.to_string());
        push("export_memory", self.export_memory.to_string());
        out
    }

    /// Hash over the fields that shape a run's results. Paths, seeds, the
    /// output directory, and export toggles are excluded: they affect where
    /// results land, not what they are.
    pub fn semantic_hash(&self) -> String {
        let mut text = String::new();
        for line in self.canonical_text().lines() {
            let key = line.split(" = ").next().unwrap_or("");
            if matches!(
                key,
                "seeds"
                    | "out_dir"
                    | "data_dir"
                    | "features_train"
                    | "features_test"
                    | "export_beta"
                    | "export_memory"
            ) {
                continue;
            }
            text.push_str(line);
            text.push('\n');
        }
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn trim_float(v: f64) -> String {
    // Shortest text that round-trips: Rust's float Display is lossless.
    format!("{v}")
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn noise_targets_text(noise: &NoiseSpec) -> String {
    match (noise.apply_to_train, noise.apply_to_memory) {
        (true, true) => "train,memory".into(),
        (true, false) => "train".into(),
        (false, true) => "memory".into(),
        (false, false) => "none".into(),
    }
}

/// Parses the flat `key = value` document. Unknown keys and malformed
/// values name the offending line; absent keys keep protocol defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // Inline comments start at " #".
        if let Some(pos) = line.find(" #") {
            line = line[..pos].trim_end();
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::line(line_no, format!("expected `key = value`, got {raw:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut config, key, value, line_no)?;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn apply_key(
    config: &mut ExperimentConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<()> {
    match key {
        "strategy" => config.strategy.kind = value.parse().map_err(|e| reline(e, line))?,
        "alpha" => config.strategy.alpha = parse_f64(value, line)?,
        "kappa" => config.strategy.kappa = parse_f64(value, line)?,
        "meta_lr" => config.strategy.meta_lr = parse_f64(value, line)?,
        "replace_old_beta_with" => {
            config.strategy.ablation = match value {
                "none" => None,
                v => Some(parse_f64(v, line)?),
            }
        }
        "memory_policy" => {
            config.memory.policy = match value {
                "hard_storage" => MemoryPolicy::HardStorage,
                "ring_buffer" => MemoryPolicy::RingBuffer,
                other => {
                    return Err(Error::line(
                        line,
                        format!("unknown memory_policy {other:?}; supported: hard_storage, ring_buffer"),
                    ))
                }
            }
        }
        "units_per_task" => config.memory.units_per_task = parse_usize(value, line)?,
        "total_units" => config.memory.total_units = parse_usize(value, line)?,
        "replay_sample_size" => config.memory.replay_sample_size = parse_usize(value, line)?,
        "n_tasks" => config.n_tasks = parse_usize(value, line)?,
        "batch_size" => config.batch_size = parse_usize(value, line)?,
        "batches_per_task" => config.batches_per_task = parse_usize(value, line)?,
        "iteration_cap" => {
            config.iteration_cap = match value {
                "none" => None,
                v => Some(parse_usize(v, line)?),
            }
        }
        "noise_fraction" => config.noise.fraction = parse_f64(value, line)?,
        "noise_targets" => {
            config.noise.apply_to_train = false;
            config.noise.apply_to_memory = false;
            if value != "none" {
                for target in value.split(',') {
                    match target.trim() {
                        "train" => config.noise.apply_to_train = true,
                        "memory" => config.noise.apply_to_memory = true,
                        other => {
                            return Err(Error::line(
                                line,
                                format!("unknown noise target {other:?}; supported: train, memory, none"),
                            ))
                        }
                    }
                }
            }
        }
        "test_per_task" => config.test_per_task = parse_usize(value, line)?,
        "hidden" => config.hidden_dims = parse_list(value, line)?,
        "seeds" => config.seeds = parse_list(value, line)?,
        "data_format" => {
            config.data.format = match value {
                "idx" => DataFormat::Idx,
                "features" => DataFormat::FeatureCsv,
                other => {
                    return Err(Error::line(
                        line,
                        format!("unknown data_format {other:?}; supported: idx, features"),
                    ))
                }
            }
        }
        "data_dir" => config.data.dir = Some(PathBuf::from(value)),
        "features_train" => config.data.features_train = Some(PathBuf::from(value)),
        "features_test" => config.data.features_test = Some(PathBuf::from(value)),
        "out_dir" => config.out_dir = PathBuf::from(value),
        "export_beta" => config.export_beta = parse_bool(value, line)?,
        "export_memory" => config.export_memory = parse_bool(value, line)?,
        other => {
            return Err(Error::line(line, format!("unknown key {other:?}")));
        }
    }
    Ok(())
}

fn reline(err: Error, line: usize) -> Error {
    Error::line(line, err.to_string())
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::line(line, format!("expected a number, got {value:?}")))
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::line(line, format!("expected a non-negative integer, got {value:?}")))
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::line(line, format!("expected true or false, got {value:?}"))),
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::line(line, format!("bad list element {v:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::StrategyKind;

    #[test]
    fn empty_file_gives_protocol_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.n_tasks, 10);
        assert_eq!(config.batch_size, 10);
        assert_eq!(config.batches_per_task, 100);
        assert_eq!(config.strategy.alpha, 0.01);
        assert_eq!(config.strategy.kappa, 0.02);
        assert_eq!(config.strategy.meta_lr, 0.01);
        assert_eq!(config.memory.units_per_task, 250);
        assert_eq!(config.memory.replay_sample_size, 10);
        assert_eq!(config.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn single_override_keeps_other_defaults() {
        let config = parse_config("kappa = 0.1\n").unwrap();
        assert_eq!(config.strategy.kappa, 0.1);
        let reference = ExperimentConfig::default();
        assert_eq!(config.strategy.alpha, reference.strategy.alpha);
        assert_eq!(config.n_tasks, reference.n_tasks);
    }

    #[test]
    fn unsupported_strategy_lists_the_options() {
        let err = parse_config("strategy = gem\n").unwrap_err().to_string();
        assert!(err.contains("gem"), "{err}");
        assert!(err.contains("singular"), "{err}");
        assert!(err.contains("metasgd_cl"), "{err}");
    }

    #[test]
    fn unknown_key_names_the_line() {
        let err = parse_config("alpha = 0.01\nlearning_rate = 0.5\n").unwrap_err();
        match err {
            Error::Line { line, ref message } => {
                assert_eq!(line, 2);
                assert!(message.contains("learning_rate"));
            }
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_line() {
        let err = parse_config("# comment\nbatch_size = ten\n").unwrap_err();
        match err {
            Error::Line { line, .. } => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_inline_comments_are_ignored() {
        let config = parse_config("# full line\nkappa = 0.1 # table regime\n\n").unwrap();
        assert_eq!(config.strategy.kappa, 0.1);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut config = ExperimentConfig::default();
        config.strategy.kind = StrategyKind::Er;
        config.strategy.ablation = None;
        config.iteration_cap = Some(25);
        config.noise.fraction = 0.5;
        config.noise.apply_to_memory = false;
        config.memory.policy = MemoryPolicy::RingBuffer;
        config.memory.total_units = 100;
        config.seeds = vec![7];
        config.data.dir = Some(PathBuf::from("/tmp/idx"));
        let text = config.canonical_text();
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let base = ExperimentConfig::default();
        let mut same = base.clone();
        same.out_dir = PathBuf::from("elsewhere");
        same.seeds = vec![9, 9, 9];
        same.export_beta = true;
        assert_eq!(base.semantic_hash(), same.semantic_hash());

        let mut different = base.clone();
        different.strategy.kappa = 0.1;
        assert_ne!(base.semantic_hash(), different.semantic_hash());

        let mut capped = base.clone();
        capped.iteration_cap = Some(25);
        assert_ne!(base.semantic_hash(), capped.semantic_hash());
    }

    #[test]
    fn ablation_requires_metasgd() {
        assert!(parse_config("strategy = er\nreplace_old_beta_with = 0\n").is_err());
        let config = parse_config("replace_old_beta_with = 0.01\n").unwrap();
        assert_eq!(config.strategy.ablation, Some(0.01));
    }
}
