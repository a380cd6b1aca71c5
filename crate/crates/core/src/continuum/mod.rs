//! The task continuum: ordered per-task datasets with pixel permutations.

pub mod features;
pub mod idx;
pub mod noise;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::MiniBatch;
use crate::runner::seeding::seed_rng;

pub use features::{load_feature_csv, parse_feature_csv};
pub use idx::{load_idx_pair, parse_idx_images, parse_idx_labels, SourceData};
pub use noise::{apply_noise, NoiseSpec};

/// A labelled input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

/// One task's train/test splits and the pixel permutation that defines it.
#[derive(Debug, Clone)]
pub struct TaskDataset {
    /// 1-based position in the stream.
    pub task_id: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Bijection on input positions: `permuted[j] = original[permutation[j]]`.
    pub permutation: Vec<usize>,
}

/// Ordered stream of tasks; immutable once built.
#[derive(Debug, Clone)]
pub struct Continuum {
    tasks: Vec<TaskDataset>,
}

impl Continuum {
    pub fn tasks(&self) -> &[TaskDataset] {
        &self.tasks
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, task_id: usize) -> &TaskDataset {
        &self.tasks[task_id - 1]
    }
}

/// Construction parameters for [`build_permuted_continuum`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuumConfig {
    pub n_tasks: usize,
    pub batches_per_task: usize,
    pub batch_size: usize,
    /// Size of each task's test split, clamped to the test source size.
    pub test_per_task: usize,
    /// Replaces every task's permutation with the identity; used by tests
    /// and single-task sanity runs.
    pub identity_permutations: bool,
}

impl Default for ContinuumConfig {
    fn default() -> Self {
        Self {
            n_tasks: 10,
            batches_per_task: 100,
            batch_size: 10,
            test_per_task: 1000,
            identity_permutations: false,
        }
    }
}

fn permute(input: &[f64], permutation: &[usize]) -> Vec<f64> {
    permutation.iter().map(|&p| input[p]).collect()
}

/// Builds the task stream from separate train and test sources, deriving
/// every random choice from `seed`.
///
/// Each task gets its own pixel permutation (applied to both splits) and a
/// training set drawn disjointly from the train source. All tasks share the
/// same base test subset, each under its own permutation.
pub fn build_permuted_continuum(
    train: &SourceData,
    test: &SourceData,
    config: &ContinuumConfig,
    seed: u64,
) -> Result<Continuum> {
    let mut perm_rng = seed_rng(seed, "permutations");
    let mut assign_rng = seed_rng(seed, "assignment");
    build_permuted_continuum_with(train, test, config, &mut perm_rng, &mut assign_rng)
}

/// As [`build_permuted_continuum`] but drawing from caller-owned generators.
pub fn build_permuted_continuum_with<R: Rng>(
    train: &SourceData,
    test: &SourceData,
    config: &ContinuumConfig,
    perm_rng: &mut R,
    assign_rng: &mut R,
) -> Result<Continuum> {
    if config.n_tasks == 0 || config.batch_size == 0 || config.batches_per_task == 0 {
        return Err(Error::config("continuum dimensions must be > 0"));
    }
    if train.input_dim != test.input_dim {
        return Err(Error::config(format!(
            "train dim {} != test dim {}",
            train.input_dim, test.input_dim
        )));
    }
    let per_task = config.batches_per_task * config.batch_size;
    let required = config.n_tasks * per_task;
    if train.len() < required {
        return Err(Error::config(format!(
            "insufficient training data: need {required} samples for {} tasks, have {}",
            config.n_tasks,
            train.len()
        )));
    }

    let mut train_order: Vec<usize> = (0..train.len()).collect();
    train_order.shuffle(assign_rng);
    let mut test_order: Vec<usize> = (0..test.len()).collect();
    test_order.shuffle(assign_rng);
    let test_take = config.test_per_task.min(test.len());
    let test_base = &test_order[..test_take];

    let dim = train.input_dim;
    let mut tasks = Vec::with_capacity(config.n_tasks);
    for t in 0..config.n_tasks {
        let mut permutation: Vec<usize> = (0..dim).collect();
        if !config.identity_permutations {
            permutation.shuffle(perm_rng);
        }
        let train_split: Vec<Sample> = train_order[t * per_task..(t + 1) * per_task]
            .iter()
            .map(|&i| Sample {
                input: permute(&train.inputs[i], &permutation),
                label: train.labels[i],
            })
            .collect();
        let test_split: Vec<Sample> = test_base
            .iter()
            .map(|&i| Sample {
                input: permute(&test.inputs[i], &permutation),
                label: test.labels[i],
            })
            .collect();
        tasks.push(TaskDataset {
            task_id: t + 1,
            train: train_split,
            test: test_split,
            permutation,
        });
    }
    Ok(Continuum { tasks })
}

/// Seed-determined pass over a task's training set in mini-batches.
///
/// Yields `min(ceil(train/batch_size), iteration_cap)` batches without
/// repeating a sample within the pass. The generator is consumed entirely
/// at construction, so downstream stream state does not depend on how many
/// batches the caller pulls.
pub fn iterate_batches<'a, R: Rng>(
    task: &'a TaskDataset,
    batch_size: usize,
    iteration_cap: Option<usize>,
    rng: &mut R,
) -> BatchIter<'a> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..task.train.len()).collect();
    order.shuffle(rng);
    let full = task.train.len().div_ceil(batch_size);
    let n_batches = iteration_cap.map_or(full, |cap| full.min(cap));
    BatchIter {
        task,
        order,
        batch_size,
        n_batches,
        next: 0,
    }
}

pub struct BatchIter<'a> {
    task: &'a TaskDataset,
    order: Vec<usize>,
    batch_size: usize,
    n_batches: usize,
    next: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        if self.next >= self.n_batches {
            return None;
        }
        let start = self.next * self.batch_size;
        let end = (start + self.batch_size).min(self.order.len());
        let dim = self.task.train[0].input.len();
        let mut batch = MiniBatch::with_capacity(dim, end - start);
        for &i in &self.order[start..end] {
            let sample = &self.task.train[i];
            batch.push(&sample.input, sample.label, self.task.task_id);
        }
        self.next += 1;
        Some(batch)
    }
}

/// Default data root: `$REPLAYCL_DATA_DIR`, falling back to `./data`.
pub fn default_data_dir() -> std::path::PathBuf {
    std::env::var_os("REPLAYCL_DATA_DIR")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::PathBuf::from("data"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn source(n: usize, dim: usize) -> SourceData {
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..dim).map(|j| ((i * dim + j) % 251) as f64 / 250.0).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        SourceData::new(inputs, labels).unwrap()
    }

    fn small_config() -> ContinuumConfig {
        ContinuumConfig {
            n_tasks: 3,
            batches_per_task: 4,
            batch_size: 5,
            test_per_task: 8,
            identity_permutations: false,
        }
    }

    #[test]
    fn builds_disjoint_tasks_with_bijective_permutations() {
        let train = source(100, 16);
        let test = source(20, 16);
        let continuum =
            build_permuted_continuum(&train, &test, &small_config(), 5).unwrap();
        assert_eq!(continuum.n_tasks(), 3);
        for task in continuum.tasks() {
            assert_eq!(task.train.len(), 20);
            assert_eq!(task.test.len(), 8);
            let mut sorted = task.permutation.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        }
        // Task ids run 1..n in stream order.
        let ids: Vec<usize> = continuum.tasks().iter().map(|t| t.task_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn identity_override_keeps_images_unchanged() {
        let train = source(100, 16);
        let test = source(20, 16);
        let config = ContinuumConfig {
            identity_permutations: true,
            n_tasks: 1,
            ..small_config()
        };
        let continuum = build_permuted_continuum(&train, &test, &config, 5).unwrap();
        let task = continuum.task(1);
        // Train rows are a subset of the source; with identity permutation
        // every train input must literally appear in the source.
        for sample in &task.train {
            assert!(train.inputs.contains(&sample.input));
        }
    }

    #[test]
    fn same_seed_reproduces_everything() {
        let train = source(100, 16);
        let test = source(20, 16);
        let a = build_permuted_continuum(&train, &test, &small_config(), 42).unwrap();
        let b = build_permuted_continuum(&train, &test, &small_config(), 42).unwrap();
        for (ta, tb) in a.tasks().iter().zip(b.tasks()) {
            assert_eq!(ta.permutation, tb.permutation);
            assert_eq!(ta.train, tb.train);
            assert_eq!(ta.test, tb.test);
        }
        let c = build_permuted_continuum(&train, &test, &small_config(), 43).unwrap();
        assert_ne!(a.task(1).permutation, c.task(1).permutation);
    }

    #[test]
    fn insufficient_data_is_rejected() {
        let train = source(59, 16);
        let test = source(20, 16);
        assert!(build_permuted_continuum(&train, &test, &small_config(), 1).is_err());
    }

    #[test]
    fn capped_iteration_yields_fewer_batches() {
        let train = source(100, 16);
        let test = source(20, 16);
        let continuum =
            build_permuted_continuum(&train, &test, &small_config(), 7).unwrap();
        let mut rng = seed_rng(7, "batching/task01");
        let batches: Vec<_> =
            iterate_batches(continuum.task(1), 5, Some(2), &mut rng).collect();
        assert_eq!(batches.len(), 2);
        let mut rng = seed_rng(7, "batching/task01");
        let uncapped: Vec<_> =
            iterate_batches(continuum.task(1), 5, None, &mut rng).collect();
        assert_eq!(uncapped.len(), 4);
        // Capped batches are a prefix of the uncapped order.
        assert_eq!(batches[0], uncapped[0]);
        assert_eq!(batches[1], uncapped[1]);
    }

    #[test]
    fn uncapped_batches_partition_the_train_set() {
        let train = source(100, 16);
        let test = source(20, 16);
        let continuum =
            build_permuted_continuum(&train, &test, &small_config(), 9).unwrap();
        let task = continuum.task(2);
        let mut rng = seed_rng(9, "batching/task02");
        let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
        let mut count = 0;
        for batch in iterate_batches(task, 5, None, &mut rng) {
            for i in 0..batch.len() {
                let key: Vec<u64> = batch.input(i).iter().map(|v| v.to_bits()).collect();
                seen.insert(key);
                count += 1;
            }
        }
        assert_eq!(count, task.train.len());
        let expect: BTreeSet<Vec<u64>> = task
            .train
            .iter()
            .map(|s| s.input.iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(seen, expect);
    }
}
