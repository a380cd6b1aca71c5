//! Episodic memory stores and replay samplers.
//!
//! Two policies: hard storage allocates a fixed per-task quota; the ring
//! buffer shares a global budget, giving each task `total / n_tasks` slots.
//! Either way a task's slots fill first-come and never change once the
//! task finishes training.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::MiniBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryPolicy {
    HardStorage,
    RingBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryConfig {
    pub policy: MemoryPolicy,
    /// Hard-storage quota per task.
    pub units_per_task: usize,
    /// Ring-buffer budget shared across all tasks.
    pub total_units: usize,
    /// Samples drawn per replay request (per past task under hard storage,
    /// in total under the ring buffer).
    pub replay_sample_size: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            policy: MemoryPolicy::HardStorage,
            units_per_task: 250,
            total_units: 250,
            replay_sample_size: 10,
        }
    }
}

/// A stored (input, label) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSample {
    pub input: Vec<f64>,
    pub label: usize,
}

/// Bounded store of past-task samples.
#[derive(Debug, Clone)]
pub struct EpisodicMemory {
    slots: BTreeMap<usize, Vec<StoredSample>>,
    config: MemoryConfig,
    n_tasks: usize,
    active_task: Option<usize>,
}

impl EpisodicMemory {
    pub fn new(config: MemoryConfig, n_tasks: usize) -> Self {
        Self {
            slots: BTreeMap::new(),
            config,
            n_tasks: n_tasks.max(1),
            active_task: None,
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    /// Slot quota for one task under the configured policy.
    pub fn per_task_quota(&self) -> usize {
        match self.config.policy {
            MemoryPolicy::HardStorage => self.config.units_per_task,
            MemoryPolicy::RingBuffer => self.config.total_units / self.n_tasks,
        }
    }

    /// Stores a sample for the currently training task; returns whether it
    /// was kept. Samples past the quota are dropped, and inserting for an
    /// already-finished task is an error.
    pub fn insert(&mut self, task_id: usize, sample: StoredSample) -> Result<bool> {
        if let Some(active) = self.active_task {
            if task_id < active {
                return Err(Error::Memory(format!(
                    "insertion for past task {task_id} while task {active} is training"
                )));
            }
        }
        self.active_task = Some(task_id);
        let quota = self.per_task_quota();
        let slots = self.slots.entry(task_id).or_default();
        if slots.len() < quota {
            slots.push(sample);
            debug_assert!(self.total_stored() <= self.capacity_bound());
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn capacity_bound(&self) -> usize {
        match self.config.policy {
            MemoryPolicy::HardStorage => self.config.units_per_task * self.n_tasks,
            MemoryPolicy::RingBuffer => self.config.total_units,
        }
    }

    pub fn total_stored(&self) -> usize {
        self.slots.values().map(Vec::len).sum()
    }

    /// Exact slot counts per task.
    pub fn occupancy(&self) -> BTreeMap<usize, usize> {
        self.slots
            .iter()
            .map(|(&task, slots)| (task, slots.len()))
            .collect()
    }

    fn past_tasks(&self, current_task: usize) -> Vec<usize> {
        self.slots
            .iter()
            .filter(|(&task, slots)| task < current_task && !slots.is_empty())
            .map(|(&task, _)| task)
            .collect()
    }

    /// Draws the replay batch for the current task.
    ///
    /// Hard storage draws `replay_sample_size` from each past task's slots;
    /// the ring buffer draws `replay_sample_size` from the pooled slots of
    /// all past tasks. Draws are without replacement; a pool smaller than
    /// the request falls back to with-replacement draws from that pool.
    pub fn sample_replay<R: Rng>(&self, current_task: usize, rng: &mut R) -> Result<MiniBatch> {
        if current_task < 2 {
            return Err(Error::Memory(
                "replay requires at least one finished task".into(),
            ));
        }
        let past = self.past_tasks(current_task);
        if past.is_empty() {
            return Err(Error::Memory("no stored samples to replay".into()));
        }
        let dim = self.slots[&past[0]][0].input.len();
        let k = self.config.replay_sample_size;
        let mut batch = MiniBatch::with_capacity(dim, k * past.len());
        match self.config.policy {
            MemoryPolicy::HardStorage => {
                for &task in &past {
                    let pool = &self.slots[&task];
                    for idx in draw(pool.len(), k, rng) {
                        batch.push(&pool[idx].input, pool[idx].label, task);
                    }
                }
            }
            MemoryPolicy::RingBuffer => {
                // One unified pool over all past tasks, unstratified.
                let pooled: Vec<(usize, &StoredSample)> = past
                    .iter()
                    .flat_map(|&task| self.slots[&task].iter().map(move |s| (task, s)))
                    .collect();
                for idx in draw(pooled.len(), k, rng) {
                    let (task, sample) = pooled[idx];
                    batch.push(&sample.input, sample.label, task);
                }
            }
        }
        Ok(batch)
    }

    /// Serializes every stored slot: a CSV of `(task_id, slot_index, label)`
    /// and a little-endian f64 sidecar holding the inputs row-major in the
    /// same order.
    pub fn export_snapshot(&self) -> (Vec<u8>, Vec<u8>) {
        let mut csv = Vec::new();
        let mut bin = Vec::new();
        writeln!(csv, "task_id,slot_index,label").unwrap();
        for (&task, slots) in &self.slots {
            for (i, sample) in slots.iter().enumerate() {
                writeln!(csv, "{task},{i},{}", sample.label).unwrap();
                for v in &sample.input {
                    bin.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        (csv, bin)
    }

    /// Writes the snapshot pair next to each other in `dir`.
    pub fn write_snapshot(&self, dir: &std::path::Path) -> Result<()> {
        let (csv, bin) = self.export_snapshot();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("memory_snapshot.csv"), csv)?;
        std::fs::write(dir.join("memory_snapshot.bin"), bin)?;
        Ok(())
    }
}

/// `k` indices into a pool of `len`, without replacement when possible.
fn draw<R: Rng>(len: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if len >= k {
        rand::seq::index::sample(rng, len, k).into_vec()
    } else {
        (0..k).map(|_| rng.gen_range(0..len)).collect()
    }
}
