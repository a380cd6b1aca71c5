//! Benchmark fixtures shared by the criterion targets.

use rand::Rng;

use replaycl_core::memory::{EpisodicMemory, MemoryConfig, StoredSample};
use replaycl_core::nn::{init_params, MiniBatch, MlpArchitecture, ParamVector};
use replaycl_core::runner::seed_rng;

/// The benchmark learner: 784-100-100-10.
pub fn default_learner() -> (MlpArchitecture, ParamVector) {
    let arch = MlpArchitecture::default();
    let params = init_params(&arch, 99);
    (arch, params)
}

/// A batch of `n` random inputs in `[0, 1]` tagged with `task_id`.
pub fn random_batch(arch: &MlpArchitecture, n: usize, task_id: usize, seed: u64) -> MiniBatch {
    let mut rng = seed_rng(seed, "bench/batch");
    let mut batch = MiniBatch::with_capacity(arch.input_dim, n);
    for _ in 0..n {
        let x: Vec<f64> = (0..arch.input_dim).map(|_| rng.gen::<f64>()).collect();
        batch.push(&x, rng.gen_range(0..arch.output_dim), task_id);
    }
    batch
}

/// Hard-storage memory filled for tasks `1..current`.
pub fn filled_memory(arch: &MlpArchitecture, current_task: usize, seed: u64) -> EpisodicMemory {
    let config = MemoryConfig::default();
    let mut memory = EpisodicMemory::new(config, 10);
    let mut rng = seed_rng(seed, "bench/memory");
    for task in 1..current_task {
        for _ in 0..config.units_per_task {
            let input: Vec<f64> = (0..arch.input_dim).map(|_| rng.gen::<f64>()).collect();
            memory
                .insert(
                    task,
                    StoredSample {
                        input,
                        label: rng.gen_range(0..arch.output_dim),
                    },
                )
                .expect("insert in task order");
        }
    }
    memory
}
