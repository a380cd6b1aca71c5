use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use replaycl_bench::{default_learner, filled_memory, random_batch};
use replaycl_core::nn::{backward, forward};
use replaycl_core::runner::seed_rng;
use replaycl_core::strategies::{
    compute_task_gradients, er_step, meta_update, metasgd_cl_step, BetaBank,
};

fn bench_forward(c: &mut Criterion) {
    let (arch, params) = default_learner();
    let batch = random_batch(&arch, 10, 1, 1);
    c.bench_function("forward_batch10", |b| {
        b.iter(|| forward(black_box(&params), &arch, black_box(&batch)).unwrap())
    });
}

fn bench_backward(c: &mut Criterion) {
    let (arch, params) = default_learner();
    let batch = random_batch(&arch, 10, 1, 2);
    c.bench_function("backward_batch10", |b| {
        b.iter(|| backward(black_box(&params), &arch, black_box(&batch)).unwrap())
    });
}

fn bench_er_step(c: &mut Criterion) {
    let (arch, params) = default_learner();
    let batch = random_batch(&arch, 10, 10, 3);
    let memory = filled_memory(&arch, 10, 3);
    c.bench_function("er_step_task10_hard_storage", |b| {
        let mut rng = seed_rng(3, "bench/replay");
        b.iter(|| {
            er_step(
                black_box(&params),
                &arch,
                &batch,
                &memory,
                10,
                0.01,
                &mut rng,
            )
            .unwrap()
        })
    });
}

fn bench_metasgd_step(c: &mut Criterion) {
    let (arch, params) = default_learner();
    let current = random_batch(&arch, 10, 10, 4);
    let memory = filled_memory(&arch, 10, 4);
    let mut rng = seed_rng(4, "bench/replay");
    let combined = current.concat(&memory.sample_replay(10, &mut rng).unwrap());
    let mut bank = BetaBank::new(params.len(), 0.02, 0.01).unwrap();
    for task in 1..10 {
        bank.freeze_task(task).unwrap();
    }
    c.bench_function("metasgd_cl_step_task10", |b| {
        b.iter(|| {
            let grads = compute_task_gradients(black_box(&params), &arch, &combined).unwrap();
            let next = metasgd_cl_step(&params, &bank, &grads).unwrap();
            let mut bank = bank.clone();
            meta_update(&mut bank, &next, &arch, &current, &grads).unwrap();
            next
        })
    });
}

fn bench_replay_sampling(c: &mut Criterion) {
    let (arch, _) = default_learner();
    let memory = filled_memory(&arch, 10, 5);
    c.bench_function("sample_replay_task10", |b| {
        let mut rng = seed_rng(5, "bench/replay");
        b.iter(|| memory.sample_replay(10, &mut rng).unwrap())
    });
}

criterion_group!(
    benches,
    bench_forward,
    bench_backward,
    bench_er_step,
    bench_metasgd_step,
    bench_replay_sampling
);
criterion_main!(benches);
