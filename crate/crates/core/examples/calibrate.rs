//! Quick look at the engine's behavior on the synthetic digit set:
//! single-task learnability plus the three-strategy benchmark protocol.
//!
//! Run with `cargo run -p replaycl-core --example calibrate`.

use replaycl_core::continuum::SourceData;
use replaycl_core::runner::{run_experiment_with_sources, seed_rng, ExperimentConfig};
use replaycl_core::strategies::StrategyKind;
use replaycl_core::synth::render_set;

fn sources(train_n: usize, test_n: usize) -> (SourceData, SourceData) {
    let mut train_rng = seed_rng(7, "synth/train");
    let (train_images, train_labels) = render_set(train_n, &mut train_rng);
    let mut test_rng = seed_rng(7, "synth/test");
    let (test_images, test_labels) = render_set(test_n, &mut test_rng);
    let to_source = |images: Vec<Vec<u8>>, labels: Vec<u8>| {
        let inputs: Vec<Vec<f64>> = images
            .iter()
            .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect();
        let mut s =
            SourceData::new(inputs, labels.iter().map(|&l| l as usize).collect()).unwrap();
        s.n_classes = 10;
        s
    };
    (
        to_source(train_images, train_labels),
        to_source(test_images, test_labels),
    )
}

fn main() {
    let t0 = std::time::Instant::now();
    let (train, test) = sources(12_000, 2_000);
    println!("data generated in {:.1?}", t0.elapsed());

    // Single-task learnability: how far does plain SGD get in 100 batches?
    let mut single = ExperimentConfig::default();
    single.strategy.kind = StrategyKind::Singular;
    single.n_tasks = 1;
    let record = run_experiment_with_sources(&single, 1, &train, &test).unwrap();
    println!(
        "single task: accuracy {:.2}% after {} updates ({:.1?})",
        record.acc().unwrap() * 100.0,
        record.updates,
        record.wall_time
    );

    // Full protocol, three strategies, three seeds.
    for kind in StrategyKind::ALL {
        for seed in [1u64, 2, 3] {
            let mut config = ExperimentConfig::default();
            config.strategy.kind = kind;
            let t = std::time::Instant::now();
            let record = run_experiment_with_sources(&config, seed, &train, &test).unwrap();
            println!(
                "{:<10} seed {}: FA1 {:6.2}%  ACC {:6.2}%  ({} updates, {:.1?})",
                kind.to_string(),
                seed,
                record.fa1().unwrap() * 100.0,
                record.acc().unwrap() * 100.0,
                record.updates,
                t.elapsed()
            );
        }
    }
    println!("total {:.1?}", t0.elapsed());
}
