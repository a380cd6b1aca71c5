//! Probes for the remaining benchmark behaviors: ring-buffer sizes, noise
//! injection, the learning-rate magnitude trend, and the ablation study.

use replaycl_core::continuum::SourceData;
use replaycl_core::memory::MemoryPolicy;
use replaycl_core::nn::{MlpArchitecture, ParamLayout};
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

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let t0 = std::time::Instant::now();
    let (train, test) = sources(12_000, 2_000);

    // Ring buffer sizes (criterion: ER monotone non-increasing; meta >= er at 100).
    for kind in [StrategyKind::Er, StrategyKind::MetaSgdCl] {
        for units in [1000usize, 250, 100] {
            let mut accs = Vec::new();
            let mut fa1s = Vec::new();
            for seed in [1u64, 2, 3] {
                let mut config = ExperimentConfig::default();
                config.strategy.kind = kind;
                config.memory.policy = MemoryPolicy::RingBuffer;
                config.memory.total_units = units;
                let r = run_experiment_with_sources(&config, seed, &train, &test).unwrap();
                accs.push(r.acc().unwrap() * 100.0);
                fa1s.push(r.fa1().unwrap() * 100.0);
            }
            println!(
                "ring {:<10} units {:>4}: FA1 median {:6.2}  ACC median {:6.2}",
                kind.to_string(),
                units,
                median(fa1s),
                median(accs)
            );
        }
    }
    println!("-- after ring sweep {:.0?}", t0.elapsed());

    // Noise 10% / 50% with ring buffer 250.
    for kind in [StrategyKind::Er, StrategyKind::MetaSgdCl] {
        for fraction in [0.1f64, 0.5] {
            let mut accs = Vec::new();
            for seed in [1u64, 2, 3] {
                let mut config = ExperimentConfig::default();
                config.strategy.kind = kind;
                config.memory.policy = MemoryPolicy::RingBuffer;
                config.memory.total_units = 250;
                config.noise.fraction = fraction;
                let r = run_experiment_with_sources(&config, seed, &train, &test).unwrap();
                accs.push(r.acc().unwrap() * 100.0);
            }
            println!(
                "noise {:<10} {:.0}%: ACC median {:6.2}",
                kind.to_string(),
                fraction * 100.0,
                median(accs)
            );
        }
    }
    println!("-- after noise {:.0?}", t0.elapsed());

    // Beta magnitude trend at kappa = 0.1 (hard storage).
    {
        let mut config = ExperimentConfig::default();
        config.strategy.kappa = 0.1;
        let r = run_experiment_with_sources(&config, 1, &train, &test).unwrap();
        let arch = MlpArchitecture::default();
        let layout = ParamLayout::from_arch(&arch);
        for task in [2usize, 4, 6, 8, 10] {
            let below = r.beta_stats.aggregate_frac_below(task, &layout).unwrap();
            let layer_rows: Vec<String> = r
                .beta_stats
                .entries
                .iter()
                .filter(|e| e.task_id == task)
                .map(|e| format!("L{} <{:.2}% >{:.2}%", e.layer, e.frac_below * 100.0, e.frac_above * 100.0))
                .collect();
            println!(
                "kappa 0.1 task {:>2}: frac(beta<0.02) {:.2}%   [{}]",
                task,
                below * 100.0,
                layer_rows.join(", ")
            );
        }
        println!("kappa 0.1: FA1 {:.2} ACC {:.2}", r.fa1().unwrap() * 100.0, r.acc().unwrap() * 100.0);
    }
    println!("-- after beta trend {:.0?}", t0.elapsed());

    // Ablation: replace old beta with constants.
    for constant in [0.0f64, 0.01, 0.1] {
        let mut fa1s = Vec::new();
        let mut accs = Vec::new();
        for seed in [1u64, 2, 3] {
            let mut config = ExperimentConfig::default();
            config.strategy.ablation = Some(constant);
            let r = run_experiment_with_sources(&config, seed, &train, &test).unwrap();
            fa1s.push(r.fa1().unwrap() * 100.0);
            accs.push(r.acc().unwrap() * 100.0);
        }
        println!(
            "ablate {:>4}: FA1 median {:6.2}  ACC median {:6.2}",
            constant,
            median(fa1s),
            median(accs)
        );
    }
    println!("total {:.0?}", t0.elapsed());
}
