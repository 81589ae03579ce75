use std::time::Instant;

use groove::config::Dataset;
use groove::eval::{barycentric_foscttm, trace_metric};
use groove::model::{train, Modality, TrainConfig};
use groove::numerics::rng::RngStream;
use groove::ot::{align, AlignSpec, AlignerKind};
use groove::sim::SimConfig;
use groove::split::{make_splits, SplitMode};

fn run_seed(seed: u64, tc: &TrainConfig, aligner: AlignerKind) -> (f64, f64, f64) {
    let sim = SimConfig { seed, ..SimConfig::default() };
    let dataset = Dataset::from_simulated(&groove::sim::simulate(&sim).unwrap());
    let pair = dataset.pair_x_to_y.clone().unwrap();
    let split_seed = RngStream::new(seed).derive(0xF01D).seed();
    let plan = make_splits(&dataset.labels_x, SplitMode::Holdout8020, split_seed).unwrap();
    let fold = &plan.folds[0];
    let ty_train: Vec<usize> = fold.train.iter().map(|&i| pair[i]).collect();
    let ty_test: Vec<usize> = fold.test.iter().map(|&i| pair[i]).collect();
    let lx: Vec<usize> = fold.train.iter().map(|&i| dataset.labels_x[i]).collect();
    let mut tc = tc.clone();
    tc.seed = RngStream::new(seed).derive(7).seed();
    let t = Instant::now();
    let result = train(
        &dataset.x.select_rows(&fold.train),
        &dataset.y.select_rows(&ty_train),
        &lx,
        &lx,
        &tc,
    )
    .unwrap();
    let train_secs = t.elapsed().as_secs_f64();
    let z1 = result.model.encode_eval(&dataset.x.select_rows(&fold.test), Modality::X).unwrap();
    let z2 = result.model.encode_eval(&dataset.y.select_rows(&ty_test), Modality::Y).unwrap();
    let labels_test: Vec<usize> = fold.test.iter().map(|&i| dataset.labels_x[i]).collect();
    let spec = AlignSpec::new(aligner);
    let p = align(&spec, &z1, &z2, Some(&labels_test), Some(&labels_test)).unwrap();
    let trace = trace_metric(&p.coupling).unwrap();
    let fosc = barycentric_foscttm(&p.coupling, &z1, &z2).unwrap();
    (trace, fosc, train_secs)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map(String::as_str).unwrap_or("small");
    let configs: Vec<(&str, TrainConfig)> = match preset {
        "default" => vec![
            ("default-600", TrainConfig { iterations: 600, ..TrainConfig::default() }),
            ("default-1500", TrainConfig { iterations: 1500, ..TrainConfig::default() }),
        ],
        _ => vec![
            (
                "d32-h128-b100-300",
                TrainConfig {
                    latent_dim: 32,
                    hidden1: 128,
                    hidden2: 64,
                    batch_size: 100,
                    iterations: 300,
                    ..TrainConfig::default()
                },
            ),
            (
                "d32-h128-b100-600",
                TrainConfig {
                    latent_dim: 32,
                    hidden1: 128,
                    hidden2: 64,
                    batch_size: 100,
                    iterations: 600,
                    ..TrainConfig::default()
                },
            ),
            (
                "d64-h256-b128-600",
                TrainConfig {
                    latent_dim: 64,
                    hidden1: 256,
                    hidden2: 128,
                    batch_size: 128,
                    iterations: 600,
                    ..TrainConfig::default()
                },
            ),
        ],
    };
    for (name, tc) in configs {
        for seed in [0u64, 1, 2] {
            let (trace, fosc, secs) = run_seed(seed, &tc, AlignerKind::LabeledCoot);
            println!("{name} seed={seed}: trace {trace:.3}, foscttm {fosc:.3} ({secs:.0}s train)");
        }
    }
}
