use groove::config::Dataset;
use groove::eval::{barycentric_foscttm, trace_metric};
use groove::model::{train, Modality, TrainConfig};
use groove::numerics::rng::RngStream;
use groove::ot::{align, AlignSpec, AlignerKind};
use groove::sim::SimConfig;
use groove::split::{make_splits, SplitMode};

// Quality-vs-iterations curve: retrain from scratch at each checkpoint
// length (determinism makes prefixes identical, so this matches
// checkpointing) and print matching metrics for both labeled aligners.

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let checkpoints: Vec<usize> = if args.len() > 3 {
        args[3..].iter().filter_map(|s| s.parse().ok()).collect()
    } else {
        vec![1000, 2000, 3000, 4000]
    };

    let sim = SimConfig { seed, ..SimConfig::default() };
    let dataset = Dataset::from_simulated(&groove::sim::simulate(&sim).unwrap());
    let pair = dataset.pair_x_to_y.clone().unwrap();
    let split_seed = RngStream::new(seed).derive(0xF01D).seed();
    let plan = make_splits(&dataset.labels_x, SplitMode::Holdout8020, split_seed).unwrap();
    let fold = &plan.folds[0];
    let ty_train: Vec<usize> = fold.train.iter().map(|&i| pair[i]).collect();
    let ty_test: Vec<usize> = fold.test.iter().map(|&i| pair[i]).collect();
    let lx: Vec<usize> = fold.train.iter().map(|&i| dataset.labels_x[i]).collect();
    let labels_test: Vec<usize> = fold.test.iter().map(|&i| dataset.labels_x[i]).collect();
    let x_train = dataset.x.select_rows(&fold.train);
    let y_train = dataset.y.select_rows(&ty_train);
    let x_test = dataset.x.select_rows(&fold.test);
    let y_test = dataset.y.select_rows(&ty_test);

    for &iters in checkpoints.iter() {
        let tc = TrainConfig {
            iterations: iters,
            learning_rate: lr,
            seed: RngStream::new(seed).derive(7).seed(),
            ..TrainConfig::default()
        };
        let t = std::time::Instant::now();
        let result = train(&x_train, &y_train, &lx, &lx, &tc).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let z1 = result.model.encode_eval(&x_test, Modality::X).unwrap();
        let z2 = result.model.encode_eval(&y_test, Modality::Y).unwrap();
        for kind in [AlignerKind::LabeledCoot, AlignerKind::LabeledEot] {
            let spec = AlignSpec::new(kind);
            let p = align(&spec, &z1, &z2, Some(&labels_test), Some(&labels_test)).unwrap();
            let trace = trace_metric(&p.coupling).unwrap();
            let fosc = barycentric_foscttm(&p.coupling, &z1, &z2).unwrap();
            println!(
                "seed={seed} lr={lr} iters={iters} {}: trace {trace:.3} fosc {fosc:.3} ({secs:.0}s)",
                kind.name()
            );
        }
        let last = result.history.last().unwrap();
        println!(
            "  losses: step1 {:.4} gcl {:.4} recon {:.4} bt {:?}",
            last.step1, last.groupclip, last.reconstruction, last.backtranslation
        );
    }
}
