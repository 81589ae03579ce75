use groove::config::Dataset;
use groove::eval::{barycentric_foscttm, trace_metric};
use groove::model::{train_ps_baseline, TrainConfig};
use groove::numerics::matrix::Matrix;
use groove::numerics::rng::RngStream;
use groove::ot::{align, AlignSpec, AlignerKind};
use groove::sim::{simulate, SimConfig};
use groove::split::{make_splits, SplitMode};

fn matching(z1: &Matrix, z2: &Matrix, labels: &[usize], kind: AlignerKind) -> (f64, f64) {
    let spec = AlignSpec::new(kind);
    let plan = align(&spec, z1, z2, Some(labels), Some(labels)).unwrap();
    (
        trace_metric(&plan.coupling).unwrap(),
        barycentric_foscttm(&plan.coupling, z1, z2).unwrap(),
    )
}

fn main() {
    for seed in [0u64, 1] {
        let sim_config = SimConfig { seed, ..SimConfig::default() };
        let sim = simulate(&sim_config).unwrap();
        let dataset = Dataset::from_simulated(&sim);
        let pair = dataset.pair_x_to_y.clone().unwrap();
        let split_seed = RngStream::new(seed).derive(0xF01D).seed();
        let plan = make_splits(&dataset.labels_x, SplitMode::Holdout8020, split_seed).unwrap();
        let fold = &plan.folds[0];
        let ty_test: Vec<usize> = fold.test.iter().map(|&i| pair[i]).collect();
        let labels_test: Vec<usize> = fold.test.iter().map(|&i| dataset.labels_x[i]).collect();

        // Oracle ceiling: the true (noisy pre-projection) latents of the
        // test cells. Recover block-order latents for test rows.
        let vx_rows: Vec<usize> = fold.test.iter().map(|&r| sim.truth.perm_x[r]).collect();
        let z_true_x = sim.truth.v_x.select_rows(&vx_rows);
        let z_true_y = sim.truth.v_y.select_rows(&vx_rows); // same cells
        for kind in [AlignerKind::LabeledEot, AlignerKind::LabeledCoot] {
            let (t, f) = matching(&z_true_x, &z_true_y, &labels_test, kind);
            println!("seed {seed} TRUE-LATENTS {kind:?}: trace {t:.3} fosc {f:.3}");
        }

        // PS baseline at near-default scale.
        let tc = TrainConfig { iterations: 800, batch_size: 128, ..TrainConfig::default() };
        let lx: Vec<usize> = fold.train.iter().map(|&i| dataset.labels_x[i]).collect();
        let ty_train: Vec<usize> = fold.train.iter().map(|&i| pair[i]).collect();
        let (_, _, clf_x, clf_y) = train_ps_baseline(
            &dataset.x.select_rows(&fold.train),
            &dataset.y.select_rows(&ty_train),
            &lx,
            &lx,
            &tc,
        )
        .unwrap();
        let z1 = clf_x.logits(&dataset.x.select_rows(&fold.test)).unwrap();
        let z2 = clf_y.logits(&dataset.y.select_rows(&ty_test)).unwrap();
        for kind in [AlignerKind::LabeledEot, AlignerKind::LabeledCoot] {
            let (t, f) = matching(&z1, &z2, &labels_test, kind);
            println!("seed {seed} PS {kind:?}: trace {t:.3} fosc {f:.3}");
        }
    }
}
