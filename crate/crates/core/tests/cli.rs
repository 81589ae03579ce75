//! End-to-end CLI pipeline: simulate -> train -> align -> impute ->
//! evaluate, exercising every file format the binary emits.

use std::path::Path;
use std::process::Command;

fn groove() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_groove"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn groove");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_sim_config(path: &Path) {
    std::fs::write(
        path,
        r#"
d_s = 3
d_u = 0
n_perturbations = 3
cells_per_condition = 30
p_x = 25
p_y = 18
scale = 0.1
snr = 0.2
seed = 11
"#,
    )
    .unwrap();
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let sim_config = root.join("sim.toml");
    write_sim_config(&sim_config);

    // Simulate.
    let data_dir = root.join("data");
    run(groove()
        .args(["simulate", "--config"])
        .arg(&sim_config)
        .arg("--out")
        .arg(&data_dir));
    for file in [
        "X.grvm",
        "Y.grvm",
        "labels_x.txt",
        "labels_y.txt",
        "truth.grvm",
        "manifest.toml",
    ] {
        assert!(data_dir.join(file).exists(), "missing {file}");
    }
    let x = groove::numerics::grvm::read_matrix(&data_dir.join("X.grvm")).unwrap();
    assert_eq!(x.shape(), (120, 25));

    // Simulate again with the same seed: byte-identical outputs.
    let data_dir2 = root.join("data2");
    run(groove()
        .args(["simulate", "--config"])
        .arg(&sim_config)
        .arg("--out")
        .arg(&data_dir2));
    assert_eq!(
        std::fs::read(data_dir.join("X.grvm")).unwrap(),
        std::fs::read(data_dir2.join("X.grvm")).unwrap()
    );

    // Train a tiny model; flags override the default config.
    let run_dir = root.join("run");
    run(groove()
        .args(["train", "--data"])
        .arg(&data_dir)
        .args([
            "--latent-dim",
            "8",
            "--hidden1",
            "32",
            "--hidden2",
            "16",
            "--batch-size",
            "40",
            "--iterations",
            "40",
            "--seed",
            "5",
        ])
        .arg("--out")
        .arg(&run_dir));
    assert!(run_dir.join("model/manifest.toml").exists());
    assert!(run_dir.join("loss_history.txt").exists());
    let z1 = groove::numerics::grvm::read_matrix(&run_dir.join("Z1.grvm")).unwrap();
    assert_eq!(z1.shape(), (120, 8));
    let history = std::fs::read_to_string(run_dir.join("loss_history.txt")).unwrap();
    assert_eq!(history.lines().count(), 41); // header + one line per iteration

    // Align the embeddings with labels.
    let align_dir = root.join("aligned");
    run(groove()
        .args(["align", "--za"])
        .arg(run_dir.join("Z1.grvm"))
        .arg("--zb")
        .arg(run_dir.join("Z2.grvm"))
        .arg("--labels-a")
        .arg(data_dir.join("labels_x.txt"))
        .arg("--labels-b")
        .arg(data_dir.join("labels_y.txt"))
        .args(["--aligner", "labeled_eot"])
        .arg("--out")
        .arg(&align_dir));
    let plan = groove::numerics::grvm::read_matrix(&align_dir.join("plan.grvm")).unwrap();
    assert_eq!(plan.shape(), (120, 120));
    let convergence = std::fs::read_to_string(align_dir.join("convergence.toml")).unwrap();
    assert!(convergence.contains("aligner = \"labeled_eot\""));

    // Impute modality X from modality Y through the plan.
    let impute_dir = root.join("imputed");
    run(groove()
        .args(["impute", "--plan"])
        .arg(align_dir.join("plan.grvm"))
        .arg("--source")
        .arg(data_dir.join("Y.grvm"))
        .arg("--target")
        .arg(data_dir.join("X.grvm"))
        .args(["--iterations", "50"])
        .arg("--out")
        .arg(&impute_dir));
    let imputed = groove::numerics::grvm::read_matrix(&impute_dir.join("imputed.grvm")).unwrap();
    assert_eq!(imputed.shape(), (120, 25));

    // Evaluate both metric families.
    let metrics_csv = root.join("metrics.csv");
    let stdout = run(groove()
        .args(["evaluate", "--plan"])
        .arg(align_dir.join("plan.grvm"))
        .arg("--za")
        .arg(run_dir.join("Z1.grvm"))
        .arg("--zb")
        .arg(run_dir.join("Z2.grvm"))
        .arg("--true")
        .arg(data_dir.join("X.grvm"))
        .arg("--pred")
        .arg(impute_dir.join("imputed.grvm"))
        .arg("--out")
        .arg(&metrics_csv));
    assert!(stdout.contains("trace:"));
    let csv = std::fs::read_to_string(&metrics_csv).unwrap();
    assert!(csv.starts_with("metric,value\n"));
    for metric in ["trace", "foscttm", "mse", "wd", "cos_sim", "knn_recall", "knn_pr", "knn_roc"] {
        assert!(csv.contains(&format!("{metric},")), "missing {metric} in csv");
    }
}

#[test]
fn proportion_flags_build_standard_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim80");
    run(groove()
        .args([
            "simulate",
            "--proportion",
            "80",
            "--seed",
            "4",
            "--cells-per-condition",
            "5",
        ])
        .arg("--out")
        .arg(&out));
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("d_s = 8"));
    assert!(manifest.contains("d_u = 2"));
    assert!(manifest.contains("seed = 4"));
}

#[test]
fn unknown_aligner_fails_with_roster() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.grvm");
    groove::numerics::grvm::write_matrix(
        &z,
        &groove::Matrix::from_fn(4, 2, |i, j| (i + j) as f64),
    )
    .unwrap();
    let output = groove()
        .args(["align", "--za"])
        .arg(&z)
        .arg("--zb")
        .arg(&z)
        .args(["--aligner", "sinkhorn"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("labeled_coot"), "stderr: {stderr}");
}
