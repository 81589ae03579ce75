//! Command-line surface tying the subsystems together.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use groove::bench::{run_benchmark, run_sweep, write_reports, BenchConfig, SweepConfig};
use groove::config::{load_toml, save_toml, Dataset};
use groove::eval::{
    barycentric_foscttm, impute, imputation_metrics, train_imputer, trace_metric, ImputerConfig,
    KNN_K,
};
use groove::model::io::save_model;
use groove::model::{train, Ablation, Kernel, Modality, TrainConfig};
use groove::numerics::grvm;
use groove::ot::{align, AlignSpec, AlignerKind};
use groove::sim::{make_setting, simulate, SimConfig};

#[derive(Parser)]
#[command(
    name = "groove",
    about = "Weakly-paired two-modality representation learning, OT alignment, imputation, and benchmarking",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a weakly-paired two-modality dataset.
    Simulate(SimulateArgs),
    /// Train a representation learner; writes the model, embeddings, and
    /// the loss history.
    Train(TrainArgs),
    /// Align two embedding files with an entropic OT solver.
    Align(AlignArgs),
    /// Train an imputer through a transport plan and impute a source
    /// matrix.
    Impute(ImputeArgs),
    /// Compute matching and/or imputation metrics.
    Evaluate(EvaluateArgs),
    /// Run the combinatorial learner x aligner benchmark grid.
    Benchmark(BenchmarkArgs),
    /// Sweep the contrastive temperature and reconstruction weight.
    Sweep(SweepArgs),
    /// Regenerate reports from a directory of completed benchmark cells.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config with SimConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shared-variation setting: 100, 80, or 50.
    #[arg(long)]
    proportion: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cells_per_condition: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (X.grvm, Y.grvm, labels_*.txt).
    #[arg(long)]
    data: PathBuf,
    /// TOML config with TrainConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// cosine | tdist
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// full | no_groupclip | autoencoder_only
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long)]
    hidden1: Option<usize>,
    #[arg(long)]
    hidden2: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    za: PathBuf,
    #[arg(long)]
    zb: PathBuf,
    #[arg(long)]
    labels_a: Option<PathBuf>,
    #[arg(long)]
    labels_b: Option<PathBuf>,
    /// TOML config with AlignSpec keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// eot | egwot | labeled_eot | labeled_egwot | labeled_coot
    #[arg(long)]
    aligner: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImputeArgs {
    /// Transport plan (target rows x source columns).
    #[arg(long)]
    plan: PathBuf,
    /// Source-modality matrix aligned with plan columns.
    #[arg(long)]
    source: PathBuf,
    /// Target-modality matrix aligned with plan rows.
    #[arg(long)]
    target: PathBuf,
    /// Matrix to impute after training; defaults to the training source.
    #[arg(long)]
    eval_source: Option<PathBuf>,
    /// TOML config with ImputerConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Plan for matching metrics (with --za/--zb).
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    za: Option<PathBuf>,
    #[arg(long)]
    zb: Option<PathBuf>,
    /// True matrix for imputation metrics (with --pred).
    #[arg(long = "true")]
    truth: Option<PathBuf>,
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long, default_value_t = KNN_K)]
    knn_k: usize,
    /// Output CSV (metric,value); printed to stdout as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Benchmark output directory containing cells/.
    #[arg(long)]
    results: PathBuf,
    /// Where to write the regenerated reports; defaults to --results.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_workers() {
    #[cfg(feature = "parallel")]
    if let Ok(value) = std::env::var("GROOVE_WORKERS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not set worker count: {e}");
                }
            }
            _ => log::warn!("ignoring invalid GROOVE_WORKERS value {value:?}"),
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_workers();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
        Command::Align(args) => cmd_align(args),
        Command::Impute(args) => cmd_impute(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config: SimConfig = match (&args.config, args.proportion) {
        (Some(path), _) => load_toml(path)?,
        (None, Some(p)) => make_setting(p, args.seed.unwrap_or(0))?,
        (None, None) => SimConfig::default(),
    };
    if let (Some(p), Some(_)) = (args.proportion, args.config.as_ref()) {
        let setting = make_setting(p, config.seed)?;
        config.d_s = setting.d_s;
        config.d_u = setting.d_u;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(cells) = args.cells_per_condition {
        config.cells_per_condition = cells;
    }
    let dataset = simulate(&config)?;
    let out = Dataset::from_simulated(&dataset);
    out.save(&args.out)?;
    save_toml(&args.out.join("manifest.toml"), &config, "simulation manifest")?;
    log::info!(
        "wrote {} cells x ({} + {}) features to {}",
        out.x.rows(),
        out.x.cols(),
        out.y.cols(),
        args.out.display()
    );
    Ok(())
}

fn parse_kernel(s: &str) -> Result<Kernel> {
    Ok(match s {
        "cosine" => Kernel::Cosine,
        "tdist" => Kernel::TDist,
        other => bail!("unknown kernel {other:?}; expected cosine or tdist"),
    })
}

fn parse_ablation(s: &str) -> Result<Ablation> {
    Ok(match s {
        "full" => Ablation::Full,
        "no_groupclip" => Ablation::NoGroupclip,
        "autoencoder_only" => Ablation::AutoencoderOnly,
        other => bail!("unknown ablation {other:?}; expected full, no_groupclip, or autoencoder_only"),
    })
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => load_toml(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.beta {
        config.beta = v;
    }
    if let Some(v) = args.tau {
        config.tau = v;
    }
    if let Some(v) = args.eta {
        config.eta = v;
    }
    if let Some(v) = &args.kernel {
        config.kernel = parse_kernel(v)?;
    }
    if let Some(v) = args.latent_dim {
        config.latent_dim = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.ablation {
        config.ablation = parse_ablation(v)?;
    }
    if let Some(v) = args.hidden1 {
        config.hidden1 = v;
    }
    if let Some(v) = args.hidden2 {
        config.hidden2 = v;
    }

    let dataset = Dataset::load(&args.data)?;
    let result = train(
        &dataset.x,
        &dataset.y,
        &dataset.labels_x,
        &dataset.labels_y,
        &config,
    )?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    save_model(
        &result.model,
        (config.hidden1, config.hidden2),
        &args.out.join("model"),
    )?;
    save_toml(&args.out.join("train_config.toml"), &config, "train manifest")?;

    let mut history = String::from("iteration,step1,groupclip,reconstruction,backtranslation\n");
    for h in &result.history {
        history.push_str(&format!(
            "{},{},{},{},{}\n",
            h.iteration,
            h.step1,
            h.groupclip,
            h.reconstruction,
            h.backtranslation.map_or(String::new(), |v| v.to_string())
        ));
    }
    std::fs::write(args.out.join("loss_history.txt"), history)?;

    let z1 = result.model.encode_eval(&dataset.x, Modality::X)?;
    let z2 = result.model.encode_eval(&dataset.y, Modality::Y)?;
    grvm::write_matrix(&args.out.join("Z1.grvm"), &z1)?;
    grvm::write_matrix(&args.out.join("Z2.grvm"), &z2)?;
    log::info!(
        "trained {} iterations; embeddings written to {}",
        config.iterations,
        args.out.display()
    );
    Ok(())
}

fn cmd_align(args: AlignArgs) -> Result<()> {
    let mut spec: AlignSpec = match &args.config {
        Some(path) => load_toml(path)?,
        None => AlignSpec::new(AlignerKind::Eot),
    };
    if let Some(kind) = &args.aligner {
        spec.kind = kind.parse()?;
    }
    if let Some(v) = args.epsilon {
        spec.epsilon = v;
    }
    if let Some(v) = args.max_iterations {
        spec.max_iterations = v;
    }
    if let Some(v) = args.tolerance {
        spec.tolerance = v;
    }
    let za = grvm::read_matrix(&args.za)?;
    let zb = grvm::read_matrix(&args.zb)?;
    let labels_a = args.labels_a.as_deref().map(grvm::read_labels).transpose()?;
    let labels_b = args.labels_b.as_deref().map(grvm::read_labels).transpose()?;
    let plan = align(&spec, &za, &zb, labels_a.as_deref(), labels_b.as_deref())?;
    std::fs::create_dir_all(&args.out)?;
    grvm::write_matrix(&args.out.join("plan.grvm"), &plan.coupling)?;

    #[derive(serde::Serialize)]
    struct Convergence {
        aligner: String,
        epsilon: f64,
        iterations: usize,
        converged: bool,
        residual: f64,
        marginal_violation: f64,
        total_mass: f64,
        objective: Option<f64>,
    }
    save_toml(
        &args.out.join("convergence.toml"),
        &Convergence {
            aligner: spec.kind.name().into(),
            epsilon: plan.epsilon,
            iterations: plan.iterations,
            converged: plan.converged,
            residual: plan.residual,
            marginal_violation: plan.marginal_violation(),
            total_mass: plan.total_mass(),
            objective: plan.objective,
        },
        "convergence manifest",
    )?;
    log::info!(
        "plan {}x{} written to {} (converged: {})",
        plan.coupling.rows(),
        plan.coupling.cols(),
        args.out.display(),
        plan.converged
    );
    Ok(())
}

fn cmd_impute(args: ImputeArgs) -> Result<()> {
    let mut config: ImputerConfig = match &args.config {
        Some(path) => load_toml(path)?,
        None => ImputerConfig::default(),
    };
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let plan = grvm::read_matrix(&args.plan)?;
    let source = grvm::read_matrix(&args.source)?;
    let target = grvm::read_matrix(&args.target)?;
    let model = train_imputer(&plan, &source, &target, &config)?;
    let eval_source = match &args.eval_source {
        Some(path) => grvm::read_matrix(path)?,
        None => source,
    };
    let imputed = impute(&model, &eval_source)?;
    std::fs::create_dir_all(&args.out)?;
    grvm::write_matrix(&args.out.join("imputed.grvm"), &imputed)?;
    save_toml(&args.out.join("imputer_config.toml"), &config, "imputer manifest")?;
    log::info!(
        "imputed {}x{} matrix written to {}",
        imputed.rows(),
        imputed.cols(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    if let Some(plan_path) = &args.plan {
        let (Some(za), Some(zb)) = (&args.za, &args.zb) else {
            bail!("matching metrics need --plan together with --za and --zb");
        };
        let plan = grvm::read_matrix(plan_path)?;
        let za = grvm::read_matrix(za)?;
        let zb = grvm::read_matrix(zb)?;
        rows.push(("trace".into(), trace_metric(&plan)?));
        rows.push(("foscttm".into(), barycentric_foscttm(&plan, &za, &zb)?));
    }
    if let Some(truth) = &args.truth {
        let Some(pred) = &args.pred else {
            bail!("imputation metrics need --true together with --pred");
        };
        let truth = grvm::read_matrix(truth)?;
        let pred = grvm::read_matrix(pred)?;
        let m = imputation_metrics(&truth, &pred, args.knn_k)?;
        for (name, value) in m.named() {
            rows.push((name.into(), value));
        }
    }
    if rows.is_empty() {
        bail!("nothing to evaluate: pass --plan/--za/--zb and/or --true/--pred");
    }
    let mut csv = String::from("metric,value\n");
    for (name, value) in &rows {
        println!("{name}: {value:.6}");
        csv.push_str(&format!("{name},{value}\n"));
    }
    if let Some(out) = &args.out {
        std::fs::write(out, csv)?;
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let config: BenchConfig = load_toml(&args.config)?;
    let outcome = run_benchmark(&config, &args.out)?;
    log::info!(
        "{} cells completed, {} failed; reports at {} and {}",
        outcome.cells.len(),
        outcome.failures.len(),
        outcome.report.csv.display(),
        outcome.report.summary.display()
    );
    println!("{}", std::fs::read_to_string(&outcome.report.summary)?);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config: SweepConfig = load_toml(&args.config)?;
    let rows = run_sweep(&config, &args.out)?;
    log::info!("{} sweep settings written to {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let cells_dir = args.results.join("cells");
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let entries = std::fs::read_dir(&cells_dir)
        .with_context(|| format!("reading {}", cells_dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    for path in paths {
        if path.to_string_lossy().ends_with(".error.toml") {
            failures.push(load_toml(&path)?);
        } else {
            cells.push(load_toml(&path)?);
        }
    }
    let out = args.out.unwrap_or_else(|| args.results.clone());
    std::fs::create_dir_all(&out)?;
    let report = write_reports(&out, &cells, &failures)?;
    println!("{}", std::fs::read_to_string(&report.summary)?);
    Ok(())
}

#[allow(dead_code)]
fn _path_helper(_: &Path) {}
