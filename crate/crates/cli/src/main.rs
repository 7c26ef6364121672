use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::json;

use rssc::asymptotics::{eta_moment, fixed_point, rho_star, zero_penalty_alpha};
use rssc::experiment::{cluster_graph, with_workers, run_experiment, run_pipeline, write_outputs, ClusterConfig, ExperimentConfig};
use rssc::graph::{ssc_graph, SpectralOptions};
use rssc::io::{load_labels, load_matrix, save_labels, save_matrix, MatrixFormat};
use rssc::metrics::{clustering_error, discoveries, subspace_detection_property, FprNormalization, GroundTruth};
use rssc::model::{generate, DimRule, ModelConfig};
use rssc::regress::{dantzig_lambda_heuristic, default_alpha0, regress_all, CoefficientMatrix, Method, SolverOptions};
use rssc::SscError;

#[derive(Parser)]
#[command(name = "rssc", version, about = "Robust sparse subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from the union-of-subspaces model.
    Generate(GenerateArgs),
    /// Regress every column on the others and write the coefficient matrix.
    Regress(RegressArgs),
    /// Spectral clustering of a coefficient matrix.
    Cluster(ClusterArgs),
    /// Discovery counts and clustering error against ground truth.
    Evaluate(EvaluateArgs),
    /// Run an experiment sweep and write results.csv and roc.csv.
    Roc(RocArgs),
    /// Constants and fixed points of the asymptotic LASSO analysis.
    Asymptotics {
        #[command(subcommand)]
        which: AsymptoticsCommand,
    },
    /// Regression, clustering and denoising in one pass.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum AsymptoticsCommand {
    /// Crossing point (α*, δ*) and the minimal density ρ* = 1/δ*.
    RhoStar,
    /// Solution of the fixed-point equations for given (δ, σ, λ).
    FixedPoint {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// E[η(Z; α)²] for a standard normal Z.
    EtaMoment {
        #[arg(long)]
        alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Bin => "bin",
        }
    }

    fn matrix_format(self) -> MatrixFormat {
        match self {
            Format::Csv => MatrixFormat::Csv,
            Format::Bin => MatrixFormat::Binary,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Model configuration (JSON), or an experiment configuration whose
    /// `model` section is used.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Lasso,
    TwoStep,
    Dantzig,
    L1Equality,
}

#[derive(Args)]
struct MethodArgs {
    /// Regression method; defaults to two-step when --sigma is positive and
    /// to l1-equality otherwise.
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl MethodArgs {
    fn method(&self, ambient_dim: usize) -> Result<Method, Failure> {
        let sigma = self.sigma.unwrap_or(0.0);
        let name = self.method.unwrap_or(if sigma > 0.0 { MethodName::TwoStep } else { MethodName::L1Equality });
        Ok(match name {
            MethodName::Lasso => Method::Lasso {
                lambda: self.lambda.ok_or_else(|| Failure::usage("--method lasso needs --lambda"))?,
            },
            MethodName::TwoStep => {
                if sigma.is_nan() || sigma <= 0.0 {
                    return Err(Failure::usage("--method two-step needs a positive --sigma"));
                }
                Method::TwoStep { sigma, alpha0: self.alpha0.unwrap_or_else(|| default_alpha0(sigma)) }
            }
            MethodName::Dantzig => Method::Dantzig {
                sigma,
                lambda: self.lambda.unwrap_or_else(|| dantzig_lambda_heuristic(ambient_dim, sigma)),
            },
            MethodName::L1Equality => Method::L1Equality,
        })
    }
}

#[derive(Args)]
struct RegressArgs {
    /// Data matrix file, or a directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ClusterArgs {
    /// Coefficient matrix written by `regress`.
    #[arg(long)]
    coefficients: PathBuf,
    /// Number of clusters; the eigengap estimate is used when omitted.
    #[arg(long)]
    num_clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Coefficient matrix; enables discovery statistics.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Ground-truth labels.
    #[arg(long)]
    labels: PathBuf,
    /// Predicted labels; enables the clustering error.
    #[arg(long)]
    predicted: Option<PathBuf>,
    /// Model configuration giving subspace dimensions for TPR/FPR.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = rssc::metrics::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Normalize FPR by N − N(i) instead of n − d(i).
    #[arg(long)]
    point_complement: bool,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    svg: bool,
    /// Record wall-clock time per grid point (outputs stop being byte-identical).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Data matrix file, or a directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth labels; read from the data directory when present.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    num_clusters: Option<usize>,
    /// Fixed PCA dimension for denoising.
    #[arg(long, conflicts_with = "pca_energy")]
    pca_dim: Option<usize>,
    /// Energy fraction for choosing the PCA dimension (default 0.9).
    #[arg(long)]
    pca_energy: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

/// A failed command with its exit status.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn usage(message: &str) -> Self {
        Self { code: 2, kind: "usage".into(), message: message.into() }
    }
}

impl From<SscError> for Failure {
    fn from(e: SscError) -> Self {
        Self { code: 1, kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        SscError::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        SscError::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn ensure_writable(path: &Path, force: bool) -> CmdResult {
    if path.exists() && !force {
        return Err(SscError::WouldOverwrite(path.display().to_string()).into());
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) -> CmdResult {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Data matrix and optional labels from a file or a `generate` directory.
fn read_data(path: &Path) -> Result<(DMatrix<f64>, Option<Vec<usize>>), Failure> {
    if path.is_dir() {
        let y = ["Y.bin", "Y.csv"]
            .iter()
            .map(|f| path.join(f))
            .find(|p| p.exists())
            .ok_or_else(|| SscError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("no Y.csv or Y.bin in {}", path.display()))))?;
        let labels_path = path.join("labels.txt");
        let labels = if labels_path.exists() { Some(load_labels(&labels_path)?) } else { None };
        Ok((load_matrix(&y)?, labels))
    } else {
        Ok((load_matrix(path)?, None))
    }
}

fn read_model_config(path: &Path) -> Result<ModelConfig, Failure> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("model").is_some() {
        let exp: ExperimentConfig = serde_json::from_value(value)?;
        Ok(exp.model_config())
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    let mut cfg = read_model_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let g = generate(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let y_path = a.out.join(format!("Y.{}", a.format.ext()));
    ensure_writable(&y_path, a.force)?;
    save_matrix(&y_path, &g.data.y, a.format.matrix_format())?;
    if let Some(x) = &g.data.clean {
        save_matrix(&a.out.join(format!("X.{}", a.format.ext())), x, a.format.matrix_format())?;
    }
    if let Some(l) = &g.data.labels {
        save_labels(&a.out.join("labels.txt"), l)?;
    }
    fs::write(a.out.join("model.json"), serde_json::to_string_pretty(&cfg)?)?;
    print_json(&json!({ "ambient_dim": cfg.ambient_dim, "points": g.data.y.ncols(), "subspaces": cfg.subspaces.len(), "seed": cfg.seed }))
}

fn cmd_regress(a: RegressArgs) -> CmdResult {
    let (y, _) = read_data(&a.data)?;
    let method = a.method.method(y.nrows())?;
    let out = &a.out;
    let path = if out.extension().is_some() { out.clone() } else { out.join("B.csv") };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    ensure_writable(&path, a.force)?;
    let report = regress_all(&y, &method, None, &SolverOptions::default(), a.method.workers)?;
    for e in &report.errors {
        log::warn!("{e}");
    }
    save_matrix(&path, &report.coefficients.to_dense(), MatrixFormat::from_path(&path))?;
    let failed: Vec<String> = report.errors.iter().map(|e| e.to_string()).collect();
    print_json(&json!({ "columns": y.ncols(), "failed": failed, "output": path.display().to_string() }))
}

fn cmd_cluster(a: ClusterArgs) -> CmdResult {
    let b = CoefficientMatrix::from_dense(&load_matrix(&a.coefficients)?)?;
    fs::create_dir_all(&a.out)?;
    let labels_path = a.out.join("labels.txt");
    ensure_writable(&labels_path, a.force)?;
    let opts = SpectralOptions { seed: a.seed, ..Default::default() };
    let graph = ssc_graph(&b);
    let (l_hat, labels) = with_workers(a.workers, || cluster_graph(&graph, a.num_clusters, &opts))??;
    save_labels(&labels_path, &labels)?;
    print_json(&json!({ "l_hat": l_hat, "num_clusters": a.num_clusters.unwrap_or(l_hat) }))
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let truth = load_labels(&a.labels)?;
    let mut report = serde_json::Map::new();
    if let Some(path) = &a.coefficients {
        let b = CoefficientMatrix::from_dense(&load_matrix(path)?)?;
        report.insert("subspace_detection_property".into(), json!(subspace_detection_property(&b, &truth, a.threshold)?));
        if let Some(model) = &a.model {
            let cfg = read_model_config(model)?;
            let gt = GroundTruth::new(truth.clone(), cfg.dims(), cfg.ambient_dim)?;
            let norm = if a.point_complement { FprNormalization::PointComplement } else { FprNormalization::AmbientComplement };
            let d = discoveries(&b, &gt, None, a.threshold, norm)?;
            report.insert("mean_tpr".into(), json!(d.mean_tpr));
            report.insert("mean_fpr".into(), json!(d.mean_fpr));
            report.insert("false_discoveries".into(), json!(d.total_false));
        }
    }
    if let Some(path) = &a.predicted {
        let pred = load_labels(path)?;
        let e = clustering_error(&pred, &truth)?;
        report.insert("clustering_error".into(), json!(e.error_percent));
        report.insert("misclassified".into(), json!(e.misclassified));
    }
    print_json(&serde_json::Value::Object(report))
}

fn cmd_roc(a: RocArgs) -> CmdResult {
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(&a.config)?)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.timing |= a.timing;
    let table = run_experiment(&cfg)?;
    write_outputs(&table, &a.out, a.force, a.svg)?;
    print!("{}", table.results_csv());
    Ok(())
}

fn cmd_asymptotics(which: AsymptoticsCommand) -> CmdResult {
    match which {
        AsymptoticsCommand::RhoStar => {
            let r = rho_star();
            println!("alpha*={:.4} delta*={:.5} rho*={:.4}", r.alpha, r.delta, r.rho);
        }
        AsymptoticsCommand::FixedPoint { delta, sigma, lambda } => {
            let s = fixed_point(delta, sigma, lambda)?;
            print_json(&json!({
                "alpha": s.alpha,
                "tau_star": s.tau_star,
                "normalized_norm_sq": s.normalized_norm_sq(),
                "zero_penalty_alpha": zero_penalty_alpha(delta),
            }))?;
        }
        AsymptoticsCommand::EtaMoment { alpha } => println!("{}", eta_moment(alpha)),
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> CmdResult {
    let (y, dir_labels) = read_data(&a.data)?;
    let truth = match &a.labels {
        Some(p) => Some(load_labels(p)?),
        None => dir_labels,
    };
    let method = a.method.method(y.nrows())?;
    let dim_rule = match (a.pca_dim, a.pca_energy) {
        (Some(d), _) => DimRule::Fixed(d),
        (None, Some(e)) => DimRule::Energy(e),
        (None, None) => DimRule::Energy(0.9),
    };
    fs::create_dir_all(&a.out)?;
    let labels_path = a.out.join("labels.txt");
    ensure_writable(&labels_path, a.force)?;
    let cluster = ClusterConfig {
        num_clusters: a.num_clusters,
        spectral: SpectralOptions { seed: a.seed, ..Default::default() },
        dim_rule,
    };
    let out = run_pipeline(&y, &method, &SolverOptions::default(), &cluster, a.method.workers)?;
    save_labels(&labels_path, &out.result.labels)?;
    save_matrix(&a.out.join("Xhat.csv"), &out.result.denoised, MatrixFormat::Csv)?;
    let mut summary = json!({
        "l_hat": out.l_hat,
        "num_clusters": out.result.num_clusters,
        "subspace_dims": out.result.subspaces.iter().map(|s| s.dim()).collect::<Vec<_>>(),
        "failed_columns": out.failed_columns,
        "warnings": out.result.warnings,
    });
    if let Some(t) = &truth {
        let e = clustering_error(&out.result.labels, t)?;
        summary["clustering_error"] = json!(e.error_percent);
        summary["subspace_detection_property"] =
            json!(subspace_detection_property(&out.coefficients, t, rssc::metrics::DEFAULT_THRESHOLD)?);
    }
    fs::write(a.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    print_json(&summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Roc(a) => cmd_roc(a),
        Command::Asymptotics { which } => cmd_asymptotics(which),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = json!({ "error": f.kind, "message": f.message });
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
