//! Experiment configuration, orchestration and result tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{
    denoise, estimate_num_clusters, knn_graph, normalized_laplacian, spectral_cluster_decomposed, ssc_graph,
    ClusteringResult, SimilarityGraph, SpectralOptions,
};
use crate::linalg::seeded_rng;
use crate::metrics::{clustering_error, discoveries, DiscoveryReport, FprNormalization, GroundTruth, DEFAULT_THRESHOLD};
use crate::model::{generate, normalize_columns, DimRule, ModelConfig};
use crate::regress::{
    dantzig_lambda_heuristic, default_alpha0, regress_columns, CoefficientMatrix, Dictionary, Method, SolverOptions,
};
use crate::{Result, SscError};

/// RNG stream of the column sampler; generation uses stream 0.
const SAMPLING_STREAM: u64 = 1;

/// k-means seed for grid point `g`, derived from the experiment seed.
fn kmeans_seed(seed: u64, base: u64, g: usize) -> u64 {
    (seed ^ base).wrapping_add((g as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Regression method with the base penalty that grid multipliers scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    /// LASSO with `λ = multiplier · lambda`, or `multiplier / √d` per column
    /// (`d` the true dimension of the column's subspace) when `lambda` is
    /// absent.
    Lasso {
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// Two-step procedure with `α₀ = multiplier · alpha0`. Defaults:
    /// `σ` from the model and `α₀ = max(0.25, 0.708σ)`.
    TwoStep {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default)]
        alpha0: Option<f64>,
    },
    /// Bias-corrected Dantzig selector with `λ = multiplier · lambda`,
    /// `lambda` defaulting to `√(2/n)·σ·√(1+σ²)`.
    Dantzig {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// Gaussian-weighted K-nearest-neighbour graph with temperature
    /// `multiplier · temperature`. Graph weights play the role of
    /// coefficients in the discovery counts.
    KnnBaseline { k: usize, temperature: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Number of clusters; the eigengap estimate is used when absent.
    pub num_clusters: Option<usize>,
    pub spectral: SpectralOptions,
    pub dim_rule: DimRule,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { num_clusters: None, spectral: SpectralOptions::default(), dim_rule: DimRule::Energy(0.9) }
    }
}

fn default_grid() -> Vec<f64> {
    vec![1.0]
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Identifier written in the `experiment` column.
    pub name: String,
    /// Data model. Its `seed` is replaced by the experiment seed.
    pub model: ModelConfig,
    pub method: MethodConfig,
    /// Multipliers applied to the method's base parameter.
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Columns sampled per subspace dimension for the discovery metrics;
    /// all columns when absent.
    #[serde(default)]
    pub columns_per_dim: Option<usize>,
    /// Spectral clustering of the full coefficient matrix at every grid point.
    #[serde(default)]
    pub cluster: Option<ClusterConfig>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub fpr_normalization: FprNormalization,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for column solves. Not part of the config hash.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Fill the `wall_ms` column. Timings differ between runs, so this is
    /// off by default to keep outputs byte-identical.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { seed: self.seed, ..self.model.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        if self.grid.is_empty() {
            return Err(SscError::InvalidConfig("grid must not be empty".into()));
        }
        if let Some(&g) = self.grid.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(SscError::InvalidConfig(format!("grid multiplier {g} must be positive")));
        }
        if !(self.threshold >= 0.0) {
            return Err(SscError::InvalidConfig(format!("threshold {} must be nonnegative", self.threshold)));
        }
        if let Some(m) = self.columns_per_dim {
            if m == 0 {
                return Err(SscError::InvalidConfig("columns_per_dim must be positive".into()));
            }
            for (d, available) in dimension_classes(&self.model) {
                if m > available.len() {
                    return Err(SscError::InvalidConfig(format!(
                        "{m} columns requested for dimension {d}, only {} available",
                        available.len()
                    )));
                }
            }
        }
        match &self.method {
            MethodConfig::KnnBaseline { k, temperature } => {
                if *k == 0 || *k >= self.model.num_points() {
                    return Err(SscError::InvalidConfig(format!("K = {k} out of range")));
                }
                if !(*temperature > 0.0) {
                    return Err(SscError::InvalidConfig("temperature must be positive".into()));
                }
            }
            MethodConfig::Lasso { lambda: Some(l) } | MethodConfig::Dantzig { lambda: Some(l), .. } if !(*l > 0.0) => {
                return Err(SscError::InvalidConfig(format!("penalty {l} must be positive")));
            }
            MethodConfig::TwoStep { sigma, alpha0 } => {
                let s = sigma.unwrap_or(self.model.noise_sigma);
                if !(s > 0.0) {
                    return Err(SscError::InvalidConfig("two-step procedure needs a positive noise level".into()));
                }
                if let Some(a) = alpha0 {
                    if !(*a > 0.0) {
                        return Err(SscError::InvalidConfig(format!("alpha0 {a} must be positive")));
                    }
                }
            }
            _ => {}
        }
        if let Some(c) = &self.cluster {
            if let Some(l) = c.num_clusters {
                if l == 0 || l > self.model.num_points() {
                    return Err(SscError::InvalidConfig(format!("cluster count {l} out of range")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the worker count.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { workers: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Column indices grouped by subspace dimension, dimensions ascending.
fn dimension_classes(model: &ModelConfig) -> Vec<(usize, Vec<usize>)> {
    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    let mut col = 0;
    for s in &model.subspaces {
        let entry = classes.entry(s.dim).or_default();
        for _ in 0..s.num_points() {
            entry.push(col);
            col += 1;
        }
    }
    classes.into_iter().collect()
}

/// Sorted sample of `per_dim` columns from each dimension class.
pub fn sample_columns(model: &ModelConfig, per_dim: Option<usize>, seed: u64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed, SAMPLING_STREAM);
    for (_, cols) in dimension_classes(model) {
        match per_dim {
            Some(m) => {
                let picked = sample(&mut rng, cols.len(), m.min(cols.len()));
                out.extend(picked.into_iter().map(|k| cols[k]));
            }
            None => out.extend(cols),
        }
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub lambda_multiplier: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub clustering_error: Option<f64>,
    pub l_hat: Option<usize>,
    pub wall_ms: Option<f64>,
    pub failed_columns: usize,
}

/// Discovery rates of one dimension class at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocRow {
    pub lambda_multiplier: f64,
    /// `None` aggregates all sampled columns.
    pub dimension: Option<usize>,
    pub fpr: f64,
    pub tpr: f64,
    pub columns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub roc: Vec<RocRow>,
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

pub const RESULTS_HEADER: &str = "experiment,lambda_multiplier,fpr,tpr,clustering_error,l_hat,wall_ms,failed_columns";
pub const ROC_HEADER: &str = "lambda_multiplier,dimension,fpr,tpr,columns";

impl ResultTable {
    fn provenance(&self) -> String {
        format!("# config_sha256={}\n# seed={}\n", self.config_hash, self.seed)
    }

    pub fn results_csv(&self) -> String {
        let mut out = self.provenance();
        out.push_str(RESULTS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.experiment,
                r.lambda_multiplier,
                r.fpr,
                r.tpr,
                fmt_opt(&r.clustering_error),
                fmt_opt(&r.l_hat),
                fmt_opt(&r.wall_ms),
                r.failed_columns
            );
        }
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = self.provenance();
        out.push_str(ROC_HEADER);
        out.push('\n');
        for r in &self.roc {
            let dim = r.dimension.map_or("all".to_string(), |d| d.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", r.lambda_multiplier, dim, r.fpr, r.tpr, r.columns);
        }
        out
    }
}

/// Reads the `config_sha256` provenance line of a CSV written by this module.
pub fn read_config_hash(text: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_sha256=").map(str::to_string))
}

type ColumnSolver = Box<dyn Fn(&Dictionary, usize) -> Result<crate::regress::SparseCoefficients> + Sync>;

fn column_solver(
    cfg: &ExperimentConfig,
    multiplier: f64,
    dims_of_column: &[usize],
) -> ColumnSolver {
    let opts = cfg.solver;
    let sigma_model = cfg.model.noise_sigma;
    let n = cfg.model.ambient_dim;
    match cfg.method.clone() {
        MethodConfig::Lasso { lambda } => {
            let dims = dims_of_column.to_vec();
            Box::new(move |d: &Dictionary, i: usize| {
                let lam = multiplier * lambda.unwrap_or(1.0 / (dims[i] as f64).sqrt());
                d.lasso_column(i, lam, &opts)
            })
        }
        MethodConfig::TwoStep { sigma, alpha0 } => {
            let s = sigma.unwrap_or(sigma_model);
            let a = multiplier * alpha0.unwrap_or_else(|| default_alpha0(s));
            let method = Method::TwoStep { sigma: s, alpha0: a };
            Box::new(move |d: &Dictionary, i: usize| method.solve_column(d, i, &opts))
        }
        MethodConfig::Dantzig { sigma, lambda } => {
            let s = sigma.unwrap_or(sigma_model);
            let lam = multiplier * lambda.unwrap_or_else(|| dantzig_lambda_heuristic(n, s));
            let method = Method::Dantzig { sigma: s, lambda: lam };
            Box::new(move |d: &Dictionary, i: usize| method.solve_column(d, i, &opts))
        }
        MethodConfig::KnnBaseline { .. } => unreachable!("graph baseline has no column solver"),
    }
}

fn roc_rows(report: &DiscoveryReport, multiplier: f64, dims_of_column: &[usize]) -> Vec<RocRow> {
    let mut rows = vec![RocRow {
        lambda_multiplier: multiplier,
        dimension: None,
        fpr: report.mean_fpr,
        tpr: report.mean_tpr,
        columns: report.columns.len(),
    }];
    let mut dims: Vec<usize> = report.columns.iter().map(|c| dims_of_column[c.column]).collect();
    dims.sort_unstable();
    dims.dedup();
    for d in dims {
        let cols: Vec<_> = report.columns.iter().filter(|c| dims_of_column[c.column] == d).collect();
        let m = cols.len() as f64;
        rows.push(RocRow {
            lambda_multiplier: multiplier,
            dimension: Some(d),
            fpr: cols.iter().map(|c| c.fpr).sum::<f64>() / m,
            tpr: cols.iter().map(|c| c.tpr).sum::<f64>() / m,
            columns: cols.len(),
        });
    }
    rows
}

fn graph_to_coefficients(g: &SimilarityGraph) -> Result<CoefficientMatrix> {
    CoefficientMatrix::from_dense(g.weights())
}

/// Runs `f` on a dedicated pool of `workers` threads, or the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| SscError::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Spectral clustering of a similarity graph: eigengap estimate `L̂` plus
/// labels for `num_clusters` (or `L̂` when absent) groups.
pub fn cluster_graph(graph: &SimilarityGraph, num_clusters: Option<usize>, opts: &SpectralOptions) -> Result<(usize, Vec<usize>)> {
    let spec = normalized_laplacian(graph);
    let l_hat = estimate_num_clusters(&spec);
    let labels = spectral_cluster_decomposed(&spec, num_clusters.unwrap_or(l_hat), opts)?;
    Ok((l_hat, labels))
}

/// Run every grid point of an experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let model = cfg.model_config();
    let generated = generate(&model)?;
    let data = if cfg.normalize { normalize_columns(&generated.data)? } else { generated.data };
    let labels = data.labels.clone().expect("generated data carries labels");
    let dims = model.dims();
    let dims_of_column: Vec<usize> = labels.iter().map(|&l| dims[l]).collect();
    let truth = GroundTruth::new(labels.clone(), dims.clone(), model.ambient_dim)?;
    let sampled = sample_columns(&model, cfg.columns_per_dim, cfg.seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let solve_cols: &[usize] = if cfg.cluster.is_some() { &all } else { &sampled };
    let dict = Dictionary::new(data.y.clone());

    let mut rows = Vec::with_capacity(cfg.grid.len());
    let mut roc = Vec::new();
    for (g, &mult) in cfg.grid.iter().enumerate() {
        let start = Instant::now();
        let (coefficients, graph, failed) = match &cfg.method {
            MethodConfig::KnnBaseline { k, temperature } => {
                let graph = knn_graph(&data.y, *k, mult * temperature)?;
                (graph_to_coefficients(&graph)?, graph, 0)
            }
            _ => {
                let solver = column_solver(cfg, mult, &dims_of_column);
                let report = regress_columns(&dict, solve_cols, cfg.workers, solver)?;
                for e in &report.errors {
                    log::warn!("{}: multiplier {mult}: {e}", cfg.name);
                }
                let graph = ssc_graph(&report.coefficients);
                (report.coefficients, graph, report.errors.len())
            }
        };
        let ok_cols: Vec<usize> = sampled.iter().copied().filter(|&i| coefficients.column(i).is_some()).collect();
        let disc = discoveries(&coefficients, &truth, Some(&ok_cols), cfg.threshold, cfg.fpr_normalization)?;
        let (clustering_error_pct, l_hat) = match &cfg.cluster {
            Some(cc) => {
                let opts = SpectralOptions { seed: kmeans_seed(cfg.seed, cc.spectral.seed, g), ..cc.spectral };
                let (l_hat, pred) = with_workers(cfg.workers, || cluster_graph(&graph, cc.num_clusters, &opts))??;
                (Some(clustering_error(&pred, &labels)?.error_percent), Some(l_hat))
            }
            None => (None, None),
        };
        let wall_ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        rows.push(ResultRow {
            experiment: cfg.name.clone(),
            lambda_multiplier: mult,
            fpr: disc.mean_fpr,
            tpr: disc.mean_tpr,
            clustering_error: clustering_error_pct,
            l_hat,
            wall_ms,
            failed_columns: failed,
        });
        roc.extend(roc_rows(&disc, mult, &dims_of_column));
    }
    Ok(ResultTable { config_hash: cfg.hash(), seed: cfg.seed, rows, roc })
}

/// Write `results.csv` and `roc.csv` (and SVG plots when `svg` is set)
/// into `dir`. Existing outputs from a different configuration are only
/// replaced when `force` is set.
pub fn write_outputs(table: &ResultTable, dir: &Path, force: bool, svg: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let results_path = dir.join("results.csv");
    if !force && results_path.exists() {
        let existing = fs::read_to_string(&results_path)?;
        if read_config_hash(&existing).as_deref() != Some(table.config_hash.as_str()) {
            return Err(SscError::WouldOverwrite(results_path.display().to_string()));
        }
    }
    let results = table.results_csv();
    let roc = table.roc_csv();
    fs::write(&results_path, &results)?;
    fs::write(dir.join("roc.csv"), &roc)?;
    if svg {
        fs::write(dir.join("rates.svg"), crate::svg::rates_chart(&results)?)?;
        fs::write(dir.join("roc.svg"), crate::svg::roc_chart(&roc)?)?;
    }
    Ok(())
}

/// Outcome of the full clustering procedure on one data matrix.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub coefficients: CoefficientMatrix,
    pub failed_columns: Vec<usize>,
    pub l_hat: usize,
    pub result: ClusteringResult,
}

/// Sparse regression of every column, similarity graph, spectral
/// clustering and per-cluster PCA denoising.
pub fn run_pipeline(
    y: &DMatrix<f64>,
    method: &Method,
    solver: &SolverOptions,
    cluster: &ClusterConfig,
    workers: Option<usize>,
) -> Result<PipelineOutput> {
    let dict = Dictionary::new(y.clone());
    let all: Vec<usize> = (0..y.ncols()).collect();
    let report = regress_columns(&dict, &all, workers, |d, i| method.solve_column(d, i, solver))?;
    let failed_columns = report
        .errors
        .iter()
        .filter_map(|e| match e {
            SscError::Column { column, .. } => Some(*column),
            _ => None,
        })
        .collect();
    let graph = ssc_graph(&report.coefficients);
    let (l_hat, labels) = with_workers(workers, || cluster_graph(&graph, cluster.num_clusters, &cluster.spectral))??;
    let result = denoise(y, &labels, &[cluster.dim_rule])?;
    Ok(PipelineOutput { coefficients: report.coefficients, failed_columns, l_hat, result })
}
