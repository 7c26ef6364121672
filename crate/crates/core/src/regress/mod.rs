//! Sparse self-regression: each data point is regressed on all the others.
//!
//! Every solver works against a [`Dictionary`], which owns the data matrix
//! together with its Gram matrix so that the `N` per-column problems of a
//! clustering run share one `O(nN²)` precomputation.

mod dantzig;
mod lasso;
mod pareto;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Result, SscError};

pub use dantzig::{corrected_dantzig, dantzig_lambda_heuristic, solve_l1_equality, xi_variance, DantzigNoiseStats};
pub use lasso::solve_lasso;
pub use pareto::{default_alpha0, solve_l1_residual_constrained, two_step};

/// Stopping rules shared by the iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// KKT residual target for LASSO solves.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 200_000 }
    }
}

/// Parameters of a single regression problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionParams {
    pub lambda: f64,
    pub tau: f64,
    /// Coefficient of the penalty rule `f(t) = α₀ / t`.
    pub alpha0: f64,
    pub exclude: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RegressionParams {
    fn default() -> Self {
        let opts = SolverOptions::default();
        Self {
            lambda: 0.1,
            tau: 0.0,
            alpha0: 0.25,
            exclude: None,
            tolerance: opts.tolerance,
            max_iterations: opts.max_iterations,
        }
    }
}

impl RegressionParams {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tolerance: self.tolerance, max_iterations: self.max_iterations }
    }
}

/// Bookkeeping attached to a solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    /// Penalty of the (final) LASSO solve, if any.
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Optimal value `‖β*‖₁` of the residual-constrained step.
    pub step1_value: Option<f64>,
    /// Residual `‖y − Yβ‖₂` reached by the residual-constrained step.
    pub step1_residual: Option<f64>,
}

/// Coefficient vector with one pinned-to-zero entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCoefficients {
    pub values: Vec<f64>,
    pub excluded: Option<usize>,
    pub info: SolveInfo,
}

impl SparseCoefficients {
    pub fn zeros(len: usize, excluded: Option<usize>) -> Self {
        Self { values: vec![0.0; len], excluded, info: SolveInfo::default() }
    }

    pub fn l1_norm(&self) -> f64 {
        crate::linalg::l1_norm(&self.values)
    }

    /// Indices with `|β_j| > threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| v.abs() > threshold).map(|(j, _)| j).collect()
    }
}

/// A regression response together with its correlations `Yᵀy`.
#[derive(Clone, Debug)]
pub(crate) struct Target {
    pub y: DVector<f64>,
    pub corr: DVector<f64>,
    pub exclude: Option<usize>,
}

impl Target {
    /// `‖Y₍₋ᵢ₎ᵀ y‖∞`: the smallest penalty with an all-zero LASSO solution.
    pub fn lambda_max(&self) -> f64 {
        self.corr
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != self.exclude)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// Data matrix plus cached Gram matrix and Lipschitz estimate.
#[derive(Clone, Debug)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
}

impl Dictionary {
    pub fn new(atoms: DMatrix<f64>) -> Self {
        let gram = atoms.tr_mul(&atoms);
        let lipschitz = largest_eigenvalue(&gram);
        Self { atoms, gram, lipschitz }
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub(crate) fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `G v`, skipping zero entries of `v`.
    pub(crate) fn gram_times(&self, v: &[f64]) -> Vec<f64> {
        let p = self.num_atoms();
        let mut out = vec![0.0; p];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                let col = self.gram.column(j);
                for (o, g) in out.iter_mut().zip(col.iter()) {
                    *o += vj * g;
                }
            }
        }
        out
    }

    pub(crate) fn target(&self, y: &DVector<f64>, exclude: Option<usize>) -> Result<Target> {
        if y.len() != self.ambient_dim() {
            return Err(SscError::LengthMismatch { expected: self.ambient_dim(), actual: y.len() });
        }
        self.check_exclude(exclude)?;
        let corr = self.atoms.tr_mul(y);
        Ok(Target { y: y.clone(), corr, exclude })
    }

    pub(crate) fn column_target(&self, i: usize) -> Result<Target> {
        self.check_exclude(Some(i))?;
        Ok(Target {
            y: self.atoms.column(i).into_owned(),
            corr: self.gram.column(i).into_owned(),
            exclude: Some(i),
        })
    }

    fn check_exclude(&self, exclude: Option<usize>) -> Result<()> {
        match exclude {
            Some(i) if i >= self.num_atoms() => Err(SscError::InvalidConfig(format!(
                "excluded index {i} out of range for {} columns",
                self.num_atoms()
            ))),
            _ => Ok(()),
        }
    }

    /// `‖y − Yβ‖₂` computed directly from the data.
    pub(crate) fn residual_norm(&self, target: &Target, beta: &[f64]) -> f64 {
        let mut r = target.y.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                r.axpy(-b, &self.atoms.column(j), 1.0);
            }
        }
        r.norm()
    }
}

fn largest_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    let p = gram.ncols();
    if p == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..100 {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - est).abs() <= 1e-6 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Choice of sparse regression for [`regress_all`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Lasso { lambda: f64 },
    TwoStep { sigma: f64, alpha0: f64 },
    Dantzig { sigma: f64, lambda: f64 },
    /// Noiseless representation `min ‖β‖₁ s.t. y_i = Yβ`.
    L1Equality,
}

impl Method {
    pub fn solve_column(&self, dict: &Dictionary, i: usize, opts: &SolverOptions) -> Result<SparseCoefficients> {
        match *self {
            Method::Lasso { lambda } => dict.lasso_column(i, lambda, opts),
            Method::TwoStep { sigma, alpha0 } => dict.two_step_column(i, sigma, alpha0, opts),
            Method::Dantzig { sigma, lambda } => dict.corrected_dantzig_column(i, sigma, lambda),
            Method::L1Equality => dict.l1_equality_column(i),
        }
    }
}

/// One stored column of `B`: nonzero entries only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseColumn {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseColumn {
    pub fn from_dense(values: &[f64]) -> Self {
        let mut col = SparseColumn::default();
        for (j, &v) in values.iter().enumerate() {
            if v != 0.0 {
                col.indices.push(j);
                col.values.push(v);
            }
        }
        col
    }
}

/// The `N × N` matrix `B` whose column `i` holds the coefficients that
/// express point `i` through the other points. Columns that were not
/// computed are treated as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    size: usize,
    columns: Vec<Option<SparseColumn>>,
    info: Vec<Option<SolveInfo>>,
}

impl CoefficientMatrix {
    pub fn new(size: usize) -> Self {
        Self { size, columns: vec![None; size], info: vec![None; size] }
    }

    pub fn from_dense(b: &DMatrix<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(SscError::DegenerateInput(format!("coefficient matrix is {}x{}", b.nrows(), b.ncols())));
        }
        let mut m = Self::new(b.ncols());
        for i in 0..b.ncols() {
            let mut values: Vec<f64> = b.column(i).iter().copied().collect();
            values[i] = 0.0;
            m.columns[i] = Some(SparseColumn::from_dense(&values));
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn set_column(&mut self, i: usize, coefficients: &SparseCoefficients) {
        let mut values = coefficients.values.clone();
        values[i] = 0.0;
        self.columns[i] = Some(SparseColumn::from_dense(&values));
        self.info[i] = Some(coefficients.info.clone());
    }

    pub fn column(&self, i: usize) -> Option<&SparseColumn> {
        self.columns[i].as_ref()
    }

    pub fn info(&self, i: usize) -> Option<&SolveInfo> {
        self.info[i].as_ref()
    }

    /// Indices of the columns that hold a solution.
    pub fn computed_columns(&self) -> Vec<usize> {
        (0..self.size).filter(|&i| self.columns[i].is_some()).collect()
    }

    /// Entry `B[row, col]`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col]
            .as_ref()
            .and_then(|c| c.indices.binary_search(&row).ok().map(|k| c.values[k]))
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.size, self.size);
        for (i, col) in self.columns.iter().enumerate() {
            if let Some(col) = col {
                for (&j, &v) in col.indices.iter().zip(&col.values) {
                    b[(j, i)] = v;
                }
            }
        }
        b
    }
}

/// Coefficient matrix plus the per-column failures of a batch solve.
#[derive(Debug)]
pub struct RegressReport {
    pub coefficients: CoefficientMatrix,
    /// Each entry is an [`SscError::Column`].
    pub errors: Vec<SscError>,
}

/// Runs `solve` on every listed column, in parallel over `workers` threads
/// (`None` uses the global pool). Output does not depend on the number of
/// workers or on scheduling.
pub fn regress_columns<F>(dict: &Dictionary, columns: &[usize], workers: Option<usize>, solve: F) -> Result<RegressReport>
where
    F: Fn(&Dictionary, usize) -> Result<SparseCoefficients> + Sync,
{
    for &i in columns {
        dict.check_exclude(Some(i))?;
    }
    let run = || -> Vec<(usize, Result<SparseCoefficients>)> {
        columns.par_iter().map(|&i| (i, solve(dict, i))).collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| SscError::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut coefficients = CoefficientMatrix::new(dict.num_atoms());
    let mut errors = Vec::new();
    for (i, res) in results {
        match res {
            Ok(sol) => coefficients.set_column(i, &sol),
            Err(e) => errors.push(SscError::Column { column: i, source: Box::new(e) }),
        }
    }
    Ok(RegressReport { coefficients, errors })
}

/// Step 1 of the clustering procedure: regress each listed column (all
/// columns when `columns` is `None`) onto the rest with the chosen method.
pub fn regress_all(
    data: &DMatrix<f64>,
    method: &Method,
    columns: Option<&[usize]>,
    opts: &SolverOptions,
    workers: Option<usize>,
) -> Result<RegressReport> {
    let dict = Dictionary::new(data.clone());
    let all: Vec<usize> = (0..dict.num_atoms()).collect();
    let columns = columns.unwrap_or(&all);
    regress_columns(&dict, columns, workers, |d, i| method.solve_column(d, i, opts))
}
