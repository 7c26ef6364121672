//! Discovery counts, the subspace detection property and clustering error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::regress::{CoefficientMatrix, SparseCoefficients};
use crate::{Result, SscError};

/// Magnitude above which a coefficient counts as a discovery.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Denominator of the false positive rate of column `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FprNormalization {
    /// `n - d(i)`: ambient dimension minus the dimension of the column's subspace.
    #[default]
    AmbientComplement,
    /// `N - N(i)`: number of points outside the column's subspace.
    PointComplement,
}

/// Ground truth needed to classify discoveries.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    /// Subspace dimension per label.
    pub dims: Vec<usize>,
    pub ambient_dim: usize,
}

impl GroundTruth {
    pub fn new(labels: Vec<usize>, dims: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= dims.len()) {
            return Err(SscError::MissingLabels(format!("label {bad} has no subspace dimension")));
        }
        Ok(Self { labels, dims, ambient_dim })
    }

    fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.dims.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnDiscoveries {
    pub column: usize,
    pub true_count: usize,
    pub false_count: usize,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscoveryReport {
    pub columns: Vec<ColumnDiscoveries>,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub total_false: usize,
    pub threshold: f64,
    pub normalization: FprNormalization,
}

fn count_column(
    i: usize,
    entries: impl Iterator<Item = (usize, f64)>,
    truth: &GroundTruth,
    sizes: &[usize],
    threshold: f64,
    normalization: FprNormalization,
) -> ColumnDiscoveries {
    let li = truth.labels[i];
    let (mut t, mut f) = (0, 0);
    for (j, v) in entries {
        if j == i || !(v.abs() > threshold) {
            continue;
        }
        if truth.labels[j] == li {
            t += 1;
        } else {
            f += 1;
        }
    }
    let d = truth.dims[li];
    let fpr_den = match normalization {
        FprNormalization::AmbientComplement => truth.ambient_dim.saturating_sub(d),
        FprNormalization::PointComplement => truth.labels.len() - sizes[li],
    };
    let ratio = |c: usize, den: usize| if den == 0 { 0.0 } else { c as f64 / den as f64 };
    ColumnDiscoveries { column: i, true_count: t, false_count: f, tpr: ratio(t, d), fpr: ratio(f, fpr_den) }
}

fn summarize(columns: Vec<ColumnDiscoveries>, threshold: f64, normalization: FprNormalization) -> DiscoveryReport {
    let m = columns.len().max(1) as f64;
    let mean_tpr = columns.iter().map(|c| c.tpr).sum::<f64>() / m;
    let mean_fpr = columns.iter().map(|c| c.fpr).sum::<f64>() / m;
    let total_false = columns.iter().map(|c| c.false_count).sum();
    DiscoveryReport { columns, mean_tpr, mean_fpr, total_false, threshold, normalization }
}

/// Discovery statistics over `columns` of `b` (all computed columns when
/// `None`).
pub fn discoveries(
    b: &CoefficientMatrix,
    truth: &GroundTruth,
    columns: Option<&[usize]>,
    threshold: f64,
    normalization: FprNormalization,
) -> Result<DiscoveryReport> {
    if truth.labels.len() != b.size() {
        return Err(SscError::MissingLabels(format!(
            "{} labels for {} columns",
            truth.labels.len(),
            b.size()
        )));
    }
    let selected = columns.map(<[usize]>::to_vec).unwrap_or_else(|| b.computed_columns());
    let sizes = truth.class_sizes();
    let cols = selected
        .iter()
        .map(|&i| {
            let entries: Vec<(usize, f64)> = b
                .column(i)
                .map(|c| c.indices.iter().copied().zip(c.values.iter().copied()).collect())
                .unwrap_or_default();
            count_column(i, entries.into_iter(), truth, &sizes, threshold, normalization)
        })
        .collect();
    Ok(summarize(cols, threshold, normalization))
}

/// True when no coefficient above `threshold` links points with different
/// labels.
pub fn subspace_detection_property(b: &CoefficientMatrix, labels: &[usize], threshold: f64) -> Result<bool> {
    if labels.len() != b.size() {
        return Err(SscError::MissingLabels(format!("{} labels for {} columns", labels.len(), b.size())));
    }
    for i in 0..b.size() {
        if let Some(col) = b.column(i) {
            for (&j, &v) in col.indices.iter().zip(&col.values) {
                if v.abs() > threshold && labels[j] != labels[i] {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterErrorReport {
    /// Percentage of misclassified points, in `[0, 100]`.
    pub error_percent: f64,
    pub misclassified: usize,
    /// `assignment[p]` is the true label matched to predicted label `p`.
    pub assignment: Vec<Option<usize>>,
    /// `confusion[p][t]` counts points with predicted label `p` and true label `t`.
    pub confusion: Vec<Vec<usize>>,
}

/// Minimum-cost assignment of every row to a distinct column of a
/// rectangular cost matrix with `rows <= cols`. Returns the column of each
/// row.
pub fn assign_min_cost(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // potentials and augmenting shortest paths, 1-based with a sentinel 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Fraction of misclassified points under the best one-to-one matching of
/// predicted to true labels.
pub fn clustering_error(predicted: &[usize], truth: &[usize]) -> Result<ClusterErrorReport> {
    if predicted.len() != truth.len() {
        return Err(SscError::LengthMismatch { expected: truth.len(), actual: predicted.len() });
    }
    let kp = predicted.iter().max().map_or(0, |&m| m + 1);
    let kt = truth.iter().max().map_or(0, |&m| m + 1);
    let mut confusion = vec![vec![0usize; kt]; kp];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let mut assignment = vec![None; kp];
    if kp <= kt {
        let cost: Vec<Vec<f64>> = confusion.iter().map(|r| r.iter().map(|&c| -(c as f64)).collect()).collect();
        for (p, t) in assign_min_cost(&cost).into_iter().enumerate() {
            assignment[p] = Some(t);
        }
    } else {
        let cost: Vec<Vec<f64>> = (0..kt).map(|t| (0..kp).map(|p| -(confusion[p][t] as f64)).collect()).collect();
        for (t, p) in assign_min_cost(&cost).into_iter().enumerate() {
            assignment[p] = Some(t);
        }
    }
    let matched: usize = assignment.iter().enumerate().filter_map(|(p, t)| t.map(|t| confusion[p][t])).sum();
    let misclassified = predicted.len() - matched;
    let error_percent = if predicted.is_empty() { 0.0 } else { 100.0 * misclassified as f64 / predicted.len() as f64 };
    Ok(ClusterErrorReport { error_percent, misclassified, assignment, confusion })
}

/// One point of an ROC sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub lambda: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// Columns whose solve failed; they are left out of the averages.
    pub failed_columns: Vec<usize>,
}

/// Evaluate `solve(lambda, column)` on every grid value and column and
/// average the discovery rates. Failed solves are recorded and skipped.
pub fn roc_sweep<F>(
    grid: &[f64],
    columns: &[usize],
    truth: &GroundTruth,
    threshold: f64,
    normalization: FprNormalization,
    solve: F,
) -> Result<Vec<RocPoint>>
where
    F: Fn(f64, usize) -> Result<SparseCoefficients> + Sync,
{
    if grid.is_empty() {
        return Err(SscError::InvalidConfig("empty lambda grid".into()));
    }
    let sizes = truth.class_sizes();
    grid.iter()
        .map(|&lambda| {
            let outcomes: Vec<(usize, Result<SparseCoefficients>)> =
                columns.par_iter().map(|&i| (i, solve(lambda, i))).collect();
            let mut failed = Vec::new();
            let mut cols = Vec::new();
            for (i, out) in outcomes {
                match out {
                    Ok(c) => cols.push(count_column(
                        i,
                        c.values.iter().copied().enumerate(),
                        truth,
                        &sizes,
                        threshold,
                        normalization,
                    )),
                    Err(e) => {
                        log::warn!("column {i} at lambda {lambda}: {e}");
                        failed.push(i);
                    }
                }
            }
            let report = summarize(cols, threshold, normalization);
            Ok(RocPoint { lambda, fpr: report.mean_fpr, tpr: report.mean_tpr, failed_columns: failed })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn truth() -> GroundTruth {
        GroundTruth::new(vec![0, 0, 1, 1], vec![2, 2], 5).unwrap()
    }

    #[test]
    fn zero_matrix_has_no_discoveries() {
        let b = CoefficientMatrix::from_dense(&DMatrix::zeros(4, 4)).unwrap();
        let r = discoveries(&b, &truth(), None, DEFAULT_THRESHOLD, FprNormalization::default()).unwrap();
        assert_eq!((r.mean_tpr, r.mean_fpr, r.total_false), (0.0, 0.0, 0));
        assert!(subspace_detection_property(&b, &truth().labels, DEFAULT_THRESHOLD).unwrap());
    }

    #[test]
    fn single_cross_entry() {
        let mut d = DMatrix::zeros(4, 4);
        d[(1, 0)] = 0.7;
        d[(3, 2)] = 0.7;
        let b = CoefficientMatrix::from_dense(&d).unwrap();
        assert!(subspace_detection_property(&b, &truth().labels, DEFAULT_THRESHOLD).unwrap());
        d[(2, 0)] = 0.5;
        let b = CoefficientMatrix::from_dense(&d).unwrap();
        let r = discoveries(&b, &truth(), None, DEFAULT_THRESHOLD, FprNormalization::AmbientComplement).unwrap();
        assert_eq!(r.total_false, 1);
        assert_eq!(r.columns[0].true_count, 1);
        assert!((r.columns[0].tpr - 0.5).abs() < 1e-15);
        assert!((r.columns[0].fpr - 1.0 / 3.0).abs() < 1e-15);
        let r = discoveries(&b, &truth(), None, DEFAULT_THRESHOLD, FprNormalization::PointComplement).unwrap();
        assert!((r.columns[0].fpr - 0.5).abs() < 1e-15);
        assert!(!subspace_detection_property(&b, &truth().labels, DEFAULT_THRESHOLD).unwrap());
    }

    #[test]
    fn missing_labels_rejected() {
        let b = CoefficientMatrix::new(5);
        assert!(discoveries(&b, &truth(), None, DEFAULT_THRESHOLD, FprNormalization::default()).is_err());
    }

    #[test]
    fn clustering_error_examples() {
        let t: Vec<usize> = (0..200).map(|i| i % 4).collect();
        assert_eq!(clustering_error(&t, &t).unwrap().error_percent, 0.0);
        let permuted: Vec<usize> = t.iter().map(|&l| [2, 0, 3, 1][l]).collect();
        assert_eq!(clustering_error(&permuted, &t).unwrap().error_percent, 0.0);
        let mut flipped = t.clone();
        flipped[5] = (flipped[5] + 1) % 4;
        assert!((clustering_error(&flipped, &t).unwrap().error_percent - 0.5).abs() < 1e-12);
        assert!(clustering_error(&t[..3], &t).is_err());
    }

    #[test]
    fn rectangular_alphabets() {
        let truth = vec![0, 0, 0, 1, 1, 1];
        let split = vec![0, 0, 1, 2, 2, 2];
        let r = clustering_error(&split, &truth).unwrap();
        assert_eq!(r.misclassified, 1);
        assert_eq!(r.assignment.iter().filter(|a| a.is_none()).count(), 1);
        let r = clustering_error(&truth, &split).unwrap();
        assert_eq!(r.misclassified, 1);
    }
}
