//! Similarity graphs, spectral clustering and per-cluster denoising.

mod kmeans;

pub use kmeans::{kmeans, KMeansResult};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{fit_subspace_pca, DimRule, Subspace};
use crate::regress::CoefficientMatrix;
use crate::{Result, SscError};

/// Symmetric nonnegative weight matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    weights: DMatrix<f64>,
}

impl SimilarityGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(SscError::DegenerateInput(format!("weight matrix is {}x{}", n, weights.ncols())));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(SscError::DegenerateInput(format!("nonzero diagonal weight at vertex {i}")));
            }
            for j in 0..i {
                let w = weights[(i, j)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(SscError::DegenerateInput(format!("invalid weight {w} at ({i}, {j})")));
                }
                if w != weights[(j, i)] {
                    return Err(SscError::DegenerateInput(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn num_vertices(&self) -> usize {
        self.weights.nrows()
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.weights.row_iter().map(|r| r.sum()).collect()
    }

    /// Multiply every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { weights: &self.weights * factor }
    }
}

/// `W = |B| + |B|ᵀ`.
pub fn ssc_graph(b: &CoefficientMatrix) -> SimilarityGraph {
    let n = b.size();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        if let Some(col) = b.column(i) {
            for (&j, &v) in col.indices.iter().zip(&col.values) {
                if j != i {
                    w[(j, i)] += v.abs();
                    w[(i, j)] += v.abs();
                }
            }
        }
    }
    SimilarityGraph { weights: w }
}

/// K-nearest-neighbour graph with Gaussian weights `exp(-‖y_i - y_j‖² / t)`.
/// An edge is kept when either endpoint lists the other among its `k`
/// nearest points; distance ties go to the smaller index.
pub fn knn_graph(y: &DMatrix<f64>, k: usize, temperature: f64) -> Result<SimilarityGraph> {
    let n = y.ncols();
    if k == 0 || k >= n {
        return Err(SscError::InvalidConfig(format!("K = {k} must satisfy 1 <= K < {n}")));
    }
    if !(temperature > 0.0) {
        return Err(SscError::InvalidConfig(format!("temperature {temperature} must be positive")));
    }
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = (y.column(i) - y.column(j)).norm_squared();
            d2[(i, j)] = d;
            d2[(j, i)] = d;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]).then(a.cmp(&b)));
        for &j in &order[..k] {
            let v = (-d2[(i, j)] / temperature).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(SimilarityGraph { weights: w })
}

/// `I - D^{-1/2} W D^{-1/2}`, with `D^{-1/2} = 0` at isolated vertices.
pub fn laplacian_matrix(graph: &SimilarityGraph) -> DMatrix<f64> {
    let n = graph.num_vertices();
    let inv_sqrt: Vec<f64> = graph.degrees().iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let w = graph.weights();
    let mut l = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..n {
            l[(i, j)] -= inv_sqrt[i] * w[(i, j)] * inv_sqrt[j];
        }
    }
    // exact symmetry for the eigensolver
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (l[(i, j)] + l[(j, i)]);
            l[(i, j)] = s;
            l[(j, i)] = s;
        }
    }
    l
}

/// Spectrum of the normalized Laplacian, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `N × k` matrix whose columns are eigenvectors of the `k` smallest
    /// eigenvalues, smallest first.
    pub fn bottom_eigenvectors(&self, k: usize) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        assert!(k <= n, "requested {k} eigenvectors out of {n}");
        let mut out = DMatrix::zeros(self.eigenvectors.nrows(), k);
        for c in 0..k {
            out.set_column(c, &self.eigenvectors.column(n - 1 - c));
        }
        out
    }
}

pub fn normalized_laplacian(graph: &SimilarityGraph) -> SpectralDecomposition {
    let l = laplacian_matrix(graph);
    let n = l.nrows();
    if n == 0 {
        return SpectralDecomposition { eigenvalues: Vec::new(), eigenvectors: DMatrix::zeros(0, 0) };
    }
    let eig = l.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        eigenvectors.set_column(c, &eig.eigenvectors.column(k));
    }
    SpectralDecomposition { eigenvalues, eigenvectors }
}

/// `N - argmax_i (δ_i - δ_{i+1})` over descending eigenvalues, with ties
/// resolved toward the smallest `i`.
pub fn estimate_num_clusters(spec: &SpectralDecomposition) -> usize {
    let ev = spec.eigenvalues();
    let n = ev.len();
    if n < 2 {
        return n;
    }
    let mut best = 0;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..n - 1 {
        let gap = ev[i] - ev[i + 1];
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    // `best` is zero-based; the one-based index is best + 1.
    n - (best + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { restarts: 20, max_iterations: 300, seed: 0 }
    }
}

/// Labels are renumbered in order of first appearance.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Spectral clustering into `num_clusters` groups from a precomputed
/// decomposition: bottom eigenvectors, unit-normalized rows, k-means.
pub fn spectral_cluster_decomposed(
    spec: &SpectralDecomposition,
    num_clusters: usize,
    opts: &SpectralOptions,
) -> Result<Vec<usize>> {
    let n = spec.len();
    if num_clusters == 0 || num_clusters > n {
        return Err(SscError::InvalidConfig(format!("cluster count {num_clusters} outside 1..={n}")));
    }
    if num_clusters == 1 {
        return Ok(vec![0; n]);
    }
    let v = spec.bottom_eigenvectors(num_clusters);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = v.row(i).iter().copied().collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let res = kmeans(&rows, num_clusters, opts.restarts, opts.max_iterations, opts.seed);
    Ok(canonical_labels(&res.labels))
}

pub fn spectral_cluster(graph: &SimilarityGraph, num_clusters: usize, opts: &SpectralOptions) -> Result<Vec<usize>> {
    spectral_cluster_decomposed(&normalized_laplacian(graph), num_clusters, opts)
}

/// Output of the clustering and denoising stages.
#[derive(Clone, Debug)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub subspaces: Vec<Subspace>,
    pub denoised: DMatrix<f64>,
    pub warnings: Vec<String>,
}

/// Fit one PCA subspace per cluster and project each point onto the
/// subspace of its cluster. `rules` holds either one rule for all clusters
/// or one rule per cluster.
pub fn denoise(y: &DMatrix<f64>, labels: &[usize], rules: &[DimRule]) -> Result<ClusteringResult> {
    if labels.len() != y.ncols() {
        return Err(SscError::LengthMismatch { expected: y.ncols(), actual: labels.len() });
    }
    let num_clusters = labels.iter().max().map_or(0, |&m| m + 1);
    if num_clusters == 0 {
        return Err(SscError::DegenerateInput("no points to denoise".into()));
    }
    if rules.len() != 1 && rules.len() != num_clusters {
        return Err(SscError::LengthMismatch { expected: num_clusters, actual: rules.len() });
    }
    let mut members = vec![Vec::new(); num_clusters];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut warnings = Vec::new();
    let mut subspaces = Vec::with_capacity(num_clusters);
    let mut denoised = DMatrix::zeros(y.nrows(), y.ncols());
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            return Err(SscError::DegenerateInput(format!("cluster {c} is empty")));
        }
        let rule = rules[if rules.len() == 1 { 0 } else { c }];
        if let DimRule::Fixed(d) = rule {
            let cap = idx.len().min(y.nrows());
            if d > cap {
                warnings.push(format!("cluster {c}: dimension {d} clamped to {cap}"));
            }
        }
        let pts = y.select_columns(idx.iter());
        let sub = fit_subspace_pca(&pts, rule)?;
        let u = sub.basis();
        let proj = u * (u.transpose() * &pts);
        for (k, &i) in idx.iter().enumerate() {
            denoised.set_column(i, &proj.column(k));
        }
        subspaces.push(sub);
    }
    Ok(ClusteringResult { labels: labels.to_vec(), num_clusters, subspaces, denoised, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cliques(sizes: &[usize]) -> SimilarityGraph {
        let n: usize = sizes.iter().sum();
        let mut w = DMatrix::zeros(n, n);
        let mut start = 0;
        for &s in sizes {
            for i in start..start + s {
                for j in start..start + s {
                    if i != j {
                        w[(i, j)] = 1.0;
                    }
                }
            }
            start += s;
        }
        SimilarityGraph::new(w).unwrap()
    }

    #[test]
    fn ssc_graph_sums_absolute_values() {
        let mut b = DMatrix::zeros(3, 3);
        b[(0, 1)] = -0.3;
        b[(1, 0)] = 0.1;
        let w = ssc_graph(&CoefficientMatrix::from_dense(&b).unwrap());
        assert!((w.weights()[(0, 1)] - 0.4).abs() < 1e-15);
        assert!((w.weights()[(1, 0)] - 0.4).abs() < 1e-15);
        assert!(SimilarityGraph::new(w.weights().clone()).is_ok());
    }

    #[test]
    fn zero_graph_has_unit_spectrum() {
        let g = SimilarityGraph::new(DMatrix::zeros(4, 4)).unwrap();
        let spec = normalized_laplacian(&g);
        assert!(spec.eigenvalues().iter().all(|&e| (e - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cliques_give_zero_multiplicity() {
        let spec = normalized_laplacian(&cliques(&[4, 4, 4]));
        let zeros = spec.eigenvalues().iter().filter(|e| e.abs() < 1e-9).count();
        assert_eq!(zeros, 3);
        assert_eq!(estimate_num_clusters(&spec), 3);
        assert!(spec.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn connected_pair_is_one_cluster() {
        let spec = normalized_laplacian(&cliques(&[2]));
        let ev = spec.eigenvalues();
        assert!((ev[0] - 2.0).abs() < 1e-12 && ev[1].abs() < 1e-12);
        assert_eq!(estimate_num_clusters(&spec), 1);
    }

    #[test]
    fn eigengap_scale_invariant() {
        let g = cliques(&[3, 5]);
        assert_eq!(
            estimate_num_clusters(&normalized_laplacian(&g)),
            estimate_num_clusters(&normalized_laplacian(&g.scaled(17.0)))
        );
    }

    #[test]
    fn spectral_cluster_recovers_components() {
        let labels = spectral_cluster(&cliques(&[3, 4, 5]), 3, &SpectralOptions::default()).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        let one = spectral_cluster(&cliques(&[3, 4]), 1, &SpectralOptions::default()).unwrap();
        assert!(one.iter().all(|&l| l == 0));
    }

    #[test]
    fn knn_weights() {
        let y = DMatrix::from_column_slice(2, 4, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 5.0, 5.0]);
        let g = knn_graph(&y, 1, 1.0).unwrap();
        assert_eq!(g.weights()[(0, 1)], 1.0);
        let dense = knn_graph(&y, 3, 1e300).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(dense.weights()[(i, j)] > 0.0);
                    assert!((dense.weights()[(i, j)] - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(knn_graph(&y, 4, 1.0).is_err());
    }

    #[test]
    fn denoise_keeps_clean_points() {
        let y = DMatrix::from_column_slice(3, 4, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -3.0]);
        let res = denoise(&y, &[0, 0, 1, 1], &[DimRule::Fixed(1)]).unwrap();
        assert!((&res.denoised - &y).norm() < 1e-12);
        let again = denoise(&res.denoised, &[0, 0, 1, 1], &[DimRule::Fixed(1)]).unwrap();
        assert!((&again.denoised - &res.denoised).norm() < 1e-12);
        let clamped = denoise(&y, &[0, 0, 1, 1], &[DimRule::Fixed(3)]).unwrap();
        assert_eq!(clamped.warnings.len(), 2);
    }
}
