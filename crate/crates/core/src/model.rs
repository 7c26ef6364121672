//! Semi-random union-of-subspaces model and subspace geometry.
//!
//! Each subspace is drawn uniformly (Haar) from the Grassmannian, clean points
//! are uniform on the unit sphere of their subspace, and observations carry
//! additive Gaussian noise with per-entry variance `σ²/n`, so that
//! `E‖z‖² = σ²` for unit-norm clean points.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{orthonormality_deviation, seeded_rng};
use crate::{Result, SscError};

/// Tolerance used when validating orthonormal bases.
pub const BASIS_TOLERANCE: f64 = 1e-8;

/// Requested dimension and sampling density of one subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub dim: usize,
    pub density: f64,
}

impl SubspaceSpec {
    pub fn new(dim: usize, density: f64) -> Self {
        Self { dim, density }
    }

    /// `round(ρ·d)`, ties to even.
    pub fn num_points(&self) -> usize {
        (self.density * self.dim as f64).round_ties_even() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub ambient_dim: usize,
    pub subspaces: Vec<SubspaceSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Draw mutually orthogonal subspaces (requires `Σ d_ℓ ≤ n`).
    #[serde(default)]
    pub orthogonal: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim == 0 {
            return Err(SscError::InvalidConfig("ambient dimension must be positive".into()));
        }
        if self.subspaces.is_empty() {
            return Err(SscError::InvalidConfig("at least one subspace is required".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(SscError::InvalidConfig(format!(
                "noise level must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        let total_dim: usize = self.subspaces.iter().map(|s| s.dim).sum();
        if self.orthogonal && total_dim > self.ambient_dim {
            return Err(SscError::InvalidConfig(format!(
                "orthogonal subspaces need total dimension {total_dim} <= ambient dimension {}",
                self.ambient_dim
            )));
        }
        for (l, s) in self.subspaces.iter().enumerate() {
            if s.dim == 0 {
                return Err(SscError::InvalidConfig(format!("subspace {l} has dimension 0")));
            }
            if s.dim > self.ambient_dim {
                return Err(SscError::InvalidConfig(format!(
                    "subspace {l} has dimension {} > ambient dimension {}",
                    s.dim, self.ambient_dim
                )));
            }
            if !(s.density >= 1.0) || !s.density.is_finite() {
                return Err(SscError::InvalidConfig(format!(
                    "subspace {l} has density {} < 1",
                    s.density
                )));
            }
            if s.num_points() < s.dim {
                return Err(SscError::InvalidConfig(format!(
                    "subspace {l} would receive {} points for dimension {}",
                    s.num_points(),
                    s.dim
                )));
            }
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.subspaces.iter().map(SubspaceSpec::num_points).sum()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(|s| s.dim).collect()
    }
}

/// A linear subspace represented by an orthonormal basis (`n × d`).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps `basis`, rejecting it when `basisᵀ basis` deviates from the
    /// identity by more than [`BASIS_TOLERANCE`].
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let deviation = orthonormality_deviation(&basis);
        if !(deviation <= BASIS_TOLERANCE) {
            return Err(SscError::InvalidBasis { deviation });
        }
        Ok(Self { basis })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        crate::linalg::project(&self.basis, v)
    }
}

/// Observed data `Y` (`n × N`, one sample per column), with the clean data
/// `X` and ground-truth labels when they are known.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    pub y: DMatrix<f64>,
    pub clean: Option<DMatrix<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl DataMatrix {
    pub fn new(y: DMatrix<f64>) -> Self {
        Self { y, clean: None, labels: None }
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.y.ncols() {
            return Err(SscError::LengthMismatch { expected: self.y.ncols(), actual: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn ambient_dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.y.ncols()
    }

    /// The noise matrix `Z = Y − X` when the clean data is known.
    pub fn noise(&self) -> Option<DMatrix<f64>> {
        self.clean.as_ref().map(|x| &self.y - x)
    }
}

/// Output of [`generate`]: the data and the realized subspaces.
#[derive(Clone, Debug)]
pub struct GeneratedData {
    pub data: DataMatrix,
    pub subspaces: Vec<Subspace>,
}

/// Samples a dataset from the semi-random model.
pub fn generate(config: &ModelConfig) -> Result<GeneratedData> {
    config.validate()?;
    let n = config.ambient_dim;
    let total = config.num_points();
    let mut rng = seeded_rng(config.seed, 0);

    let subspaces = if config.orthogonal {
        orthogonal_subspaces(n, &config.dims(), &mut rng)?
    } else {
        let mut subs = Vec::with_capacity(config.subspaces.len());
        for spec in &config.subspaces {
            subs.push(random_subspace(n, spec.dim, &mut rng)?);
        }
        subs
    };

    let mut clean = DMatrix::<f64>::zeros(n, total);
    let mut labels = Vec::with_capacity(total);
    let mut col = 0;
    for (l, (spec, sub)) in config.subspaces.iter().zip(&subspaces).enumerate() {
        for _ in 0..spec.num_points() {
            let w = unit_sphere_point(spec.dim, &mut rng);
            clean.set_column(col, &(sub.basis() * w));
            labels.push(l);
            col += 1;
        }
    }

    let noise_sd = config.noise_sigma / (n as f64).sqrt();
    let mut y = clean.clone();
    if config.noise_sigma > 0.0 {
        for v in y.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v += noise_sd * g;
        }
    }

    Ok(GeneratedData {
        data: DataMatrix { y, clean: Some(clean), labels: Some(labels) },
        subspaces,
    })
}

/// Haar-distributed `d`-dimensional subspace of `Rⁿ`: QR of a Gaussian
/// matrix with the sign of `R`'s diagonal absorbed into `Q`.
pub fn random_subspace<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Subspace> {
    let g = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Subspace::new(q)
}

/// Mutually orthogonal subspaces: consecutive column blocks of one
/// Haar-distributed orthonormal `n × Σd` matrix.
pub fn orthogonal_subspaces<R: Rng + ?Sized>(n: usize, dims: &[usize], rng: &mut R) -> Result<Vec<Subspace>> {
    let total: usize = dims.iter().sum();
    if total > n {
        return Err(SscError::InvalidConfig(format!("total dimension {total} exceeds ambient dimension {n}")));
    }
    let q = random_subspace(n, total, rng)?;
    let mut start = 0;
    let mut out = Vec::with_capacity(dims.len());
    for &d in dims {
        out.push(Subspace::new(q.basis().columns(start, d).into_owned())?);
        start += d;
    }
    Ok(out)
}

/// Uniform point on the unit sphere of `R^d`.
pub fn unit_sphere_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Rescales every column of `Y` to unit Euclidean norm.
pub fn normalize_columns(data: &DataMatrix) -> Result<DataMatrix> {
    let mut y = data.y.clone();
    for (j, mut col) in y.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(SscError::ZeroColumn(j));
        }
        col /= norm;
    }
    Ok(DataMatrix { y, clean: data.clean.clone(), labels: data.labels.clone() })
}

/// Principal-angle cosines and normalized affinity of a subspace pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceGeometry {
    /// Cosines of the principal angles, nonincreasing, in `[0, 1]`.
    pub cos_angles: Vec<f64>,
    /// Root-mean-square of the cosines.
    pub affinity: f64,
}

pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<SubspaceGeometry> {
    principal_angles_of_bases(a.basis(), b.basis())
}

/// Same as [`principal_angles`] on raw basis matrices, validating them first.
pub fn principal_angles_of_bases(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SubspaceGeometry> {
    for basis in [a, b] {
        let deviation = orthonormality_deviation(basis);
        if !(deviation <= BASIS_TOLERANCE) {
            return Err(SscError::InvalidBasis { deviation });
        }
    }
    if a.nrows() != b.nrows() {
        return Err(SscError::LengthMismatch { expected: a.nrows(), actual: b.nrows() });
    }
    let k = a.ncols().min(b.ncols());
    if k == 0 {
        return Ok(SubspaceGeometry { cos_angles: Vec::new(), affinity: 0.0 });
    }
    let cross = a.tr_mul(b);
    let svd = crate::linalg::thin_svd(&cross);
    let mut cos: Vec<f64> = svd.singular_values.iter().take(k).map(|s| s.clamp(0.0, 1.0)).collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    let affinity = (cos.iter().map(|c| c * c).sum::<f64>() / k as f64).sqrt();
    Ok(SubspaceGeometry { cos_angles: cos, affinity })
}

/// Dimension selection for a PCA subspace fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimRule {
    Fixed(usize),
    /// Smallest `d` whose top-`d` singular values reach this fraction of the
    /// sum of all singular values.
    Energy(f64),
}

/// Best-fitting linear subspace (no centering) of the columns of `points`.
///
/// A fixed dimension larger than the number of available singular vectors is
/// clamped to `min(n, m)`.
pub fn fit_subspace_pca(points: &DMatrix<f64>, rule: DimRule) -> Result<Subspace> {
    if points.ncols() == 0 || points.nrows() == 0 {
        return Err(SscError::DegenerateInput("cannot fit a subspace to an empty point set".into()));
    }
    let svd = crate::linalg::thin_svd(points);
    let u = &svd.u;
    let sv = &svd.singular_values;
    let available = sv.len();
    let d = match rule {
        DimRule::Fixed(d) => {
            if d == 0 {
                return Err(SscError::InvalidConfig("PCA dimension must be positive".into()));
            }
            d.min(available)
        }
        DimRule::Energy(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(SscError::InvalidConfig(format!("energy fraction {e} outside (0, 1]")));
            }
            let total: f64 = sv.iter().sum();
            if !(total > 0.0) {
                return Err(SscError::DegenerateInput("all points are zero".into()));
            }
            let target = e * total * (1.0 - 1e-12);
            let mut acc = 0.0;
            let mut d = available;
            for (k, s) in sv.iter().enumerate() {
                acc += s;
                if acc >= target {
                    d = k + 1;
                    break;
                }
            }
            d
        }
    };
    Subspace::new(u.columns(0, d).into_owned())
}

/// Caller-supplied constants of the theoretical conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub kappa0: f64,
    pub rho_star: f64,
    pub sigma_star: f64,
    pub c0: f64,
}

impl Default for TheoryConstants {
    fn default() -> Self {
        Self { kappa0: 1.0, rho_star: crate::asymptotics::RHO_STAR, sigma_star: 1.0, c0: 1.0 }
    }
}

/// Report on the affinity, sampling, noise and dimension conditions.
/// Nothing here is enforced anywhere else in the crate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryDiagnostics {
    pub pairwise_affinity: Vec<Vec<f64>>,
    pub max_affinity_per_subspace: Vec<f64>,
    /// `κ₀ / log N`.
    pub affinity_bound: f64,
    pub affinity_ok: Vec<bool>,
    pub densities: Vec<f64>,
    pub density_ok: Vec<bool>,
    /// Densities above `e^{d/2}`, where the theory uses the capped value.
    pub density_above_cap: Vec<bool>,
    pub noise_ok: bool,
    /// `c₀ n / (log N)²`.
    pub dim_bound: f64,
    pub dim_ok: bool,
    pub constants: TheoryConstants,
}

pub fn diagnostics(
    config: &ModelConfig,
    subspaces: &[Subspace],
    constants: &TheoryConstants,
) -> Result<TheoryDiagnostics> {
    if subspaces.len() != config.subspaces.len() {
        return Err(SscError::LengthMismatch { expected: config.subspaces.len(), actual: subspaces.len() });
    }
    let l = subspaces.len();
    let mut pairwise = vec![vec![0.0; l]; l];
    for a in 0..l {
        pairwise[a][a] = 1.0;
        for b in (a + 1)..l {
            let aff = principal_angles(&subspaces[a], &subspaces[b])?.affinity;
            pairwise[a][b] = aff;
            pairwise[b][a] = aff;
        }
    }
    let max_aff: Vec<f64> = (0..l)
        .map(|a| (0..l).filter(|&b| b != a).map(|b| pairwise[a][b]).fold(0.0, f64::max))
        .collect();
    let log_n = (config.num_points() as f64).ln();
    let affinity_bound = constants.kappa0 / log_n;
    let densities: Vec<f64> = config
        .subspaces
        .iter()
        .map(|s| s.num_points() as f64 / s.dim as f64)
        .collect();
    let max_dim = config.subspaces.iter().map(|s| s.dim).max().unwrap_or(0);
    let dim_bound = constants.c0 * config.ambient_dim as f64 / (log_n * log_n);
    Ok(TheoryDiagnostics {
        affinity_ok: max_aff.iter().map(|&a| a <= affinity_bound).collect(),
        max_affinity_per_subspace: max_aff,
        pairwise_affinity: pairwise,
        affinity_bound,
        density_ok: densities.iter().map(|&r| r >= constants.rho_star).collect(),
        density_above_cap: config
            .subspaces
            .iter()
            .zip(&densities)
            .map(|(s, &r)| r > (s.dim as f64 / 2.0).exp())
            .collect(),
        densities,
        noise_ok: config.noise_sigma < constants.sigma_star,
        dim_bound,
        dim_ok: (max_dim as f64) < dim_bound,
        constants: *constants,
    })
}
