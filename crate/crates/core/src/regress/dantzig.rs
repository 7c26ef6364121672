//! Linear-programming based selectors: the bias-corrected Dantzig selector
//! and equality-constrained l1 minimization (basis pursuit).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::simplex::LinearProgram;
use super::{Dictionary, RegressionParams, SolveInfo, SparseCoefficients, Target};
use crate::{Result, SscError};

/// Allowed violation of the correlation constraint after the LP solve.
const CONSTRAINT_SLACK: f64 = 1e-8;

/// `√(2/n)·σ·√(1+σ²)`.
pub fn dantzig_lambda_heuristic(n: usize, sigma: f64) -> f64 {
    (2.0 / n as f64).sqrt() * sigma * (1.0 + sigma * sigma).sqrt()
}

/// Variance of the `j`-th entry of the noise term
/// `ξ = σ²β₍₋ᵢ₎ + Y₍₋ᵢ₎ᵀ(y_i − Yβ)` evaluated at the ideal coefficients,
/// and its four uncorrelated parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DantzigNoiseStats {
    pub sigma: f64,
    pub n: usize,
    pub beta_norm: f64,
    pub beta_j: f64,
    pub variance: f64,
    /// Variances of the four summands, in order.
    pub parts: [f64; 4],
}

pub fn xi_variance(sigma: f64, n: usize, beta: &[f64], j: usize) -> Result<DantzigNoiseStats> {
    if j >= beta.len() {
        return Err(SscError::InvalidConfig(format!("index {j} out of range for {} coefficients", beta.len())));
    }
    if n == 0 {
        return Err(SscError::InvalidConfig("ambient dimension must be positive".into()));
    }
    let nf = n as f64;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let norm2: f64 = beta.iter().map(|b| b * b).sum();
    let bj2 = beta[j] * beta[j];
    let parts = [
        s2 / nf * (1.0 + norm2),
        s4 / nf,
        s4 / nf * 2.0 * bj2,
        s4 / nf * (norm2 - bj2),
    ];
    let variance = s2 / nf * (1.0 + norm2) + s4 / nf * (1.0 + bj2 + norm2);
    Ok(DantzigNoiseStats { sigma, n, beta_norm: norm2.sqrt(), beta_j: beta[j], variance, parts })
}

fn kept_indices(p: usize, exclude: Option<usize>) -> Vec<usize> {
    (0..p).filter(|&j| Some(j) != exclude).collect()
}

impl Dictionary {
    pub(crate) fn corrected_dantzig_target(&self, target: &Target, sigma: f64, lambda: f64) -> Result<SparseCoefficients> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SscError::InvalidConfig(format!("Dantzig bound must be positive, got {lambda}")));
        }
        if !(sigma >= 0.0) {
            return Err(SscError::InvalidConfig(format!("σ must be nonnegative, got {sigma}")));
        }
        let p = self.num_atoms();
        if target.lambda_max() <= lambda {
            let mut zero = SparseCoefficients::zeros(p, target.exclude);
            zero.info.lambda = Some(lambda);
            return Ok(zero);
        }
        let keep = kept_indices(p, target.exclude);
        let k = keep.len();
        let s2 = sigma * sigma;
        let gram = self.gram();
        // M = G₍₋ᵢ₎ − σ²I, constraint |c − Mβ|∞ ≤ λ with β = u − v
        let m = DMatrix::from_fn(k, k, |a, b| gram[(keep[a], keep[b])] - if a == b { s2 } else { 0.0 });
        let c: Vec<f64> = keep.iter().map(|&j| target.corr[j]).collect();
        let mut a_ub = DMatrix::zeros(2 * k, 2 * k);
        let mut b_ub = vec![0.0; 2 * k];
        for r in 0..k {
            for q in 0..k {
                a_ub[(r, q)] = -m[(r, q)];
                a_ub[(r, k + q)] = m[(r, q)];
                a_ub[(k + r, q)] = m[(r, q)];
                a_ub[(k + r, k + q)] = -m[(r, q)];
            }
            b_ub[r] = lambda - c[r];
            b_ub[k + r] = lambda + c[r];
        }
        let lp = LinearProgram::inequality(vec![1.0; 2 * k], a_ub, b_ub);
        let sol = lp.solve()?;
        let mut values = vec![0.0; p];
        for (a, &j) in keep.iter().enumerate() {
            values[j] = sol.x[a] - sol.x[k + a];
        }

        let beta_kept: Vec<f64> = keep.iter().map(|&j| values[j]).collect();
        let mut violation: f64 = 0.0;
        for r in 0..k {
            let mb: f64 = (0..k).map(|q| m[(r, q)] * beta_kept[q]).sum();
            violation = violation.max((c[r] - mb).abs() - lambda);
        }
        if violation > CONSTRAINT_SLACK {
            return Err(SscError::LinearProgram(format!(
                "correlation constraint violated by {violation:.3e} after solve"
            )));
        }
        let objective = crate::linalg::l1_norm(&values);
        Ok(SparseCoefficients {
            values,
            excluded: target.exclude,
            info: SolveInfo {
                lambda: Some(lambda),
                iterations: sol.pivots,
                objective,
                ..SolveInfo::default()
            },
        })
    }

    /// Bias-corrected Dantzig selector for an arbitrary response.
    pub fn corrected_dantzig(
        &self,
        y: &DVector<f64>,
        sigma: f64,
        lambda: f64,
        exclude: Option<usize>,
    ) -> Result<SparseCoefficients> {
        let target = self.target(y, exclude)?;
        self.corrected_dantzig_target(&target, sigma, lambda)
    }

    pub fn corrected_dantzig_column(&self, i: usize, sigma: f64, lambda: f64) -> Result<SparseCoefficients> {
        let target = self.column_target(i)?;
        self.corrected_dantzig_target(&target, sigma, lambda)
    }

    pub(crate) fn l1_equality_target(&self, target: &Target) -> Result<SparseCoefficients> {
        let p = self.num_atoms();
        let y_norm = target.y.norm();
        let feas_tol = 1e-8 * y_norm.max(1.0);
        if y_norm == 0.0 {
            return Ok(SparseCoefficients::zeros(p, target.exclude));
        }
        let keep = kept_indices(p, target.exclude);
        let k = keep.len();
        let n = self.ambient_dim();
        let sub = DMatrix::from_fn(n, k, |r, a| self.atoms()[(r, keep[a])]);

        // reduce the constraints to an orthonormal basis of range(Y₍₋ᵢ₎)
        let svd = crate::linalg::thin_svd(&sub);
        let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
        let rank_tol = 1e-10 * s_max.max(f64::MIN_POSITIVE) * (n.max(k) as f64);
        let rank = svd.singular_values.iter().filter(|s| **s > rank_tol).count();
        let u = &svd.u;
        let v_t = &svd.v_t;
        let u_r = u.columns(0, rank).into_owned();
        let coeff = u_r.tr_mul(&target.y);
        let outside = (&target.y - &u_r * &coeff).norm();
        if outside > feas_tol {
            return Err(SscError::Infeasible { min_residual: outside, target: 0.0 });
        }
        let a_red = DMatrix::from_fn(rank, k, |r, a| svd.singular_values[r] * v_t[(r, a)]);
        let mut a_eq = DMatrix::zeros(rank, 2 * k);
        for r in 0..rank {
            for a in 0..k {
                a_eq[(r, a)] = a_red[(r, a)];
                a_eq[(r, k + a)] = -a_red[(r, a)];
            }
        }
        let lp = LinearProgram::equality(vec![1.0; 2 * k], a_eq, coeff.iter().copied().collect());
        let sol = lp.solve()?;
        let mut values = vec![0.0; p];
        for (a, &j) in keep.iter().enumerate() {
            values[j] = sol.x[a] - sol.x[k + a];
        }
        let residual = self.residual_norm(target, &values);
        if residual > feas_tol {
            return Err(SscError::Infeasible { min_residual: residual, target: 0.0 });
        }
        let objective = crate::linalg::l1_norm(&values);
        Ok(SparseCoefficients {
            values,
            excluded: target.exclude,
            info: SolveInfo {
                iterations: sol.pivots,
                objective,
                step1_value: Some(objective),
                step1_residual: Some(residual),
                ..SolveInfo::default()
            },
        })
    }

    /// `min ‖β‖₁ s.t. y = Yβ, β_i = 0`.
    pub fn l1_equality(&self, y: &DVector<f64>, exclude: Option<usize>) -> Result<SparseCoefficients> {
        let target = self.target(y, exclude)?;
        self.l1_equality_target(&target)
    }

    pub fn l1_equality_column(&self, i: usize) -> Result<SparseCoefficients> {
        let target = self.column_target(i)?;
        self.l1_equality_target(&target)
    }
}

/// `min ‖β‖₁ s.t. ‖Y₍₋ᵢ₎ᵀ(y − Yβ) + σ²β₍₋ᵢ₎‖∞ ≤ λ, β_i = 0`.
pub fn corrected_dantzig(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    sigma: f64,
    lambda: f64,
    exclude: Option<usize>,
) -> Result<SparseCoefficients> {
    Dictionary::new(dictionary.clone()).corrected_dantzig(y, sigma, lambda, exclude)
}

/// Noiseless sparse representation: `min ‖β‖₁ s.t. y = Xβ, β_i = 0`.
/// Fails with [`SscError::Infeasible`] when `y` is outside the span of the
/// remaining columns.
pub fn solve_l1_equality(y: &DVector<f64>, dictionary: &DMatrix<f64>, params: &RegressionParams) -> Result<SparseCoefficients> {
    Dictionary::new(dictionary.clone()).l1_equality(y, params.exclude)
}
