//! LASSO by accelerated proximal gradient on the Gram matrix.
//!
//! Minimizes `½‖y − Yβ‖² + λ‖β‖₁` subject to `β_i = 0` for the excluded
//! column. Iterates are FISTA steps with backtracking on the Lipschitz
//! constant and gradient-based momentum restart. Once the support has been
//! stable for a while the reduced stationarity system is solved directly and
//! the candidate is accepted only if it passes the KKT check, which gives
//! solutions accurate to rounding error on well-posed instances.

use nalgebra::{DMatrix, DVector};

use super::{Dictionary, SolveInfo, SolverOptions, SparseCoefficients, Target};
use crate::linalg::cholesky_solve;
use crate::{Result, SscError};

const POLISH_EVERY: usize = 10;
const OBJECTIVE_RTOL: f64 = 1e-10;

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest violation of the LASSO optimality conditions at `x` given the
/// gradient `grad = Gx − c` of the smooth part.
pub(crate) fn kkt_residual(x: &[f64], grad: &[f64], lambda: f64, exclude: Option<usize>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        if Some(j) == exclude {
            continue;
        }
        let r = if x[j] > 0.0 {
            (grad[j] + lambda).abs()
        } else if x[j] < 0.0 {
            (grad[j] - lambda).abs()
        } else {
            (grad[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct LassoRun {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Core solver shared by every LASSO-based routine. `warm` is an optional
/// starting point (its excluded entry is ignored).
pub(crate) fn lasso_core(
    dict: &Dictionary,
    target: &Target,
    lambda: f64,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<LassoRun> {
    let p = dict.num_atoms();
    let exclude = target.exclude;
    let c = target.corr.as_slice();

    let lambda_max = target.lambda_max();
    if lambda >= lambda_max {
        return Ok(LassoRun { beta: vec![0.0; p], iterations: 0, kkt_residual: 0.0 });
    }

    let mut x: Vec<f64> = match warm {
        Some(w) => w.to_vec(),
        None => vec![0.0; p],
    };
    if let Some(i) = exclude {
        x[i] = 0.0;
    }
    let mut gx = dict.gram_times(&x);
    let mut z = x.clone();
    let mut gz = gx.clone();
    let mut t = 1.0f64;
    let mut lip = dict.lipschitz().max(f64::MIN_POSITIVE);

    let smooth = |v: &[f64], gv: &[f64]| 0.5 * dot(v, gv) - dot(c, v);
    let l1 = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>();
    let mut objective = smooth(&x, &gx) + lambda * l1(&x);

    let mut grad = vec![0.0; p];
    let mut x_new = vec![0.0; p];
    let mut last_support: Vec<(usize, bool)> = Vec::new();
    let mut kkt = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        for j in 0..p {
            grad[j] = gz[j] - c[j];
        }
        // backtracking: for a quadratic the sufficient-decrease test reduces
        // to dᵀGd ≤ L‖d‖² with d = x⁺ − z
        let gx_new = loop {
            for j in 0..p {
                x_new[j] = if Some(j) == exclude { 0.0 } else { soft(z[j] - grad[j] / lip, lambda / lip) };
            }
            let g_new = dict.gram_times(&x_new);
            let mut d_gd = 0.0;
            let mut d_d = 0.0;
            for j in 0..p {
                let d = x_new[j] - z[j];
                d_gd += d * (g_new[j] - gz[j]);
                d_d += d * d;
            }
            if d_gd <= lip * d_d * (1.0 + 1e-12) || d_d == 0.0 {
                break g_new;
            }
            lip *= 2.0;
        };

        let new_objective = smooth(&x_new, &gx_new) + lambda * l1(&x_new);
        let rel_change = (objective - new_objective).abs() / objective.abs().max(1e-300);

        // restart momentum when the step direction opposes progress
        let mut restart_dot = 0.0;
        for j in 0..p {
            restart_dot += (z[j] - x_new[j]) * (x_new[j] - x[j]);
        }
        if restart_dot > 0.0 {
            t = 1.0;
            z.copy_from_slice(&x_new);
            gz.copy_from_slice(&gx_new);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let m = (t - 1.0) / t_next;
            for j in 0..p {
                z[j] = x_new[j] + m * (x_new[j] - x[j]);
                gz[j] = gx_new[j] + m * (gx_new[j] - gx[j]);
            }
            t = t_next;
        }
        std::mem::swap(&mut x, &mut x_new);
        gx = gx_new;
        objective = new_objective;

        for j in 0..p {
            grad[j] = gx[j] - c[j];
        }
        kkt = kkt_residual(&x, &grad, lambda, exclude);
        if kkt <= opts.tolerance && rel_change < OBJECTIVE_RTOL {
            return Ok(LassoRun { beta: x, iterations: iter, kkt_residual: kkt });
        }

        if iter % POLISH_EVERY == 0 {
            let support: Vec<(usize, bool)> =
                x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v > 0.0)).collect();
            if !support.is_empty() && support == last_support && support.len() <= dict.ambient_dim() {
                if let Some((cand, g_cand)) = polish(dict, c, lambda, &support) {
                    let cand_grad: Vec<f64> = (0..p).map(|j| g_cand[j] - c[j]).collect();
                    let cand_kkt = kkt_residual(&cand, &cand_grad, lambda, exclude);
                    if cand_kkt <= kkt.min(opts.tolerance) {
                        return Ok(LassoRun { beta: cand, iterations: iter, kkt_residual: cand_kkt });
                    }
                }
            }
            last_support = support;
        }
    }
    Err(SscError::IterationLimit { iterations: opts.max_iterations, kkt_residual: kkt, last_iterate: x })
}

/// Solves `G_SS β_S = c_S − λ s` on a fixed support/sign pattern. Returns the
/// candidate and its Gram product when the signs are reproduced.
fn polish(dict: &Dictionary, c: &[f64], lambda: f64, support: &[(usize, bool)]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = support.len();
    let gram = dict.gram();
    let sub = DMatrix::from_fn(k, k, |a, b| gram[(support[a].0, support[b].0)]);
    let rhs = DVector::from_fn(k, |a, _| {
        let (j, pos) = support[a];
        c[j] - if pos { lambda } else { -lambda }
    });
    let sol = cholesky_solve(sub, &rhs)?;
    let mut cand = vec![0.0; c.len()];
    for (a, &(j, pos)) in support.iter().enumerate() {
        if (sol[a] > 0.0) != pos || sol[a] == 0.0 {
            return None;
        }
        cand[j] = sol[a];
    }
    let g = dict.gram_times(&cand);
    Some((cand, g))
}

/// Solves the LASSO for an arbitrary response `y` against the columns of
/// `dictionary`, with the coefficient `params.exclude` pinned at zero.
pub fn solve_lasso(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    params: &super::RegressionParams,
) -> Result<SparseCoefficients> {
    let dict = Dictionary::new(dictionary.clone());
    dict.lasso(y, params.lambda, params.exclude, &params.solver_options())
}

impl Dictionary {
    /// LASSO for response `y` with penalty `lambda`.
    pub fn lasso(
        &self,
        y: &DVector<f64>,
        lambda: f64,
        exclude: Option<usize>,
        opts: &SolverOptions,
    ) -> Result<SparseCoefficients> {
        let target = self.target(y, exclude)?;
        self.lasso_target(&target, lambda, opts, None)
    }

    /// LASSO for the `i`-th column regressed on the others.
    pub fn lasso_column(&self, i: usize, lambda: f64, opts: &SolverOptions) -> Result<SparseCoefficients> {
        let target = self.column_target(i)?;
        self.lasso_target(&target, lambda, opts, None)
    }

    pub(crate) fn lasso_target(
        &self,
        target: &Target,
        lambda: f64,
        opts: &SolverOptions,
        warm: Option<&[f64]>,
    ) -> Result<SparseCoefficients> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SscError::InvalidConfig(format!("LASSO penalty must be positive, got {lambda}")));
        }
        let run = lasso_core(self, target, lambda, opts, warm)?;
        let objective = 0.5 * self.residual_norm(target, &run.beta).powi(2)
            + lambda * crate::linalg::l1_norm(&run.beta);
        Ok(SparseCoefficients {
            values: run.beta,
            excluded: target.exclude,
            info: SolveInfo {
                lambda: Some(lambda),
                iterations: run.iterations,
                kkt_residual: run.kkt_residual,
                objective,
                ..SolveInfo::default()
            },
        })
    }
}
