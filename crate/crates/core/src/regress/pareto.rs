//! Residual-constrained l1 minimization and the two-step procedure.
//!
//! `min ‖β‖₁ s.t. ‖y − Yβ‖₂ ≤ τ` is solved by root finding on the LASSO
//! penalty: the residual of the LASSO solution is nondecreasing in `λ`, and
//! at the penalty where it equals `τ` the LASSO solution is optimal for the
//! constrained problem.

use nalgebra::{DMatrix, DVector};

use super::{Dictionary, RegressionParams, SolveInfo, SolverOptions, SparseCoefficients, Target};
use crate::{Result, SscError};

/// Smallest penalty tried, relative to `‖Y₍₋ᵢ₎ᵀy‖∞`.
const LAMBDA_MIN_RATIO: f64 = 1e-8;
const MAX_ROOT_STEPS: usize = 200;

/// `f(t) = α₀/t` coefficient used when none is given:
/// `max(0.25, 0.708σ)`.
pub fn default_alpha0(sigma: f64) -> f64 {
    0.25f64.max(0.708 * sigma)
}

/// Residual tolerance `max(1e-6, 1e-3·τ)`.
pub(crate) fn tau_tolerance(tau: f64) -> f64 {
    1e-6f64.max(1e-3 * tau)
}

struct PathPoint {
    log_lambda: f64,
    residual: f64,
    beta: Vec<f64>,
    iterations: usize,
}

impl Dictionary {
    pub(crate) fn residual_constrained_target(
        &self,
        target: &Target,
        tau: f64,
        opts: &SolverOptions,
    ) -> Result<SparseCoefficients> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(SscError::InvalidConfig(format!("residual bound must be nonnegative, got {tau}")));
        }
        let p = self.num_atoms();
        let y_norm = target.y.norm();
        if y_norm <= tau {
            let mut zero = SparseCoefficients::zeros(p, target.exclude);
            zero.info.step1_value = Some(0.0);
            zero.info.step1_residual = Some(y_norm);
            return Ok(zero);
        }
        let tol = tau_tolerance(tau);
        let lambda_max = target.lambda_max();
        if lambda_max == 0.0 {
            return Err(SscError::Infeasible { min_residual: y_norm, target: tau });
        }
        let lambda_min = LAMBDA_MIN_RATIO * lambda_max;

        let mut total_iterations = 0;
        let solve = |lambda: f64, warm: Option<&[f64]>| -> Result<PathPoint> {
            let sol = super::lasso::lasso_core(self, target, lambda, opts, warm)?;
            Ok(PathPoint {
                log_lambda: lambda.ln(),
                residual: self.residual_norm(target, &sol.beta),
                beta: sol.beta,
                iterations: sol.iterations,
            })
        };
        let finish = |pt: PathPoint, total: usize| -> SparseCoefficients {
            let value = crate::linalg::l1_norm(&pt.beta);
            SparseCoefficients {
                values: pt.beta,
                excluded: target.exclude,
                info: SolveInfo {
                    lambda: Some(pt.log_lambda.exp()),
                    iterations: total,
                    step1_value: Some(value),
                    step1_residual: Some(pt.residual),
                    ..SolveInfo::default()
                },
            }
        };

        // hi: residual above τ (β = 0 at λ_max); walk λ down geometrically
        // until the residual drops to τ or below.
        let mut hi = PathPoint { log_lambda: lambda_max.ln(), residual: y_norm, beta: vec![0.0; p], iterations: 0 };
        let mut lambda = lambda_max;
        let lo = loop {
            lambda = (lambda * 0.25).max(lambda_min);
            let pt = solve(lambda, Some(&hi.beta))?;
            total_iterations += pt.iterations;
            if (pt.residual - tau).abs() <= tol {
                return Ok(finish(pt, total_iterations));
            }
            if pt.residual < tau {
                break pt;
            }
            if lambda <= lambda_min {
                return Err(SscError::Infeasible { min_residual: pt.residual, target: tau });
            }
            hi = pt;
        };

        // Illinois-modified regula falsi on log λ, with bisection as a guard.
        let mut lo = lo;
        let mut f_lo = lo.residual - tau;
        let mut f_hi = hi.residual - tau;
        let mut side = 0i8;
        for step in 0..MAX_ROOT_STEPS {
            let width = hi.log_lambda - lo.log_lambda;
            let mut x = hi.log_lambda - f_hi * width / (f_hi - f_lo);
            if !x.is_finite() || x <= lo.log_lambda || x >= hi.log_lambda || step % 8 == 7 {
                x = 0.5 * (lo.log_lambda + hi.log_lambda);
            }
            let warm = if f_hi.abs() < f_lo.abs() { hi.beta.clone() } else { lo.beta.clone() };
            let pt = solve(x.exp(), Some(&warm))?;
            total_iterations += pt.iterations;
            let f = pt.residual - tau;
            if f.abs() <= tol || width < 1e-14 {
                return Ok(finish(pt, total_iterations));
            }
            if f > 0.0 {
                hi = pt;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = pt;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            }
        }
        Err(SscError::IterationLimit {
            iterations: MAX_ROOT_STEPS,
            kkt_residual: f_lo.abs().min(f_hi.abs()),
            last_iterate: lo.beta,
        })
    }

    /// Residual-constrained l1 problem for an arbitrary response.
    pub fn residual_constrained(
        &self,
        y: &DVector<f64>,
        tau: f64,
        exclude: Option<usize>,
        opts: &SolverOptions,
    ) -> Result<SparseCoefficients> {
        let target = self.target(y, exclude)?;
        self.residual_constrained_target(&target, tau, opts)
    }

    pub(crate) fn two_step_target(
        &self,
        target: &Target,
        sigma: f64,
        alpha0: f64,
        opts: &SolverOptions,
    ) -> Result<SparseCoefficients> {
        if !(sigma > 0.0) {
            return Err(SscError::InvalidConfig(format!("two-step procedure needs σ > 0, got {sigma}")));
        }
        if !(alpha0 > 0.0) {
            return Err(SscError::InvalidConfig(format!("α₀ must be positive, got {alpha0}")));
        }
        let step1 = self.residual_constrained_target(target, 2.0 * sigma, opts)?;
        let value = step1.l1_norm();
        if value == 0.0 {
            return Err(SscError::DegenerateStep1);
        }
        let lambda = alpha0 / value;
        let mut sol = self.lasso_target(target, lambda, opts, None)?;
        sol.info.step1_value = Some(value);
        sol.info.step1_residual = step1.info.step1_residual;
        Ok(sol)
    }

    /// Two-step procedure for an arbitrary response.
    pub fn two_step(
        &self,
        y: &DVector<f64>,
        sigma: f64,
        alpha0: f64,
        exclude: Option<usize>,
        opts: &SolverOptions,
    ) -> Result<SparseCoefficients> {
        let target = self.target(y, exclude)?;
        self.two_step_target(&target, sigma, alpha0, opts)
    }

    pub fn two_step_column(&self, i: usize, sigma: f64, alpha0: f64, opts: &SolverOptions) -> Result<SparseCoefficients> {
        let target = self.column_target(i)?;
        self.two_step_target(&target, sigma, alpha0, opts)
    }

    pub fn residual_constrained_column(&self, i: usize, tau: f64, opts: &SolverOptions) -> Result<SparseCoefficients> {
        let target = self.column_target(i)?;
        self.residual_constrained_target(&target, tau, opts)
    }
}

/// `min ‖β‖₁ s.t. ‖y − Yβ‖₂ ≤ τ, β_i = 0` (`τ` and `i` from `params`).
pub fn solve_l1_residual_constrained(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    params: &RegressionParams,
) -> Result<SparseCoefficients> {
    let dict = Dictionary::new(dictionary.clone());
    dict.residual_constrained(y, params.tau, params.exclude, &params.solver_options())
}

/// Residual-constrained step with `τ = 2σ`, then LASSO with `λ = α₀/‖β*‖₁`.
pub fn two_step(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    sigma: f64,
    alpha0: f64,
    params: &RegressionParams,
) -> Result<SparseCoefficients> {
    let dict = Dictionary::new(dictionary.clone());
    dict.two_step(y, sigma, alpha0, params.exclude, &params.solver_options())
}
