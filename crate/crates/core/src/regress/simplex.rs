//! Dense two-phase primal simplex for small and medium linear programs.
//!
//! Solves `min cᵀx s.t. A_ub x ≤ b_ub, A_eq x = b_eq, x ≥ 0`. Entering
//! variables follow Dantzig's rule, switching to Bland's rule during runs of
//! degenerate pivots. The final basic solution is recomputed from the
//! original data with an LU solve so that constraint residuals sit at
//! rounding level rather than accumulated tableau error.

use nalgebra::{DMatrix, DVector};

use crate::{Result, SscError};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: Vec<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    width: usize, // columns excluding rhs
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn row(&self, r: usize) -> &[f64] {
        let w = self.width + 1;
        &self.data[r * w..(r + 1) * w]
    }

    /// Pivot on (r, e). Row `self.rows` is the cost row.
    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width + 1;
        let piv = self.at(r, e);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for k in 0..=self.rows {
            if k == r {
                continue;
            }
            let f = self.data[k * w + e];
            if f != 0.0 {
                let row = &mut self.data[k * w..(k + 1) * w];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[e] = 0.0;
            }
        }
        self.basis[r] = e;
    }

    /// Runs simplex iterations on the current cost row; `allowed` marks the
    /// columns that may enter.
    fn optimize(&mut self, allowed: &[bool], pivots: &mut usize, limit: usize) -> Result<()> {
        let mut degenerate_run = 0;
        loop {
            let cost = self.rows;
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..self.width {
                if !allowed[j] {
                    continue;
                }
                let d = self.at(cost, j);
                if d < -COST_EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(e) = enter else { return Ok(()) };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, e);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                            if tie {
                                if bland {
                                    self.basis[r] < self.basis[l]
                                } else {
                                    a > self.at(l, e)
                                }
                            } else {
                                ratio < best_ratio
                            }
                        }
                    };
                    if better {
                        leave = Some(r);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = leave else {
                return Err(SscError::LinearProgram("objective is unbounded below".into()));
            };
            if best_ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, e);
            *pivots += 1;
            if *pivots > limit {
                return Err(SscError::LinearProgram(format!("pivot limit {limit} exceeded")));
            }
        }
    }
}

impl LinearProgram {
    /// Inequality-only program.
    pub fn inequality(objective: Vec<f64>, a_ub: DMatrix<f64>, b_ub: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, a_ub, b_ub, a_eq: DMatrix::zeros(0, n), b_eq: Vec::new() }
    }

    /// Equality-only program.
    pub fn equality(objective: Vec<f64>, a_eq: DMatrix<f64>, b_eq: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, a_ub: DMatrix::zeros(0, n), b_ub: Vec::new(), a_eq, b_eq }
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.a_ub.ncols() != n && self.a_ub.nrows() > 0 {
            return Err(SscError::LengthMismatch { expected: n, actual: self.a_ub.ncols() });
        }
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return Err(SscError::LengthMismatch { expected: n, actual: self.a_eq.ncols() });
        }
        if self.a_ub.nrows() != self.b_ub.len() {
            return Err(SscError::LengthMismatch { expected: self.a_ub.nrows(), actual: self.b_ub.len() });
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return Err(SscError::LengthMismatch { expected: self.a_eq.nrows(), actual: self.b_eq.len() });
        }
        let finite = self.objective.iter().chain(&self.b_ub).chain(&self.b_eq).all(|v| v.is_finite())
            && self.a_ub.iter().chain(self.a_eq.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(SscError::LinearProgram("non-finite problem data".into()));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        let n = self.objective.len();
        let m_ub = self.b_ub.len();
        let m_eq = self.b_eq.len();
        let m = m_ub + m_eq;

        // augmented matrix [A | slack] and rhs, original orientation
        let aug_width = n + m_ub;
        let mut aug = DMatrix::<f64>::zeros(m, aug_width);
        let mut rhs = vec![0.0; m];
        for r in 0..m_ub {
            for j in 0..n {
                aug[(r, j)] = self.a_ub[(r, j)];
            }
            aug[(r, n + r)] = 1.0;
            rhs[r] = self.b_ub[r];
        }
        for r in 0..m_eq {
            for j in 0..n {
                aug[(m_ub + r, j)] = self.a_eq[(r, j)];
            }
            rhs[m_ub + r] = self.b_eq[r];
        }

        // rows needing an artificial: negative rhs or equality rows
        let needs_art: Vec<bool> = (0..m).map(|r| r >= m_ub || rhs[r] < 0.0).collect();
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let width = aug_width + n_art;
        let mut tab = Tableau { rows: m, width, data: vec![0.0; (m + 1) * (width + 1)], basis: vec![0; m] };
        let w = width + 1;
        let mut art_col = aug_width;
        for r in 0..m {
            let sign = if rhs[r] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..aug_width {
                tab.data[r * w + j] = sign * aug[(r, j)];
            }
            tab.data[r * w + width] = sign * rhs[r];
            if needs_art[r] {
                tab.data[r * w + art_col] = 1.0;
                tab.basis[r] = art_col;
                art_col += 1;
            } else {
                tab.basis[r] = n + r;
            }
        }

        let limit = 50 * (m + width) + 1000;
        let mut pivots = 0;
        let is_art = |j: usize| j >= aug_width;

        if n_art > 0 {
            // phase I: minimize the sum of artificials
            for r in 0..m {
                if needs_art[r] {
                    for j in 0..=width {
                        if j == width || !is_art(j) {
                            tab.data[m * w + j] -= tab.data[r * w + j];
                        }
                    }
                }
            }
            let allowed = vec![true; width];
            tab.optimize(&allowed, &mut pivots, limit)?;
            let infeasibility = -tab.rhs(m);
            let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeasibility > 1e-9 * scale {
                return Err(SscError::LinearProgram(format!(
                    "infeasible (phase-one objective {infeasibility:.3e})"
                )));
            }
        }

        // drive remaining artificials out of the basis; rows where that is
        // impossible are redundant
        let mut redundant = vec![false; m];
        for r in 0..m {
            if is_art(tab.basis[r]) {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..aug_width {
                    let a = tab.at(r, j).abs();
                    if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                        best = Some((j, a));
                    }
                }
                match best {
                    Some((j, _)) => {
                        tab.pivot(r, j);
                        pivots += 1;
                    }
                    None => redundant[r] = true,
                }
            }
        }

        // phase II cost row
        for j in 0..=width {
            tab.data[m * w + j] = 0.0;
        }
        for j in 0..n {
            tab.data[m * w + j] = self.objective[j];
        }
        for r in 0..m {
            let cb = if tab.basis[r] < n { self.objective[tab.basis[r]] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..=width {
                    tab.data[m * w + j] -= cb * tab.data[r * w + j];
                }
            }
        }
        let allowed: Vec<bool> = (0..width).map(|j| !is_art(j)).collect();
        tab.optimize(&allowed, &mut pivots, limit)?;

        let mut full = vec![0.0; aug_width];
        for r in 0..m {
            let b = tab.basis[r];
            if b < aug_width {
                full[b] = tab.rhs(r).max(0.0);
            }
        }
        refine(&aug, &rhs, &tab.basis, &redundant, &mut full);

        let x: Vec<f64> = full[..n].to_vec();
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective, pivots })
    }
}

/// Recomputes the basic variables from the original constraints.
fn refine(aug: &DMatrix<f64>, rhs: &[f64], basis: &[usize], redundant: &[bool], full: &mut [f64]) {
    let rows: Vec<usize> = (0..basis.len()).filter(|&r| !redundant[r]).collect();
    let cols: Vec<usize> = rows.iter().map(|&r| basis[r]).collect();
    if cols.iter().any(|&c| c >= aug.ncols()) || rows.is_empty() {
        return;
    }
    let k = rows.len();
    let b_mat = DMatrix::from_fn(k, k, |a, c| aug[(rows[a], cols[c])]);
    let b_vec = DVector::from_fn(k, |a, _| rhs[rows[a]]);
    let Some(sol) = b_mat.lu().solve(&b_vec) else { return };
    if sol.iter().any(|v| !v.is_finite() || *v < -1e-7) {
        return;
    }
    let mut candidate = full.to_vec();
    for (a, &c) in cols.iter().enumerate() {
        candidate[c] = sol[a].max(0.0);
    }
    // keep the refined point only if it satisfies the original system at
    // least as well as the tableau point
    let residual = |x: &[f64]| -> f64 {
        (0..aug.nrows())
            .map(|r| {
                let lhs: f64 = (0..aug.ncols()).map(|j| aug[(r, j)] * x[j]).sum();
                (lhs - rhs[r]).abs()
            })
            .fold(0.0, f64::max)
    };
    if residual(&candidate) <= residual(full) {
        full.copy_from_slice(&candidate);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  (2, 6), 36
        let lp = LinearProgram::inequality(
            vec![-3.0, -5.0],
            dmatrix![1.0, 0.0; 0.0, 2.0; 3.0, 2.0],
            vec![4.0, 12.0, 18.0],
        );
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 6.0).abs() < 1e-12);
        assert!((sol.objective + 36.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // min x + y s.t. x + y ≥ 2 (as −x − y ≤ −2), x ≤ 3
        let lp = LinearProgram::inequality(vec![1.0, 1.0], dmatrix![-1.0, -1.0; 1.0, 0.0], vec![-2.0, 3.0]);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_with_redundant_row() {
        // x + y = 1 twice, min x + 2y → (1, 0)
        let lp = LinearProgram::equality(vec![1.0, 2.0], dmatrix![1.0, 1.0; 2.0, 2.0], vec![1.0, 2.0]);
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let lp = LinearProgram::equality(vec![1.0], dmatrix![1.0; 1.0], vec![1.0, 2.0]);
        assert!(matches!(lp.solve(), Err(SscError::LinearProgram(_))));
    }

    #[test]
    fn unbounded_is_reported() {
        let lp = LinearProgram::inequality(vec![-1.0, 0.0], dmatrix![0.0, 1.0], vec![1.0]);
        assert!(matches!(lp.solve(), Err(SscError::LinearProgram(_))));
    }
}
