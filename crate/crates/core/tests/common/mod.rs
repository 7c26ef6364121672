//! Brute-force reference solvers for small problems.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_unit_columns<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = random_matrix(rng, rows, cols);
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    m
}

fn kept(p: usize, exclude: Option<usize>) -> Vec<usize> {
    (0..p).filter(|&j| Some(j) != exclude).collect()
}

/// Visit every subset of `0..k` of size `m` in lexicographic order.
fn for_each_subset(k: usize, m: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, k: usize, m: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == m {
            f(cur);
            return;
        }
        for j in start..k {
            if k - j < m - cur.len() {
                break;
            }
            cur.push(j);
            rec(j + 1, k, m, cur, f);
            cur.pop();
        }
    }
    rec(0, k, m, &mut Vec::new(), f);
}

pub fn lasso_objective(y: &DVector<f64>, a: &DMatrix<f64>, beta: &[f64], lambda: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    0.5 * (y - a * b).norm_squared() + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exact LASSO minimum by enumerating supports with independent columns and
/// sign patterns, solving the stationarity equations on each.
pub fn lasso_oracle(y: &DVector<f64>, a: &DMatrix<f64>, lambda: f64, exclude: Option<usize>) -> f64 {
    let cols = kept(a.ncols(), exclude);
    let k = cols.len();
    let mut best = 0.5 * y.norm_squared();
    for m in 1..=k.min(a.nrows()) {
        for_each_subset(k, m, &mut |sub: &[usize]| {
            let idx: Vec<usize> = sub.iter().map(|&s| cols[s]).collect();
            let a_s = a.select_columns(idx.iter());
            let g = a_s.transpose() * &a_s;
            let svd = g.clone().svd(false, false);
            let smin = svd.singular_values.min();
            if smin < 1e-10 * svd.singular_values.max() {
                return;
            }
            let lu = g.lu();
            let c = a_s.transpose() * y;
            for signs in 0..(1u32 << m) {
                let s = DVector::from_fn(m, |r, _| if signs >> r & 1 == 1 { -1.0 } else { 1.0 });
                let Some(b) = lu.solve(&(&c - lambda * &s)) else { continue };
                if (0..m).all(|r| b[r] * s[r] > 0.0) {
                    let mut full = vec![0.0; a.ncols()];
                    for (r, &j) in idx.iter().enumerate() {
                        full[j] = b[r];
                    }
                    best = best.min(lasso_objective(y, a, &full, lambda));
                }
            }
        });
    }
    best
}

/// Largest violation of the LASSO optimality conditions, in absolute terms.
pub fn lasso_kkt(y: &DVector<f64>, a: &DMatrix<f64>, beta: &[f64], lambda: f64, exclude: Option<usize>) -> f64 {
    let b = DVector::from_column_slice(beta);
    let grad = a.transpose() * (a * &b - y);
    let mut worst = 0.0f64;
    for j in 0..beta.len() {
        if Some(j) == exclude {
            worst = worst.max(beta[j].abs());
            continue;
        }
        let v = if beta[j] != 0.0 {
            (grad[j] + lambda * beta[j].signum()).abs()
        } else {
            (grad[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Exact minimum of `‖β‖₁` subject to `‖c − Mβ‖∞ ≤ λ` with
/// `M = AᵀA − σ²I` and `c = Aᵀy` over the kept columns, by enumerating
/// vertices of the arrangement formed by the constraint rows and the
/// coordinate hyperplanes. Returns `None` when no feasible vertex exists.
pub fn dantzig_oracle(y: &DVector<f64>, a: &DMatrix<f64>, sigma: f64, lambda: f64, exclude: Option<usize>) -> Option<f64> {
    let cols = kept(a.ncols(), exclude);
    let k = cols.len();
    let a_k = a.select_columns(cols.iter());
    let m_full = a_k.transpose() * &a_k - sigma * sigma * DMatrix::identity(k, k);
    let c = a_k.transpose() * y;
    let feasible = |b: &DVector<f64>| {
        let r = &c - &m_full * b;
        r.amax() <= lambda * (1.0 + 1e-9) + 1e-9
    };
    let mut best: Option<f64> = None;
    if feasible(&DVector::zeros(k)) {
        return Some(0.0);
    }
    for m in 1..=k {
        // free coordinates
        for_each_subset(k, m, &mut |free: &[usize]| {
            // active rows
            for_each_subset(k, m, &mut |rows: &[usize]| {
                let sub = DMatrix::from_fn(m, m, |r, q| m_full[(rows[r], free[q])]);
                let lu = sub.lu();
                if lu.determinant().abs() < 1e-12 {
                    return;
                }
                for sides in 0..(1u32 << m) {
                    let rhs = DVector::from_fn(m, |r, _| {
                        let s = if sides >> r & 1 == 1 { -1.0 } else { 1.0 };
                        c[rows[r]] - s * lambda
                    });
                    let Some(bf) = lu.solve(&rhs) else { continue };
                    let mut b = DVector::zeros(k);
                    for (q, &j) in free.iter().enumerate() {
                        b[j] = bf[q];
                    }
                    if feasible(&b) {
                        let v = b.lp_norm(1);
                        best = Some(best.map_or(v, |x: f64| x.min(v)));
                    }
                }
            });
        });
    }
    best
}
