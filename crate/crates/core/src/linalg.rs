//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for a (root seed, stream) pair.
///
/// Streams let independent tasks (columns, restarts) draw from the same root
/// seed without sharing state, so results do not depend on scheduling.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest absolute entry of `AᵀA − I`.
pub fn orthonormality_deviation(basis: &DMatrix<f64>) -> f64 {
    let gram = basis.tr_mul(basis);
    let mut dev: f64 = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    dev
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve `A x = b` for symmetric positive definite `A`; `None` when the
/// Cholesky factorization breaks down.
pub fn cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    // reject numerically singular factors
    let diag_max = (0..l.nrows()).fold(0.0f64, |m, i| m.max(l[(i, i)].abs()));
    let diag_min = (0..l.nrows()).fold(f64::INFINITY, |m, i| m.min(l[(i, i)].abs()));
    if !(diag_min > 1e-7 * diag_max) {
        return None;
    }
    Some(chol.solve(b))
}

/// Orthogonal projector application `U Uᵀ v`.
pub fn project(basis: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    basis * basis.tr_mul(v)
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ` with singular values
/// in descending order.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    fn reconstruction_error(&self, m: &DMatrix<f64>) -> f64 {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        (us * &self.v_t - m).norm()
    }

    fn sorted(self) -> Self {
        let k = self.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| self.singular_values[b].total_cmp(&self.singular_values[a]).then(a.cmp(&b)));
        let u = DMatrix::from_fn(self.u.nrows(), k, |r, c| self.u[(r, order[c])]);
        let v_t = DMatrix::from_fn(k, self.v_t.ncols(), |r, c| self.v_t[(order[r], c)]);
        let singular_values = order.iter().map(|&i| self.singular_values[i]).collect();
        Self { u, singular_values, v_t }
    }

    fn transposed(self) -> Self {
        Self { u: self.v_t.transpose(), singular_values: self.singular_values, v_t: self.u.transpose() }
    }
}

fn direct_svd(m: &DMatrix<f64>) -> Option<ThinSvd> {
    let svd = m.clone().try_svd(true, true, f64::EPSILON, 0)?;
    Some(ThinSvd { u: svd.u?, singular_values: svd.singular_values.iter().copied().collect(), v_t: svd.v_t? })
}

/// Extend orthonormal columns `q` (some of which may be zero placeholders)
/// so that every column is a unit vector orthogonal to the others.
fn complete_orthonormal(q: &mut DMatrix<f64>, filled: &[bool]) {
    let n = q.nrows();
    let mut next_axis = 0;
    for c in 0..q.ncols() {
        if filled[c] {
            continue;
        }
        while next_axis < n {
            let mut v = DVector::zeros(n);
            v[next_axis] = 1.0;
            next_axis += 1;
            for o in 0..q.ncols() {
                if o != c && (filled[o] || o < c) {
                    let col = q.column(o).into_owned();
                    v.axpy(-col.dot(&v), &col, 1.0);
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                q.set_column(c, &(v / norm));
                break;
            }
        }
    }
}

fn gram_svd(m: &DMatrix<f64>) -> ThinSvd {
    let k = m.nrows().min(m.ncols());
    let eig = m.tr_mul(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..m.ncols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let scale = eig.eigenvalues[top].max(0.0).sqrt();
    let mut u = DMatrix::zeros(m.nrows(), k);
    let mut v_t = DMatrix::zeros(k, m.ncols());
    let mut s = vec![0.0; k];
    let mut filled = vec![false; k];
    for c in 0..k {
        let v = eig.eigenvectors.column(order[c]);
        v_t.set_row(c, &v.transpose());
        let sv = eig.eigenvalues[order[c]].max(0.0).sqrt();
        if sv > 1e-12 * scale && sv > 0.0 {
            let mut col = m * v / sv;
            for o in 0..c {
                if filled[o] {
                    let prev = u.column(o).into_owned();
                    col.axpy(-prev.dot(&col), &prev, 1.0);
                }
            }
            let norm = col.norm();
            u.set_column(c, &(&col / norm));
            s[c] = sv;
            filled[c] = true;
        }
    }
    complete_orthonormal(&mut u, &filled);
    ThinSvd { u, singular_values: s, v_t }
}

/// Thin SVD whose reconstruction is verified. The decomposition is tried
/// on both orientations of `m` and falls back to an eigendecomposition of
/// `MᵀM` when neither reconstructs `m` to working accuracy.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let tol = 1e-10 * (1.0 + m.norm()) * ((m.nrows() * m.ncols()).max(1) as f64).sqrt();
    let tall = m.nrows() > m.ncols();
    let attempts: [bool; 2] = [tall, !tall];
    for &transpose in &attempts {
        let candidate = if transpose {
            direct_svd(&m.transpose()).map(ThinSvd::transposed)
        } else {
            direct_svd(m)
        };
        if let Some(c) = candidate {
            if c.reconstruction_error(m) <= tol {
                return c.sorted();
            }
        }
    }
    log::debug!("falling back to Gram eigendecomposition for a {}x{} SVD", m.nrows(), m.ncols());
    gram_svd(m).sorted()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_svd_reconstructs_rank_deficient_tall_matrix() {
        let mut rng = seeded_rng(8, 0);
        use rand_distr::{Distribution, StandardNormal};
        let a = DMatrix::from_fn(30, 4, |_, _| StandardNormal.sample(&mut rng));
        let b = DMatrix::from_fn(4, 19, |_, _| StandardNormal.sample(&mut rng));
        let m = &a * &b;
        for mat in [m.clone(), m.transpose()] {
            let svd = thin_svd(&mat);
            assert!(svd.reconstruction_error(&mat) < 1e-10 * mat.norm());
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(orthonormality_deviation(&svd.u) < 1e-10);
        }
    }

    #[test]
    fn gram_fallback_is_a_valid_decomposition() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        let svd = gram_svd(&m).sorted();
        assert!(svd.reconstruction_error(&m) < 1e-12);
        assert!(orthonormality_deviation(&svd.u) < 1e-12);
        assert!((svd.singular_values[0] - 5.0).abs() < 1e-12);
    }
}
