//! Thin singular value decomposition.
//!
//! Tall inputs are first reduced with a Householder QR factorization; the
//! square triangular factor is then diagonalized with one-sided (Hestenes)
//! Jacobi rotations. Jacobi gives singular values with high relative
//! accuracy, which the pseudo-inverse and TLS paths rely on when the hidden
//! layer matrix is badly conditioned. Wide inputs are handled through the
//! transpose.

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

const MAX_SWEEPS: usize = 80;
const ORTHO_TOL: f64 = 1e-15;

/// `A = U diag(s) V^T` with `k = min(rows, cols)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows x k`, orthonormal columns.
    pub left_vectors: RealMatrix,
    /// Non-negative, non-increasing.
    pub singular_values: Vec<f64>,
    /// `cols x k`, orthonormal columns.
    pub right_vectors: RealMatrix,
}

impl SvdResult {
    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `U diag(s) V^T`.
    pub fn reconstruct(&self) -> RealMatrix {
        let (m, k) = self.left_vectors.shape();
        let n = self.right_vectors.rows();
        let mut out = RealMatrix::zeros(m, n);
        for i in 0..m {
            for (l, &s) in self.singular_values.iter().enumerate().take(k) {
                let us = self.left_vectors[(i, l)] * s;
                if us == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += us * self.right_vectors[(j, l)];
                }
            }
        }
        out
    }
}

/// Computes the thin SVD of `a`.
pub fn svd(a: &RealMatrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = a.shape();
    if m >= n {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        })
    }
}

/// Column-major scratch matrix; column `j` occupies `data[j*rows..(j+1)*rows]`.
struct Columns {
    rows: usize,
    data: Vec<f64>,
}

impl Columns {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable views of two distinct columns, `p < q`.
    fn pair_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let r = self.rows;
        let (lo, hi) = self.data.split_at_mut(q * r);
        (&mut lo[p * r..(p + 1) * r], &mut hi[..r])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn svd_tall(a: &RealMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(SvdResult {
            left_vectors: RealMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            right_vectors: RealMatrix::zeros(0, 0),
        });
    }

    // Householder QR, working column-major.
    let mut work = Columns {
        rows: m,
        data: vec![0.0; m * n],
    };
    for j in 0..n {
        for i in 0..m {
            work.data[j * m + i] = a[(i, j)];
        }
    }
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &work.col(k)[k..];
        let norm = dot(x, x).sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);
        for j in k..n {
            let col = &mut work.col_mut(j)[k..];
            let d = 2.0 * dot(&v, col);
            col.iter_mut().zip(&v).for_each(|(c, vi)| *c -= d * vi);
        }
        reflectors.push(Some(v));
    }

    // Square upper-triangular factor R (n x n), column-major.
    let mut w = Columns {
        rows: n,
        data: vec![0.0; n * n],
    };
    for j in 0..n {
        for i in 0..=j {
            w.data[j * n + i] = work.data[j * m + i];
        }
    }
    let mut v = Columns {
        rows: n,
        data: vec![0.0; n * n],
    };
    for j in 0..n {
        v.data[j * n + j] = 1.0;
    }

    one_sided_jacobi(&mut w, &mut v)?;

    let mut norms: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, dot(w.col(j), w.col(j)).sqrt()))
        .collect();
    norms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    // Left vectors of R, padded to m rows, then rotated back by Q.
    let mut u = Columns {
        rows: m,
        data: vec![0.0; m * n],
    };
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &(src, s)) in norms.iter().enumerate() {
        singular_values.push(s);
        if s > 0.0 && s.is_normal() {
            let (wc, uc) = (w.col(src), &mut u.data[dst * m..dst * m + n]);
            uc.iter_mut().zip(wc).for_each(|(o, x)| *o = x / s);
        } else {
            missing.push(dst);
        }
    }
    for k in (0..n).rev() {
        if let Some(h) = &reflectors[k] {
            for j in 0..n {
                let col = &mut u.col_mut(j)[k..];
                let d = 2.0 * dot(h, col);
                if d != 0.0 {
                    col.iter_mut().zip(h).for_each(|(c, hi)| *c -= d * hi);
                }
            }
        }
    }
    complete_basis(&mut u, &missing);

    let mut left = RealMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            left[(i, j)] = u.data[j * m + i];
        }
    }
    let mut right = RealMatrix::zeros(n, n);
    for (dst, &(src, _)) in norms.iter().enumerate() {
        for i in 0..n {
            right[(i, dst)] = v.data[src * n + i];
        }
    }
    Ok(SvdResult {
        left_vectors: left,
        singular_values,
        right_vectors: right,
    })
}

/// Orthogonalizes the columns of `w` in place, accumulating rotations in `v`.
fn one_sided_jacobi(w: &mut Columns, v: &mut Columns) -> Result<()> {
    let n = w.data.len() / w.rows;
    let mut sq: Vec<f64> = (0..n).map(|j| dot(w.col(j), w.col(j))).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta) = (sq[p], sq[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(w.col(p), w.col(q));
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = w.pair_mut(p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = v.pair_mut(p, q);
                rotate(vp, vq, c, s);
                sq[p] = dot(wp, wp);
                sq[q] = dot(wq, wq);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS })
}

#[inline]
fn rotate(p: &mut [f64], q: &mut [f64], c: f64, s: f64) {
    for (x, y) in p.iter_mut().zip(q.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all others.
fn complete_basis(u: &mut Columns, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = u.rows;
    let n = u.data.len() / m;
    let mut candidate = 0usize;
    for &j in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt for numerical orthogonality.
            for _ in 0..2 {
                for k in 0..n {
                    if k == j || (missing.contains(&k) && u.col(k).iter().all(|x| *x == 0.0)) {
                        continue;
                    }
                    let d = dot(u.col(k), &e);
                    e.iter_mut().zip(u.col(k)).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                u.col_mut(j)
                    .iter_mut()
                    .zip(&e)
                    .for_each(|(o, x)| *o = x / norm);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RealMatrix::from_row_major(rows, cols, data).unwrap()
    }

    fn assert_orthonormal_columns(m: &RealMatrix, tol: f64) {
        let g = m.transpose().matmul(m).unwrap();
        let e = g.sub(&RealMatrix::identity(m.cols())).unwrap().max_abs();
        assert!(e < tol, "columns not orthonormal: {e:e}");
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let r = svd(&RealMatrix::identity(2)).unwrap();
        assert_eq!(r.singular_values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_with_zero() {
        let r = svd(&RealMatrix::diagonal(&[3.0, 0.0])).unwrap();
        assert!((r.singular_values[0] - 3.0).abs() < 1e-15);
        assert_eq!(r.singular_values[1], 0.0);
        assert_orthonormal_columns(&r.left_vectors, 1e-14);
        assert_orthonormal_columns(&r.right_vectors, 1e-14);
    }

    #[test]
    fn random_tall_reconstructs() {
        let a = random_matrix(5, 3, 11);
        let r = svd(&a).unwrap();
        let err = r.reconstruct().sub(&a).unwrap().max_abs();
        assert!(err < 1e-10, "{err:e}");
        assert_orthonormal_columns(&r.left_vectors, 1e-12);
        assert_orthonormal_columns(&r.right_vectors, 1e-12);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_matrix_via_transpose() {
        let a = random_matrix(3, 7, 12);
        let r = svd(&a).unwrap();
        assert_eq!(r.left_vectors.shape(), (3, 3));
        assert_eq!(r.right_vectors.shape(), (7, 3));
        assert!(r.reconstruct().sub(&a).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_completes_basis() {
        // Two identical columns and a zero column.
        let a = RealMatrix::from_rows(&[
            [1.0, 1.0, 0.0],
            [2.0, 2.0, 0.0],
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = svd(&a).unwrap();
        assert!(r.singular_values[1] < 1e-14);
        assert!(r.reconstruct().sub(&a).unwrap().max_abs() < 1e-13);
        assert_orthonormal_columns(&r.left_vectors, 1e-12);
        assert_orthonormal_columns(&r.right_vectors, 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = RealMatrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite(_))));
    }
}
