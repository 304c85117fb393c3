//! Dense linear algebra used by every training path: SVD, Moore-Penrose
//! pseudo-inverse, least squares and total least squares.

mod matrix;
mod svd;

pub use matrix::RealMatrix;
pub use svd::{svd, SvdResult};

use crate::error::{Error, Result};

/// `theta22` is treated as singular below this smallest/largest singular value ratio.
pub const TLS_SINGULAR_RATIO: f64 = 1e-10;

/// Default relative truncation threshold for a matrix of the given shape.
pub fn default_rel_tol(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

/// Moore-Penrose pseudo-inverse; singular values at or below
/// `rel_tol * sigma_max` are treated as zero.
pub fn pinv(a: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must be positive, got {rel_tol}"
        )));
    }
    let s = svd(a)?;
    Ok(pinv_from_svd(&s, rel_tol))
}

/// Pseudo-inverse with the default threshold.
pub fn pinv_default(a: &RealMatrix) -> Result<RealMatrix> {
    pinv(a, default_rel_tol(a.rows(), a.cols()))
}

pub fn pinv_from_svd(s: &SvdResult, rel_tol: f64) -> RealMatrix {
    let m = s.left_vectors.rows();
    let n = s.right_vectors.rows();
    let cutoff = rel_tol * s.max_singular_value();
    let mut out = RealMatrix::zeros(n, m);
    for (k, &sv) in s.singular_values.iter().enumerate() {
        if sv <= cutoff || sv == 0.0 {
            continue;
        }
        let inv = 1.0 / sv;
        for i in 0..n {
            let vi = s.right_vectors[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            let row = out.row_mut(i);
            for (j, o) in row.iter_mut().enumerate() {
                *o += vi * s.left_vectors[(j, k)];
            }
        }
    }
    out
}

/// Minimum-norm least-squares solution of `a x = y` (`y` may have several columns).
pub fn solve_ls(a: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    if a.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "solve_ls: a has {} rows, y has {}",
            a.rows(),
            y.rows()
        )));
    }
    pinv_default(a)?.matmul(y)
}

/// Total least squares solution of `h beta ~ y`.
///
/// Takes the SVD `[h y] = U S Theta^T`, partitions `Theta` into
/// `[[t11, t12], [t21, t22]]` with `t12` of shape `cols(h) x cols(y)` and
/// `t22` of shape `cols(y) x cols(y)`, and returns `-t12 t22^{-1}`. The block
/// layout already yields `beta` with one column per target, so no transpose
/// is needed for multi-output problems.
pub fn tls_solve(h: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    if h.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "tls_solve: h has {} rows, y has {}",
            h.rows(),
            y.rows()
        )));
    }
    let n = h.cols();
    let q = y.cols();
    let mut c = h.hcat(y)?;
    if c.rows() < n + q {
        // Zero rows leave the right singular subspace unchanged and make Theta square.
        c = c.vcat(&RealMatrix::zeros(n + q - c.rows(), n + q))?;
    }
    let s = svd(&c)?;
    let theta = &s.right_vectors;
    let t12 = theta.block(0, n, n, q);
    let t22 = theta.block(n, n, q, q);

    let t22_svd = svd(&t22)?;
    // Theta is orthonormal, so the singular values of t22 lie in [0, 1]. The
    // tolerance is relative to that unit scale; a ratio against t22's own
    // largest value would be identically 1 for a single target.
    let ratio = t22_svd.min_singular_value() / t22_svd.max_singular_value().max(1.0);
    if ratio < TLS_SINGULAR_RATIO {
        return Err(Error::TlsNoSolution { ratio });
    }
    // t22 is well conditioned here, so its pseudo-inverse is the inverse.
    let t22_inv = pinv_from_svd(&t22_svd, f64::EPSILON);
    Ok(t12.matmul(&t22_inv)?.scale(-1.0))
}

/// Truncated total least squares. The `rank` leading right singular vectors
/// of `[h y]` span the signal subspace; the solution is the minimum-norm
/// `-t12 pinv(t22)` built from the remaining ones. `rank = cols(h)` is plain
/// TLS.
pub fn tls_solve_truncated(h: &RealMatrix, y: &RealMatrix, rank: usize) -> Result<RealMatrix> {
    if h.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "tls_solve_truncated: h has {} rows, y has {}",
            h.rows(),
            y.rows()
        )));
    }
    let n = h.cols();
    let q = y.cols();
    if rank > n {
        return Err(Error::InvalidParameter(format!(
            "truncation rank {rank} exceeds {n} regressor columns"
        )));
    }
    let mut c = h.hcat(y)?;
    if c.rows() < n + q {
        c = c.vcat(&RealMatrix::zeros(n + q - c.rows(), n + q))?;
    }
    let s = svd(&c)?;
    let width = n + q - rank;
    let t12 = s.right_vectors.block(0, rank, n, width);
    let t22 = s.right_vectors.block(n, rank, q, width);
    let t22_svd = svd(&t22.transpose())?;
    let ratio = t22_svd.min_singular_value() / t22_svd.max_singular_value().max(1.0);
    if ratio < TLS_SINGULAR_RATIO {
        return Err(Error::TlsNoSolution { ratio });
    }
    let t22_pinv = pinv_from_svd(&t22_svd, f64::EPSILON).transpose();
    Ok(t12.matmul(&t22_pinv)?.scale(-1.0))
}

/// Truncation rank for [`tls_solve_truncated`] from a noise level: singular
/// values of `[h y]` at or below `noise_std * (sqrt(rows) + sqrt(cols))`, the
/// typical largest singular value of an i.i.d. noise matrix of that shape,
/// are treated as noise. Capped at `cols(h)`.
pub fn tls_noise_rank(h: &RealMatrix, y: &RealMatrix, noise_std: f64) -> Result<usize> {
    let c = h.hcat(y)?;
    let s = svd(&c)?;
    let floor = noise_std * ((c.rows() as f64).sqrt() + (c.cols() as f64).sqrt());
    Ok(s.singular_values
        .iter()
        .filter(|&&v| v > floor)
        .count()
        .min(h.cols()))
}

/// Condition number `sigma_max / sigma_min` (infinite when rank deficient).
pub fn condition_number(a: &RealMatrix) -> Result<f64> {
    let s = svd(a)?;
    let min = s.min_singular_value();
    Ok(if min > 0.0 {
        s.max_singular_value() / min
    } else {
        f64::INFINITY
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RealMatrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn pinv_scalar() {
        let p = pinv(&RealMatrix::from_rows(&[[2.0]]).unwrap(), 1e-12).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pinv_identity() {
        let p = pinv_default(&RealMatrix::identity(4)).unwrap();
        assert!(p.sub(&RealMatrix::identity(4)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn pinv_tall_column() {
        let p = pinv_default(&RealMatrix::from_rows(&[[1.0], [1.0]]).unwrap()).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((p[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pinv_rejects_bad_tolerance() {
        assert!(pinv(&RealMatrix::identity(2), 0.0).is_err());
        assert!(pinv(&RealMatrix::identity(2), f64::NAN).is_err());
    }

    #[test]
    fn solve_ls_identity_returns_rhs() {
        let y = RealMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5], [7.0, 1.0]]).unwrap();
        let x = solve_ls(&RealMatrix::identity(3), &y).unwrap();
        assert!(x.sub(&y).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn solve_ls_consistent_overdetermined() {
        let a = RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let y = RealMatrix::column_vector(&[2.0, -1.0, 1.0]);
        let x = solve_ls(&a, &y).unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-13);
        assert!((x[(1, 0)] + 1.0).abs() < 1e-13);
        let resid = a.matmul(&x).unwrap().sub(&y).unwrap().max_abs();
        assert!(resid < 1e-13);
    }

    #[test]
    fn solve_ls_dimension_mismatch() {
        let r = solve_ls(&RealMatrix::identity(3), &RealMatrix::zeros(2, 1));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn tls_matches_ls_on_consistent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_matrix(30, 4, &mut rng);
        let beta = random_matrix(4, 2, &mut rng);
        let y = h.matmul(&beta).unwrap();
        let tls = tls_solve(&h, &y).unwrap();
        let ls = solve_ls(&h, &y).unwrap();
        assert!(tls.sub(&ls).unwrap().max_abs() < 1e-8);
        assert!(tls.sub(&beta).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn tls_degenerate_fails() {
        // y is orthogonal to everything h can reach and h has a null direction,
        // so the smallest right singular vector has no y component.
        let h = RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
        let y = RealMatrix::column_vector(&[0.0, 5.0, 0.0]);
        assert!(matches!(
            tls_solve(&h, &y),
            Err(Error::TlsNoSolution { .. })
        ));
    }

    #[test]
    fn condition_number_of_diagonal() {
        let c = condition_number(&RealMatrix::diagonal(&[4.0, 0.5])).unwrap();
        assert!((c - 8.0).abs() < 1e-12);
        assert!(condition_number(&RealMatrix::diagonal(&[1.0, 0.0]))
            .unwrap()
            .is_infinite());
    }
}
