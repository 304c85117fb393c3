//! Memory-polynomial post-distorter `x_n = sum_k sum_m a*_{k,m} y_{n-m}^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, RealMatrix};

/// Coefficients are laid out like the regressor: power `k` varies fastest,
/// lag `m` slowest, i.e. `[a_{1,0}, a_{2,0}, .., a_{K,0}, a_{1,1}, ..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPostDistorter {
    pub order: usize,
    pub memory: usize,
    pub coeffs: Vec<f64>,
    /// Condition number of `R^T R` on the training data, when measured.
    pub condition_number: Option<f64>,
}

/// Regressor `r_n = [y_n, y_n^2, .., y_n^K, .., y_{n-M}, .., y_{n-M}^K]`,
/// zeros before the start of `y`.
pub fn regressor_row(y: &[f64], n: usize, order: usize, memory: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), order * (memory + 1));
    for m in 0..=memory {
        let v = if n >= m { y[n - m] } else { 0.0 };
        let mut p = 1.0;
        for k in 0..order {
            p *= v;
            out[m * order + k] = p;
        }
    }
}

pub fn regressor_matrix(y: &[f64], order: usize, memory: usize) -> RealMatrix {
    let width = order * (memory + 1);
    let mut r = RealMatrix::zeros(y.len(), width);
    for n in 0..y.len() {
        regressor_row(y, n, order, memory, r.row_mut(n));
    }
    r
}

fn check_training(y: &[f64], x: &[f64], order: usize, memory: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "polynomial order must be >= 1".into(),
        ));
    }
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} received vs {} training symbols",
            y.len(),
            x.len()
        )));
    }
    if y.len() <= order * (memory + 1) {
        return Err(Error::InvalidParameter(format!(
            "training length {} must exceed {} coefficients",
            y.len(),
            order * (memory + 1)
        )));
    }
    Ok(())
}

impl PolyPostDistorter {
    /// Least-squares coefficients through the SVD pseudo-inverse of `R`;
    /// the condition number of `R^T R` is kept as a diagnostic.
    pub fn train_ls(y_train: &[f64], x_train: &[f64], order: usize, memory: usize) -> Result<Self> {
        check_training(y_train, x_train, order, memory)?;
        let r = regressor_matrix(y_train, order, memory);
        let s = numerics::svd(&r)?;
        let (max, min) = (s.max_singular_value(), s.min_singular_value());
        let condition = if min > 0.0 {
            (max / min).powi(2)
        } else {
            f64::INFINITY
        };
        // Singular to working precision: no meaningful solution.
        if max == 0.0 || min <= f64::EPSILON * max * r.rows().max(r.cols()) as f64 {
            return Err(Error::DegenerateRegressor { condition });
        }
        let pinv = numerics::pinv_from_svd(&s, numerics::default_rel_tol(r.rows(), r.cols()));
        let coeffs = pinv.mul_vec(x_train)?;
        Ok(Self {
            order,
            memory,
            coeffs,
            condition_number: Some(condition),
        })
    }

    /// Exponentially weighted RLS over the regressor rows, started from
    /// `a = 0`, `P = I / delta`. Also measures the condition number of `R^T R`.
    pub fn train_rls(
        y_train: &[f64],
        x_train: &[f64],
        order: usize,
        memory: usize,
        forgetting: f64,
        delta: f64,
    ) -> Result<Self> {
        check_training(y_train, x_train, order, memory)?;
        if !(0.9..=1.0).contains(&forgetting) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor {forgetting} outside [0.9, 1]"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("RLS delta {delta}")));
        }
        let width = order * (memory + 1);
        let mut a = vec![0.0; width];
        let mut p = RealMatrix::identity(width).scale(1.0 / delta);
        let mut r = vec![0.0; width];
        let mut pr = vec![0.0; width];
        for n in 0..y_train.len() {
            regressor_row(y_train, n, order, memory, &mut r);
            for (i, o) in pr.iter_mut().enumerate() {
                *o = p.row(i).iter().zip(&r).map(|(u, v)| u * v).sum();
            }
            let denom = forgetting + r.iter().zip(&pr).map(|(u, v)| u * v).sum::<f64>();
            let err = x_train[n] - r.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>();
            let gain: Vec<f64> = pr.iter().map(|v| v / denom).collect();
            for (ai, gi) in a.iter_mut().zip(&gain) {
                *ai += gi * err;
            }
            // P <- (P - k (P r)^T) / lambda; P stays symmetric in exact arithmetic.
            for i in 0..width {
                let row = p.row_mut(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (*v - gain[i] * pr[j]) / forgetting;
                }
            }
        }
        let condition = numerics::condition_number(&regressor_matrix(y_train, order, memory))
            .map(|c| c * c)
            .ok();
        Ok(Self {
            order,
            memory,
            coeffs: a,
            condition_number: condition,
        })
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.coeffs.len()];
        (0..y.len())
            .map(|n| {
                regressor_row(y, n, self.order, self.memory, &mut r);
                r.iter().zip(&self.coeffs).map(|(u, v)| u * v).sum()
            })
            .collect()
    }
}
