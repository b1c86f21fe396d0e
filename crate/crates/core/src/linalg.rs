//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};

/// Refuse linear solves above this 2-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;

pub fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// LU factorization guarded by a condition estimate.
pub struct GuardedLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

impl GuardedLu {
    pub fn new(m: &DMatrix<f64>, what: &str) -> Result<Self> {
        let condition = condition_number(m);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(GeomError::regularity(
                condition,
                format!("{what} is singular or ill-conditioned"),
            ));
        }
        Ok(GuardedLu {
            lu: m.clone().lu(),
            condition,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("nonsingular by construction")
    }

    pub fn solve_slice(&self, b: &[f64]) -> Vec<f64> {
        self.solve(&DVector::from_column_slice(b)).iter().copied().collect()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.lu.try_inverse().expect("nonsingular by construction")
    }
}

/// Counts of positive and negative eigenvalues of a symmetric matrix.
pub fn signature(m: &DMatrix<f64>) -> (usize, usize) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let pos = eig.iter().filter(|&&e| e > tol).count();
    let neg = eig.iter().filter(|&&e| e < -tol).count();
    (pos, neg)
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
