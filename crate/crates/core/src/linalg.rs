//! Dense direct solves and norm/conditioning helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold below which the LU path is abandoned for QR.
const PIVOT_RTOL: f64 = 1e-14;

/// Outcome of [`solve`]: the solution plus the 1-norm condition number of the
/// system matrix (`f64::INFINITY` when the matrix is not invertible).
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: DVector<f64>,
    pub condition: f64,
}

/// Operator 1-norm (maximum absolute column sum).
pub fn norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number computed from the explicit inverse.
///
/// Matrices in scope are at most a few hundred rows, so the extra O(n^3) of
/// forming the inverse is cheaper than maintaining a separate estimator and is
/// exact rather than a lower bound.
pub fn condition_1(m: &DMatrix<f64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => norm_1(m) * norm_1(&inv),
        None => f64::INFINITY,
    }
}

/// Solves `m x = rhs` by LU with partial pivoting, falling back to QR when the
/// smallest LU pivot drops below `1e-14 * ||m||_1`.
pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<SolveOutcome> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "solve: system matrix must be square",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch {
            context: "solve: right-hand side length",
            expected: m.nrows(),
            found: rhs.len(),
        });
    }

    let scale = norm_1(m);
    let condition = condition_1(m);

    let lu = m.clone().lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);

    if min_pivot >= PIVOT_RTOL * scale {
        if let Some(solution) = lu.solve(rhs) {
            return Ok(SolveOutcome {
                solution,
                condition,
            });
        }
    }

    // QR fallback for systems the LU pivoting rejected.
    let qr = m.clone().qr();
    match qr.solve(rhs) {
        Some(solution) if solution.iter().all(|v| v.is_finite()) => Ok(SolveOutcome {
            solution,
            condition,
        }),
        _ => Err(Error::SingularSystem(format!(
            "LU pivot {min_pivot:.3e} below {PIVOT_RTOL:.0e}*||M||_1 and QR solve failed"
        ))),
    }
}

/// Above this dimension [`spectral_norm`] switches from a dense SVD to power
/// iteration on the normal operator, which avoids the O(n^3) factorization.
const POWER_ITERATION_CROSSOVER: usize = 256;

/// Relative tolerance for the power-iteration estimate of the top singular value.
const POWER_ITERATION_RTOL: f64 = 1e-10;

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) <= POWER_ITERATION_CROSSOVER {
        m.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max)
    } else {
        power_iteration_norm(m)
    }
}

/// Power iteration on `m^T m`; the slight index-dependent tilt in the start
/// vector keeps it from being orthogonal to the top singular direction.
fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * i as f64);
    v /= v.norm();
    let mut sigma = 0.0f64;
    for _ in 0..10_000 {
        let w = m.transpose() * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let next = (m * &v).norm();
        if (next - sigma).abs() <= POWER_ITERATION_RTOL * next.max(1.0) {
            return next;
        }
        sigma = next;
    }
    sigma
}
