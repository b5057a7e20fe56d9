//! Discrete-time Riccati solution by value iteration, feedback-gain synthesis,
//! closed-loop spectra, and finite-horizon quadratic cost evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{self, Spectrum};

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 100_000;

/// Quadratic regulation problem: dynamics (A, B), state weight Q ⪰ 0, input
/// weight R ≻ 0.
#[derive(Debug, Clone)]
pub struct LqrProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LqrProblem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "LqrProblem: A must be square",
                expected: n,
                found: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "LqrProblem: B must have one row per state",
                expected: n,
                found: b.nrows(),
            });
        }
        let m = b.ncols();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "LqrProblem: Q must be n x n",
                expected: n,
                found: q.nrows().max(q.ncols()),
            });
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "LqrProblem: R must be m x m",
                expected: m,
                found: r.nrows().max(r.ncols()),
            });
        }
        check_symmetric(&q, "Q")?;
        check_symmetric(&r, "R")?;
        let q_min = q.clone().symmetric_eigenvalues().min();
        if q_min < -1e-10 {
            return Err(Error::InvalidParameter(format!(
                "Q must be positive semidefinite; smallest eigenvalue {q_min:.3e}"
            )));
        }
        let r_min = r.clone().symmetric_eigenvalues().min();
        if r_min <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "R must be positive definite; smallest eigenvalue {r_min:.3e}"
            )));
        }
        Ok(Self { a, b, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let skew = (m - m.transpose()).abs().max();
    if skew > 1e-10 * m.abs().max().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be symmetric; max asymmetry {skew:.3e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DareResult {
    /// Symmetric PSD fixed point of the Riccati map.
    pub p: DMatrix<f64>,
    /// Feedback gain; the control law is u = -F x.
    pub f: DMatrix<f64>,
    /// A - B F.
    pub closed_loop: DMatrix<f64>,
    /// Frobenius norm of the Riccati equation evaluated at the returned P.
    pub residual: f64,
    pub iterations: usize,
}

/// One Riccati step Aᵀ(P - P B (R + BᵀPB)⁻¹ BᵀP)A + Q, symmetrized to stop
/// roundoff drift from accumulating across iterations.
fn riccati_step(prob: &LqrProblem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let btp = prob.b.transpose() * p;
    let g = &prob.r + &btp * &prob.b;
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("R + BᵀPB is not invertible".into()))?;
    let inner = p - btp.transpose() * &g_inv * &btp;
    let next = prob.a.transpose() * inner * &prob.a + &prob.q;
    Ok((&next + next.transpose()) * 0.5)
}

/// Gain F = (R + BᵀPB)⁻¹ BᵀPA of the control law u = -F x.
pub fn lqr_gain(prob: &LqrProblem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let btp = prob.b.transpose() * p;
    let g = &prob.r + &btp * &prob.b;
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("R + BᵀPB is not invertible".into()))?;
    Ok(g_inv * btp * &prob.a)
}

/// Value iteration P ← Aᵀ(P - PB(R+BᵀPB)⁻¹BᵀP)A + Q started from P = Q, run
/// until the step shrinks below tol·max(1, ‖P‖_F). Non-convergence within
/// `max_iter` usually means the pair (A, B) is not stabilizable.
pub fn solve_dare(prob: &LqrProblem, tol: f64, max_iter: usize) -> Result<DareResult> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    let mut p = (&prob.q + prob.q.transpose()) * 0.5;
    let mut last_delta = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = riccati_step(prob, &p)?;
        last_delta = (&next - &p).norm();
        p = next;
        if last_delta <= tol * p.norm().max(1.0) {
            let f = lqr_gain(prob, &p)?;
            let closed_loop = &prob.a - &prob.b * &f;
            let residual = (riccati_step(prob, &p)? - &p).norm();
            return Ok(DareResult {
                p,
                f,
                closed_loop,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(Error::DareNonConvergence {
        max_iter,
        last_delta,
    })
}

#[derive(Debug, Clone)]
pub struct ClosedLoopAnalysis {
    pub closed_loop: DMatrix<f64>,
    pub spectrum: Spectrum,
    /// True when every closed-loop eigenvalue lies strictly inside the unit
    /// circle.
    pub stabilized: bool,
}

/// Spectrum and stability verdict of the true plant under a (possibly
/// estimated) feedback gain: A - B F.
pub fn closed_loop_analysis(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<ClosedLoopAnalysis> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "closed_loop_analysis: A must be square",
            expected: n,
            found: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "closed_loop_analysis: B rows",
            expected: n,
            found: b.nrows(),
        });
    }
    if f.nrows() != b.ncols() || f.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "closed_loop_analysis: F must be m x n",
            expected: b.ncols() * n,
            found: f.nrows() * f.ncols(),
        });
    }
    let closed_loop = a - b * f;
    let spectrum = spectral::eigenvalues(&closed_loop)?;
    let stabilized = spectrum.radius < 1.0;
    Ok(ClosedLoopAnalysis {
        closed_loop,
        spectrum,
        stabilized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrCost {
    /// Accumulated cost; +infinity when the closed loop diverges.
    pub value: f64,
    pub diverged: bool,
}

/// Finite-horizon cost Σ x(k)ᵀQx(k) + u(k)ᵀRu(k) under u = -F x. A closed
/// loop with spectral radius ≥ 1 makes the infinite-horizon target infinite
/// for generic x0, so it is reported as a flagged +infinity sentinel rather
/// than a misleading partial sum; x0 = 0 costs exactly zero either way.
pub fn lqr_cost(
    prob: &LqrProblem,
    x0: &DVector<f64>,
    f: &DMatrix<f64>,
    horizon: usize,
) -> Result<LqrCost> {
    let n = prob.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "lqr_cost: x0 dimension",
            expected: n,
            found: x0.len(),
        });
    }
    if f.nrows() != prob.input_dim() || f.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "lqr_cost: F must be m x n",
            expected: prob.input_dim() * n,
            found: f.nrows() * f.ncols(),
        });
    }
    if x0.norm() == 0.0 {
        return Ok(LqrCost {
            value: 0.0,
            diverged: false,
        });
    }
    let closed_loop = &prob.a - &prob.b * f;
    if spectral::spectral_radius(&closed_loop)? >= 1.0 {
        return Ok(LqrCost {
            value: f64::INFINITY,
            diverged: true,
        });
    }
    let mut x = x0.clone();
    let mut total = 0.0;
    for _ in 0..horizon {
        let u = -(f * &x);
        total += (x.transpose() * &prob.q * &x)[(0, 0)] + (u.transpose() * &prob.r * &u)[(0, 0)];
        x = &closed_loop * &x;
    }
    if !total.is_finite() {
        return Ok(LqrCost {
            value: f64::INFINITY,
            diverged: true,
        });
    }
    Ok(LqrCost {
        value: total,
        diverged: false,
    })
}
