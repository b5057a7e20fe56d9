//! Kernel functions, Gram matrices, and the regularized least-squares solver
//! behind every identification step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Condition estimate beyond which a ridge system is rejected as numerically
/// singular.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Euclidean inner product <x, y>.
    Linear,
    /// (1 + <x, y>)^degree
    Polynomial { degree: u32 },
    /// exp(-||x - y||^2 / width^2)
    Gaussian { width: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree } => {
                if degree >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "polynomial degree must be >= 1".into(),
                    ))
                }
            }
            KernelSpec::Gaussian { width } => {
                if width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "gaussian width must be positive and finite, got {width}"
                    )))
                }
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel_eval: point dimensions",
            expected: x.len(),
            found: y.len(),
        });
    }
    spec.validate()?;
    Ok(match *spec {
        KernelSpec::Linear => x.dot(y),
        KernelSpec::Polynomial { degree } => (1.0 + x.dot(y)).powi(degree as i32),
        KernelSpec::Gaussian { width } => {
            let d2 = (x - y).norm_squared();
            (-d2 / (width * width)).exp()
        }
    })
}

/// Matrix of kernel evaluations, entry (i, j) = K(rows[i], cols[j]).
pub fn gram(
    spec: &KernelSpec,
    rows: &[DVector<f64>],
    cols: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut g = DMatrix::zeros(rows.len(), cols.len());
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            g[(i, j)] = kernel_eval(spec, r, c)?;
        }
    }
    Ok(g)
}

/// A regularized least-squares fit: find coefficients c over the expansion
/// points such that f = sum_j c_j K(expansion_j, .) matches `targets` at the
/// evaluation points, solving (N gamma I + K) c = targets with
/// K[k][j] = K(evaluation[k], expansion[j]) and N = `sample_count`.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub expansion_points: Vec<DVector<f64>>,
    pub evaluation_points: Vec<DVector<f64>>,
    pub targets: DVector<f64>,
    pub gamma: f64,
    pub sample_count: usize,
}

impl RidgeProblem {
    /// Expansion set equal to the evaluation set; the Gram matrix is symmetric
    /// positive semidefinite for any Mercer kernel.
    pub fn symmetric(points: Vec<DVector<f64>>, targets: DVector<f64>, gamma: f64) -> Self {
        let n = points.len();
        Self {
            expansion_points: points.clone(),
            evaluation_points: points,
            targets,
            gamma,
            sample_count: n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.evaluation_points.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if self.evaluation_points.len() != self.targets.len() {
            return Err(Error::DimensionMismatch {
                context: "RidgeProblem: targets length must match evaluation points",
                expected: self.evaluation_points.len(),
                found: self.targets.len(),
            });
        }
        if self.expansion_points.len() != self.evaluation_points.len() {
            return Err(Error::DimensionMismatch {
                context: "RidgeProblem: expansion and evaluation sets must have equal size",
                expected: self.evaluation_points.len(),
                found: self.expansion_points.len(),
            });
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        let d = self.expansion_points[0].len();
        if self
            .expansion_points
            .iter()
            .chain(self.evaluation_points.iter())
            .any(|p| p.len() != d)
        {
            return Err(Error::DimensionMismatch {
                context: "RidgeProblem: all points must share one dimension",
                expected: d,
                found: 0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub coefficients: DVector<f64>,
    pub expansion_points: Vec<DVector<f64>>,
    pub kernel: KernelSpec,
    pub gamma: f64,
    /// 1-norm condition number of (N gamma I + K).
    pub condition_estimate: f64,
}

impl RidgeSolution {
    /// Value of the fitted expansion at `x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (c, p) in self.coefficients.iter().zip(&self.expansion_points) {
            acc += c * kernel_eval(&self.kernel, p, x)?;
        }
        Ok(acc)
    }

    /// For the linear kernel the fit is the linear functional
    /// x -> <w, x> with w = sum_j c_j expansion_j; returns w.
    pub fn linear_weights(&self) -> DVector<f64> {
        let d = self.expansion_points.first().map_or(0, |p| p.len());
        let mut w = DVector::zeros(d);
        for (c, p) in self.coefficients.iter().zip(&self.expansion_points) {
            w.axpy(*c, p, 1.0);
        }
        w
    }
}

/// Solves (N gamma I + K) c = targets by dense LU (QR fallback), rejecting
/// systems whose 1-norm condition exceeds [`CONDITION_LIMIT`].
pub fn ridge_solve(problem: &RidgeProblem, kernel: &KernelSpec) -> Result<RidgeSolution> {
    problem.validate()?;
    let k = gram(
        kernel,
        &problem.evaluation_points,
        &problem.expansion_points,
    )?;
    let n_gamma = problem.sample_count as f64 * problem.gamma;
    let mut system = k;
    for i in 0..system.nrows() {
        system[(i, i)] += n_gamma;
    }
    let out = linalg::solve(&system, &problem.targets)?;
    if !out.condition.is_finite() || out.condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            estimate: out.condition,
            limit: CONDITION_LIMIT,
        });
    }
    Ok(RidgeSolution {
        coefficients: out.solution,
        expansion_points: problem.expansion_points.clone(),
        kernel: *kernel,
        gamma: problem.gamma,
        condition_estimate: out.condition,
    })
}
