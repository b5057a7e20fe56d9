//! Prediction-error functionals: per-step error trajectories, cumulative and
//! tail error energies, an exponential-decay diagnostic, and distances between
//! true and estimated system matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{self, Spectrum};

/// Floor applied inside the decay fit so errors that underflow to zero do not
/// produce `-inf` logarithms.
const LOG_FLOOR: f64 = 1e-300;

/// First step of the decay-fit window, chosen to skip initial transients. For
/// short runs the window start shrinks to half the horizon so that at least
/// two fit points remain.
const DECAY_FIT_START: usize = 10;

/// Distance between two equally sized matrices in the norms the reports use.
#[derive(Debug, Clone)]
pub struct MatrixDistance {
    /// Largest absolute entry of the difference.
    pub max_abs: f64,
    /// Frobenius norm of the difference.
    pub frobenius: f64,
    /// Eigenvalues of the difference matrix.
    pub error_spectrum: Spectrum,
}

/// Error summary of a predicted trajectory against the true one.
///
/// Step 0 is excluded from every energy: both trajectories start from the
/// same initial state in the intended use, and keeping the convention
/// unconditional preserves `tail_energy <= full_energy` for nested windows.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Per-step errors e(k) = x(k) - x_hat(k), index 0 included.
    pub errors: Vec<DVector<f64>>,
    /// Euclidean norms of the per-step errors.
    pub error_norms: Vec<f64>,
    /// sqrt(sum over k = 1..K of ||e(k)||^2).
    pub full_energy: f64,
    /// Same sum taken per state component.
    pub full_energy_per_component: Vec<f64>,
    /// First step of the tail window (clipped to [1, K]).
    pub tail_start: usize,
    /// sqrt(sum over k = tail_start..K of ||e(k)||^2).
    pub tail_energy: f64,
    /// Tail sum taken per state component.
    pub tail_energy_per_component: Vec<f64>,
    /// Fitted per-step decay factor rho from a least-squares line through
    /// (k, ln ||e(k)||) past the transient window; `None` when fewer than two
    /// points are available.
    pub decay_rate: Option<f64>,
    /// Distance between the true and estimated system matrices, attached by
    /// callers that know both (see [`matrix_distance`]).
    pub matrix_error: Option<MatrixDistance>,
}

impl ErrorReport {
    pub fn with_matrix_error(mut self, distance: MatrixDistance) -> Self {
        self.matrix_error = Some(distance);
        self
    }
}

/// Energy sqrt(sum ||e(k)||^2) and its per-component split over `window`.
fn energy_over(
    errors: &[DVector<f64>],
    window: std::ops::RangeInclusive<usize>,
    dim: usize,
) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut per_component = vec![0.0; dim];
    for k in window {
        let e = &errors[k];
        total += e.norm_squared();
        for (acc, v) in per_component.iter_mut().zip(e.iter()) {
            *acc += v * v;
        }
    }
    (
        total.sqrt(),
        per_component.into_iter().map(f64::sqrt).collect(),
    )
}

/// Slope of the least-squares line through (k, ln max(||e(k)||, floor)),
/// exponentiated to a per-step factor. `None` with fewer than two points.
fn fit_decay_rate(error_norms: &[f64]) -> Option<f64> {
    let last = error_norms.len().checked_sub(1)?;
    let start = DECAY_FIT_START.min(last / 2).max(1);
    if last < start + 1 {
        return None;
    }
    let points: Vec<(f64, f64)> = (start..=last)
        .map(|k| (k as f64, error_norms[k].max(LOG_FLOOR).ln()))
        .collect();
    let n = points.len() as f64;
    let mean_k = points.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (k, y) in &points {
        cov += (k - mean_k) * (y - mean_y);
        var += (k - mean_k) * (k - mean_k);
    }
    Some((cov / var).exp())
}

/// Compares a predicted state sequence against the true one.
///
/// Energies run over steps 1..K; the tail window starts at `tail_start`
/// (values of 0 behave like 1, values past the end give an empty window with
/// zero energy).
pub fn compare_trajectories(
    truth: &[DVector<f64>],
    predicted: &[DVector<f64>],
    tail_start: usize,
) -> Result<ErrorReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            context: "trajectory comparison: step counts",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidParameter(
            "trajectory comparison: empty trajectories".into(),
        ));
    }
    let dim = truth[0].len();
    for (x, x_hat) in truth.iter().zip(predicted) {
        if x.len() != dim || x_hat.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "trajectory comparison: state dimension",
                expected: dim,
                found: if x.len() != dim { x.len() } else { x_hat.len() },
            });
        }
    }

    let errors: Vec<DVector<f64>> = truth
        .iter()
        .zip(predicted)
        .map(|(x, x_hat)| x - x_hat)
        .collect();
    let error_norms: Vec<f64> = errors.iter().map(|e| e.norm()).collect();
    let last = errors.len() - 1;

    let (full_energy, full_energy_per_component) = energy_over(&errors, 1..=last, dim);
    let clipped_start = tail_start.max(1);
    let (tail_energy, tail_energy_per_component) = if clipped_start > last {
        (0.0, vec![0.0; dim])
    } else {
        energy_over(&errors, clipped_start..=last, dim)
    };
    let decay_rate = fit_decay_rate(&error_norms);

    Ok(ErrorReport {
        errors,
        error_norms,
        full_energy,
        full_energy_per_component,
        tail_start,
        tail_energy,
        tail_energy_per_component,
        decay_rate,
        matrix_error: None,
    })
}

/// Entrywise and Frobenius distance between two square matrices, along with
/// the eigenvalues of their difference.
pub fn matrix_distance(a: &DMatrix<f64>, a_hat: &DMatrix<f64>) -> Result<MatrixDistance> {
    if a.nrows() != a_hat.nrows() || a.ncols() != a_hat.ncols() {
        return Err(Error::DimensionMismatch {
            context: "matrix distance: shapes",
            expected: a.nrows() * a.ncols(),
            found: a_hat.nrows() * a_hat.ncols(),
        });
    }
    let diff = a - a_hat;
    let max_abs = diff.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let frobenius = diff.norm();
    let error_spectrum = spectral::eigenvalues(&diff)?;
    Ok(MatrixDistance {
        max_abs,
        frobenius,
        error_spectrum,
    })
}
