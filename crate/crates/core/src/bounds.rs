//! Computable finite-sample error bound for the kernel ridge estimator.
//!
//! The bound is governed by the rate function `alpha(u) = (u - 1) ln u`: the
//! high-probability sample error is `kappa * sigma_w^2 * alpha_inverse(arg)`
//! where `arg` collects the operator norms of the weighted sampling operator,
//! the noise amplitude bound and the confidence level.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec, RidgeProblem};
use crate::linalg::spectral_norm;

/// Residual tolerance of the bisection in [`alpha_inverse`]:
/// `|alpha(u) - v| <= ALPHA_TOL * max(1, v)`.
const ALPHA_TOL: f64 = 1e-12;

/// Unchecked evaluation of `(u - 1) ln u`, shared by [`alpha`] and the
/// bisection loop.
fn alpha_value(u: f64) -> f64 {
    (u - 1.0) * u.ln()
}

/// Rate function `alpha(u) = (u - 1) ln u`, strictly increasing on `(1, inf)`
/// with limit 0 at `u -> 1+`.
pub fn alpha(u: f64) -> Result<f64> {
    if !u.is_finite() || u <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha is defined for u > 1, got {u}"
        )));
    }
    Ok(alpha_value(u))
}

/// Inverse of [`alpha`]: the unique `u >= 1` with `(u - 1) ln u = v`.
///
/// Bracketing bisection starting from `[1 + 1e-12, max(2, v/ln 2 + 2)]`; the
/// upper end is doubled until the bracket contains the root, then halved until
/// the residual drops below `1e-12 * max(1, v)` (or the bracket collapses to
/// rounding width, whichever comes first).
pub fn alpha_inverse(v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha_inverse is defined for v >= 0, got {v}"
        )));
    }
    if v == 0.0 {
        return Ok(1.0);
    }

    let mut lo = 1.0 + 1e-12;
    if alpha_value(lo) >= v {
        // The root sits between 1 and the lower bracket end; lo already
        // satisfies the residual tolerance for such tiny v.
        return Ok(lo);
    }
    let mut hi = (v / std::f64::consts::LN_2 + 2.0).max(2.0);
    while alpha_value(hi) < v {
        hi *= 2.0;
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let a = alpha_value(mid);
        if (a - v).abs() <= ALPHA_TOL * v.max(1.0) {
            return Ok(mid);
        }
        if a < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inputs of [`sample_error_bound`]: Gram blocks over the expansion set `t`
/// and the sample set `x`, per-sample weights and noise amplitude bounds, the
/// ridge weight, the weighted noise variance and the confidence level.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    /// Gram matrix of the expansion points with themselves (square).
    pub k_tt: DMatrix<f64>,
    /// Gram matrix coupling expansion points (rows) to sample points (columns).
    pub k_tx: DMatrix<f64>,
    /// Positive weight per sample point.
    pub weights: Vec<f64>,
    /// Ridge weight, strictly positive.
    pub gamma: f64,
    /// Per-sample noise amplitude bound (each noise vector lies in a box of
    /// this half-width).
    pub noise_bounds: Vec<f64>,
    /// Weighted noise variance `sum_x w_x sigma_x^2`.
    pub sigma_w_sq: f64,
    /// Confidence level in (0, 1); the bound holds with probability 1 - delta.
    pub delta: f64,
}

impl BoundInputs {
    pub fn new(
        k_tt: DMatrix<f64>,
        k_tx: DMatrix<f64>,
        weights: Vec<f64>,
        gamma: f64,
        noise_bounds: Vec<f64>,
        sigma_w_sq: f64,
        delta: f64,
    ) -> Result<Self> {
        let inputs = Self {
            k_tt,
            k_tx,
            weights,
            gamma,
            noise_bounds,
            sigma_w_sq,
            delta,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Derives the inputs from a ridge problem: the expansion points form the
    /// `t` set, the evaluation points the sample set, the weights default to
    /// `1/m` uniform, every noise bound to `noise_amplitude`, and the weighted
    /// variance to `amplitude^2 / 3` (variance of a uniform draw on [-M, M]).
    pub fn from_ridge(
        problem: &RidgeProblem,
        kernel: &KernelSpec,
        noise_amplitude: f64,
        delta: f64,
    ) -> Result<Self> {
        if !noise_amplitude.is_finite() || noise_amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise amplitude must be finite and nonnegative, got {noise_amplitude}"
            )));
        }
        let m = problem.evaluation_points.len();
        if m == 0 {
            return Err(Error::InvalidParameter(
                "ridge problem has no evaluation points".into(),
            ));
        }
        let k_tt = gram(kernel, &problem.expansion_points, &problem.expansion_points)?;
        let k_tx = gram(
            kernel,
            &problem.expansion_points,
            &problem.evaluation_points,
        )?;
        Self::new(
            k_tt,
            k_tx,
            vec![1.0 / m as f64; m],
            problem.gamma,
            vec![noise_amplitude; m],
            noise_amplitude * noise_amplitude / 3.0,
            delta,
        )
    }

    /// Weighted noise-amplitude bound `B_w = sqrt(sum_x w_x M_x^2)`.
    pub fn b_w(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.noise_bounds)
            .map(|(w, m)| w * m * m)
            .sum::<f64>()
            .sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_tt.nrows() != self.k_tt.ncols() {
            return Err(Error::DimensionMismatch {
                context: "bound inputs: expansion Gram matrix must be square",
                expected: self.k_tt.nrows(),
                found: self.k_tt.ncols(),
            });
        }
        if self.k_tx.nrows() != self.k_tt.nrows() {
            return Err(Error::DimensionMismatch {
                context: "bound inputs: coupling Gram rows must match expansion set",
                expected: self.k_tt.nrows(),
                found: self.k_tx.nrows(),
            });
        }
        if self.weights.len() != self.k_tx.ncols() {
            return Err(Error::DimensionMismatch {
                context: "bound inputs: one weight per sample point",
                expected: self.k_tx.ncols(),
                found: self.weights.len(),
            });
        }
        if self.noise_bounds.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "bound inputs: one noise bound per sample point",
                expected: self.weights.len(),
                found: self.noise_bounds.len(),
            });
        }
        if self.weights.is_empty() {
            return Err(Error::InvalidParameter(
                "bound inputs: empty sample set".into(),
            ));
        }
        if self
            .k_tt
            .iter()
            .chain(self.k_tx.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "bound inputs: Gram matrices must be finite".into(),
            ));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidParameter(
                "bound inputs: weights must be finite and strictly positive".into(),
            ));
        }
        if self.noise_bounds.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidParameter(
                "bound inputs: noise bounds must be finite and nonnegative".into(),
            ));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bound inputs: gamma must be finite and positive, got {}",
                self.gamma
            )));
        }
        if !self.sigma_w_sq.is_finite() || self.sigma_w_sq < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bound inputs: weighted variance must be finite and nonnegative, got {}",
                self.sigma_w_sq
            )));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "bound inputs: delta must lie strictly inside (0, 1), got {}",
                self.delta
            )));
        }
        if !self.b_w().is_finite() {
            return Err(Error::InvalidParameter(
                "bound inputs: weighted noise bound overflows".into(),
            ));
        }
        Ok(())
    }
}

/// All reported pieces of the sample-error estimate.
#[derive(Debug, Clone)]
pub struct SampleErrorBound {
    /// Conditioning factor `||K_tt|| * ||(K_tx D_w K_xt + gamma K_tt)^-1||^2`.
    pub kappa: f64,
    /// Spectral norm of the weighted sampling operator `L_w`.
    pub operator_norm: f64,
    /// Spectral norm of `K_tt L_w`.
    pub coupled_norm: f64,
    /// Weighted noise-amplitude bound `B_w`.
    pub b_w: f64,
    /// Weighted noise variance, copied from the inputs.
    pub sigma_w_sq: f64,
    /// The high-probability sample-error bound.
    pub epsilon: f64,
    /// True when `sigma_w_sq = 0` collapses the bound to zero.
    pub degenerate: bool,
}

/// Evaluates the sample-error bound
/// `epsilon = kappa sigma_w^2 alpha_inverse(2 ||K_tt L_w|| ||L_w|| B_w^2 / (kappa sigma_w^2) * ln(1/delta))`
/// with `L_w = (K_tx D_w K_xt + gamma K_tt)^-1 K_tx D_w^(1/2)`.
pub fn sample_error_bound(inp: &BoundInputs) -> Result<SampleErrorBound> {
    inp.validate()?;

    let n_samples = inp.weights.len();
    let d_w = DMatrix::from_diagonal(&DVector::from_iterator(
        n_samples,
        inp.weights.iter().copied(),
    ));
    let d_w_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(
        n_samples,
        inp.weights.iter().map(|w| w.sqrt()),
    ));

    let operator = &inp.k_tx * &d_w * inp.k_tx.transpose() + inp.gamma * &inp.k_tt;
    let inverse = operator.try_inverse().ok_or_else(|| {
        Error::SingularSystem("regularized sampling operator is not invertible".into())
    })?;
    let l_w = &inverse * &inp.k_tx * &d_w_sqrt;

    let kappa = spectral_norm(&inp.k_tt) * spectral_norm(&inverse).powi(2);
    let operator_norm = spectral_norm(&l_w);
    let coupled_norm = spectral_norm(&(&inp.k_tt * &l_w));
    let b_w = inp.b_w();

    if inp.sigma_w_sq == 0.0 {
        return Ok(SampleErrorBound {
            kappa,
            operator_norm,
            coupled_norm,
            b_w,
            sigma_w_sq: 0.0,
            epsilon: 0.0,
            degenerate: true,
        });
    }

    let scale = kappa * inp.sigma_w_sq;
    let argument = 2.0 * coupled_norm * operator_norm * b_w * b_w / scale * inp.delta.recip().ln();
    let epsilon = scale * alpha_inverse(argument)?;

    Ok(SampleErrorBound {
        kappa,
        operator_norm,
        coupled_norm,
        b_w,
        sigma_w_sq: inp.sigma_w_sq,
        epsilon,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent inverse of (u - 1) ln u by plain interval halving on a
    /// fixed wide bracket, used as an oracle for the production bisection.
    fn inverse_oracle(v: f64) -> f64 {
        let (mut lo, mut hi) = (1.0f64, 1e9f64);
        for _ in 0..500 {
            let mid = 0.5 * (lo + hi);
            if (mid - 1.0) * mid.ln() < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn one_point_inputs(gamma: f64, delta: f64) -> BoundInputs {
        BoundInputs::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![1.0],
            gamma,
            vec![1.0],
            1.0,
            delta,
        )
        .unwrap()
    }

    #[test]
    fn alpha_at_two_is_ln_two() {
        assert_relative_eq!(
            alpha(2.0).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn alpha_at_e_is_e_minus_one() {
        let e = std::f64::consts::E;
        assert_relative_eq!(alpha(e).unwrap(), e - 1.0, max_relative = 1e-15);
    }

    #[test]
    fn alpha_near_one_follows_square_law() {
        // (u - 1) ln u ~ (u - 1)^2 as u -> 1.
        assert_relative_eq!(alpha(1.0 + 1e-8).unwrap(), 1e-16, max_relative = 1e-6);
    }

    #[test]
    fn alpha_rejects_u_at_or_below_one() {
        assert!(alpha(1.0).is_err());
        assert!(alpha(0.5).is_err());
        assert!(alpha(-3.0).is_err());
        assert!(alpha(f64::NAN).is_err());
    }

    #[test]
    fn alpha_inverse_at_zero_is_one() {
        assert_eq!(alpha_inverse(0.0).unwrap(), 1.0);
    }

    #[test]
    fn alpha_inverse_of_ln_two_is_two() {
        let u = alpha_inverse(std::f64::consts::LN_2).unwrap();
        assert!((u - 2.0).abs() <= 1e-10, "got {u}");
    }

    #[test]
    fn alpha_inverse_rejects_negative() {
        assert!(alpha_inverse(-1e-9).is_err());
        assert!(alpha_inverse(f64::NAN).is_err());
    }

    #[test]
    fn alpha_round_trips_through_its_inverse() {
        for u in [1.1, 3.0, 50.0] {
            let back = alpha_inverse(alpha(u).unwrap()).unwrap();
            assert!((back - u).abs() <= 1e-9, "u = {u}, back = {back}");
        }
    }

    #[test]
    fn alpha_inverse_is_right_inverse_on_wide_range() {
        for i in 0..=24 {
            let v = 1e-6 * 1e12f64.powf(i as f64 / 24.0);
            let u = alpha_inverse(v).unwrap();
            let residual = (alpha(u).unwrap() - v).abs();
            assert!(
                residual <= 1e-9 * v.max(1.0),
                "v = {v:e}, residual = {residual:e}"
            );
        }
    }

    #[test]
    fn alpha_inverse_handles_tiny_arguments() {
        let u = alpha_inverse(1e-30).unwrap();
        assert!(u > 1.0 && u < 1.0 + 1e-10);
    }

    #[test]
    fn one_point_bound_matches_hand_evaluation() {
        // Unit Gram blocks, w = 1, gamma = 1, M = 1, sigma^2 = 1, delta = 1/e:
        // operator = 2, L = 1/2, kappa = 1/4, argument = 2.
        let out = sample_error_bound(&one_point_inputs(1.0, (-1.0f64).exp())).unwrap();
        assert_relative_eq!(out.kappa, 0.25, max_relative = 1e-14);
        assert_relative_eq!(out.operator_norm, 0.5, max_relative = 1e-14);
        assert_relative_eq!(out.coupled_norm, 0.5, max_relative = 1e-14);
        assert_relative_eq!(out.b_w, 1.0, max_relative = 1e-15);
        assert!(!out.degenerate);
        let expected = 0.25 * inverse_oracle(2.0);
        assert_relative_eq!(out.epsilon, expected, max_relative = 1e-9);
        assert!(
            out.epsilon > 0.7216 && out.epsilon < 0.7218,
            "epsilon = {}",
            out.epsilon
        );
    }

    #[test]
    fn bound_approaches_kappa_sigma_sq_as_delta_tends_to_one() {
        let out = sample_error_bound(&one_point_inputs(1.0, 1.0 - 1e-12)).unwrap();
        let limit = out.kappa * out.sigma_w_sq;
        assert!(
            (out.epsilon - limit).abs() <= 1e-6,
            "epsilon = {}",
            out.epsilon
        );
    }

    #[test]
    fn bound_grows_as_confidence_tightens() {
        let loose = sample_error_bound(&one_point_inputs(1.0, 0.5)).unwrap();
        let tight = sample_error_bound(&one_point_inputs(1.0, 0.05)).unwrap();
        assert!(tight.epsilon > loose.epsilon);
    }

    #[test]
    fn bound_is_nonincreasing_in_gamma_and_vanishes() {
        let gammas: Vec<f64> = (0..20)
            .map(|i| 1e-6 * 1e12f64.powf(i as f64 / 19.0))
            .collect();
        let eps: Vec<f64> = gammas
            .iter()
            .map(|&g| {
                sample_error_bound(&one_point_inputs(g, 0.3))
                    .unwrap()
                    .epsilon
            })
            .collect();
        for pair in eps.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-12),
                "bound increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(
            eps[19] <= 1e-3 * eps[0],
            "first {} last {}",
            eps[0],
            eps[19]
        );
    }

    #[test]
    fn zero_variance_degenerates_to_zero() {
        let mut inputs = one_point_inputs(1.0, 0.3);
        inputs.sigma_w_sq = 0.0;
        let out = sample_error_bound(&inputs).unwrap();
        assert_eq!(out.epsilon, 0.0);
        assert!(out.degenerate);
        assert!(out.kappa > 0.0);
    }

    #[test]
    fn bound_scales_linearly_with_variance_at_fixed_ratio() {
        // Scaling sigma^2 by c and every noise bound by sqrt(c) leaves the
        // alpha argument unchanged, so epsilon scales by exactly c.
        let base = sample_error_bound(&one_point_inputs(1.0, 0.3)).unwrap();
        let c = 3.7;
        let mut scaled_inputs = one_point_inputs(1.0, 0.3);
        scaled_inputs.sigma_w_sq = c;
        scaled_inputs.noise_bounds = vec![c.sqrt()];
        let scaled = sample_error_bound(&scaled_inputs).unwrap();
        assert_relative_eq!(scaled.epsilon, c * base.epsilon, max_relative = 1e-12);
    }

    #[test]
    fn singular_operator_is_rejected() {
        let inputs = BoundInputs {
            k_tt: DMatrix::zeros(1, 1),
            k_tx: DMatrix::zeros(1, 1),
            weights: vec![1.0],
            gamma: 1.0,
            noise_bounds: vec![1.0],
            sigma_w_sq: 1.0,
            delta: 0.5,
        };
        assert!(matches!(
            sample_error_bound(&inputs),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        let ok = one_point_inputs(1.0, 0.5);

        let mut bad = ok.clone();
        bad.delta = 1.0;
        assert!(bad.validate().is_err());
        bad.delta = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.gamma = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.weights = vec![0.0];
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.noise_bounds = vec![-1.0];
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.k_tx = DMatrix::zeros(2, 1);
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.weights = vec![0.5, 0.5];
        assert!(bad.validate().is_err());

        let mut bad = ok;
        bad.k_tt = DMatrix::zeros(1, 2);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn from_ridge_uses_uniform_weights_and_box_variance() {
        // Linearly independent points keep the linear-kernel Gram invertible.
        let points = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![2.0, 1.0, 0.0]),
            DVector::from_vec(vec![3.0, 0.0, 1.0]),
        ];
        let targets = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let problem = RidgeProblem::symmetric(points, targets, 0.5);
        let inputs = BoundInputs::from_ridge(&problem, &KernelSpec::Linear, 0.3, 0.1).unwrap();

        assert_eq!(inputs.k_tt.nrows(), 3);
        assert_relative_eq!(inputs.k_tt[(0, 1)], 2.0, max_relative = 1e-15);
        assert_relative_eq!(inputs.k_tx[(2, 2)], 10.0, max_relative = 1e-15);
        assert!(inputs.weights.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
        assert_relative_eq!(inputs.sigma_w_sq, 0.09 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(inputs.b_w(), 0.3, max_relative = 1e-12);

        let out = sample_error_bound(&inputs).unwrap();
        assert!(out.epsilon.is_finite() && out.epsilon > 0.0);
    }
}
