//! Dense nonsymmetric eigenvalue computation, Schur-stability checks, and the
//! two entropy functionals of a linear map.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

/// Moduli within this margin of 1 count as on the unit circle for the entropy
/// sum. The margin is far above eigensolver rounding so that an estimate of a
/// marginally stable system (a true eigenvalue on the circle, recovered with
/// identification error around 1e-4) keeps its near-unit mode in the sum
/// regardless of which side of 1 it lands on.
const UNIT_CIRCLE_MARGIN: f64 = 1e-2;

/// Eigenvalues sorted by descending modulus, then descending real part, then
/// positive imaginary part first; `radius` is the largest modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    pub radius: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn require_square(a: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// All eigenvalues with algebraic multiplicity, via real Schur reduction
/// (Hessenberg + shifted QR sweeps).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Spectrum> {
    require_square(a, "eigenvalues: matrix must be square")?;
    let n = a.nrows();
    // The QR driver normalizes by the largest entry; an all-zero matrix would
    // turn into NaNs and never deflate, so dispatch it directly.
    if a.iter().all(|v| *v == 0.0) {
        return Ok(Spectrum {
            eigenvalues: vec![Complex::new(0.0, 0.0); n],
            radius: 0.0,
        });
    }
    let max_sweeps = 100 * n * n;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, max_sweeps)
        .or_else(|| Schur::try_new(a.clone(), 1e3 * f64::EPSILON, max_sweeps))
        .ok_or(Error::EigNonConvergence { max_sweeps })?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|p, q| {
        q.norm()
            .total_cmp(&p.norm())
            .then(q.re.total_cmp(&p.re))
            .then(q.im.total_cmp(&p.im))
    });
    let radius = eigs.first().map_or(0.0, |e| e.norm());
    Ok(Spectrum {
        eigenvalues: eigs,
        radius,
    })
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.radius)
}

/// True when every eigenvalue modulus is below 1 - margin.
pub fn is_schur_stable(a: &DMatrix<f64>, margin: f64) -> Result<bool> {
    Ok(spectral_radius(a)? < 1.0 - margin)
}

/// Sum of the moduli of all eigenvalues on or outside the unit circle.
///
/// Zero for a strictly stable matrix; unstable and marginal modes contribute
/// their full modulus (not its logarithm), which makes this variant directly
/// comparable between a matrix and its estimate at a glance.
pub fn topological_entropy_modulus(a: &DMatrix<f64>) -> Result<f64> {
    let spectrum = eigenvalues(a)?;
    Ok(spectrum
        .eigenvalues
        .iter()
        .map(|e| e.norm())
        .filter(|&m| m >= 1.0 - UNIT_CIRCLE_MARGIN)
        .sum())
}

/// Classical entropy of a linear map: sum of log|lambda| over eigenvalues
/// strictly outside the unit circle.
pub fn topological_entropy_bowen(a: &DMatrix<f64>) -> Result<f64> {
    let spectrum = eigenvalues(a)?;
    Ok(spectrum
        .eigenvalues
        .iter()
        .map(|e| e.norm())
        .filter(|&m| m > 1.0)
        .map(f64::ln)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn example_block_4x4() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                2.25, -1.25, 1.25, -49.55, //
                3.75, -2.75, 13.15, -20.65, //
                0.0, 0.0, 10.4, -32.3, //
                0.0, 0.0, 0.0, -21.9,
            ],
        )
    }

    fn second_block_4x4() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.85, 0.45, -0.45, -77.85, //
                -1.35, 0.95, 14.35, -11.65, //
                0.0, 0.0, 15.3, -55.3, //
                0.0, 0.0, 0.0, -40.0,
            ],
        )
    }

    fn assert_spectrum_close(got: &Spectrum, want: &[Complex<f64>], tol: f64) {
        assert_eq!(got.len(), want.len());
        for w in want {
            assert!(
                got.eigenvalues.iter().any(|g| (g - w).norm() <= tol),
                "missing eigenvalue {w} in {:?}",
                got.eigenvalues
            );
        }
    }

    #[test]
    fn diagonal_matrix_spectrum() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![20.0, -10.0, 15.0, -25.0]));
        let s = eigenvalues(&a).unwrap();
        let want: Vec<Complex<f64>> = [20.0, -10.0, 15.0, -25.0]
            .iter()
            .map(|&r| Complex::new(r, 0.0))
            .collect();
        assert_spectrum_close(&s, &want, 1e-12);
        assert_relative_eq!(s.radius, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn block_triangular_spectrum() {
        let s = eigenvalues(&example_block_4x4()).unwrap();
        let want: Vec<Complex<f64>> = [-21.9, 10.4, -1.5, 1.0]
            .iter()
            .map(|&r| Complex::new(r, 0.0))
            .collect();
        assert_spectrum_close(&s, &want, 1e-6);
    }

    #[test]
    fn rotation_eigenvalues_are_unit_complex_pair() {
        let th = std::f64::consts::PI / 3.0;
        let a = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let s = eigenvalues(&a).unwrap();
        let want = vec![
            Complex::new(th.cos(), th.sin()),
            Complex::new(th.cos(), -th.sin()),
        ];
        assert_spectrum_close(&s, &want, 1e-10);
        // positive imaginary part sorts first
        assert!(s.eigenvalues[0].im > 0.0);
    }

    #[test]
    fn backward_error_of_each_eigenvalue_is_small() {
        let a = example_block_4x4();
        let norm_a = crate::linalg::spectral_norm(&a);
        let s = eigenvalues(&a).unwrap();
        for lambda in &s.eigenvalues {
            let mut shifted = a.map(|v| Complex::new(v, 0.0));
            for i in 0..4 {
                shifted[(i, i)] -= lambda;
            }
            let smin = shifted
                .svd(false, false)
                .singular_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(
                smin <= 1e-8 * norm_a,
                "sigma_min {smin} too large for {lambda}"
            );
        }
    }

    #[test]
    fn zero_matrix_is_stable() {
        let a = DMatrix::<f64>::zeros(3, 3);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.0);
        assert!(is_schur_stable(&a, 0.0).unwrap());
    }

    #[test]
    fn bidiagonal_example_radius() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.5, 1.0, 0.0, 0.0, //
                0.0, 0.6, 1.0, 0.0, //
                0.0, 0.0, 0.7, 1.0, //
                0.0, 0.0, 0.0, -0.8,
            ],
        );
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.8, epsilon = 1e-10);
        assert!(is_schur_stable(&a, 0.1).unwrap());
    }

    #[test]
    fn unstable_block_radius() {
        assert_relative_eq!(
            spectral_radius(&example_block_4x4()).unwrap(),
            21.9,
            epsilon = 1e-6
        );
        assert!(!is_schur_stable(&example_block_4x4(), 0.0).unwrap());
    }

    #[test]
    fn entropy_modulus_of_block_examples() {
        assert_relative_eq!(
            topological_entropy_modulus(&example_block_4x4()).unwrap(),
            34.80,
            epsilon = 1e-6
        );
        assert_relative_eq!(
            topological_entropy_modulus(&second_block_4x4()).unwrap(),
            55.30,
            epsilon = 1e-6
        );
    }

    #[test]
    fn entropy_modulus_of_stable_matrix_is_zero() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.5, 0.9]));
        assert_relative_eq!(topological_entropy_modulus(&a).unwrap(), 0.0);
    }

    // A marginal mode must not fall out of the sum when rounding or estimation
    // error pushes it slightly inside the circle.
    #[test]
    fn entropy_modulus_keeps_near_unit_modes() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 - 1e-4, 2.0]));
        assert_relative_eq!(
            topological_entropy_modulus(&a).unwrap(),
            2.9999,
            epsilon = 1e-12
        );
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 15.3, -40.0, -0.4]));
        assert_relative_eq!(
            topological_entropy_modulus(&b).unwrap(),
            55.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn entropy_bowen_matches_direct_log_sum() {
        let direct: f64 = [1.5f64, 10.4, 21.9].iter().map(|m| m.ln()).sum();
        assert_relative_eq!(
            topological_entropy_bowen(&example_block_4x4()).unwrap(),
            direct,
            epsilon = 1e-10
        );
        assert!((direct - 5.8338).abs() < 1e-4);
    }

    #[test]
    fn entropy_bowen_zero_for_stable_and_exact_for_exp() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.5, 0.9]));
        assert_relative_eq!(topological_entropy_bowen(&a).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![e, e]));
        assert_relative_eq!(topological_entropy_bowen(&b).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn similarity_invariance() {
        let a = second_block_4x4();
        let t = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.2, 0.0, -0.1, //
                0.0, 1.1, 0.3, 0.0, //
                0.1, 0.0, 0.9, 0.2, //
                0.0, -0.2, 0.0, 1.0,
            ],
        );
        let t_inv = t.clone().try_inverse().unwrap();
        let sim = &t * &a * &t_inv;
        assert_relative_eq!(
            spectral_radius(&sim).unwrap(),
            spectral_radius(&a).unwrap(),
            epsilon = 1e-6
        );
        assert_relative_eq!(
            topological_entropy_modulus(&sim).unwrap(),
            topological_entropy_modulus(&a).unwrap(),
            epsilon = 1e-6
        );
        assert_relative_eq!(
            topological_entropy_bowen(&sim).unwrap(),
            topological_entropy_bowen(&a).unwrap(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn complex_eigenvalues_come_in_conjugate_pairs() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, -2.0, 0.3, 2.0, 0.1, -0.4, 0.0, 0.5, -0.7]);
        let s = eigenvalues(&a).unwrap();
        for e in &s.eigenvalues {
            if e.im != 0.0 {
                assert!(
                    s.eigenvalues.iter().any(|f| (f - e.conj()).norm() < 1e-9),
                    "conjugate of {e} missing"
                );
            }
        }
    }

    #[test]
    fn non_square_is_rejected() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(eigenvalues(&a).is_err());
    }
}
