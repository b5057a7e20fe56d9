//! End-to-end acceptance checks, one test per criterion, each at its stated
//! tolerance. Criteria 1-11 rerun the bundled example pipelines; 12-14 are
//! property sweeps and oracle equivalences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use linsysid::bounds::{alpha, alpha_inverse, sample_error_bound, BoundInputs};
use linsysid::dynamics::{simulate_autonomous, LinearSystem, NoiseSpec};
use linsysid::kernels::{ridge_solve, KernelSpec, RidgeProblem};
use linsysid::lqr::{solve_dare, LqrProblem, DARE_MAX_ITER, DARE_TOL};
use linsysid::metrics::compare_trajectories;
use linsysid::modelsel::{CvConfig, SplitSpec};
use linsysid::spectral::{eigenvalues, topological_entropy_bowen};
use linsysid::sysid::{estimate_a, IdentConfig};
use linsysid_cli::repro::run_repro;

/// Reruns a bundled example and asserts every check passes, echoing the
/// pass/fail table into the test output.
fn assert_repro(id: &str) {
    let checks = run_repro(id, None).unwrap_or_else(|e| panic!("example {id} failed to run: {e}"));
    let mut all_passed = true;
    for check in &checks {
        let verdict = if check.passed { "pass" } else { "FAIL" };
        println!("  {verdict}  {:<52} {}", check.name, check.detail);
        all_passed &= check.passed;
    }
    assert!(all_passed, "example {id} has failing checks");
}

#[test]
fn criterion_01_scalar_decay_rate_fixed_and_cv() {
    assert_repro("1");
}

#[test]
fn criterion_02_bidiagonal_recovery_and_tail_energy() {
    assert_repro("3");
}

#[test]
fn criterion_03_growth_factor_and_rescaled_rate() {
    assert_repro("4");
}

#[test]
fn criterion_04_divergent_diagonal_recovery() {
    assert_repro("4b");
}

#[test]
fn criterion_05_mixed_stability_diagonal_pair() {
    assert_repro("5");
}

#[test]
fn criterion_06_divergent_spectra_match() {
    assert_repro("6");
    assert_repro("7");
}

#[test]
fn criterion_07_entropy_readings() {
    assert_repro("8");

    // The log-sum entropy must equal a direct evaluation over the reported
    // spectrum, for the plants and for freshly estimated models.
    let log_sum_oracle = |m: &DMatrix<f64>| -> f64 {
        eigenvalues(m)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|z| z.norm())
            .filter(|&m| m > 1.0)
            .map(f64::ln)
            .sum()
    };
    let x0 = DVector::from_vec(vec![-0.9, 15.0, 1.5, 2.5]);
    let cv = IdentConfig::cross_validated(CvConfig {
        split: SplitSpec::Random { seed: 6 },
        ..CvConfig::default()
    });
    for a in [
        DMatrix::from_row_slice(
            4,
            4,
            &[
                2.25, -1.25, 1.25, -49.55, 3.75, -2.75, 13.15, -20.65, 0.0, 0.0, 10.4, -32.3, 0.0,
                0.0, 0.0, -21.9,
            ],
        ),
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.85, 0.45, -0.45, -77.85, -1.35, 0.95, 14.35, -11.65, 0.0, 0.0, 15.3, -55.3, 0.0,
                0.0, 0.0, -40.0,
            ],
        ),
    ] {
        let sys = LinearSystem::autonomous(a.clone()).unwrap();
        let traj = simulate_autonomous(&sys, &x0, 100, None, None).unwrap();
        let estimate = estimate_a(&traj, &cv).unwrap();
        for m in [&a, &estimate.a_hat] {
            let bowen = topological_entropy_bowen(m).unwrap();
            let oracle = log_sum_oracle(m);
            println!("  log-sum entropy = {bowen:.12}, oracle = {oracle:.12}");
            assert!(
                (bowen - oracle).abs() <= 1e-10,
                "log-sum entropy {bowen} differs from direct evaluation {oracle}"
            );
        }
    }
}

#[test]
fn criterion_08_controlled_identification() {
    assert_repro("9");
    assert_repro("10");
    assert_repro("11");
}

#[test]
fn criterion_09_scalar_lqr_closed_loop() {
    assert_repro("12");
}

#[test]
fn criterion_10_estimate_designed_gain_stabilizes_plant() {
    assert_repro("13");
}

#[test]
fn criterion_11_reference_estimate_gain_fails_on_plant() {
    assert_repro("14");
}

#[test]
fn criterion_12_noisy_trajectory_properties() {
    // Scalar system, observation noise 0.1, hold-out selection: the rollout
    // error of the estimate must decay (tail at most 1e-6 of the full energy)
    // in at least 18 of 20 noise realizations.
    let sys = LinearSystem::autonomous(DMatrix::from_element(1, 1, 0.5)).unwrap();
    let x0 = DVector::from_element(1, -0.5);
    let cv = IdentConfig::cross_validated(CvConfig::default());
    let mut decaying = 0;
    for seed in 0..20u64 {
        let noise = NoiseSpec::new(0.1, seed).unwrap();
        let traj = simulate_autonomous(&sys, &x0, 100, Some(&noise), None).unwrap();
        let Ok(estimate) = estimate_a(&traj, &cv) else {
            continue;
        };
        let model = LinearSystem::autonomous(estimate.a_hat.clone()).unwrap();
        let predicted = simulate_autonomous(&model, &x0, 300, None, None).unwrap();
        let truth = simulate_autonomous(&sys, &x0, 300, None, None).unwrap();
        let report = compare_trajectories(&truth.states, &predicted.states, 100).unwrap();
        if report.tail_energy <= 1e-6 * report.full_energy {
            decaying += 1;
        }
    }
    println!("  decaying rollouts: {decaying}/20");
    assert!(
        decaying >= 18,
        "only {decaying}/20 noisy runs had decaying rollout error"
    );

    // Divergent diagonal system, noise 5e-5: the estimate must land close
    // enough that every eigenvalue of A - Ahat stays inside the unit disk in
    // at least 18 of 20 realizations.
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![20.0, -10.0, 15.0, -25.0]));
    let sys = LinearSystem::autonomous(a.clone()).unwrap();
    let x0 = DVector::from_element(4, 1.0);
    let mut contained = 0;
    for seed in 0..20u64 {
        let noise = NoiseSpec::new(5e-5, seed).unwrap();
        let traj = simulate_autonomous(&sys, &x0, 100, Some(&noise), None).unwrap();
        let cv = IdentConfig::cross_validated(CvConfig {
            split: SplitSpec::Random { seed },
            ..CvConfig::default()
        });
        let Ok(estimate) = estimate_a(&traj, &cv) else {
            continue;
        };
        if eigenvalues(&(&a - &estimate.a_hat)).unwrap().radius < 1.0 {
            contained += 1;
        }
    }
    println!("  error spectra inside the unit disk: {contained}/20");
    assert!(
        contained >= 18,
        "only {contained}/20 noisy error spectra stayed in the unit disk"
    );
}

/// Ridge regression solved in the primal: w = (X Xᵀ + N gamma I)⁻¹ X y.
fn primal_ridge(points: &[DVector<f64>], y: &DVector<f64>, n_gamma: f64) -> DVector<f64> {
    let d = points[0].len();
    let mut xxt = DMatrix::<f64>::zeros(d, d);
    let mut xy = DVector::<f64>::zeros(d);
    for (p, yi) in points.iter().zip(y.iter()) {
        xxt += p * p.transpose();
        xy.axpy(*yi, p, 1.0);
    }
    for i in 0..d {
        xxt[(i, i)] += n_gamma;
    }
    xxt.lu().solve(&xy).unwrap()
}

/// Bracketing bisection for the inverse of (u - 1) ln u, independent of the
/// library implementation.
fn inverse_rate_oracle(v: f64) -> f64 {
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

#[test]
fn criterion_13_oracle_equivalences() {
    // Kernel (dual) and primal ridge solutions agree on random full-rank
    // problems.
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let mut worst_gap = 0.0f64;
    for _ in 0..50 {
        let d = rng.gen_range(1..=6);
        let n = rng.gen_range(d + 1..=200);
        let points: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let gamma = 10f64.powf(rng.gen_range(-6.0..-2.0));
        let problem = RidgeProblem::symmetric(points.clone(), y.clone(), gamma);
        let dual = ridge_solve(&problem, &KernelSpec::Linear)
            .unwrap()
            .linear_weights();
        let primal = primal_ridge(&points, &y, n as f64 * gamma);
        worst_gap = worst_gap.max((&dual - &primal).amax());
    }
    println!("  dual/primal worst gap: {worst_gap:.3e}");
    assert!(
        worst_gap <= 1e-8,
        "dual and primal ridge disagree by {worst_gap:.3e}"
    );

    // Riccati fixed points on random stabilizable pairs have tiny residuals.
    let mut worst_residual = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let radius = eigenvalues(&raw).unwrap().radius;
        let target = rng.gen_range(0.2..1.3);
        let a = if radius > 0.0 {
            &raw * (target / radius)
        } else {
            raw
        };
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let problem =
            LqrProblem::new(a, b, DMatrix::identity(n, n), DMatrix::identity(n, n)).unwrap();
        let dare = solve_dare(&problem, DARE_TOL, DARE_MAX_ITER).unwrap();
        worst_residual = worst_residual.max(dare.residual);
    }
    println!("  Riccati worst residual: {worst_residual:.3e}");
    assert!(
        worst_residual <= 1e-10,
        "Riccati residual reached {worst_residual:.3e}"
    );

    // The rate-function inverse round-trips across twelve decades.
    let mut worst_roundtrip = 0.0f64;
    for i in 0..=48 {
        let v = 1e-6 * 1e8f64.powf(i as f64 / 48.0);
        let u = alpha_inverse(v).unwrap();
        worst_roundtrip = worst_roundtrip.max((alpha(u).unwrap() - v).abs());
    }
    println!("  rate-function worst round-trip residual: {worst_roundtrip:.3e}");
    assert!(worst_roundtrip <= 1e-9);

    // One-point bound with unit Gram blocks, weight, noise level and gamma at
    // confidence 1 - 1/e: epsilon = 0.25 * inverse_rate(2), about 0.72166.
    let inputs = BoundInputs::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        vec![1.0],
        1.0,
        vec![1.0],
        1.0,
        (-1.0f64).exp(),
    )
    .unwrap();
    let out = sample_error_bound(&inputs).unwrap();
    let oracle = 0.25 * inverse_rate_oracle(2.0);
    println!("  one-point bound: {:.6}, oracle {oracle:.6}", out.epsilon);
    assert!(
        (out.epsilon - oracle).abs() <= 1e-9,
        "bound {} vs oracle {oracle}",
        out.epsilon
    );
    assert!((out.epsilon - 0.72166).abs() <= 1e-3);
}

#[test]
fn criterion_14_noiseless_consistency_sweep() {
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=5);
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let radius = eigenvalues(&raw).unwrap().radius;
        let target = rng.gen_range(0.3..0.9);
        let a = if radius > 0.0 {
            &raw * (target / radius)
        } else {
            raw
        };
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(5.0..15.0));
        let sys = LinearSystem::autonomous(a.clone()).unwrap();
        let traj = simulate_autonomous(&sys, &x0, 100, None, None).unwrap();
        let estimate = estimate_a(&traj, &IdentConfig::fixed(vec![1e-12; n])).unwrap();
        worst = worst.max((&estimate.a_hat - &a).amax());
    }
    println!("  worst entry error over 50 random stable systems: {worst:.3e}");
    assert!(worst <= 1e-6, "worst entry error {worst:.3e} exceeds 1e-6");
}
