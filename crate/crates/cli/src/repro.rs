//! Bundled example runs with pass/fail checks against their expected
//! outcomes.
//!
//! Each id reruns a stored configuration through the normal pipeline and
//! compares the report against the example's target values at the stated
//! tolerances. Ids follow the source numbering, which has no example 2.

use nalgebra::{Complex, DMatrix};

use linsysid::lqr::{closed_loop_analysis, solve_dare, LqrProblem, DARE_MAX_ITER, DARE_TOL};

use crate::config::{
    matrix_from_rows, ExperimentConfig, GammaChoice, IdentSection, InputSignal, LqrSection,
    SplitChoice, SystemConfig, Task,
};
use crate::error::{CliError, Result};
use crate::report::{ExperimentReport, SpectrumJson};
use crate::run;

pub const IDS: [&str; 14] = [
    "1", "3", "4", "4b", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14",
];

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Accumulates check outcomes; `tol_override` replaces every default
/// tolerance when set.
struct Checker {
    tol_override: Option<f64>,
    lines: Vec<CheckLine>,
}

impl Checker {
    fn new(tol_override: Option<f64>) -> Self {
        Self {
            tol_override,
            lines: Vec::new(),
        }
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol_override.unwrap_or(default)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.lines.push(CheckLine {
            name: name.into(),
            passed,
            detail,
        });
    }

    /// |value - expected| <= tol.
    fn close(&mut self, name: &str, value: f64, expected: f64, default_tol: f64) {
        let tol = self.tol(default_tol);
        self.push(
            name,
            (value - expected).abs() <= tol,
            format!("value = {value:.6}, target {expected} within {tol:.1e}"),
        );
    }

    /// value <= limit.
    fn at_most(&mut self, name: &str, value: f64, default_limit: f64) {
        let limit = self.tol(default_limit);
        self.push(
            name,
            value <= limit,
            format!("value = {value:.3e}, limit {limit:.1e}"),
        );
    }

    /// Every expected eigenvalue has a distinct partner within tol.
    fn spectrum(
        &mut self,
        name: &str,
        got: &SpectrumJson,
        expected: &[Complex<f64>],
        default_tol: f64,
    ) {
        let tol = self.tol(default_tol);
        let eigenvalues: Vec<Complex<f64>> = got
            .eigenvalues
            .iter()
            .map(|z| Complex::new(z.re, z.im))
            .collect();
        self.push(
            name,
            spectrum_matches(&eigenvalues, expected, tol),
            format!(
                "spectrum = {}, target {} within {tol:.1e}",
                fmt_spec(&eigenvalues),
                fmt_spec(expected)
            ),
        );
    }

    fn require(&mut self, name: &str, passed: bool, detail: String) {
        self.push(name, passed, detail);
    }
}

/// Greedy nearest matching: each expected eigenvalue consumes its closest
/// remaining partner and must land within tol of it.
pub fn spectrum_matches(got: &[Complex<f64>], expected: &[Complex<f64>], tol: f64) -> bool {
    if got.len() != expected.len() {
        return false;
    }
    let mut remaining = got.to_vec();
    expected.iter().all(|want| {
        let Some((idx, _)) = remaining
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - want).norm().total_cmp(&(b.1 - want).norm()))
        else {
            return false;
        };
        let ok = (remaining[idx] - want).norm() <= tol;
        remaining.remove(idx);
        ok
    })
}

fn fmt_spec(spec: &[Complex<f64>]) -> String {
    let parts: Vec<String> = spec
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                format!("{:.4}", z.re)
            } else {
                format!("{:.4}{:+.4}i", z.re, z.im)
            }
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn autonomous(a: Vec<Vec<f64>>, x0: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        system: SystemConfig { a, b: None },
        x0,
        n_steps: 100,
        input_signal: None,
        noise: None,
        perturbation: None,
        ident: IdentSection::default(),
        cv: None,
        lqr: None,
        tasks: vec![Task::Identify],
    }
}

fn controlled(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> ExperimentConfig {
    let n = a.len();
    ExperimentConfig {
        system: SystemConfig { a, b: Some(b) },
        x0: vec![0.0; n],
        n_steps: 100,
        input_signal: Some(InputSignal::SinPlusCos),
        noise: None,
        perturbation: None,
        ident: IdentSection::default(),
        cv: None,
        lqr: None,
        tasks: vec![Task::Identify],
    }
}

fn fixed_gamma(mut config: ExperimentConfig, gamma: f64) -> ExperimentConfig {
    config.ident.gamma = GammaChoice::Fixed(vec![gamma]);
    config
}

fn random_split(mut config: ExperimentConfig, seed: u64) -> ExperimentConfig {
    config.cv = Some(crate::config::CvSection {
        split: Some(SplitChoice::Random { seed }),
        ..Default::default()
    });
    config
}

fn a_hat(report: &ExperimentReport) -> Result<DMatrix<f64>> {
    let ident = report
        .ident
        .as_ref()
        .ok_or_else(|| CliError::Config("report carries no identification section".into()))?;
    matrix_from_rows(&ident.a_hat, "a_hat")
}

fn b_hat(report: &ExperimentReport) -> Result<DMatrix<f64>> {
    let rows = report
        .ident
        .as_ref()
        .and_then(|i| i.b_hat.as_ref())
        .ok_or_else(|| CliError::Config("report carries no input-matrix estimate".into()))?;
    matrix_from_rows(rows, "b_hat")
}

fn max_entry_error(report: &ExperimentReport, config: &ExperimentConfig) -> Result<f64> {
    let a = matrix_from_rows(&config.system.a, "system.A")?;
    let mut err = (a_hat(report)? - a).amax();
    if let Some(b_rows) = &config.system.b {
        let b = matrix_from_rows(b_rows, "system.B")?;
        err = err.max((b_hat(report)? - b).amax());
    }
    Ok(err)
}

fn real_spectrum(values: &[f64]) -> Vec<Complex<f64>> {
    values.iter().map(|&r| Complex::new(r, 0.0)).collect()
}

/// The systems shared between identification and stabilization examples.
mod systems {
    pub fn ex6() -> Vec<Vec<f64>> {
        vec![
            vec![2.25, -1.25, 1.25, -49.55],
            vec![3.75, -2.75, 13.15, -20.65],
            vec![0.0, 0.0, 10.4, -32.3],
            vec![0.0, 0.0, 0.0, -21.9],
        ]
    }

    pub fn ex7() -> Vec<Vec<f64>> {
        vec![
            vec![-0.85, 0.45, -0.45, -77.85],
            vec![-1.35, 0.95, 14.35, -11.65],
            vec![0.0, 0.0, 15.3, -55.3],
            vec![0.0, 0.0, 0.0, -40.0],
        ]
    }

    pub fn ex6_x0() -> Vec<f64> {
        vec![-0.9, 15.0, 1.5, 2.5]
    }

    pub fn ex10_a() -> Vec<Vec<f64>> {
        vec![
            vec![-0.9, 1.0, 0.0],
            vec![0.0, -0.1, 1.0],
            vec![0.0, 0.0, 0.8],
        ]
    }

    pub fn ex10_b() -> Vec<Vec<f64>> {
        vec![vec![-2.5], vec![-3.5], vec![4.5]]
    }

    pub fn ex11_a() -> Vec<Vec<f64>> {
        vec![
            vec![-20.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 0.0, 20.0],
        ]
    }

    pub fn ex11_b() -> Vec<Vec<f64>> {
        vec![vec![1.0], vec![2.0], vec![3.0]]
    }

    /// Reference estimates of the scenario-11 system, frozen here because
    /// their specific entry errors are what makes the designed gain fail on
    /// the true plant (a pipeline rerun lands much closer to the truth and
    /// stabilizes).
    pub fn ex14_a_hat() -> Vec<Vec<f64>> {
        vec![
            vec![-19.9945, 1.0009, -0.0137],
            vec![0.0013, 0.9995, 0.9919],
            vec![0.0155, -0.0171, 19.7835],
        ]
    }

    pub fn ex14_b_hat() -> Vec<Vec<f64>> {
        vec![vec![0.9898], vec![1.9898], vec![2.9333]]
    }
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn run_repro(id: &str, tol_override: Option<f64>) -> Result<Vec<CheckLine>> {
    let mut checker = Checker::new(tol_override);
    match id {
        "1" => repro_1(&mut checker)?,
        "3" => repro_3(&mut checker)?,
        "4" => repro_4(&mut checker)?,
        "4b" => repro_4b(&mut checker)?,
        "5" => repro_5(&mut checker)?,
        "6" => repro_6(&mut checker)?,
        "7" => repro_7(&mut checker)?,
        "8" => repro_8(&mut checker)?,
        "9" => repro_9(&mut checker)?,
        "10" => repro_10(&mut checker)?,
        "11" => repro_11(&mut checker)?,
        "12" => repro_12(&mut checker)?,
        "13" => repro_13(&mut checker)?,
        "14" => repro_14(&mut checker)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown example id {other:?}, expected one of {}",
                IDS.join(", ")
            )));
        }
    }
    Ok(checker.lines)
}

fn repro_1(c: &mut Checker) -> Result<()> {
    let base = autonomous(vec![vec![0.5]], vec![-0.5]);
    let fixed = run::run(&fixed_gamma(base.clone(), 1e-6), &[])?;
    c.close(
        "decay rate (fixed 1e-6)",
        a_hat(&fixed)?[(0, 0)],
        0.4997,
        1e-3,
    );
    let cv = run::run(&base, &[])?;
    c.close("decay rate (cv)", a_hat(&cv)?[(0, 0)], 0.5, 1e-3);
    Ok(())
}

fn repro_3(c: &mut Checker) -> Result<()> {
    let mut config = autonomous(
        vec![
            vec![-0.5, 1.0, 0.0, 0.0],
            vec![0.0, 0.6, 1.0, 0.0],
            vec![0.0, 0.0, 0.7, 1.0],
            vec![0.0, 0.0, 0.0, -0.8],
        ],
        vec![-0.9, 0.1, 15.0, 0.2],
    );
    config.tasks.push(Task::Compare);
    let report = run::run(&config, &[])?;
    c.at_most(
        "state matrix max entry error",
        max_entry_error(&report, &config)?,
        1e-2,
    );
    let compare = report.compare.as_ref().expect("compare task ran");
    c.at_most(
        "tail error energy (k = 100..300)",
        compare.tail_energy,
        1e-8,
    );
    Ok(())
}

fn repro_4(c: &mut Checker) -> Result<()> {
    let base = autonomous(vec![vec![11.46]], vec![-0.5]);
    let fixed = run::run(&fixed_gamma(base.clone(), 1e-6), &[])?;
    let ident = fixed.ident.as_ref().expect("identify task ran");
    c.close("growth factor", ident.sigma, 11.46, 1e-12);
    let alpha_fixed = a_hat(&fixed)?[(0, 0)];
    c.require(
        "growth rate in [11.40, 11.47] (fixed 1e-6)",
        (11.40..=11.47).contains(&alpha_fixed),
        format!("value = {alpha_fixed:.6}"),
    );
    let cv = run::run(&base, &[])?;
    let alpha_cv = a_hat(&cv)?[(0, 0)];
    c.require(
        "growth rate in [11.40, 11.47] (cv)",
        (11.40..=11.47).contains(&alpha_cv),
        format!("value = {alpha_cv:.6}"),
    );
    Ok(())
}

fn repro_4b(c: &mut Checker) -> Result<()> {
    let config = random_split(
        autonomous(
            vec![
                vec![20.0, 0.0, 0.0, 0.0],
                vec![0.0, -10.0, 0.0, 0.0],
                vec![0.0, 0.0, 15.0, 0.0],
                vec![0.0, 0.0, 0.0, -25.0],
            ],
            vec![1.0, 1.0, 1.0, 1.0],
        ),
        11,
    );
    let report = run::run(&config, &[])?;
    c.at_most(
        "state matrix max entry error",
        max_entry_error(&report, &config)?,
        1e-3,
    );
    Ok(())
}

fn repro_5(c: &mut Checker) -> Result<()> {
    for (label, diag) in [("first", [20.0, -0.1]), ("second", [-0.5, 25.0])] {
        let config = random_split(
            autonomous(
                vec![vec![diag[0], 0.0], vec![0.0, diag[1]]],
                vec![-1.9, 1.0],
            ),
            5,
        );
        let report = run::run(&config, &[])?;
        c.at_most(
            &format!("state matrix max entry error ({label} system)"),
            max_entry_error(&report, &config)?,
            1e-3,
        );
    }
    Ok(())
}

fn repro_6(c: &mut Checker) -> Result<()> {
    let config = random_split(autonomous(systems::ex6(), systems::ex6_x0()), 6);
    let report = run::run(&config, &[])?;
    let spectrum = report.spectra.estimate.as_ref().expect("identify task ran");
    c.spectrum(
        "estimate spectrum",
        spectrum,
        &real_spectrum(&[-21.9, 10.4, -1.5, 1.0]),
        1e-2,
    );
    Ok(())
}

fn repro_7(c: &mut Checker) -> Result<()> {
    let config = random_split(autonomous(systems::ex7(), systems::ex6_x0()), 6);
    let report = run::run(&config, &[])?;
    let spectrum = report.spectra.estimate.as_ref().expect("identify task ran");
    c.spectrum(
        "estimate spectrum",
        spectrum,
        &real_spectrum(&[-40.0, 15.3, 0.5, -0.4]),
        1e-2,
    );
    Ok(())
}

fn repro_8(c: &mut Checker) -> Result<()> {
    for (label, a, h_plant, h_estimate) in [
        ("first", systems::ex6(), 34.80, 34.7999),
        ("second", systems::ex7(), 55.30, 55.3008),
    ] {
        let mut config = random_split(autonomous(a, systems::ex6_x0()), 6);
        config.tasks.push(Task::Entropy);
        let report = run::run(&config, &[])?;
        let entropy = report.entropy.as_ref().expect("entropy task ran");
        c.close(
            &format!("plant entropy ({label} system)"),
            entropy.plant.modulus,
            h_plant,
            1e-6,
        );
        let estimate = entropy.estimate.as_ref().expect("identify task ran");
        c.close(
            &format!("estimate entropy ({label} system)"),
            estimate.modulus,
            h_estimate,
            1e-2,
        );
    }
    Ok(())
}

fn repro_9(c: &mut Checker) -> Result<()> {
    let config = controlled(vec![vec![-0.9]], vec![vec![3.5]]);
    let report = run::run(&config, &[])?;
    c.at_most("entry max error", max_entry_error(&report, &config)?, 1e-4);
    Ok(())
}

fn repro_10(c: &mut Checker) -> Result<()> {
    let config = controlled(systems::ex10_a(), systems::ex10_b());
    let report = run::run(&config, &[])?;
    c.at_most("entry max error", max_entry_error(&report, &config)?, 1e-3);
    Ok(())
}

fn repro_11(c: &mut Checker) -> Result<()> {
    let config = random_split(controlled(systems::ex11_a(), systems::ex11_b()), 11);
    let report = run::run(&config, &[])?;
    c.at_most("entry max error", max_entry_error(&report, &config)?, 0.5);
    let spectrum = report.spectra.estimate.as_ref().expect("identify task ran");
    c.spectrum(
        "estimate spectrum",
        spectrum,
        &real_spectrum(&[-20.0, 1.0, 20.0]),
        0.3,
    );
    Ok(())
}

fn repro_12(c: &mut Checker) -> Result<()> {
    let mut base = controlled(vec![vec![-0.9]], vec![vec![3.5]]);
    base.lqr = Some(LqrSection {
        q: vec![vec![1.0]],
        r: vec![vec![1.0]],
    });

    let mut plant_design = base.clone();
    plant_design.tasks = vec![Task::Stabilize];
    let plant_report = run::run(&plant_design, &[])?;
    let plant_cl = plant_report
        .stabilization
        .as_ref()
        .expect("stabilize task ran")
        .on_plant
        .closed_loop[0][0];
    c.close(
        "closed loop a - bF (gain from plant)",
        plant_cl,
        -0.0643,
        5e-4,
    );

    let mut estimate_design = base;
    estimate_design.tasks = vec![Task::Identify, Task::Stabilize];
    let estimate_report = run::run(&estimate_design, &[])?;
    let estimate_cl = estimate_report
        .stabilization
        .as_ref()
        .expect("stabilize task ran")
        .on_estimate
        .as_ref()
        .expect("gain designed from estimates")
        .closed_loop[0][0];
    c.close(
        "closed loop a - bF (gain from estimates)",
        estimate_cl,
        plant_cl,
        1e-3,
    );
    Ok(())
}

fn repro_13(c: &mut Checker) -> Result<()> {
    let mut config = controlled(systems::ex10_a(), systems::ex10_b());
    config.lqr = Some(LqrSection {
        q: identity_rows(3),
        r: vec![vec![1.0]],
    });
    config.tasks = vec![Task::Identify, Task::Stabilize];
    let report = run::run(&config, &[])?;
    let stabilization = report.stabilization.as_ref().expect("stabilize task ran");
    let on_estimate = stabilization
        .on_estimate
        .as_ref()
        .expect("gain designed from estimates");
    c.spectrum(
        "closed-loop spectrum (estimates)",
        &on_estimate.spectrum,
        &real_spectrum(&[-0.6172, 0.4049, -0.0018]),
        1e-3,
    );
    c.require(
        "true plant stabilized",
        stabilization.on_plant.stabilized,
        format!(
            "closed-loop radius = {:.4}",
            stabilization.on_plant.spectrum.radius
        ),
    );
    Ok(())
}

fn repro_14(c: &mut Checker) -> Result<()> {
    let a_hat = matrix_from_rows(&systems::ex14_a_hat(), "reference a_hat")?;
    let b_hat = matrix_from_rows(&systems::ex14_b_hat(), "reference b_hat")?;
    let problem = LqrProblem::new(
        a_hat,
        b_hat,
        DMatrix::identity(3, 3),
        DMatrix::identity(1, 1),
    )?;
    let dare = solve_dare(&problem, DARE_TOL, DARE_MAX_ITER)?;
    let plant_a = matrix_from_rows(&systems::ex11_a(), "system.A")?;
    let plant_b = matrix_from_rows(&systems::ex11_b(), "system.B")?;
    let verdict = closed_loop_analysis(&plant_a, &plant_b, &dare.f)?;
    c.require(
        "true plant NOT stabilized by reference-estimate gain",
        !verdict.stabilized,
        format!("closed-loop radius = {:.4}", verdict.spectrum.radius),
    );
    c.spectrum(
        "closed-loop spectrum on the true plant",
        &(&verdict.spectrum).into(),
        &[
            Complex::new(-0.1234, 2.0777),
            Complex::new(-0.1234, -2.0777),
            Complex::new(0.5279, 0.0),
        ],
        1e-2,
    );
    Ok(())
}
