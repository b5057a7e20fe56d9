//! The experiment pipeline: simulate, then run the requested analysis tasks
//! and assemble the report.

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::DMatrix;

use linsysid::bounds::{sample_error_bound, BoundInputs};
use linsysid::dynamics::{simulate_autonomous, simulate_controlled, Trajectory};
use linsysid::kernels::{gram, KernelSpec};
use linsysid::lqr::{closed_loop_analysis, solve_dare, LqrProblem, DARE_MAX_ITER, DARE_TOL};
use linsysid::metrics::{compare_trajectories, matrix_distance};
use linsysid::spectral::{eigenvalues, topological_entropy_bowen, topological_entropy_modulus};
use linsysid::sysid::{design_points, estimate_with_report, IdentResult};

use crate::config::{ExperimentConfig, InputSignal, Task};
use crate::error::{CliError, Result};
use crate::report::{
    BoundJson, CompareJson, EntropyJson, EntropyValues, ExperimentReport, IdentJson, RowBoundJson,
    SpectraJson, StabilizationJson,
};
use crate::signals;

/// Confidence level of the bound task: bounds hold with probability 0.95.
const BOUND_DELTA: f64 = 0.05;

/// Simulates the configured system over N steps, honoring noise, quadratic
/// perturbation and the input signal.
pub fn simulate(config: &ExperimentConfig) -> Result<Trajectory> {
    let system = config.to_system()?;
    let x0 = config.to_x0();
    let noise = config.to_noise()?;
    let perturbation = config.to_perturbation()?;
    if config.input_dim() > 0 {
        if perturbation.is_some() {
            return Err(CliError::Config(
                "perturbation: supported for autonomous systems only".into(),
            ));
        }
        let signal = config.input_signal.unwrap_or(InputSignal::Zero);
        let u = signals::generate(signal, config.input_dim(), config.n_steps);
        Ok(simulate_controlled(&system, &x0, &u, noise.as_ref())?)
    } else {
        Ok(simulate_autonomous(
            &system,
            &x0,
            config.n_steps,
            noise.as_ref(),
            perturbation.as_ref(),
        )?)
    }
}

/// Requested tasks plus what they depend on: the bound and compare tasks both
/// consume identification outputs (per-row weights, the estimated matrices).
fn resolve_tasks(config: &ExperimentConfig, extra: &[Task]) -> BTreeSet<Task> {
    let mut tasks: BTreeSet<Task> = config.tasks.iter().copied().collect();
    tasks.extend(extra.iter().copied());
    if tasks.contains(&Task::Bound) || tasks.contains(&Task::Compare) {
        tasks.insert(Task::Identify);
    }
    tasks
}

/// Runs the full pipeline for `config` with `extra` tasks unioned into the
/// config's own task list.
pub fn run(config: &ExperimentConfig, extra: &[Task]) -> Result<ExperimentReport> {
    config.validate()?;
    let tasks = resolve_tasks(config, extra);
    let total_start = Instant::now();
    let mut timings = std::collections::BTreeMap::new();
    let mut time = |name: &str, start: Instant| {
        timings.insert(name.to_string(), start.elapsed().as_secs_f64());
    };

    let plant_a = crate::config::matrix_from_rows(&config.system.a, "system.A")?;
    let plant_b = config
        .system
        .b
        .as_ref()
        .map(|rows| crate::config::matrix_from_rows(rows, "system.B"))
        .transpose()?;

    let start = Instant::now();
    let trajectory = simulate(config)?;
    time("simulate", start);

    let mut ident: Option<IdentResult> = None;
    let mut cv = None;
    if tasks.contains(&Task::Identify) {
        let start = Instant::now();
        let (result, cv_report) = estimate_with_report(&trajectory, &config.to_ident_config()?)?;
        time("identify", start);
        cv = cv_report.as_ref().map(Into::into);
        ident = Some(result);
    }

    let spectra = SpectraJson {
        plant: (&eigenvalues(&plant_a)?).into(),
        estimate: match &ident {
            Some(r) => Some((&eigenvalues(&r.a_hat)?).into()),
            None => None,
        },
    };

    let mut entropy = None;
    if tasks.contains(&Task::Entropy) {
        let start = Instant::now();
        let readings = |m: &DMatrix<f64>| -> Result<EntropyValues> {
            Ok(EntropyValues {
                modulus: topological_entropy_modulus(m)?,
                bowen: topological_entropy_bowen(m)?,
            })
        };
        entropy = Some(EntropyJson {
            plant: readings(&plant_a)?,
            estimate: match &ident {
                Some(r) => Some(readings(&r.a_hat)?),
                None => None,
            },
        });
        time("entropy", start);
    }

    let mut stabilization = None;
    if tasks.contains(&Task::Stabilize) {
        let start = Instant::now();
        let plant_b = plant_b
            .as_ref()
            .ok_or_else(|| CliError::Config("stabilize: requires system.B".into()))?;
        let estimate = ident
            .as_ref()
            .and_then(|r| r.b_hat.as_ref().map(|b| (&r.a_hat, b)));
        let (design, a, b) = match estimate {
            Some((a_hat, b_hat)) => ("estimate", a_hat, b_hat),
            None => ("plant", &plant_a, plant_b),
        };
        let (q, r) = config.to_lqr_weights()?;
        let problem = LqrProblem::new(a.clone(), b.clone(), q, r)?;
        let dare = solve_dare(&problem, DARE_TOL, DARE_MAX_ITER)?;
        let on_estimate = match estimate {
            Some((a_hat, b_hat)) => Some(closed_loop_analysis(a_hat, b_hat, &dare.f)?),
            None => None,
        };
        let on_plant = closed_loop_analysis(&plant_a, plant_b, &dare.f)?;
        stabilization = Some(StabilizationJson::new(
            design,
            &dare,
            on_estimate.as_ref(),
            &on_plant,
        ));
        time("stabilize", start);
    }

    let mut bound = None;
    if tasks.contains(&Task::Bound) {
        let start = Instant::now();
        let result = ident.as_ref().expect("bound task implies identification");
        let amplitude = config.noise.as_ref().map_or(0.0, |n| n.amplitude);
        let (_, evaluation) = design_points(&trajectory, &config.to_ident_config()?)?;
        // Bound the learned function at the canonical basis vectors: with the
        // linear kernel those evaluations are exactly the entries of the
        // estimated matrix row, and their unit Gram keeps the conditioning
        // factor finite (expanding over the N sample points would make it
        // rank-deficient).
        let dim = evaluation.first().map_or(0, |p| p.len());
        let basis: Vec<nalgebra::DVector<f64>> = (0..dim)
            .map(|i| {
                let mut e = nalgebra::DVector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        let kernel = KernelSpec::Linear;
        let k_tt = gram(&kernel, &basis, &basis)?;
        let k_tx = gram(&kernel, &basis, &evaluation)?;
        let m = evaluation.len();
        let mut rows = Vec::with_capacity(result.gammas.len());
        for &gamma in &result.gammas {
            let inputs = BoundInputs::new(
                k_tt.clone(),
                k_tx.clone(),
                vec![1.0 / m as f64; m],
                gamma,
                vec![amplitude; m],
                amplitude * amplitude / 3.0,
                BOUND_DELTA,
            )?;
            let out = sample_error_bound(&inputs)?;
            rows.push(RowBoundJson {
                gamma,
                kappa: out.kappa,
                operator_norm: out.operator_norm,
                coupled_norm: out.coupled_norm,
                b_w: out.b_w,
                sigma_w_sq: out.sigma_w_sq,
                epsilon: out.epsilon,
                degenerate: out.degenerate,
            });
        }
        bound = Some(BoundJson {
            delta: BOUND_DELTA,
            noise_amplitude: amplitude,
            rows,
        });
        time("bound", start);
    }

    let mut compare = None;
    if tasks.contains(&Task::Compare) {
        let start = Instant::now();
        let result = ident.as_ref().expect("compare task implies identification");
        let horizon = 3 * config.n_steps;
        let x0 = config.to_x0();
        let (truth, predicted) = if let Some(plant_b) = &plant_b {
            let signal = config.input_signal.unwrap_or(InputSignal::Zero);
            let u = signals::generate(signal, config.input_dim(), horizon);
            let plant =
                linsysid::dynamics::LinearSystem::controlled(plant_a.clone(), plant_b.clone())?;
            let b_hat = result.b_hat.clone().ok_or_else(|| {
                CliError::Config("compare: estimate carries no input matrix".into())
            })?;
            let model = linsysid::dynamics::LinearSystem::controlled(result.a_hat.clone(), b_hat)?;
            (
                simulate_controlled(&plant, &x0, &u, None)?,
                simulate_controlled(&model, &x0, &u, None)?,
            )
        } else {
            let plant = linsysid::dynamics::LinearSystem::autonomous(plant_a.clone())?;
            let model = linsysid::dynamics::LinearSystem::autonomous(result.a_hat.clone())?;
            (
                simulate_autonomous(
                    &plant,
                    &x0,
                    horizon,
                    None,
                    config.to_perturbation()?.as_ref(),
                )?,
                simulate_autonomous(&model, &x0, horizon, None, None)?,
            )
        };
        let error_report = compare_trajectories(&truth.states, &predicted.states, config.n_steps)?
            .with_matrix_error(matrix_distance(&plant_a, &result.a_hat)?);
        compare = Some(CompareJson::new(horizon, &error_report));
        time("compare", start);
    }

    time("total", total_start);
    Ok(ExperimentReport {
        config: config.clone(),
        ident: ident.as_ref().map(IdentJson::from),
        cv,
        spectra,
        entropy,
        stabilization,
        bound,
        compare,
        timings,
    })
}
