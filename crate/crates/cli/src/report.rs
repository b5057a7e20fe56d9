//! Serializable experiment report.
//!
//! Every section mirrors a library result type with plain `f64` fields so the
//! whole report round-trips through JSON exactly (serde_json emits the
//! shortest decimal that parses back to the same bit pattern). Sections are
//! present when their task ran. Timings are wall-clock seconds and are the
//! only nondeterministic part of a fixed-seed report; comparisons skip them.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use linsysid::lqr::{ClosedLoopAnalysis, DareResult};
use linsysid::metrics::{ErrorReport, MatrixDistance};
use linsysid::modelsel::CvReport;
use linsysid::spectral::Spectrum;
use linsysid::sysid::{IdentResult, RegressionMode};

use crate::config::{rows_from_matrix, ExperimentConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ident: Option<IdentJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvJson>,
    pub spectra: SpectraJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilization: Option<StabilizationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareJson>,
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex<f64>> for ComplexJson {
    fn from(z: Complex<f64>) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub eigenvalues: Vec<ComplexJson>,
    pub radius: f64,
}

impl From<&Spectrum> for SpectrumJson {
    fn from(s: &Spectrum) -> Self {
        Self {
            eigenvalues: s.eigenvalues.iter().map(|&z| z.into()).collect(),
            radius: s.radius,
        }
    }
}

/// Spectrum of the configured state matrix, plus the estimate's when
/// identification ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectraJson {
    pub plant: SpectrumJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<SpectrumJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentJson {
    pub a_hat: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_hat: Option<Vec<Vec<f64>>>,
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub mode: String,
    pub condition_estimates: Vec<f64>,
}

impl From<&IdentResult> for IdentJson {
    fn from(r: &IdentResult) -> Self {
        Self {
            a_hat: rows_from_matrix(&r.a_hat),
            b_hat: r.b_hat.as_ref().map(rows_from_matrix),
            gammas: r.gammas.clone(),
            sigma: r.sigma,
            mode: match r.mode {
                RegressionMode::Representer => "representer".into(),
                RegressionMode::Shifted => "paper".into(),
            },
            condition_estimates: r.condition_estimates.clone(),
        }
    }
}

/// Hold-out selection table: `validation_mse[row][i]` is the score of grid
/// point i for that state row, null where the candidate failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvJson {
    pub chosen_gammas: Vec<f64>,
    pub grid: Vec<f64>,
    pub split: String,
    pub validation_mse: Vec<Vec<Option<f64>>>,
}

impl From<&CvReport> for CvJson {
    fn from(r: &CvReport) -> Self {
        Self {
            chosen_gammas: r.chosen_gammas.clone(),
            grid: r.grid.clone(),
            split: r.split.clone(),
            validation_mse: r.validation_mse.clone(),
        }
    }
}

/// Both entropy readings of a spectrum: `modulus` sums |lambda| over
/// eigenvalues with |lambda| >= 1 - 1e-2, `bowen` sums ln|lambda| over
/// eigenvalues outside the unit circle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EntropyValues {
    pub modulus: f64,
    pub bowen: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyJson {
    pub plant: EntropyValues,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EntropyValues>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedLoopJson {
    pub closed_loop: Vec<Vec<f64>>,
    pub spectrum: SpectrumJson,
    pub stabilized: bool,
}

impl From<&ClosedLoopAnalysis> for ClosedLoopJson {
    fn from(a: &ClosedLoopAnalysis) -> Self {
        Self {
            closed_loop: rows_from_matrix(&a.closed_loop),
            spectrum: (&a.spectrum).into(),
            stabilized: a.stabilized,
        }
    }
}

/// Riccati solution and gain, with the closed loop analyzed against the
/// design model and against the configured plant. `design` names the matrices
/// the gain was computed from: "estimate" when identification ran, "plant"
/// otherwise (in which case `on_estimate` is absent and `on_plant` describes
/// the exact closed loop).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizationJson {
    pub design: String,
    pub p: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_estimate: Option<ClosedLoopJson>,
    pub on_plant: ClosedLoopJson,
}

impl StabilizationJson {
    pub fn new(
        design: &str,
        dare: &DareResult,
        on_estimate: Option<&ClosedLoopAnalysis>,
        on_plant: &ClosedLoopAnalysis,
    ) -> Self {
        Self {
            design: design.into(),
            p: rows_from_matrix(&dare.p),
            f: rows_from_matrix(&dare.f),
            residual: dare.residual,
            iterations: dare.iterations,
            on_estimate: on_estimate.map(Into::into),
            on_plant: on_plant.into(),
        }
    }
}

/// Per-row finite-sample error bounds at confidence 1 - delta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundJson {
    pub delta: f64,
    pub noise_amplitude: f64,
    pub rows: Vec<RowBoundJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowBoundJson {
    pub gamma: f64,
    pub kappa: f64,
    pub operator_norm: f64,
    pub coupled_norm: f64,
    pub b_w: f64,
    pub sigma_w_sq: f64,
    pub epsilon: f64,
    pub degenerate: bool,
}

/// One-step-model rollout versus the noise-free plant over `horizon` steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareJson {
    pub horizon: usize,
    pub tail_start: usize,
    pub error_norms: Vec<f64>,
    pub full_energy: f64,
    pub full_energy_per_component: Vec<f64>,
    pub tail_energy: f64,
    pub tail_energy_per_component: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_error: Option<MatrixDistanceJson>,
}

impl CompareJson {
    pub fn new(horizon: usize, report: &ErrorReport) -> Self {
        Self {
            horizon,
            tail_start: report.tail_start,
            error_norms: report.error_norms.clone(),
            full_energy: report.full_energy,
            full_energy_per_component: report.full_energy_per_component.clone(),
            tail_energy: report.tail_energy,
            tail_energy_per_component: report.tail_energy_per_component.clone(),
            decay_rate: report.decay_rate,
            matrix_error: report.matrix_error.as_ref().map(Into::into),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDistanceJson {
    pub max_abs: f64,
    pub frobenius: f64,
    pub error_spectrum: SpectrumJson,
}

impl From<&MatrixDistance> for MatrixDistanceJson {
    fn from(d: &MatrixDistance) -> Self {
        Self {
            max_abs: d.max_abs,
            frobenius: d.frobenius,
            error_spectrum: (&d.error_spectrum).into(),
        }
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self)
            .expect("report serialization cannot fail: all keys are strings");
        text.push('\n');
        text
    }
}

/// Writes via a temporary file in the destination directory plus an atomic
/// rename, so a crash mid-write never leaves a truncated file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let write_err = |source: std::io::Error| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(write_err)?;
    tmp.write_all(contents.as_bytes()).map_err(write_err)?;
    tmp.persist(path).map_err(|e| write_err(e.error))?;
    Ok(())
}
