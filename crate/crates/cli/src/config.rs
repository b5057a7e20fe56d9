//! Strict JSON experiment configuration.
//!
//! Unknown fields anywhere in the document are rejected, so a misspelled key
//! fails parsing with a message that names it instead of being silently
//! ignored. All matrices are row-major arrays of arrays.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use linsysid::dynamics::{LinearSystem, NoiseSpec, PerturbationSpec};
use linsysid::modelsel::{default_grid, CvConfig, SplitSpec};
use linsysid::sysid::{GammaPolicy, IdentConfig, RegressionMode, RescalePolicy};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub x0: Vec<f64>,
    #[serde(rename = "N")]
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_signal: Option<InputSignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub ident: IdentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr: Option<LqrSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

/// Input catalogue evaluated at integer steps k = 0, 1, ...; every input
/// component receives the same scalar value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSignal {
    Zero,
    SinPlusCos,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentSection {
    #[serde(default)]
    pub mode: ModeChoice,
    #[serde(default)]
    pub rescale: RescaleChoice,
    #[serde(default)]
    pub gamma: GammaChoice,
}

/// Regression mode by CLI token: `representer` expands over the regressor
/// states, `paper` over the successors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    #[default]
    Representer,
    Paper,
}

impl ModeChoice {
    pub fn to_core(self) -> RegressionMode {
        match self {
            ModeChoice::Representer => RegressionMode::Representer,
            ModeChoice::Paper => RegressionMode::Shifted,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleChoice {
    #[default]
    Auto,
    Never,
    Always,
}

impl RescaleChoice {
    fn to_core(self) -> RescalePolicy {
        match self {
            RescaleChoice::Auto => RescalePolicy::Auto,
            RescaleChoice::Never => RescalePolicy::Never,
            RescaleChoice::Always => RescalePolicy::Always,
        }
    }
}

/// Regularization weights: an explicit list (one per state row, or a single
/// entry broadcast to every row) or the string `"cv"` for hold-out selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaChoice {
    Fixed(Vec<f64>),
    Selector(String),
}

impl Default for GammaChoice {
    fn default() -> Self {
        GammaChoice::Selector("cv".into())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    /// Grid of powers of two, lo..=hi exponents. Absent: the built-in grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: i32,
    pub hi: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Tail,
    Random { seed: u64 },
}

impl SplitChoice {
    fn to_core(self) -> SplitSpec {
        match self {
            SplitChoice::Tail => SplitSpec::Tail,
            SplitChoice::Random { seed } => SplitSpec::Random { seed },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrSection {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Identify,
    Entropy,
    Stabilize,
    Bound,
    Compare,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(CliError::Config(format!("{what}: matrix has no rows")));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(CliError::Config(format!("{what}: matrix has empty rows")));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!(
            "{what}: ragged rows, expected {cols} columns in each"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Dimensional and range checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<()> {
        let a = matrix_from_rows(&self.system.a, "system.A")?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(CliError::Config(format!(
                "system.A: expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(b_rows) = &self.system.b {
            let b = matrix_from_rows(b_rows, "system.B")?;
            if b.nrows() != n {
                return Err(CliError::Config(format!(
                    "system.B: expected {n} rows to match system.A, got {}",
                    b.nrows()
                )));
            }
        }
        if self.x0.len() != n {
            return Err(CliError::Config(format!(
                "x0: expected {n} components to match system.A, got {}",
                self.x0.len()
            )));
        }
        if self.n_steps == 0 {
            return Err(CliError::Config("N: must be at least 1".into()));
        }
        if let Some(noise) = &self.noise {
            if !noise.amplitude.is_finite() || noise.amplitude < 0.0 {
                return Err(CliError::Config(format!(
                    "noise.amplitude: must be finite and nonnegative, got {}",
                    noise.amplitude
                )));
            }
        }
        if let Some(p) = &self.perturbation {
            if !p.epsilon.is_finite() {
                return Err(CliError::Config(
                    "perturbation.epsilon: must be finite".into(),
                ));
            }
        }
        if let InputSignal::Constant(c) = self.input_signal.unwrap_or(InputSignal::Zero) {
            if !c.is_finite() {
                return Err(CliError::Config(
                    "input_signal.constant: must be finite".into(),
                ));
            }
        }
        match &self.ident.gamma {
            GammaChoice::Fixed(list) => {
                if list.is_empty() {
                    return Err(CliError::Config("ident.gamma: empty weight list".into()));
                }
                if list.len() != 1 && list.len() != n {
                    return Err(CliError::Config(format!(
                        "ident.gamma: expected 1 or {n} weights, got {}",
                        list.len()
                    )));
                }
                if let Some(bad) = list.iter().find(|g| !g.is_finite() || **g <= 0.0) {
                    return Err(CliError::Config(format!(
                        "ident.gamma: weights must be finite and positive, got {bad}"
                    )));
                }
            }
            GammaChoice::Selector(s) if s == "cv" => {}
            GammaChoice::Selector(s) => {
                return Err(CliError::Config(format!(
                    "ident.gamma: expected a list of weights or \"cv\", got {s:?}"
                )));
            }
        }
        if let Some(cv) = &self.cv {
            if let Some(grid) = &cv.grid {
                if grid.lo > grid.hi {
                    return Err(CliError::Config(format!(
                        "cv.grid: lo = {} exceeds hi = {}",
                        grid.lo, grid.hi
                    )));
                }
            }
            if let Some(f) = cv.holdout_fraction {
                if !f.is_finite() || f <= 0.0 || f >= 1.0 {
                    return Err(CliError::Config(format!(
                        "cv.holdout_fraction: must lie strictly between 0 and 1, got {f}"
                    )));
                }
            }
        }
        if let Some(lqr) = &self.lqr {
            let q = matrix_from_rows(&lqr.q, "lqr.Q")?;
            if q.nrows() != n || q.ncols() != n {
                return Err(CliError::Config(format!(
                    "lqr.Q: expected {n}x{n}, got {}x{}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            let b_cols = self
                .system
                .b
                .as_ref()
                .and_then(|rows| rows.first())
                .map(Vec::len)
                .unwrap_or(0);
            if b_cols == 0 {
                return Err(CliError::Config(
                    "lqr: requires system.B for gain design".into(),
                ));
            }
            let r = matrix_from_rows(&lqr.r, "lqr.R")?;
            if r.nrows() != b_cols || r.ncols() != b_cols {
                return Err(CliError::Config(format!(
                    "lqr.R: expected {b_cols}x{b_cols} to match system.B, got {}x{}",
                    r.nrows(),
                    r.ncols()
                )));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.system.a.len()
    }

    pub fn input_dim(&self) -> usize {
        self.system
            .b
            .as_ref()
            .and_then(|rows| rows.first())
            .map(Vec::len)
            .unwrap_or(0)
    }

    pub fn to_system(&self) -> Result<LinearSystem> {
        let a = matrix_from_rows(&self.system.a, "system.A")?;
        let b = match &self.system.b {
            Some(rows) => Some(matrix_from_rows(rows, "system.B")?),
            None => None,
        };
        Ok(LinearSystem::new(a, b)?)
    }

    pub fn to_x0(&self) -> DVector<f64> {
        DVector::from_vec(self.x0.clone())
    }

    pub fn to_noise(&self) -> Result<Option<NoiseSpec>> {
        self.noise
            .as_ref()
            .map(|n| NoiseSpec::new(n.amplitude, n.seed).map_err(CliError::from))
            .transpose()
    }

    pub fn to_perturbation(&self) -> Result<Option<PerturbationSpec>> {
        self.perturbation
            .as_ref()
            .map(|p| PerturbationSpec::new(p.epsilon).map_err(CliError::from))
            .transpose()
    }

    pub fn to_cv_config(&self) -> Result<CvConfig> {
        let section = self.cv.clone().unwrap_or_default();
        let defaults = CvConfig::default();
        let grid = match section.grid {
            Some(GridSpec { lo, hi }) => (lo..=hi).map(|p| (p as f64).exp2()).collect(),
            None => default_grid(),
        };
        let config = CvConfig {
            grid,
            holdout_fraction: section
                .holdout_fraction
                .unwrap_or(defaults.holdout_fraction),
            split: section.split.map_or(defaults.split, SplitChoice::to_core),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_ident_config(&self) -> Result<IdentConfig> {
        let gamma_policy = match &self.ident.gamma {
            GammaChoice::Fixed(list) => {
                let mut gammas = list.clone();
                if gammas.len() == 1 {
                    gammas = vec![gammas[0]; self.state_dim()];
                }
                GammaPolicy::Fixed(gammas)
            }
            GammaChoice::Selector(_) => GammaPolicy::CrossValidate(self.to_cv_config()?),
        };
        Ok(IdentConfig {
            gamma_policy,
            mode: self.ident.mode.to_core(),
            rescale: self.ident.rescale.to_core(),
        })
    }

    pub fn to_lqr_weights(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.lqr {
            Some(section) => Ok((
                matrix_from_rows(&section.q, "lqr.Q")?,
                matrix_from_rows(&section.r, "lqr.R")?,
            )),
            None => Ok((
                DMatrix::identity(self.state_dim(), self.state_dim()),
                DMatrix::identity(self.input_dim(), self.input_dim()),
            )),
        }
    }
}
