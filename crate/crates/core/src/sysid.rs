//! Identification of linear dynamics from a single trajectory by kernel ridge
//! regression: row-wise estimation of A, growth rescaling for divergent data,
//! and extended-state estimation of (A, B) for driven systems.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{simulate_autonomous, LinearSystem, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{ridge_solve, KernelSpec, RidgeProblem};
use crate::modelsel::{self, CvConfig};

/// Growth factor above which `RescalePolicy::Auto` activates. The margin over
/// 1 keeps marginally stable, noise-dominated series on the direct path.
pub const AUTO_RESCALE_THRESHOLD: f64 = 1.05;

/// How the regression pairs the expansion set against the evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionMode {
    /// Expand over the regressor states themselves. The Gram matrix is
    /// symmetric positive semidefinite and the fit coincides with ordinary
    /// ridge regression on the transition pairs.
    Representer,
    /// Expand over the successor states while evaluating at the regressors,
    /// giving a nonsymmetric coefficient system.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescalePolicy {
    /// Rescale only when the data grows faster than `AUTO_RESCALE_THRESHOLD`.
    Auto,
    Never,
    Always,
}

/// Per-row regularization: fixed weights or hold-out selection over a grid.
#[derive(Debug, Clone)]
pub enum GammaPolicy {
    /// One weight per state row.
    Fixed(Vec<f64>),
    CrossValidate(CvConfig),
}

#[derive(Debug, Clone)]
pub struct IdentConfig {
    pub gamma_policy: GammaPolicy,
    pub mode: RegressionMode,
    pub rescale: RescalePolicy,
}

impl IdentConfig {
    pub fn fixed(gammas: Vec<f64>) -> Self {
        Self {
            gamma_policy: GammaPolicy::Fixed(gammas),
            mode: RegressionMode::Representer,
            rescale: RescalePolicy::Auto,
        }
    }

    pub fn cross_validated(cv: CvConfig) -> Self {
        Self {
            gamma_policy: GammaPolicy::CrossValidate(cv),
            mode: RegressionMode::Representer,
            rescale: RescalePolicy::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdentResult {
    pub a_hat: DMatrix<f64>,
    pub b_hat: Option<DMatrix<f64>>,
    /// Regularization weight used for each state row.
    pub gammas: Vec<f64>,
    /// Growth factor divided out of the data before fitting; 1.0 when no
    /// rescaling ran.
    pub sigma: f64,
    pub mode: RegressionMode,
    /// 1-norm condition estimate of each row's regularized coefficient system.
    pub condition_estimates: Vec<f64>,
}

/// Euclidean norm computed against the largest component so that squaring
/// never overflows: points on strongly diverging trajectories reach
/// magnitudes whose squares exceed the f64 range long before the components
/// themselves do.
fn overflow_safe_norm(v: &DVector<f64>) -> f64 {
    let peak = v.amax();
    if peak == 0.0 || !peak.is_finite() {
        return peak;
    }
    peak * (v / peak).norm()
}

/// Largest successive Euclidean-norm ratio of consecutive points; `None` when
/// every denominator is zero.
fn max_growth_ratio(points: &[DVector<f64>]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for pair in points.windows(2) {
        let denom = overflow_safe_norm(&pair[0]);
        if denom > 0.0 {
            let ratio = overflow_safe_norm(&pair[1]) / denom;
            best = Some(best.map_or(ratio, |b| b.max(ratio)));
        }
    }
    best
}

/// Growth factor of a trajectory: max_k ‖x(k+1)‖ / ‖x(k)‖ over states with
/// nonzero norm. On a noiseless exact trajectory it is bounded by ‖A‖₂.
pub fn compute_sigma(traj: &Trajectory) -> Result<f64> {
    max_growth_ratio(&traj.states).ok_or(Error::UndefinedSigma)
}

/// Divides the growth factor out of a trajectory: y(k) = x(k) / sigma^(k-1)
/// for k ≥ 1, with y(0) = x(0) kept verbatim. Inputs, when present, are scaled
/// with the same per-step factor so extended points stay consistent.
pub fn rescale_trajectory(traj: &Trajectory, sigma: f64) -> Result<Trajectory> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rescale factor must be positive and finite, got {sigma}"
        )));
    }
    let scaled = |k: usize, v: &DVector<f64>| -> DVector<f64> {
        if k == 0 {
            v.clone()
        } else {
            v / sigma.powi(k as i32 - 1)
        }
    };
    let states = traj
        .states
        .iter()
        .enumerate()
        .map(|(k, x)| scaled(k, x))
        .collect();
    let inputs = traj
        .inputs
        .as_ref()
        .map(|us| us.iter().enumerate().map(|(k, u)| scaled(k, u)).collect());
    Trajectory::new(states, inputs)
}

/// A trajectory turned into aligned regression pairs: fit-space points (the
/// state, extended by the input when present, divided by sigma^(k-1) when
/// rescaling is active). Pair j predicts the successor of its evaluation
/// point. Hold-out validation scores in the same rescaled coordinates the fit
/// runs in: on a diverging trajectory the original-scale one-step error grows
/// like the dominant mode raised to the step index, which drowns out (and for
/// fast enough growth overflows past) the signal of the slower rows.
pub(crate) struct Regression {
    evaluation: Vec<DVector<f64>>,
    expansion: Vec<DVector<f64>>,
    successors: Vec<DVector<f64>>,
    pub(crate) sigma: f64,
    pub(crate) mode: RegressionMode,
    pub(crate) state_dim: usize,
    pub(crate) input_dim: usize,
}

impl Regression {
    pub(crate) fn prepare(
        traj: &Trajectory,
        mode: RegressionMode,
        rescale: RescalePolicy,
    ) -> Result<Self> {
        let n = traj.state_dim();
        let m = traj.input_dim();
        let count = traj.sample_count();

        // Regressor points as the fit sees them before any scaling. Without
        // inputs the successor states are regressors too, so the list runs one
        // index further.
        let points: Vec<DVector<f64>> = if m == 0 {
            traj.states.clone()
        } else {
            let inputs = traj.inputs.as_ref().expect("input_dim > 0 implies inputs");
            (0..count)
                .map(|k| {
                    let mut p = DVector::zeros(n + m);
                    p.rows_mut(0, n).copy_from(&traj.states[k]);
                    p.rows_mut(n, m).copy_from(&inputs[k]);
                    p
                })
                .collect()
        };

        let growth = max_growth_ratio(&points);
        let (sigma, active) = match rescale {
            RescalePolicy::Never => (1.0, false),
            RescalePolicy::Always => {
                let s = growth.ok_or(Error::UndefinedSigma)?;
                if s <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "growth factor is zero; the series cannot be rescaled".into(),
                    ));
                }
                (s, true)
            }
            RescalePolicy::Auto => match growth {
                Some(s) if s > AUTO_RESCALE_THRESHOLD => (s, true),
                _ => (1.0, false),
            },
        };

        // The rescaled pair (y(0), y(1)) is off by one power of sigma because
        // y(0) is kept verbatim, so an active rescale starts the fit at k = 1.
        let k_min = usize::from(active);
        // The shifted expansion set needs the point after the last evaluation
        // index; with inputs that point does not exist for the final pair.
        let truncate = usize::from(mode == RegressionMode::Shifted && m > 0);
        let k_max = count - truncate;
        if k_max <= k_min {
            return Err(Error::TooFewSamples {
                needed: k_min + truncate + 2,
                got: count + 1,
            });
        }

        let scale = |k: usize| -> f64 {
            if active && k >= 1 {
                sigma.powi(k as i32 - 1)
            } else {
                1.0
            }
        };

        let pairs = k_max - k_min;
        let mut evaluation = Vec::with_capacity(pairs);
        let mut expansion = Vec::with_capacity(pairs);
        let mut successors = Vec::with_capacity(pairs);
        for k in k_min..k_max {
            evaluation.push(&points[k] / scale(k));
            let j = match mode {
                RegressionMode::Representer => k,
                RegressionMode::Shifted => k + 1,
            };
            expansion.push(&points[j] / scale(j));
            successors.push(&traj.states[k + 1] / scale(k + 1));
        }

        Ok(Self {
            evaluation,
            expansion,
            successors,
            sigma,
            mode,
            state_dim: n,
            input_dim: m,
        })
    }

    pub(crate) fn pair_count(&self) -> usize {
        self.evaluation.len()
    }

    /// Ridge fit of one state row on a subset of pairs. Returns the weights of
    /// the estimated row in the original scale (extended by the input columns
    /// when present) and the condition estimate of the coefficient system.
    pub(crate) fn fit_row(
        &self,
        row: usize,
        indices: &[usize],
        gamma: f64,
    ) -> Result<(DVector<f64>, f64)> {
        let problem = RidgeProblem {
            expansion_points: indices.iter().map(|&j| self.expansion[j].clone()).collect(),
            evaluation_points: indices
                .iter()
                .map(|&j| self.evaluation[j].clone())
                .collect(),
            targets: DVector::from_iterator(
                indices.len(),
                indices.iter().map(|&j| self.successors[j][row]),
            ),
            gamma,
            sample_count: indices.len(),
        };
        let solution = ridge_solve(&problem, &KernelSpec::Linear)?;
        // The fit estimates rows of A/sigma; undo the rescale here.
        let weights = solution.linear_weights() * self.sigma;
        Ok((weights, solution.condition_estimate))
    }

    /// Mean squared one-step-ahead error of original-scale row weights over a
    /// subset of pairs, measured in the rescaled fit coordinates.
    pub(crate) fn validation_mse(
        &self,
        row: usize,
        weights: &DVector<f64>,
        indices: &[usize],
    ) -> f64 {
        let scaled_weights = weights / self.sigma;
        let acc: f64 = indices
            .iter()
            .map(|&j| {
                let e = scaled_weights.dot(&self.evaluation[j]) - self.successors[j][row];
                e * e
            })
            .sum();
        acc / indices.len() as f64
    }

    pub(crate) fn fit_all(&self, gammas: &[f64]) -> Result<IdentResult> {
        let indices: Vec<usize> = (0..self.pair_count()).collect();
        let n = self.state_dim;
        let m = self.input_dim;
        let mut a_hat = DMatrix::zeros(n, n);
        let mut b_hat = (m > 0).then(|| DMatrix::zeros(n, m));
        let mut condition_estimates = Vec::with_capacity(n);
        for i in 0..n {
            let (w, cond) = self.fit_row(i, &indices, gammas[i])?;
            for l in 0..n {
                a_hat[(i, l)] = w[l];
            }
            if let Some(b) = b_hat.as_mut() {
                for l in 0..m {
                    b[(i, l)] = w[n + l];
                }
            }
            condition_estimates.push(cond);
        }
        Ok(IdentResult {
            a_hat,
            b_hat,
            gammas: gammas.to_vec(),
            sigma: self.sigma,
            mode: self.mode,
            condition_estimates,
        })
    }
}

fn validate_gammas(gammas: &[f64], rows: usize) -> Result<()> {
    if gammas.len() != rows {
        return Err(Error::DimensionMismatch {
            context: "fixed gamma list: one weight per state row",
            expected: rows,
            found: gammas.len(),
        });
    }
    if let Some(bad) = gammas.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

fn estimate(traj: &Trajectory, cfg: &IdentConfig) -> Result<IdentResult> {
    estimate_full(traj, cfg).map(|(result, _)| result)
}

fn estimate_full(
    traj: &Trajectory,
    cfg: &IdentConfig,
) -> Result<(IdentResult, Option<modelsel::CvReport>)> {
    match &cfg.gamma_policy {
        GammaPolicy::Fixed(gammas) => {
            validate_gammas(gammas, traj.state_dim())?;
            let result = Regression::prepare(traj, cfg.mode, cfg.rescale)?.fit_all(gammas)?;
            Ok((result, None))
        }
        GammaPolicy::CrossValidate(cv) => {
            let (result, report) = modelsel::cross_validate(traj, cv, cfg)?;
            Ok((result, Some(report)))
        }
    }
}

/// Estimates the state matrix of x(k+1) = A x(k) from an autonomous
/// trajectory: one ridge regression per state row, entries recovered as the
/// linear-kernel weights of the fitted expansion.
pub fn estimate_a(traj: &Trajectory, cfg: &IdentConfig) -> Result<IdentResult> {
    if traj.inputs.is_some() {
        return Err(Error::UnexpectedInputs);
    }
    let needed = traj.state_dim() + 1;
    if traj.states.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: traj.states.len(),
        });
    }
    estimate(traj, cfg)
}

/// Estimates (A, B) of x(k+1) = A x(k) + B u(k) by regressing each state row
/// on the extended points (x(k), u(k)). The input rows are exogenous and are
/// not fitted; rescaling, when active, uses the extended-point growth factor.
pub fn estimate_ab(traj: &Trajectory, cfg: &IdentConfig) -> Result<IdentResult> {
    if traj.inputs.is_none() {
        return Err(Error::MissingInputs);
    }
    let needed = traj.state_dim() + traj.input_dim() + 1;
    if traj.states.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: traj.states.len(),
        });
    }
    estimate(traj, cfg)
}

/// Like [`estimate_a`]/[`estimate_ab`] (dispatching on whether the trajectory
/// carries inputs) but also surfaces the selection report when the weight was
/// cross-validated.
pub fn estimate_with_report(
    traj: &Trajectory,
    cfg: &IdentConfig,
) -> Result<(IdentResult, Option<modelsel::CvReport>)> {
    let needed = traj.state_dim() + traj.input_dim() + 1;
    if traj.states.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: traj.states.len(),
        });
    }
    estimate_full(traj, cfg)
}

/// Kernel expansion points and regression evaluation points, in that order,
/// in fit-space coordinates.
pub type DesignPoints = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// The expansion and evaluation point sets the regression would use for this
/// trajectory and config. These feed the identified model's sample-error
/// bound, which needs the same Gram matrices the fit saw.
pub fn design_points(traj: &Trajectory, cfg: &IdentConfig) -> Result<DesignPoints> {
    let reg = Regression::prepare(traj, cfg.mode, cfg.rescale)?;
    Ok((reg.expansion.clone(), reg.evaluation.clone()))
}

/// Rolls the estimated dynamics forward without noise: x̂(k+1) = Â x̂(k).
pub fn predict(a_hat: &DMatrix<f64>, x0: &DVector<f64>, n_steps: usize) -> Result<Trajectory> {
    let sys = LinearSystem::autonomous(a_hat.clone())?;
    simulate_autonomous(&sys, x0, n_steps, None, None)
}
