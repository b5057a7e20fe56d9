//! Hold-out selection of the per-row regularization weight over a candidate
//! grid: fit on one part of the transition pairs, score one-step-ahead
//! prediction on the rest, refit on everything at the winning weight.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::sysid::{IdentConfig, IdentResult, Regression};

/// How the transition pairs are split into training and validation parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSpec {
    /// Validation takes the final pairs, respecting temporal order.
    Tail,
    /// Validation takes a seeded uniform sample of pairs.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    /// Candidate regularization weights, strictly increasing.
    pub grid: Vec<f64>,
    /// Fraction of pairs held out for validation, in (0, 1).
    pub holdout_fraction: f64,
    pub split: SplitSpec,
}

/// Powers of two from 2^-40 through 2^50, bracketing every useful weight from
/// near-interpolation to near-total shrinkage.
pub fn default_grid() -> Vec<f64> {
    (-40..=50).map(|p| f64::exp2(p as f64)).collect()
}

impl CvConfig {
    pub fn new(grid: Vec<f64>, holdout_fraction: f64, split: SplitSpec) -> Result<Self> {
        let cfg = Self {
            grid,
            holdout_fraction,
            split,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("candidate grid is empty".into()));
        }
        if let Some(bad) = self.grid.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid weights must be finite and nonnegative, got {bad}"
            )));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "candidate grid must be strictly increasing".into(),
            ));
        }
        if !self.holdout_fraction.is_finite()
            || self.holdout_fraction <= 0.0
            || self.holdout_fraction >= 1.0
        {
            return Err(Error::InvalidParameter(format!(
                "holdout fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            holdout_fraction: 0.3,
            split: SplitSpec::Tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Winning weight per state row; each attains its row's minimal entry in
    /// `validation_mse`, with ties resolved toward the smaller weight.
    pub chosen_gammas: Vec<f64>,
    /// validation_mse[row][g]: hold-out MSE at grid[g]; None when that fit
    /// failed or produced a non-finite score.
    pub validation_mse: Vec<Vec<Option<f64>>>,
    /// The candidate grid the table columns refer to.
    pub grid: Vec<f64>,
    /// Human-readable description of the split actually used.
    pub split: String,
}

impl CvReport {
    /// Table as CSV: one line per candidate weight, one column per state row.
    /// Failed fits render as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma");
        for i in 1..=self.validation_mse.len() {
            out.push_str(&format!(",mse_{i}"));
        }
        out.push('\n');
        for (g_idx, gamma) in self.grid.iter().enumerate() {
            out.push_str(&format!("{gamma:.16e}"));
            for row in &self.validation_mse {
                match row[g_idx] {
                    Some(v) => out.push_str(&format!(",{v:.16e}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Selects a regularization weight per state row by hold-out validation and
/// returns the estimate refit on all pairs at the chosen weights, together
/// with the full score table. `ident.gamma_policy` is ignored; the grid comes
/// from `cfg`.
pub fn cross_validate(
    traj: &Trajectory,
    cfg: &CvConfig,
    ident: &IdentConfig,
) -> Result<(IdentResult, CvReport)> {
    cfg.validate()?;
    let reg = Regression::prepare(traj, ident.mode, ident.rescale)?;
    let total = reg.pair_count();
    let holdout = ((cfg.holdout_fraction * total as f64).floor() as usize).max(1);
    let train_count = total.saturating_sub(holdout);
    let min_each = reg.state_dim + reg.input_dim + 1;
    if train_count < min_each || holdout < min_each {
        return Err(Error::DegenerateSplit(format!(
            "{train_count} training / {holdout} validation pairs of {total}; \
             need at least {min_each} in each part"
        )));
    }

    let (train_idx, val_idx, split_label) = match cfg.split {
        SplitSpec::Tail => (
            (0..train_count).collect::<Vec<_>>(),
            (train_count..total).collect::<Vec<_>>(),
            format!("tail holdout: last {holdout} of {total} pairs"),
        ),
        SplitSpec::Random { seed } => {
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
            let mut val = order[..holdout].to_vec();
            let mut train = order[holdout..].to_vec();
            val.sort_unstable();
            train.sort_unstable();
            (
                train,
                val,
                format!("random holdout (seed {seed}): {holdout} of {total} pairs"),
            )
        }
    };

    let n = reg.state_dim;
    let mut table = vec![vec![None; cfg.grid.len()]; n];
    let mut chosen = Vec::with_capacity(n);
    for (i, table_row) in table.iter_mut().enumerate() {
        let mut failures: Vec<String> = Vec::new();
        let mut best: Option<(f64, f64)> = None;
        for (g_idx, &gamma) in cfg.grid.iter().enumerate() {
            match reg.fit_row(i, &train_idx, gamma) {
                Ok((weights, _)) => {
                    let mse = reg.validation_mse(i, &weights, &val_idx);
                    if mse.is_finite() {
                        table_row[g_idx] = Some(mse);
                        // strict comparison keeps the smallest weight on ties
                        if best.is_none_or(|(b, _)| mse < b) {
                            best = Some((mse, gamma));
                        }
                    } else {
                        failures.push(format!("gamma {gamma:.6e}: non-finite validation error"));
                    }
                }
                Err(e) => failures.push(format!("gamma {gamma:.6e}: {e}")),
            }
        }
        match best {
            Some((_, gamma)) => chosen.push(gamma),
            None => {
                return Err(Error::AllCandidatesFailed(format!(
                    "row {i}: {}",
                    failures.join("; ")
                )))
            }
        }
    }

    let result = reg.fit_all(&chosen)?;
    let report = CvReport {
        chosen_gammas: chosen,
        validation_mse: table,
        grid: cfg.grid.clone(),
        split: split_label,
    };
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_autonomous, LinearSystem};
    use crate::sysid::{estimate_a, GammaPolicy, RegressionMode, RescalePolicy};
    use nalgebra::{DMatrix, DVector};

    fn scalar_series(alpha: f64, x0: f64, n_steps: usize) -> Trajectory {
        let sys = LinearSystem::autonomous(DMatrix::from_element(1, 1, alpha)).unwrap();
        simulate_autonomous(&sys, &DVector::from_element(1, x0), n_steps, None, None).unwrap()
    }

    fn plain_ident(mode: RegressionMode) -> IdentConfig {
        IdentConfig {
            gamma_policy: GammaPolicy::Fixed(vec![]),
            mode,
            rescale: RescalePolicy::Never,
        }
    }

    #[test]
    fn default_grid_is_increasing_and_contains_reported_weights() {
        let grid = default_grid();
        assert_eq!(grid.len(), 91);
        assert_eq!(grid[0], 2f64.powi(-40));
        assert_eq!(grid[90], 2f64.powi(50));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        for p in [-30, -20, -16, 20, 48] {
            assert!(grid.contains(&2f64.powi(p)), "missing 2^{p}");
        }
    }

    #[test]
    fn config_validation_rejects_bad_grids_and_fractions() {
        assert!(CvConfig::new(vec![], 0.3, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![1.0, 1.0], 0.3, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![2.0, 1.0], 0.3, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![-1.0, 1.0], 0.3, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![1.0], 0.0, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![1.0], 1.0, SplitSpec::Tail).is_err());
        assert!(CvConfig::new(vec![0.0, 1.0], 0.5, SplitSpec::Tail).is_ok());
    }

    #[test]
    fn singleton_grid_reproduces_the_fixed_weight_estimate() {
        let traj = scalar_series(0.5, -0.5, 100);
        let cfg = CvConfig::new(vec![1e-6], 0.3, SplitSpec::Tail).unwrap();
        let (cv_result, report) =
            cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer)).unwrap();
        let fixed = estimate_a(
            &traj,
            &IdentConfig {
                gamma_policy: GammaPolicy::Fixed(vec![1e-6]),
                mode: RegressionMode::Representer,
                rescale: RescalePolicy::Never,
            },
        )
        .unwrap();
        assert_eq!(report.chosen_gammas, vec![1e-6]);
        assert_eq!(cv_result.a_hat, fixed.a_hat);
    }

    #[test]
    fn default_grid_recovers_the_scalar_decay_rate() {
        let traj = scalar_series(0.5, -0.5, 100);
        let cfg = CvConfig::default();
        let (result, report) =
            cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer)).unwrap();
        assert!((result.a_hat[(0, 0)] - 0.5).abs() <= 1e-3);
        assert!(cfg.grid.contains(&report.chosen_gammas[0]));
    }

    #[test]
    fn chosen_weight_attains_the_row_minimum_of_the_table() {
        let a = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, -0.3, 0.5]);
        let sys = LinearSystem::autonomous(a).unwrap();
        let traj =
            simulate_autonomous(&sys, &DVector::from_vec(vec![1.0, -2.0]), 80, None, None).unwrap();
        let grid = vec![2f64.powi(-20), 2f64.powi(-10), 1.0, 2f64.powi(10), 1e10];
        let cfg = CvConfig::new(grid.clone(), 0.3, SplitSpec::Tail).unwrap();
        let (result, report) =
            cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer)).unwrap();

        for (i, row) in report.validation_mse.iter().enumerate() {
            // exhaustive scan, ties to the smallest weight
            let mut best: Option<(f64, f64)> = None;
            for (g, entry) in row.iter().enumerate() {
                if let Some(mse) = entry {
                    if best.is_none_or(|(b, _)| *mse < b) {
                        best = Some((*mse, grid[g]));
                    }
                }
            }
            let (best_mse, best_gamma) = best.unwrap();
            assert_eq!(report.chosen_gammas[i], best_gamma);
            assert_eq!(result.gammas[i], best_gamma);
            let coarse = row.last().unwrap().unwrap();
            assert!(best_mse <= coarse);
        }
    }

    #[test]
    fn tail_split_is_deterministic() {
        let traj = scalar_series(0.5, -0.5, 60);
        let cfg = CvConfig::default();
        let ident = plain_ident(RegressionMode::Representer);
        let (r1, t1) = cross_validate(&traj, &cfg, &ident).unwrap();
        let (r2, t2) = cross_validate(&traj, &cfg, &ident).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(r1.a_hat, r2.a_hat);
    }

    #[test]
    fn random_split_is_deterministic_per_seed_and_varies_across_seeds() {
        let traj = scalar_series(0.5, -0.5, 60);
        let ident = plain_ident(RegressionMode::Representer);
        let cfg7 = CvConfig::new(default_grid(), 0.3, SplitSpec::Random { seed: 7 }).unwrap();
        let (_, t1) = cross_validate(&traj, &cfg7, &ident).unwrap();
        let (_, t2) = cross_validate(&traj, &cfg7, &ident).unwrap();
        assert_eq!(t1, t2);

        let cfg8 = CvConfig::new(default_grid(), 0.3, SplitSpec::Random { seed: 8 }).unwrap();
        let (_, t3) = cross_validate(&traj, &cfg8, &ident).unwrap();
        assert_ne!(t1.validation_mse, t3.validation_mse);
    }

    // A diverging system whose slow mode decays relative to the growth
    // factor: the rescaled slow-row signal is alive only in the early pairs,
    // so a random split (which keeps some of them for validation) picks a
    // small weight for every row, while scoring against the magnitudes of the
    // original diverging series would reward shrinking slow rows to zero.
    #[test]
    fn random_split_recovers_slow_rows_of_a_diverging_system() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![6.0, -1.5]));
        let sys = LinearSystem::autonomous(a.clone()).unwrap();
        let traj =
            simulate_autonomous(&sys, &DVector::from_vec(vec![1.0, 1.0]), 60, None, None).unwrap();
        let cfg = CvConfig::new(default_grid(), 0.3, SplitSpec::Random { seed: 3 }).unwrap();
        let ident = IdentConfig {
            gamma_policy: GammaPolicy::CrossValidate(cfg.clone()),
            mode: RegressionMode::Representer,
            rescale: RescalePolicy::Auto,
        };
        let (result, report) = cross_validate(&traj, &cfg, &ident).unwrap();
        assert!(
            (result.sigma - 6.0).abs() <= 1e-9,
            "sigma = {}",
            result.sigma
        );
        assert!(
            (&result.a_hat - &a).amax() <= 1e-3,
            "a_hat = {:?}, chosen = {:?}",
            result.a_hat,
            report.chosen_gammas
        );
    }

    #[test]
    fn too_small_trajectories_are_a_degenerate_split() {
        let traj = scalar_series(0.5, 1.0, 3);
        let cfg = CvConfig::new(vec![1e-6], 0.3, SplitSpec::Tail).unwrap();
        let err = cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer));
        assert!(matches!(err, Err(Error::DegenerateSplit(_))));
    }

    #[test]
    fn all_failing_candidates_surface_as_one_error() {
        // constant series: the unregularized coefficient system is singular
        let traj = scalar_series(1.0, 1.0, 30);
        let cfg = CvConfig::new(vec![0.0], 0.3, SplitSpec::Tail).unwrap();
        let err = cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer));
        assert!(matches!(err, Err(Error::AllCandidatesFailed(_))));
    }

    #[test]
    fn report_table_renders_as_csv() {
        let traj = scalar_series(0.5, -0.5, 40);
        let cfg = CvConfig::new(vec![1e-8, 1e-2], 0.3, SplitSpec::Tail).unwrap();
        let (_, report) =
            cross_validate(&traj, &cfg, &plain_ident(RegressionMode::Representer)).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "gamma,mse_1");
        assert!(lines[1].starts_with("1.0000000000000000e-8,"));
    }
}
