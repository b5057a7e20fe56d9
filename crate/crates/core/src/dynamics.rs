//! Trajectory generation for autonomous and controlled linear systems, with
//! optional measurement noise and quadratic structural perturbation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Any component beyond this magnitude aborts simulation instead of
/// propagating toward infinity.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Name of the generator behind every seeded sample, recorded in reports so a
/// run can be reproduced outside this crate.
pub const PRNG_NAME: &str = "chacha12";

/// x(k+1) = A x(k) (+ B u(k) when `b` is present).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: Option<DMatrix<f64>>,
}

impl LinearSystem {
    pub fn autonomous(a: DMatrix<f64>) -> Result<Self> {
        Self::new(a, None)
    }

    pub fn controlled(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(a, Some(b))
    }

    pub fn new(a: DMatrix<f64>, b: Option<DMatrix<f64>>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "LinearSystem: A must be square",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if let Some(b) = &b {
            if b.nrows() != a.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "LinearSystem: B row count must match A",
                    expected: a.nrows(),
                    found: b.nrows(),
                });
            }
            if b.ncols() == 0 {
                return Err(Error::InvalidParameter(
                    "B must have at least one column".into(),
                ));
            }
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Number of input channels; 0 when the system is autonomous.
    pub fn input_dim(&self) -> usize {
        self.b.as_ref().map_or(0, |b| b.ncols())
    }
}

/// Measurement noise: each observed component gets an independent draw from
/// the uniform distribution on [-amplitude, amplitude].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(amplitude: f64, seed: u64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise amplitude must be finite and nonnegative, got {amplitude}"
            )));
        }
        Ok(Self { amplitude, seed })
    }
}

/// Componentwise quadratic term added to the dynamics:
/// x_i(k+1) += epsilon * x_i(k)^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter(
                "perturbation epsilon must be finite".into(),
            ));
        }
        Ok(Self { epsilon })
    }
}

/// Observed states x(0..N), plus the inputs u(0..N-1) used to produce them for
/// controlled systems. x(0) is always stored without noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>, inputs: Option<Vec<DVector<f64>>>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: states.len(),
            });
        }
        let n = states[0].len();
        if states.iter().any(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "Trajectory: all states must share one dimension",
                expected: n,
                found: states
                    .iter()
                    .map(|s| s.len())
                    .find(|&l| l != n)
                    .unwrap_or(n),
            });
        }
        if let Some(us) = &inputs {
            if us.len() != states.len() - 1 {
                return Err(Error::DimensionMismatch {
                    context: "Trajectory: inputs must cover indices 0..N-1",
                    expected: states.len() - 1,
                    found: us.len(),
                });
            }
            if let Some(m) = us.first().map(|u| u.len()) {
                if us.iter().any(|u| u.len() != m) {
                    return Err(Error::DimensionMismatch {
                        context: "Trajectory: all inputs must share one dimension",
                        expected: m,
                        found: 0,
                    });
                }
            }
        }
        Ok(Self { states, inputs })
    }

    /// N: number of transitions (states run 0..N).
    pub fn sample_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs
            .as_ref()
            .and_then(|u| u.first())
            .map_or(0, |u| u.len())
    }

    /// CSV with header `k,x1,...,xn[,u1,...,um]`, one row per index, 17
    /// significant digits. The input columns of the final row (which has no
    /// paired input) are left empty.
    pub fn to_csv(&self) -> String {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut out = String::from("k");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for j in 1..=m {
            out.push_str(&format!(",u{j}"));
        }
        out.push('\n');
        for (k, x) in self.states.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x.iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            if m > 0 {
                match self.inputs.as_ref().unwrap().get(k) {
                    Some(u) => {
                        for v in u.iter() {
                            out.push_str(&format!(",{v:.16e}"));
                        }
                    }
                    None => out.push_str(&",".repeat(m)),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::TrajectoryParse {
            line: 1,
            message: "empty input".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let n = cols.iter().filter(|c| c.starts_with('x')).count();
        let m = cols.iter().filter(|c| c.starts_with('u')).count();
        if cols.first() != Some(&"k") || n == 0 || cols.len() != 1 + n + m {
            return Err(Error::TrajectoryParse {
                line: 1,
                message: format!("bad header {header:?}, expected k,x1,...[,u1,...]"),
            });
        }

        let mut states = Vec::new();
        let mut inputs: Vec<DVector<f64>> = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::TrajectoryParse {
                    line: lineno,
                    message: format!("expected {} fields, found {}", cols.len(), fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::TrajectoryParse {
                    line: lineno,
                    message: format!("bad number {s:?}: {e}"),
                })
            };
            let x: Vec<f64> = fields[1..1 + n]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?;
            states.push(DVector::from_vec(x));
            if m > 0 && !fields[1 + n].trim().is_empty() {
                let u: Vec<f64> = fields[1 + n..]
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<_>>()?;
                inputs.push(DVector::from_vec(u));
            }
        }
        Self::new(states, (m > 0).then_some(inputs))
    }
}

/// `count` vectors of dimension `n`, each component drawn iid uniform on
/// [-amplitude, amplitude]. Deterministic per seed.
pub fn sample_noise(spec: &NoiseSpec, n: usize, count: usize) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "noise dimension must be >= 1".into(),
        ));
    }
    if !spec.amplitude.is_finite() || spec.amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise amplitude must be finite and nonnegative, got {}",
            spec.amplitude
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let m = spec.amplitude;
    Ok((0..count)
        .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-m..=m)))
        .collect())
}

fn check_overflow(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
        Err(Error::Overflow { step })
    } else {
        Ok(())
    }
}

fn observe(clean: Vec<DVector<f64>>, noise: Option<&NoiseSpec>) -> Result<Vec<DVector<f64>>> {
    let Some(spec) = noise else { return Ok(clean) };
    let n = clean[0].len();
    let etas = sample_noise(spec, n, clean.len() - 1)?;
    // x(0) is known exactly; noise starts at index 1.
    Ok(clean
        .into_iter()
        .enumerate()
        .map(|(k, x)| if k == 0 { x } else { x + &etas[k - 1] })
        .collect())
}

/// Runs x(k+1) = A x(k) + epsilon * x(k)^2 (componentwise square) for N steps
/// and returns the observed states x(k) + eta_k (eta_0 = 0).
pub fn simulate_autonomous(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    n_steps: usize,
    noise: Option<&NoiseSpec>,
    perturb: Option<&PerturbationSpec>,
) -> Result<Trajectory> {
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "simulate_autonomous: x0 dimension",
            expected: sys.state_dim(),
            found: x0.len(),
        });
    }
    if n_steps == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let eps = perturb.map_or(0.0, |p| p.epsilon);
    let mut clean = Vec::with_capacity(n_steps + 1);
    check_overflow(x0, 0)?;
    clean.push(x0.clone());
    for k in 0..n_steps {
        let prev = &clean[k];
        let mut next = &sys.a * prev;
        if eps != 0.0 {
            next += eps * prev.component_mul(prev);
        }
        check_overflow(&next, k + 1)?;
        clean.push(next);
    }
    Trajectory::new(observe(clean, noise)?, None)
}

/// Runs x(k+1) = A x(k) + B u(k) over the supplied input sequence and returns
/// the observed states together with the (noiseless, known) inputs.
pub fn simulate_controlled(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &[DVector<f64>],
    noise: Option<&NoiseSpec>,
) -> Result<Trajectory> {
    let b = sys.b.as_ref().ok_or(Error::MissingInputs)?;
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "simulate_controlled: x0 dimension",
            expected: sys.state_dim(),
            found: x0.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(bad) = u.iter().find(|ui| ui.len() != b.ncols()) {
        return Err(Error::DimensionMismatch {
            context: "simulate_controlled: input dimension",
            expected: b.ncols(),
            found: bad.len(),
        });
    }
    let mut clean = Vec::with_capacity(u.len() + 1);
    check_overflow(x0, 0)?;
    clean.push(x0.clone());
    for (k, uk) in u.iter().enumerate() {
        let next = &sys.a * &clean[k] + b * uk;
        check_overflow(&next, k + 1)?;
        clean.push(next);
    }
    Trajectory::new(observe(clean, noise)?, Some(u.to_vec()))
}
