use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use linsysid_cli::config::{ExperimentConfig, GammaChoice, ModeChoice, Task};
use linsysid_cli::error::{CliError, Result};
use linsysid_cli::report::write_atomic;
use linsysid_cli::repro::CheckLine;
use linsysid_cli::{diff, repro, run};

#[derive(Parser)]
#[command(
    name = "linsysid",
    version,
    about = "Simulate linear systems, identify them from trajectories, and analyze the results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system and emit the trajectory as CSV.
    Simulate(RunArgs),
    /// Identify the state matrix of an autonomous system.
    Identify(RunArgs),
    /// Identify state and input matrices of a controlled system.
    IdentifyCtrl(RunArgs),
    /// Report both entropy readings of the configured system.
    Entropy(RunArgs),
    /// Design an LQR gain and analyze the closed loop.
    Stabilize(RunArgs),
    /// Compute per-row finite-sample error bounds.
    Bound(RunArgs),
    /// Rerun a bundled example and check it against its expected outcomes.
    Repro(ReproArgs),
    /// Compare two report files field by field.
    ReportDiff(DiffArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Write the report (or CSV for simulate) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the regression mode from the config.
    #[arg(long, value_enum)]
    mode: Option<ModeChoice>,
    /// Override the regularization: a single weight for every row, or "cv".
    #[arg(long)]
    gamma: Option<String>,
    /// Suppress status output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReproArgs {
    /// Example id: one of 1, 3, 4, 4b, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14.
    id: String,
    /// Write the check table as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace every check tolerance with this value.
    #[arg(long)]
    tol: Option<f64>,
    /// Print failing checks and the summary only.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct DiffArgs {
    left: PathBuf,
    right: PathBuf,
    /// Numeric tolerance: fields pass when |a - b| <= tol * max(1, |a|, |b|).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Print the difference count only.
    #[arg(long)]
    quiet: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Identify(args) => {
            let config = load_config(&args)?;
            if config.input_dim() > 0 {
                return Err(CliError::Config(
                    "identify: config describes a controlled system, use identify-ctrl".into(),
                ));
            }
            run_tasks(args, config, &[Task::Identify])
        }
        Command::IdentifyCtrl(args) => {
            let config = load_config(&args)?;
            if config.input_dim() == 0 {
                return Err(CliError::Config("identify-ctrl: requires system.B".into()));
            }
            if config.input_signal.is_none() {
                return Err(CliError::Config(
                    "identify-ctrl: requires input_signal".into(),
                ));
            }
            run_tasks(args, config, &[Task::Identify])
        }
        Command::Entropy(args) => {
            let config = load_config(&args)?;
            run_tasks(args, config, &[Task::Entropy])
        }
        Command::Stabilize(args) => {
            let config = load_config(&args)?;
            run_tasks(args, config, &[Task::Stabilize])
        }
        Command::Bound(args) => {
            let config = load_config(&args)?;
            run_tasks(args, config, &[Task::Bound])
        }
        Command::Repro(args) => repro_command(args),
        Command::ReportDiff(args) => diff_command(args),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        match &mut config.noise {
            Some(noise) => noise.seed = seed,
            None => {
                return Err(CliError::Config(
                    "--seed: config has no noise section to override".into(),
                ));
            }
        }
    }
    if let Some(mode) = args.mode {
        config.ident.mode = mode;
    }
    if let Some(gamma) = &args.gamma {
        config.ident.gamma = if gamma == "cv" {
            GammaChoice::Selector("cv".into())
        } else {
            let value: f64 = gamma.parse().map_err(|_| {
                CliError::Config(format!(
                    "--gamma: expected a number or \"cv\", got {gamma:?}"
                ))
            })?;
            GammaChoice::Fixed(vec![value])
        };
    }
    config.validate()?;
    Ok(config)
}

fn simulate(args: RunArgs) -> Result<()> {
    let config = load_config(&args)?;
    let trajectory = run::simulate(&config)?;
    let csv = trajectory.to_csv();
    emit(&args, &csv, "trajectory")
}

fn run_tasks(args: RunArgs, config: ExperimentConfig, extra: &[Task]) -> Result<()> {
    let report = run::run(&config, extra)?;
    emit(&args, &report.to_json(), "report")
}

fn emit(args: &RunArgs, contents: &str, what: &str) -> Result<()> {
    match &args.out {
        Some(path) => {
            write_atomic(path, contents)?;
            if !args.quiet {
                eprintln!("{what} written to {}", path.display());
            }
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn repro_command(args: ReproArgs) -> Result<()> {
    let checks = repro::run_repro(&args.id, args.tol)?;
    if let Some(path) = &args.out {
        write_atomic(path, &check_table_json(&args.id, &checks))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if !args.quiet {
        println!("example {}", args.id);
    }
    for check in &checks {
        if check.passed && args.quiet {
            continue;
        }
        let verdict = if check.passed { "pass" } else { "FAIL" };
        println!("  {verdict}  {:<52} {}", check.name, check.detail);
    }
    println!(
        "example {}: {}/{} checks passed",
        args.id,
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}

fn check_table_json(id: &str, checks: &[CheckLine]) -> String {
    let mut text = serde_json::to_string_pretty(&serde_json::json!({
        "id": id,
        "checks": checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "passed": c.passed,
                    "detail": c.detail,
                })
            })
            .collect::<Vec<_>>(),
    }))
    .expect("check table serialization cannot fail");
    text.push('\n');
    text
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: not valid JSON: {e}", path.display())))
}

fn diff_command(args: DiffArgs) -> Result<()> {
    let left = read_json(&args.left)?;
    let right = read_json(&args.right)?;
    let entries = diff::diff_values(&left, &right, args.tol);
    if !args.quiet {
        for entry in &entries {
            println!("{}: {} != {}", entry.path, entry.left, entry.right);
        }
    }
    if entries.is_empty() {
        if !args.quiet {
            println!("reports match");
        }
        Ok(())
    } else {
        println!("{} field(s) differ", entries.len());
        Err(CliError::ReportsDiffer(entries.len()))
    }
}
