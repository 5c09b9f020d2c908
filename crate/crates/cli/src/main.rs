//! `rigidkit`: rigidity, hidden-mode and impulse-response reports from a
//! scenario file.
//!
//! Exit codes: 0 success, 1 `--check` mismatch, 2 input or validation error,
//! 3 numerical failure.

mod commands;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rigidkit::{load_scenario, Scenario};

use commands::Produced;

#[derive(Parser)]
#[command(
    name = "rigidkit",
    version,
    about = "Rigidity and hidden-mode analysis for distance-based formations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rigidity classification, subspaces and mode report.
    Analyze(ScenarioArgs),
    /// Four-way mode classification and subspace verdicts.
    Modes(ScenarioArgs),
    /// Impulse experiment: recovery or distortion of the shape.
    Dichotomy {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Also sweep N input directions uniformly over the circle.
        #[arg(long, value_name = "N")]
        sweep: Option<usize>,
        /// Also simulate the nonlinear gradient flow from the same impulse.
        #[arg(long)]
        nonlinear: bool,
    },
    /// Plot-ready arrows, edge errors and plane geometry from a dichotomy run.
    Plotdata {
        /// Directory holding a completed dichotomy run.
        run_dir: PathBuf,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, env = "RIGIDKIT_OUT", default_value = "rigidkit-out")]
    out: PathBuf,
    /// Absolute singular-value threshold for the rank of R.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Angle and residual tolerance for subspace comparisons.
    #[arg(long)]
    tol_subspace: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Recompute and compare against the manifest in the output directory instead of writing.
    #[arg(long)]
    check: bool,
}

#[derive(Debug)]
pub enum CliError {
    Core(rigidkit::Error),
    Input(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }
}

impl From<rigidkit::Error> for CliError {
    fn from(e: rigidkit::Error) -> Self {
        Self::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Core(e) => write!(f, "{e}"),
            Self::Input(m) => f.write_str(m),
        }
    }
}

fn invalid(flag: &str, value: f64) -> CliError {
    CliError::input(format!("{flag} must be positive and finite, got {value}"))
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, CliError> {
        let mut s = load_scenario(&self.scenario)?;
        if let Some(r) = self.tol_rank {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(invalid("--tol-rank", r));
            }
            s.tol.rank = Some(r);
        }
        if let Some(t) = self.tol_subspace {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("--tol-subspace", t));
            }
            s.tol.subspace = t;
        }
        if let Some(dt) = self.dt {
            s.sim.dt = dt;
        }
        if let Some(t) = self.t_end {
            s.sim.t_end = t;
        }
        s.sim.validate()?;
        Ok(s)
    }
}

enum Done {
    Written,
    Checked(Vec<String>),
}

fn finish(name: &str, dir: &Path, check: bool, produced: Produced) -> Result<Done, CliError> {
    for w in &produced.warnings {
        eprintln!("warning: {w}");
    }
    if check {
        return output::check_all(dir, name, &produced.artifacts).map(Done::Checked);
    }
    for path in output::write_all(dir, name, produced.artifacts)? {
        println!("{path}");
    }
    Ok(Done::Written)
}

fn run(cli: Cli) -> Result<Done, CliError> {
    match cli.command {
        Command::Analyze(a) => finish("analyze", &a.out, a.check, commands::analyze(&a.load()?)?),
        Command::Modes(a) => finish("modes", &a.out, a.check, commands::modes(&a.load()?)?),
        Command::Dichotomy {
            common,
            sweep,
            nonlinear,
        } => {
            let s = common.load()?;
            finish(
                "dichotomy",
                &common.out,
                common.check,
                commands::dichotomy(&s, sweep, nonlinear)?,
            )
        }
        Command::Plotdata { run_dir, out, check } => {
            let produced = commands::plotdata(&run_dir)?;
            finish("plotdata", out.as_deref().unwrap_or(&run_dir), check, produced)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Done::Written) => ExitCode::SUCCESS,
        Ok(Done::Checked(problems)) if problems.is_empty() => {
            eprintln!("check passed");
            ExitCode::SUCCESS
        }
        Ok(Done::Checked(problems)) => {
            for p in problems {
                eprintln!("check failed: {p}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
