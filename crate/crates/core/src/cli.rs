//! Command-line front end: `run`, `predict` and `validate`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis;
use crate::dynamics::simulate;
use crate::error::Error;
use crate::output;
use crate::scenario_file::{self, LoadedScenario, ScenarioFile};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Ok = 0,
    Validation = 1,
    Integration = 2,
    ConsensusUnmet = 3,
    PredictionInapplicable = 4,
}

#[derive(Debug, Parser)]
#[command(name = "nlconsensus", version, about = "Second-order nonlinear consensus simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trajectory.csv, report.json and plots.
    Run {
        /// Scenario JSON file, or the name of a bundled scenario (fig2a, fig2b, fig3a, fig3b).
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with code 3 unless consensus is detected.
        #[arg(long)]
        require_consensus: bool,
        #[arg(long)]
        no_plots: bool,
        /// Override the integration step.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the horizon.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Print the closed-form consensus value without simulating.
    Predict { scenario: String },
    /// Parse and validate a scenario, printing the assumption report.
    Validate { scenario: String },
}

fn read_scenario_text(name: &str) -> Result<String, Error> {
    let path = Path::new(name);
    if !path.exists() {
        if let Some(text) = scenario_file::bundled::get(name) {
            eprintln!("note: `{name}` not found on disk, using the bundled scenario");
            return Ok(text.to_string());
        }
    }
    Ok(std::fs::read_to_string(path)?)
}

fn load(name: &str, dt: Option<f64>, t_end: Option<f64>) -> Result<LoadedScenario, Error> {
    let text = read_scenario_text(name)?;
    let mut file: ScenarioFile = scenario_file::parse_scenario_file(&text)?;
    if let Some(dt) = dt {
        file.integrator.dt = dt;
    }
    if let Some(t_end) = t_end {
        file.integrator.t_end = t_end;
    }
    let scenario = file.to_scenario()?;
    let report = scenario.validate()?;
    Ok(LoadedScenario { file, scenario, report })
}

fn fail(code: ExitCode, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    code
}

pub fn run(
    scenario: &str,
    out: &Path,
    require_consensus: bool,
    with_plots: bool,
    dt: Option<f64>,
    t_end: Option<f64>,
) -> ExitCode {
    let loaded = match load(scenario, dt, t_end) {
        Ok(l) => l,
        Err(e) => return fail(ExitCode::Validation, e),
    };
    for w in &loaded.report.warnings {
        eprintln!("warning: {w}");
    }
    let traj = match simulate(&loaded.scenario) {
        Ok(t) => t,
        Err(e @ Error::NonFiniteState { .. }) => return fail(ExitCode::Integration, e),
        Err(e) => return fail(ExitCode::Validation, e),
    };
    let run = output::analyze_run(&traj, &loaded.scenario, loaded.report.clone());
    match output::write_artifacts(out, &traj, &loaded.scenario, &run, with_plots) {
        Ok(warnings) => warnings.iter().for_each(|w| eprintln!("warning: {w}")),
        Err(e) => {
            return fail(
                ExitCode::Validation,
                format!("writing artifacts to {}: {e}", out.display()),
            )
        }
    }

    let c = &run.report.consensus;
    println!("samples:        {}", traj.samples.len());
    println!(
        "consensus:      {}",
        if c.achieved { "achieved" } else { "not achieved" }
    );
    if let Some(t) = c.t_consensus {
        println!("t_consensus:    {t:.3}");
    }
    println!("final spread:   {:.3e}", c.final_spread);
    println!("final speed:    {:.3e}", c.final_speed);
    println!("observed value: {}", join(&c.observed_value));
    match (&c.predicted_value, &c.prediction_note) {
        (Some(p), _) => println!("predicted:      {}", join(p)),
        (None, Some(note)) => println!("predicted:      n/a ({note})"),
        _ => {}
    }
    if let Some(v) = &run.report.lyapunov.verdict {
        println!(
            "lyapunov:       {}",
            if v.nonincreasing { "nonincreasing" } else { "INCREASED" }
        );
    }
    if let Some(d) = run.report.alpha_drift {
        println!("alpha drift:    {d:.3e}");
    }
    println!("artifacts:      {}", out.display());

    if require_consensus && !c.achieved {
        return fail(
            ExitCode::ConsensusUnmet,
            format!(
                "consensus not reached: spread {:.3e} (tol {}), speed {:.3e} (tol {})",
                c.final_spread, c.pos_tol, c.final_speed, c.vel_tol
            ),
        );
    }
    ExitCode::Ok
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
}

pub fn predict(scenario: &str) -> ExitCode {
    let loaded = match load(scenario, None, None) {
        Ok(l) => l,
        Err(e) => return fail(ExitCode::Validation, e),
    };
    match analysis::predict(&loaded.scenario) {
        Ok(v) => {
            println!("{}", join(&v));
            ExitCode::Ok
        }
        Err(e) => fail(ExitCode::PredictionInapplicable, e),
    }
}

pub fn validate(scenario: &str) -> ExitCode {
    match load(scenario, None, None) {
        Ok(l) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&l.report).expect("report serializes")
            );
            for w in &l.report.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::Ok
        }
        Err(e) => fail(ExitCode::Validation, e),
    }
}

/// Parses `args` and dispatches. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Validation as i32 } else { 0 };
        }
    };
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            require_consensus,
            no_plots,
            dt,
            t_end,
        } => run(&scenario, &out, require_consensus, !no_plots, dt, t_end),
        Command::Predict { scenario } => predict(&scenario),
        Command::Validate { scenario } => validate(&scenario),
    };
    code as i32
}
