//! Subcommands of the `microgrid` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use microgrid_core::control::{polynomial_roots, routh_array, ZnRule};
use microgrid_core::converters::ConverterParams;
use microgrid_core::engine::{energy_audit, TraceLog};
use microgrid_core::sources::PvPanel;
use microgrid_core::{run, EngineError};
use rayon::prelude::*;
use serde_json::json;

use crate::io::{load_scenario, LoadError};
use crate::output::{read_trace_csv, write_run};
use crate::sweep::{mpp_sweep, reference_panel, write_csv, SweepError};
use crate::tune::{render, tune, Topology, TuneFailure, TuneRequest};
use crate::{report, Exit};

#[derive(Debug, Parser)]
#[command(name = "microgrid", version, about = "Deterministic DC microgrid simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate scenarios and write trace.csv, events.json and audit.json.
    Run(RunArgs),
    /// Small-signal model, Routh table and gain bounds for one converter.
    Tune(TuneArgs),
    /// Oracle MPP against tracked P&O power over irradiance levels.
    MppSweep(SweepArgs),
    /// Routh-Hurwitz table of a polynomial.
    Routh(RouthArgs),
    /// Rating check (75% converter power, diode current) and energy audit.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Override a scenario field by dotted path, e.g. `sim.dt=1e-5` or
    /// `converters.boost.control.k_p=0.02`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON files.
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Output directory; with several scenarios each gets a subdirectory
    /// named after its file stem.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Scenarios simulated concurrently.
    #[arg(short, long, default_value_t = 1)]
    pub jobs: usize,
    /// Print a JSON summary instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, value_enum)]
    pub topology: Topology,
    /// Inductance (H).
    #[arg(long)]
    pub l: f64,
    /// Output capacitance (F).
    #[arg(long)]
    pub c: f64,
    /// Load resistance (Ω).
    #[arg(long)]
    pub r: f64,
    /// Output voltage at the operating point (V).
    #[arg(long)]
    pub v: f64,
    /// Duty cycle at the operating point.
    #[arg(long)]
    pub d: f64,
    /// Integral gain held fixed during the k_p search.
    #[arg(long)]
    pub k_i: f64,
    /// Proportional gain whose closed loop is tabulated.
    #[arg(long)]
    pub k_p: Option<f64>,
    /// Ultimate gain for Ziegler-Nichols (needs --t-u).
    #[arg(long, requires = "t_u")]
    pub k_u: Option<f64>,
    /// Ultimate period (s).
    #[arg(long, requires = "k_u")]
    pub t_u: Option<f64>,
    #[arg(long, value_enum, default_value = "pi")]
    pub rule: Rule,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Rule {
    P,
    Pi,
    Pid,
}

impl From<Rule> for ZnRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::P => ZnRule::P,
            Rule::Pi => ZnRule::PI,
            Rule::Pid => ZnRule::PID,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Irradiance levels (W/m²).
    #[arg(long, value_delimiter = ',', default_value = "200,400,600,800,1000")]
    pub irradiance: Vec<f64>,
    /// Panel parameters as JSON; defaults to the reference panel.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RouthArgs {
    /// Coefficients, highest power first unless --ascending.
    #[arg(required = true, allow_negative_numbers = true)]
    pub coeffs: Vec<f64>,
    #[arg(long)]
    pub ascending: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Scenario providing the ratings.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Existing trace; the scenario is simulated when omitted.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub json: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: Exit,
    pub error: anyhow::Error,
}

impl Failure {
    fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: Exit::Input,
            error: e.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::input(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::NumericalBlowup { .. } => Exit::Numerical,
            EngineError::Source { .. } => Exit::Numerical,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: Exit::Internal,
            error,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run_one(path: &Path, dir: &Path, set: &[String]) -> Result<serde_json::Value, Failure> {
    let sc = load_scenario(path, set)?;
    let trace = run(&sc)?;
    let (files, audit) = write_run(dir, &trace).with_context(|| format!("writing {}", dir.display()))?;
    Ok(json!({
        "scenario": path,
        "files": files,
        "samples": trace.len(),
        "events": trace.events.len(),
        "final_bus_v": trace.last("bus.v"),
        "audit": audit,
    }))
}

fn cmd_run(a: &RunArgs) -> CmdResult {
    let dirs: Vec<PathBuf> = if a.scenarios.len() == 1 {
        vec![a.out.clone()]
    } else {
        a.scenarios
            .iter()
            .map(|p| a.out.join(p.file_stem().unwrap_or_default()))
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let results: Vec<_> = pool.install(|| {
        a.scenarios
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(p, d)| run_one(p, d, &a.overrides.set))
            .collect()
    });
    let mut first_failure = None;
    let mut summary = Vec::new();
    for (path, r) in a.scenarios.iter().zip(results) {
        match r {
            Ok(v) => {
                if !a.json {
                    println!(
                        "{}: {} samples, {} events, audit residual {:.3e} -> {}",
                        path.display(),
                        v["samples"],
                        v["events"],
                        v["audit"]["relative"].as_f64().unwrap_or(f64::NAN),
                        v["files"]["trace"].as_str().unwrap_or("")
                    );
                }
                summary.push(v);
            }
            Err(f) => {
                eprintln!("error: {}: {:#}", path.display(), f.error);
                summary.push(json!({ "scenario": path, "error": format!("{:#}", f.error) }));
                first_failure.get_or_insert(f);
            }
        }
    }
    if a.json {
        print_json(&json!({ "runs": summary }));
    }
    match first_failure {
        Some(f) => Err(Failure {
            code: f.code,
            error: anyhow::anyhow!("{} of {} runs failed", summary.iter().filter(|v| v.get("error").is_some()).count(), a.scenarios.len()),
        }),
        None => Ok(()),
    }
}

fn cmd_tune(a: &TuneArgs) -> CmdResult {
    let req = TuneRequest {
        topology: a.topology,
        params: ConverterParams {
            l: a.l,
            c: a.c,
            r_nom: a.r,
        },
        v_out: a.v,
        duty: a.d,
        k_i: a.k_i,
        k_p: a.k_p,
        ultimate: a.k_u.zip(a.t_u).map(|(k, t)| (k, t, a.rule.into())),
    };
    let rep = tune(&req).map_err(|e| match e {
        TuneFailure::NoStableGain { .. } => Failure {
            code: Exit::Numerical,
            error: e.into(),
        },
        TuneFailure::Input(_) => Failure::input(e),
    })?;
    if a.json {
        print_json(&serde_json::to_value(&rep).context("encoding report")?);
    } else {
        print!("{}", render(&rep));
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let panel: PvPanel = match &a.panel {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(Failure::input)?;
            serde_json::from_str(&text)
                .with_context(|| format!("{}", p.display()))
                .map_err(Failure::input)?
        }
        None => reference_panel(),
    };
    let rows = mpp_sweep(panel, &a.irradiance).map_err(|e| match e {
        SweepError::Oracle { .. } => Failure::input(e),
        SweepError::Engine { .. } => Failure {
            code: Exit::Numerical,
            error: e.into(),
        },
    })?;
    if let Some(out) = &a.out {
        let f = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
        write_csv(&rows, f).context("writing sweep table")?;
    }
    if a.json {
        print_json(&json!({ "rows": rows }));
    } else if a.out.is_none() {
        write_csv(&rows, std::io::stdout().lock()).context("writing sweep table")?;
    }
    Ok(())
}

fn cmd_routh(a: &RouthArgs) -> CmdResult {
    let mut asc = a.coeffs.clone();
    if !a.ascending {
        asc.reverse();
    }
    let table = routh_array(&asc).map_err(Failure::input)?;
    let roots = polynomial_roots(&asc).ok();
    if a.json {
        let roots: Option<Vec<[f64; 2]>> = roots.map(|r| r.iter().map(|z| [z.re, z.im]).collect());
        print_json(&json!({ "ascending": asc, "routh": table, "roots": roots }));
        return Ok(());
    }
    let n = table.order();
    for (k, row) in table.rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>14.6e}")).collect();
        println!("s^{:<2} {}", n - k, cells.join(" "));
    }
    if table.epsilon_substituted {
        println!("(a zero leading entry was replaced by a small positive value)");
    }
    println!(
        "sign changes: {} -> {}",
        table.sign_changes,
        if table.stable { "stable" } else { "unstable" }
    );
    if let Some(r) = roots {
        for z in r {
            println!("root {:.6e} {:+.6e}j", z.re, z.im);
        }
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let sc = load_scenario(&a.scenario, &a.overrides.set)?;
    let trace: TraceLog = match &a.trace {
        Some(p) => {
            let f = fs::File::open(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(Failure::input)?;
            read_trace_csv(f)
                .map_err(|e| Failure::input(anyhow::anyhow!("{}: {e}", p.display())))?
        }
        None => run(&sc)?,
    };
    let violations = report::check(&sc, &trace);
    let audit = energy_audit(&trace);
    if a.json {
        print_json(&json!({ "violations": violations, "audit": audit }));
    } else {
        print!("{}", report::render(&violations));
        println!(
            "energy: source {:.6} J, load {:.6} J, battery {:.6} J, stored Δ {:.6} J, dissipated {:.6} J, residual {:.3e} (relative {:.3e})",
            audit.source, audit.load, audit.battery, audit.stored_delta, audit.dissipated, audit.residual, audit.relative
        );
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Tune(a) => cmd_tune(a),
        Command::MppSweep(a) => cmd_sweep(a),
        Command::Routh(a) => cmd_routh(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            std::process::ExitCode::from(f.code as u8)
        }
    }
}
