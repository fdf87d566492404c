//! `windward` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use windward::deadreckon::{integrate_path, write_path_csv};
use windward::evaluator::{
    emit_report, median_error, render_paths_svg, render_svg, run_all, run_scenario, simulate_outbound, sweep,
    EvalError,
};
use windward::logstore::{load_record, save_record, write_anemometer_csv, write_flight_csv};
use windward::planner::{write_commands_csv, PlanError};
use windward::windsim::SimError;

use crate::config::{echo, resolve, Resolved, RunArgs};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn is_config(e: &EvalError) -> bool {
    match e {
        EvalError::InScenario { source, .. } => is_config(source),
        EvalError::Config(_) | EvalError::Sim(SimError::Config(_)) | EvalError::Plan(PlanError::InvalidParams(_)) => true,
        _ => false,
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        if is_config(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "windward", version, about = "Wind-aware return-to-home without satellite positioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly the scenario's outbound leg and write its logs and ground truth.
    Simulate(RunArgs),
    /// Dead-reckon a stored record into a path.
    Reconstruct(ReconstructArgs),
    /// Run one closed-loop return and write the issued commands.
    Plan(RunArgs),
    /// Run every repetition of a scenario and write the report.
    Evaluate(RunArgs),
    /// Vary one parameter with everything else held fixed.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long, value_name = "FILE")]
    record: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// `alpha_beta` (values are β), `gamma`, or `compensation`.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated; gamma values may be `LO:HI` ranges.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn prepare(out: &Path, resolved: &Resolved) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("config.toml");
    fs::write(&path, echo(resolved)?).map_err(io_err(&path))?;
    if resolved.seed_drawn {
        eprintln!("seed: {} (drawn; pass --seed {} to reproduce)", resolved.scenario.seed, resolved.scenario.seed);
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let resolved = resolve(args, None, &[])?;
    let (record, truth) = simulate_outbound(&resolved.scenario)?;
    prepare(&args.out, &resolved)?;

    let telemetry: Vec<_> = record.telemetry().copied().collect();
    let wind: Vec<_> = record.wind().copied().collect();
    write_flight_csv(&telemetry, create(&args.out.join("flight.csv"))?).map_err(runtime)?;
    write_anemometer_csv(&wind, create(&args.out.join("wind.csv"))?).map_err(runtime)?;
    save_record(&record, create(&args.out.join("record.csv"))?).map_err(runtime)?;

    let dt = record.sample_dt();
    let mut gt = String::from("time_s,north_m,east_m,height_m,wind_north_ms,wind_east_ms\n");
    for (k, (p, w)) in truth.positions.iter().zip(&truth.true_wind).enumerate() {
        let _ = writeln!(gt, "{},{},{},{},{},{}", k as f64 * dt, p.north, p.east, p.height, w.north, w.east);
    }
    let e = truth.end;
    let _ = writeln!(gt, "{},{},{},{},,", truth.positions.len() as f64 * dt, e.north, e.east, e.height);
    let path = args.out.join("ground_truth.csv");
    fs::write(&path, gt).map_err(io_err(&path))?;

    println!("simulated {} samples; outbound ends at ({:.3}, {:.3}) m", record.len(), e.north, e.east);
    Ok(())
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<(), CliError> {
    let file = File::open(&args.record).map_err(|e| CliError::Config(format!("{}: {e}", args.record.display())))?;
    let record = load_record(file).map_err(runtime)?;
    let path = integrate_path(&record).map_err(runtime)?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let echo_path = args.out.join("config.toml");
    let echo = toml::to_string(&toml::toml! { record = (args.record.display().to_string()) }).map_err(runtime)?;
    fs::write(&echo_path, echo).map_err(io_err(&echo_path))?;
    write_path_csv(&path, create(&args.out.join("path.csv"))?).map_err(runtime)?;

    let mut trace: Vec<[f64; 2]> = path.points().iter().map(|p| [p.position.north, p.position.east]).collect();
    let end = path.end().position;
    trace.push([end.north, end.east]);
    let svg_path = args.out.join("path.svg");
    fs::write(&svg_path, render_paths_svg(&record.meta().flight_id, &trace, &[])).map_err(io_err(&svg_path))?;
    println!("reconstructed {} samples; end offset ({:.3}, {:.3}) m", path.len(), end.north, end.east);
    Ok(())
}

fn cmd_plan(args: &RunArgs) -> Result<(), CliError> {
    let resolved = resolve(args, None, &[])?;
    prepare(&args.out, &resolved)?;
    let report = run_scenario(&resolved.scenario)?;
    write_commands_csv(&report.commands, create(&args.out.join("commands.csv"))?).map_err(runtime)?;
    let svg = args.out.join("plan.svg");
    fs::write(&svg, render_svg(&report)).map_err(io_err(&svg))?;
    println!(
        "{} commands; arrival error ({:.3}, {:.3}) m, magnitude {:.3} m",
        report.commands.len(),
        report.arrival.x_err,
        report.arrival.y_err,
        report.arrival.magnitude
    );
    Ok(())
}

fn cmd_evaluate(args: &RunArgs) -> Result<(), CliError> {
    let resolved = resolve(args, None, &[])?;
    prepare(&args.out, &resolved)?;
    let reports = run_all(std::slice::from_ref(&resolved.scenario), true)?;
    emit_report(&reports, &args.out, args.timing)?;
    let n = reports.len() as f64;
    let mean_x = reports.iter().map(|r| r.arrival.x_err.abs()).sum::<f64>() / n;
    let mean_y = reports.iter().map(|r| r.arrival.y_err.abs()).sum::<f64>() / n;
    println!(
        "{} runs; median error {:.3} m; mean |x| {:.3} m, mean |y| {:.3} m",
        reports.len(),
        median_error(&reports).unwrap_or(0.0),
        mean_x,
        mean_y
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let resolved = resolve(&args.run, args.axis.as_deref(), &args.values)?;
    let Some(spec) = resolved.sweep.clone() else {
        return Err(CliError::Config(format!(
            "sweep needs --axis ({}) or a [sweep] table",
            windward::evaluator::SweepAxis::NAMES.join(", ")
        )));
    };
    if spec.values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    prepare(&args.run.out, &resolved)?;
    let reports = sweep(&resolved.scenario, spec.axis, &spec.values, true)?;
    emit_report(&reports, &args.run.out, args.run.timing)?;
    for (value, chunk) in spec.values.iter().zip(reports.chunks(resolved.scenario.repetitions)) {
        println!("{}={value}: median error {:.3} m", spec.axis.name(), median_error(chunk).unwrap_or(0.0));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
