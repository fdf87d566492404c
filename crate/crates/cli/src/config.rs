//! Scenario files, flag overrides, and the resolved-config echo.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use windward::evaluator::{LassoSettings, PlannerChoice, Scenario, SweepAxis, SweepValue, WeightedSettings};

use crate::CliError;

/// TOML integers are signed 64-bit.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Flags shared by every scenario-driven subcommand. Each mirrors a
/// scenario-file key and wins over it.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Drawn at random and echoed when neither flag nor file sets it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: Option<u64>,
    /// `weighted` or `lasso`.
    #[arg(long)]
    pub planner: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Return-wind multiplier range, `LO:HI` or a single value.
    #[arg(long, value_name = "LO:HI")]
    pub gamma: Option<String>,
    /// Logged outbound-wind multiplier range.
    #[arg(long, value_name = "LO:HI")]
    pub gamma_forward: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Fill the latency columns of report.csv. Timings vary run to run.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub sweep: Option<SweepSpec>,
    /// The seed was drawn because nothing set it.
    pub seed_drawn: bool,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| config(format!("bad number `{s}` in range `{text}`")));
    match text.split_once(':') {
        Some((lo, hi)) => Ok((num(lo)?, num(hi)?)),
        None => {
            let x = num(text)?;
            Ok((x, x))
        }
    }
}

fn parse_sweep_value(text: &str) -> Result<SweepValue, CliError> {
    if text.contains(':') {
        let (lo, hi) = parse_range(text)?;
        Ok(SweepValue::Range(lo, hi))
    } else {
        text.trim().parse().map(SweepValue::Scalar).map_err(|_| config(format!("bad sweep value `{text}`")))
    }
}

fn parse_axis(name: &str) -> Result<SweepAxis, CliError> {
    SweepAxis::parse(name)
        .ok_or_else(|| config(format!("unknown sweep axis `{name}`; valid axes: {}", SweepAxis::NAMES.join(", "))))
}

fn sweep_from_table(table: &toml::Table) -> Result<(Option<SweepAxis>, Vec<SweepValue>), CliError> {
    let axis = match table.get("axis") {
        Some(toml::Value::String(s)) => Some(parse_axis(s)?),
        Some(other) => return Err(config(format!("sweep.axis must be a string, got {other}"))),
        None => None,
    };
    let values = match table.get("values") {
        Some(toml::Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                toml::Value::Float(x) => Ok(SweepValue::Scalar(*x)),
                toml::Value::Integer(i) => Ok(SweepValue::Scalar(*i as f64)),
                toml::Value::String(s) => parse_sweep_value(s),
                other => Err(config(format!("bad sweep value {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(other) => return Err(config(format!("sweep.values must be an array, got {other}"))),
        None => Vec::new(),
    };
    Ok((axis, values))
}

fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read scenario {}: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| config(format!("{}: {e}", path.display())))
}

fn apply_planner(scenario: &mut Scenario, args: &RunArgs) -> Result<(), CliError> {
    if let Some(name) = &args.planner {
        match (name.as_str(), &scenario.planner) {
            ("weighted", PlannerChoice::Weighted(_)) | ("lasso", PlannerChoice::Lasso(_)) => {}
            ("weighted", _) => scenario.planner = PlannerChoice::Weighted(WeightedSettings::default()),
            ("lasso", _) => scenario.planner = PlannerChoice::Lasso(LassoSettings::default()),
            _ => {
                return Err(config(format!(
                    "unknown planner `{name}`; valid planners: {}",
                    PlannerChoice::NAMES.join(", ")
                )))
            }
        }
    }
    if args.alpha.is_none() && args.beta.is_none() {
        return Ok(());
    }
    let PlannerChoice::Weighted(w) = &mut scenario.planner else {
        return Err(config("--alpha/--beta apply only to the weighted planner"));
    };
    match (args.alpha, args.beta) {
        (Some(a), Some(b)) => (w.alpha, w.beta) = (a, b),
        (Some(a), None) => (w.alpha, w.beta) = (a, 1.0 - a),
        (None, Some(b)) => (w.alpha, w.beta) = (1.0 - b, b),
        (None, None) => {}
    }
    Ok(())
}

/// File, then flags, then a drawn seed if still unset. The result is
/// validated; every failure here is a configuration error.
pub fn resolve(args: &RunArgs, sweep_axis: Option<&str>, sweep_values: &[String]) -> Result<Resolved, CliError> {
    let mut table = match &args.scenario {
        Some(path) => read_table(path)?,
        None => toml::Table::new(),
    };
    let sweep_table = match table.remove("sweep") {
        Some(toml::Value::Table(t)) => Some(t),
        Some(other) => return Err(config(format!("`sweep` must be a table, got {other}"))),
        None => None,
    };
    let has_seed = table.contains_key("seed");
    let mut scenario: Scenario = toml::Value::Table(table).try_into().map_err(|e| config(format!("scenario: {e}")))?;

    apply_planner(&mut scenario, args)?;
    if let Some(g) = &args.gamma {
        scenario.gamma_backward = Some(parse_range(g)?);
    }
    if let Some(g) = &args.gamma_forward {
        scenario.gamma_forward = Some(parse_range(g)?);
    }
    if let Some(r) = args.repetitions {
        scenario.repetitions = r;
    }
    let mut seed_drawn = false;
    match args.seed {
        Some(seed) => scenario.seed = seed,
        None if !has_seed => {
            scenario.seed = rand::random::<u64>() & MAX_SEED;
            seed_drawn = true;
        }
        None => {}
    }
    if scenario.seed > MAX_SEED {
        return Err(config(format!("seed must be ≤ {MAX_SEED}")));
    }
    scenario.validate().map_err(|e| config(e.to_string()))?;

    let (mut axis, mut values) = match &sweep_table {
        Some(t) => sweep_from_table(t)?,
        None => (None, Vec::new()),
    };
    if let Some(name) = sweep_axis {
        axis = Some(parse_axis(name)?);
    }
    if !sweep_values.is_empty() {
        values = sweep_values.iter().map(|v| parse_sweep_value(v)).collect::<Result<_, _>>()?;
    }
    let sweep = axis.map(|axis| SweepSpec { axis, values });
    Ok(Resolved { scenario, sweep, seed_drawn })
}

/// TOML for the resolved configuration; reloading it reproduces the run.
pub fn echo(resolved: &Resolved) -> Result<String, CliError> {
    let mut table = toml::Table::try_from(&resolved.scenario).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(sweep) = &resolved.sweep {
        let mut t = toml::Table::new();
        t.insert("axis".into(), sweep.axis.name().into());
        let values = sweep
            .values
            .iter()
            .map(|v| match v {
                SweepValue::Scalar(x) => toml::Value::Float(*x),
                SweepValue::Range(..) => toml::Value::String(v.to_string()),
            })
            .collect();
        t.insert("values".into(), toml::Value::Array(values));
        table.insert("sweep".into(), toml::Value::Table(t));
    }
    toml::to_string(&table).map_err(|e| CliError::Runtime(e.to_string()))
}
