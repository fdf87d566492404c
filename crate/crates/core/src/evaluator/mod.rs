//! Closed-loop experiments: fly out, plan the return, measure where the drone
//! actually lands.
//!
//! A [`Scenario`] fully determines its runs. All randomness is derived from
//! the scenario seed, so a report depends only on the scenario and never on
//! scheduling. Planner latency is the one exception and is kept out of report
//! equality.

mod report;

use std::fs::File;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deadreckon::{arrival_error, integrate_path, ArrivalError, DeadReckonError, Position};
use crate::frames::{rotate_to_true, Angle, WindSample};
use crate::logstore::{load_record, FlightRecord, LogError};
use crate::planner::lasso::{AxisData, AxisDiagnostics};
use crate::planner::{
    AxisModels, BackwardCommand, BackwardPlanner, GuidanceMode, LassoPlanConfig, LassoPlanner, LiveWind, PlanError, RatioSign,
    WeightedParams, WeightedPlanner,
};
use crate::windsim::{
    apply_gamma, check_gamma_range, draw_gamma, simulate, Drone, FlightScript, GroundTruth, PlantConfig, SimError, WindField,
    WindSampler, WindVector, YawPolicy,
};

pub use report::{emit_report, read_report_csv, render_paths_svg, render_svg, write_report_csv, ReportRow, REPORT_COLUMNS};

const STREAM_FLIGHT: u64 = 1;
const STREAM_WIND: u64 = 2;
const STREAM_GAMMA_FORWARD: u64 = 3;
const STREAM_GAMMA_BACKWARD: u64 = 4;
const STREAM_REPETITION: u64 = 1 << 20;
const STREAM_TRAINING: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scenario `{id}`: {source}")]
    InScenario {
        id: String,
        #[source]
        source: Box<EvalError>,
    },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("no reports to emit")]
    EmptyReports,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Reckon(#[from] DeadReckonError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Deterministic child seed: word 0 of ChaCha8 stream `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Where the outbound flight comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlightSource {
    /// A random multi-leg flight drawn from the scenario seed.
    Random { legs: usize, max_speed: f64 },
    Square { speed: f64, leg_duration: f64, height: f64 },
    Script(FlightScript),
    /// A stored record. Its dead-reckoned end is taken as ground truth.
    Record { path: PathBuf },
}

impl Default for FlightSource {
    fn default() -> Self {
        FlightSource::Random { legs: 6, max_speed: 10.0 }
    }
}

/// Physical wind during the return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackwardWind {
    /// The outbound wind replayed in reverse order, cycling if the return
    /// takes longer than the outbound flight.
    #[default]
    Mirrored,
    /// The wind field keeps evolving past the end of the outbound flight.
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightedSettings {
    pub alpha: f64,
    pub beta: f64,
    pub sign: RatioSign,
}

impl Default for WeightedSettings {
    fn default() -> Self {
        WeightedSettings { alpha: 0.9, beta: 0.1, sign: RatioSign::Plus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoSettings {
    pub height_raise: f64,
    pub arrival_radius: f64,
    pub speed_floor: f64,
    pub max_steps: usize,
    pub mode: GuidanceMode,
    /// Simulated flights used to train the models.
    pub training_flights: usize,
    /// Fixed λ; cross-validated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Default for LassoSettings {
    fn default() -> Self {
        let cfg = LassoPlanConfig::default();
        LassoSettings {
            height_raise: cfg.height_raise,
            arrival_radius: cfg.arrival_radius,
            speed_floor: cfg.speed_floor,
            max_steps: cfg.max_steps,
            mode: cfg.mode,
            training_flights: 10,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlannerChoice {
    Weighted(WeightedSettings),
    Lasso(LassoSettings),
}

impl PlannerChoice {
    pub const NAMES: [&'static str; 2] = ["weighted", "lasso"];

    pub fn name(&self) -> &'static str {
        match self {
            PlannerChoice::Weighted(_) => "weighted",
            PlannerChoice::Lasso(_) => "lasso",
        }
    }
}

impl Default for PlannerChoice {
    fn default() -> Self {
        PlannerChoice::Weighted(WeightedSettings::default())
    }
}

fn default_id() -> String {
    "scenario".into()
}

fn default_repetitions() -> usize {
    1
}

fn default_wind() -> WindField {
    WindField::calm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Multiplier range applied to logged outbound wind before planning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_forward: Option<(f64, f64)>,
    /// Multiplier range applied to the physical return wind, per step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_backward: Option<(f64, f64)>,
    #[serde(default)]
    pub backward_wind: BackwardWind,
    #[serde(default)]
    pub flight: FlightSource,
    /// The field's own seed is replaced by one derived from `seed`.
    #[serde(default = "default_wind")]
    pub wind: WindField,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub planner: PlannerChoice,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            id: default_id(),
            seed: 0,
            repetitions: 1,
            gamma_forward: None,
            gamma_backward: None,
            backward_wind: BackwardWind::Mirrored,
            flight: FlightSource::default(),
            wind: default_wind(),
            plant: PlantConfig::default(),
            planner: PlannerChoice::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.id.is_empty() || self.id.contains(['/', '\\', ',', '\n', '"']) {
            return Err(EvalError::Config(format!("id {:?} must be non-empty without / \\ , \" or newlines", self.id)));
        }
        if self.repetitions == 0 {
            return Err(EvalError::Config("repetitions must be ≥ 1".into()));
        }
        self.plant.validate()?;
        self.wind.validate().map_err(EvalError::Config)?;
        for range in [self.gamma_forward, self.gamma_backward].into_iter().flatten() {
            check_gamma_range(range)?;
        }
        match &self.flight {
            FlightSource::Random { legs, max_speed } => {
                if *legs == 0 || !(max_speed.is_finite() && *max_speed > 0.0 && *max_speed <= self.plant.max_ground_speed) {
                    return Err(EvalError::Config(format!(
                        "random flight needs legs ≥ 1 and 0 < max_speed ≤ {}",
                        self.plant.max_ground_speed
                    )));
                }
            }
            FlightSource::Square { speed, leg_duration, height } => {
                FlightScript::square(*speed, *leg_duration, *height).validate(self.plant.max_ground_speed)?;
            }
            FlightSource::Script(script) => script.validate(self.plant.max_ground_speed)?,
            FlightSource::Record { .. } => {}
        }
        match &self.planner {
            PlannerChoice::Weighted(w) => {
                WeightedParams::new(w.alpha, w.beta)?;
            }
            PlannerChoice::Lasso(l) => {
                self.lasso_config(l).validate()?;
                if l.training_flights == 0 {
                    return Err(EvalError::Config("lasso needs at least one training flight".into()));
                }
                if let Some(lambda) = l.lambda {
                    if !(lambda.is_finite() && lambda >= 0.0) {
                        return Err(EvalError::Config(format!("lambda must be ≥ 0, got {lambda}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn lasso_config(&self, l: &LassoSettings) -> LassoPlanConfig {
        LassoPlanConfig {
            height_raise: l.height_raise,
            arrival_radius: l.arrival_radius,
            max_steps: l.max_steps,
            speed_floor: l.speed_floor,
            max_speed: self.plant.max_ground_speed,
            sample_dt: self.plant.sample_dt,
            mode: l.mode,
        }
    }

    /// One single-run scenario per repetition. A single repetition expands
    /// to itself; otherwise ids get an `-rNNN` suffix and seeds are derived.
    pub fn expand(&self) -> Vec<Scenario> {
        if self.repetitions == 1 {
            return vec![self.clone()];
        }
        let width = (self.repetitions - 1).to_string().len().max(3);
        (0..self.repetitions)
            .map(|r| Scenario {
                id: format!("{}-r{:0width$}", self.id, r),
                seed: derive_seed(self.seed, STREAM_REPETITION + r as u64),
                repetitions: 1,
                ..self.clone()
            })
            .collect()
    }
}

/// Per-step planner latency.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepTiming {
    pub mean_ms: f64,
    pub p99_ms: f64,
}

impl StepTiming {
    fn from_samples(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return StepTiming::default();
        }
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let rank = ((0.99 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        StepTiming { mean_ms: ms.iter().sum::<f64>() / ms.len() as f64, p99_ms: ms[rank - 1] }
    }
}

/// Outcome of one closed-loop run. Equality ignores `timing`.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario_id: String,
    pub planner: &'static str,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma_forward: Option<(f64, f64)>,
    pub gamma_backward: Option<(f64, f64)>,
    pub compensation: f64,
    pub arrival: ArrivalError,
    /// Ground-truth `(north, east)` of the outbound flight, takeoff first.
    pub forward_path: Vec<[f64; 2]>,
    /// Ground-truth `(north, east)` of the return, starting where the
    /// outbound flight ended.
    pub backward_path: Vec<[f64; 2]>,
    pub commands: Vec<BackwardCommand>,
    pub steps: usize,
    pub timing: StepTiming,
    pub diagnostics: Option<AxisDiagnostics>,
}

impl PartialEq for RunReport {
    fn eq(&self, other: &Self) -> bool {
        self.scenario_id == other.scenario_id
            && self.planner == other.planner
            && self.alpha == other.alpha
            && self.beta == other.beta
            && self.gamma_forward == other.gamma_forward
            && self.gamma_backward == other.gamma_backward
            && self.compensation == other.compensation
            && self.arrival == other.arrival
            && self.forward_path == other.forward_path
            && self.backward_path == other.backward_path
            && self.commands == other.commands
            && self.steps == other.steps
            && self.diagnostics == other.diagnostics
    }
}

/// The outbound leg as the planner and the judge see it.
struct Outbound {
    record: FlightRecord,
    path: Vec<[f64; 2]>,
    end: Position,
    end_yaw: Angle,
    /// Physical true wind at each sample.
    wind: Vec<WindVector>,
}

fn outbound_script(s: &Scenario) -> Option<FlightScript> {
    match &s.flight {
        FlightSource::Random { legs, max_speed } => {
            Some(FlightScript::random(derive_seed(s.seed, STREAM_FLIGHT), *legs, *max_speed, s.plant.sample_dt))
        }
        FlightSource::Square { speed, leg_duration, height } => Some(FlightScript::square(*speed, *leg_duration, *height)),
        FlightSource::Script(script) => Some(script.clone()),
        FlightSource::Record { .. } => None,
    }
}

fn scenario_field(s: &Scenario) -> WindField {
    s.wind.clone().with_seed(derive_seed(s.seed, STREAM_WIND))
}

/// The outbound flight every run of `s` starts with.
pub fn simulate_outbound(s: &Scenario) -> Result<(FlightRecord, GroundTruth), EvalError> {
    s.validate()?;
    let script = outbound_script(s)
        .ok_or_else(|| EvalError::Config("a record-backed scenario has no flight to simulate".into()))?;
    Ok(simulate(&script, &scenario_field(s), &s.plant)?)
}

fn fly_outbound(s: &Scenario, field: &WindField) -> Result<Outbound, EvalError> {
    let Some(script) = outbound_script(s) else {
        let FlightSource::Record { path } = &s.flight else { unreachable!("only records lack a script") };
        return replay_record(s, path);
    };
    let (record, truth) = simulate(&script, field, &s.plant)?;
    let end_yaw = record.telemetry().last().map_or(Angle::ZERO, |t| t.yaw);
    let mut path: Vec<[f64; 2]> = truth.positions.iter().map(|p| [p.north, p.east]).collect();
    path.push([truth.end.north, truth.end.east]);
    Ok(Outbound { record, path, end: truth.end, end_yaw, wind: truth.true_wind })
}

fn replay_record(s: &Scenario, path: &std::path::Path) -> Result<Outbound, EvalError> {
    let record = load_record(File::open(path)?)?;
    if (record.sample_dt() - s.plant.sample_dt).abs() > 1e-12 {
        return Err(EvalError::Config(format!(
            "record sample_dt {} differs from plant sample_dt {}",
            record.sample_dt(),
            s.plant.sample_dt
        )));
    }
    let reckoned = integrate_path(&record)?;
    let mut trace: Vec<[f64; 2]> = reckoned.points().iter().map(|p| [p.position.north, p.position.east]).collect();
    let end = reckoned.end().position;
    trace.push([end.north, end.east]);
    let wind = record
        .samples()
        .iter()
        .map(|x| {
            let w = rotate_to_true(x.wind.u, x.wind.v, x.telemetry.yaw);
            WindVector::new(w.north_r, w.east_r)
        })
        .collect();
    let end_yaw = record.telemetry().last().map_or(Angle::ZERO, |t| t.yaw);
    Ok(Outbound { record, path: trace, end, end_yaw, wind })
}

/// Physical wind for each return step.
struct ReturnWind {
    source: BackwardWind,
    mirrored: Vec<WindVector>,
    sampler: WindSampler,
    t0: f64,
    dt: f64,
    gamma: Option<((f64, f64), ChaCha8Rng)>,
}

impl ReturnWind {
    fn at(&mut self, step: usize) -> WindVector {
        let w = match self.source {
            BackwardWind::Mirrored => {
                let n = self.mirrored.len();
                self.mirrored[n - 1 - step % n]
            }
            BackwardWind::Continue => self.sampler.sample(self.t0 + step as f64 * self.dt),
        };
        match &mut self.gamma {
            Some((range, rng)) => w.scaled(draw_gamma(rng, *range)),
            None => w,
        }
    }
}

/// Trains both axis models on freshly simulated flights.
pub fn train_models(s: &Scenario, settings: &LassoSettings) -> Result<(AxisModels, Option<AxisDiagnostics>), EvalError> {
    let (legs, max_speed) = match s.flight {
        FlightSource::Random { legs, max_speed } => (legs, max_speed),
        _ => (6, s.plant.max_ground_speed.min(10.0)),
    };
    let records = (0..settings.training_flights)
        .map(|i| {
            let seed = derive_seed(s.seed, STREAM_TRAINING + i as u64);
            let script = FlightScript::random(seed, legs, max_speed, s.plant.sample_dt);
            let field = s.wind.clone().with_seed(derive_seed(seed, STREAM_WIND));
            Ok(simulate(&script, &field, &s.plant)?.0)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let data = AxisData::from_records(&records)?;
    let models = data.fit(settings.lambda)?;
    Ok((models, data.diagnostics(&models).ok()))
}

/// Runs one closed-loop flight. Repetitions are ignored; see
/// [`Scenario::expand`] and [`run_all`].
pub fn run_scenario(s: &Scenario) -> Result<RunReport, EvalError> {
    run_once(s).map_err(|e| EvalError::InScenario { id: s.id.clone(), source: Box::new(e) })
}

fn run_once(s: &Scenario) -> Result<RunReport, EvalError> {
    s.validate()?;
    let field = scenario_field(s);
    let outbound = fly_outbound(s, &field)?;
    if outbound.record.is_empty() {
        return Err(PlanError::EmptyRecord.into());
    }
    let record = match s.gamma_forward {
        Some(range) => apply_gamma(&outbound.record, range, derive_seed(s.seed, STREAM_GAMMA_FORWARD))?,
        None => outbound.record.clone(),
    };
    let dt = s.plant.sample_dt;

    let (mut planner, alpha, beta, diagnostics): (Box<dyn BackwardPlanner>, _, _, _) = match &s.planner {
        PlannerChoice::Weighted(w) => {
            let params = WeightedParams::new(w.alpha, w.beta)?.with_sign(w.sign).with_max_speed(s.plant.max_ground_speed);
            (Box::new(WeightedPlanner::new(&record, params)?), Some(w.alpha), Some(w.beta), None)
        }
        PlannerChoice::Lasso(l) => {
            let (models, diagnostics) = train_models(s, l)?;
            let reckoned = integrate_path(&record)?.end().position;
            let planner = LassoPlanner::new(reckoned, models, s.lasso_config(l))?;
            (Box::new(planner), None, None, diagnostics)
        }
    };

    let t0 = record.len() as f64 * dt;
    let mut wind = ReturnWind {
        source: s.backward_wind,
        mirrored: outbound.wind.clone(),
        sampler: WindSampler::new(&field),
        t0,
        dt,
        gamma: s
            .gamma_backward
            .map(|r| (r, ChaCha8Rng::seed_from_u64(derive_seed(s.seed, STREAM_GAMMA_BACKWARD)))),
    };
    let mut drone = Drone::new(s.plant.clone(), outbound.end, outbound.end_yaw);
    let mut backward_path = vec![[outbound.end.north, outbound.end.east]];
    let mut latencies = Vec::new();
    let mut commands = Vec::new();
    for step in 0.. {
        let w = wind.at(step);
        let (u, v) = drone.sense(w);
        let live = LiveWind::new(WindSample::new(t0 + step as f64 * dt, u, v), drone.yaw());
        let started = Instant::now();
        let command = planner.next_command(&live)?;
        let elapsed = started.elapsed();
        let Some(command) = command else { break };
        latencies.push(elapsed);
        drone.step(command.velocity(), command.target_height, YawPolicy::FaceVelocity, w);
        let p = drone.position();
        backward_path.push([p.north, p.east]);
        commands.push(command);
    }

    let end = drone.position();
    Ok(RunReport {
        scenario_id: s.id.clone(),
        planner: s.planner.name(),
        alpha,
        beta,
        gamma_forward: s.gamma_forward,
        gamma_backward: s.gamma_backward,
        compensation: s.plant.compensation,
        arrival: arrival_error((end.north, end.east), (0.0, 0.0)),
        forward_path: outbound.path,
        backward_path,
        commands,
        steps: latencies.len(),
        timing: StepTiming::from_samples(&latencies),
        diagnostics,
    })
}

/// Expands and runs every scenario, optionally in parallel. Results are
/// sorted by scenario id.
pub fn run_all(scenarios: &[Scenario], parallel: bool) -> Result<Vec<RunReport>, EvalError> {
    let runs: Vec<Scenario> = scenarios.iter().flat_map(Scenario::expand).collect();
    let mut reports = if parallel {
        runs.par_iter().map(run_scenario).collect::<Result<Vec<_>, _>>()?
    } else {
        runs.iter().map(run_scenario).collect::<Result<Vec<_>, _>>()?
    };
    reports.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Value is β; α = 1 − β.
    AlphaBeta,
    /// Value is the return-wind multiplier range.
    Gamma,
    Compensation,
}

impl SweepAxis {
    pub const NAMES: [&'static str; 3] = ["alpha_beta", "gamma", "compensation"];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "alpha_beta" => Some(SweepAxis::AlphaBeta),
            "gamma" => Some(SweepAxis::Gamma),
            "compensation" => Some(SweepAxis::Compensation),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

/// A swept value; scalars stand for `[x, x]` on the gamma axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Scalar(f64),
    Range(f64, f64),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Scalar(x) => write!(f, "{x}"),
            SweepValue::Range(lo, hi) => write!(f, "{lo}:{hi}"),
        }
    }
}

fn swept(base: &Scenario, axis: SweepAxis, value: SweepValue) -> Result<Scenario, EvalError> {
    let mut s = base.clone();
    s.id = format!("{}-{}-{}", base.id, axis.name(), value.to_string().replace(':', "_"));
    match (axis, value) {
        (SweepAxis::AlphaBeta, SweepValue::Scalar(beta)) => match &mut s.planner {
            PlannerChoice::Weighted(w) => {
                w.alpha = 1.0 - beta;
                w.beta = beta;
            }
            PlannerChoice::Lasso(_) => return Err(EvalError::Config("alpha_beta sweep needs the weighted planner".into())),
        },
        (SweepAxis::Gamma, SweepValue::Scalar(g)) => s.gamma_backward = Some((g, g)),
        (SweepAxis::Gamma, SweepValue::Range(lo, hi)) => s.gamma_backward = Some((lo, hi)),
        (SweepAxis::Compensation, SweepValue::Scalar(c)) => s.plant.compensation = c,
        (axis, value) => return Err(EvalError::Config(format!("{} does not take a range value ({value})", axis.name()))),
    }
    s.validate()?;
    Ok(s)
}

/// One scenario per value with everything else, seeds included, held fixed.
/// Reports come back in `values` order.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[SweepValue], parallel: bool) -> Result<Vec<RunReport>, EvalError> {
    let scenarios = values.iter().map(|v| swept(base, axis, *v)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for s in &scenarios {
        out.extend(run_all(std::slice::from_ref(s), parallel)?);
    }
    Ok(out)
}

/// Median of the arrival-error magnitudes.
pub fn median_error(reports: &[RunReport]) -> Option<f64> {
    let mut m: Vec<f64> = reports.iter().map(|r| r.arrival.magnitude).collect();
    if m.is_empty() {
        return None;
    }
    m.sort_by(f64::total_cmp);
    let n = m.len();
    Some(if n % 2 == 1 { m[n / 2] } else { 0.5 * (m[n / 2 - 1] + m[n / 2]) })
}
