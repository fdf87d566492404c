//! Deterministic synthetic flights.
//!
//! A kinematic drone flies a [`FlightScript`] through a seeded [`WindField`].
//! Each tick the ground velocity is
//! `clamp(v_cmd + (1 − c)·w, max_ground_speed)`, where `c` is the fraction
//! of wind the autopilot cancels. The logged telemetry carries that ground
//! velocity, and the anemometer logs `w − κ·v_ground` rotated into the body
//! frame (`κ = 1` only with apparent-wind sensing).

mod field;
mod script;

pub use field::{sample_wind, WindField, WindModel, WindSampler, WindVector, DEFAULT_WIND_CAP};
pub use script::{FlightScript, Leg, YawPolicy, DEFAULT_MAX_RADIUS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deadreckon::Position;
use crate::frames::{normalize_angle, to_body, Angle, Speed, TelemetrySample, TrueWind, WindSample};
use crate::logstore::{FlightRecord, LogError, RecordMeta, RecordSample, DEFAULT_SAMPLE_DT};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Fraction of the true wind the autopilot cancels, in `[0, 1]`.
    pub compensation: f64,
    pub max_ground_speed: f64,
    pub apparent_wind_sensing: bool,
    pub sample_dt: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            compensation: 0.9,
            max_ground_speed: 15.0,
            apparent_wind_sensing: false,
            sample_dt: DEFAULT_SAMPLE_DT,
        }
    }
}

impl PlantConfig {
    pub fn with_compensation(mut self, c: f64) -> Self {
        self.compensation = c;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.compensation) {
            return Err(SimError::Config(format!("compensation must lie in [0, 1], got {}", self.compensation)));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(SimError::Config(format!("sample_dt must be positive, got {}", self.sample_dt)));
        }
        if !(self.max_ground_speed.is_finite() && self.max_ground_speed > 0.0) {
            return Err(SimError::Config("max_ground_speed must be positive".into()));
        }
        Ok(())
    }
}

/// Simulator-side truth on the record's grid. `positions[k]` is where the
/// drone is at the start of tick `k`; `end` is after the final tick.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub positions: Vec<Position>,
    pub end: Position,
    pub true_wind: Vec<WindVector>,
}

/// Kinematic drone state shared by forward simulation and closed-loop
/// return flights.
#[derive(Debug, Clone)]
pub struct Drone {
    plant: PlantConfig,
    position: Position,
    yaw: Angle,
    ground: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub ground_velocity: [f64; 2],
    pub yaw: Angle,
    /// Anemometer reading taken during the tick, body frame.
    pub reading: (f64, f64),
}

impl Drone {
    pub fn new(plant: PlantConfig, position: Position, yaw: Angle) -> Self {
        Drone { plant, position, yaw, ground: [0.0, 0.0] }
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn yaw(&self) -> Angle {
        self.yaw
    }

    pub fn plant(&self) -> &PlantConfig {
        &self.plant
    }

    fn airflow(&self, wind: WindVector, ground: [f64; 2]) -> TrueWind {
        let kappa = if self.plant.apparent_wind_sensing { 1.0 } else { 0.0 };
        TrueWind::new(wind.north - kappa * ground[0], wind.east - kappa * ground[1])
    }

    /// Body-frame `(u, v)` the anemometer reads right now, before the next
    /// command is applied: current yaw and last ground velocity.
    pub fn sense(&self, wind: WindVector) -> (f64, f64) {
        to_body(self.airflow(wind, self.ground), self.yaw)
    }

    /// Flies one tick of `sample_dt`.
    pub fn step(&mut self, command: [f64; 2], height: f64, policy: YawPolicy, wind: WindVector) -> Tick {
        match policy {
            YawPolicy::FaceVelocity => {
                if let Some(h) = Angle::of_vector(command[0], command[1]) {
                    self.yaw = h;
                }
            }
            YawPolicy::Fixed(d) => {
                self.yaw = normalize_angle(d).unwrap_or(self.yaw);
            }
        }
        let c = self.plant.compensation;
        let mut ground = [command[0] + (1.0 - c) * wind.north, command[1] + (1.0 - c) * wind.east];
        let speed = ground[0].hypot(ground[1]);
        if speed > self.plant.max_ground_speed {
            let k = self.plant.max_ground_speed / speed;
            ground = [ground[0] * k, ground[1] * k];
        }
        self.ground = ground;
        let reading = to_body(self.airflow(wind, ground), self.yaw);
        let dt = self.plant.sample_dt;
        self.position.north += ground[0] * dt;
        self.position.east += ground[1] * dt;
        self.position.height = height;
        Tick { ground_velocity: ground, yaw: self.yaw, reading }
    }
}

/// Flies `script` through `field` and returns the logged record plus ground
/// truth. Fully determined by the inputs (the field carries the seed).
pub fn simulate(
    script: &FlightScript,
    field: &WindField,
    plant: &PlantConfig,
) -> Result<(FlightRecord, GroundTruth), SimError> {
    plant.validate()?;
    field.validate().map_err(SimError::Config)?;
    script.validate(plant.max_ground_speed)?;

    let dt = plant.sample_dt;
    let ticks = script.ticks(dt);
    let total: usize = ticks.iter().sum();
    let mut sampler = WindSampler::new(field);
    let mut drone = Drone::new(plant.clone(), Position::default(), Angle::ZERO);
    let mut samples = Vec::with_capacity(total);
    let mut positions = Vec::with_capacity(total);
    let mut true_wind = Vec::with_capacity(total);

    let mut k = 0usize;
    for (leg, &n) in script.legs.iter().zip(&ticks) {
        for _ in 0..n {
            let t = k as f64 * dt;
            let wind = sampler.sample(t);
            positions.push(drone.position());
            true_wind.push(wind);
            let tick = drone.step(leg.velocity, leg.height, leg.yaw, wind);
            samples.push(RecordSample {
                telemetry: TelemetrySample {
                    t,
                    x_speed: Speed::from_mps(tick.ground_velocity[0]),
                    y_speed: Speed::from_mps(tick.ground_velocity[1]),
                    height: leg.height,
                    yaw: tick.yaw,
                },
                wind: WindSample::new(t, tick.reading.0, tick.reading.1),
            });
            k += 1;
        }
    }

    let meta = RecordMeta {
        flight_id: format!("sim-{}", field.seed),
        takeoff: "origin".into(),
        sample_dt: dt,
        created_at: "synthetic".into(),
    };
    let record = FlightRecord::new(meta, samples)?;
    Ok((record, GroundTruth { positions, end: drone.position(), true_wind }))
}

pub(crate) fn check_gamma_range(range: (f64, f64)) -> Result<(), SimError> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(SimError::Config(format!("invalid gamma range [{lo}, {hi}]")));
    }
    Ok(())
}

/// Draws one wind multiplier uniformly from `range`.
pub(crate) fn draw_gamma<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..=range.1)
    }
}

/// Scales each logged wind sample by its own uniform draw from
/// `gamma_range`. Telemetry is untouched.
pub fn apply_gamma(record: &FlightRecord, gamma_range: (f64, f64), seed: u64) -> Result<FlightRecord, SimError> {
    check_gamma_range(gamma_range)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wind: Vec<WindSample> = record
        .wind()
        .map(|w| {
            let g = draw_gamma(&mut rng, gamma_range);
            WindSample::new(w.t, w.u * g, w.v * g)
        })
        .collect();
    Ok(record.with_wind(&wind)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deadreckon::integrate_path;
    use crate::frames::to_true_north_east;

    fn gusty(seed: u64) -> WindField {
        WindField::mean_reverting(WindVector::new(4.0, -3.0), 0.3, 1.5, 0.2, seed)
    }

    #[test]
    fn calm_flight_logs_commands_and_matches_dead_reckoning() {
        let script = FlightScript::square(5.0, 10.0, 20.0);
        let (rec, truth) = simulate(&script, &WindField::calm(), &PlantConfig::default()).unwrap();
        assert_eq!(rec.len(), 200);
        for (i, s) in rec.telemetry().enumerate() {
            let leg = &script.legs[i / 50];
            assert_eq!([s.x_speed.mps(), s.y_speed.mps()], leg.velocity);
        }
        let path = integrate_path(&rec).unwrap();
        assert_eq!(path.end().position.north, truth.end.north);
        assert_eq!(path.end().position.east, truth.end.east);
        assert!(truth.end.horizontal_distance() < 1e-9);
    }

    #[test]
    fn full_compensation_hides_wind() {
        let script = FlightScript::random(3, 5, 10.0, 0.2);
        let plant = PlantConfig::default().with_compensation(1.0);
        let (rec, truth) = simulate(&script, &gusty(11), &plant).unwrap();
        let path = integrate_path(&rec).unwrap();
        for (p, q) in path.points().iter().zip(&truth.positions) {
            assert!((p.position.north - q.north).abs() < 1e-9);
            assert!((p.position.east - q.east).abs() < 1e-9);
        }
        let ticks = script.ticks(0.2);
        let mut k = 0;
        for (leg, n) in script.legs.iter().zip(ticks) {
            for s in &rec.samples()[k..k + n] {
                assert_eq!([s.telemetry.x_speed.mps(), s.telemetry.y_speed.mps()], leg.velocity);
            }
            k += n;
        }
    }

    #[test]
    fn uncompensated_hover_drifts_with_wind() {
        // Hand-integrated: 50 ticks × (0 + 1·1 m/s) × 0.2 s = 10 m north.
        let script = FlightScript::new(vec![Leg::new(0.0, 0.0, 10.0, 15.0)]);
        let plant = PlantConfig::default().with_compensation(0.0);
        let (_, truth) = simulate(&script, &WindField::constant(1.0, 0.0), &plant).unwrap();
        assert!((truth.end.north - 10.0).abs() < 1e-9);
        assert_eq!(truth.end.east, 0.0);
    }

    #[test]
    fn logged_wind_resolves_to_true_wind() {
        let script = FlightScript::random(8, 4, 10.0, 0.2);
        let (rec, truth) = simulate(&script, &gusty(4), &PlantConfig::default()).unwrap();
        for (s, w) in rec.samples().iter().zip(&truth.true_wind) {
            let tw = to_true_north_east(&s.wind, s.telemetry.yaw).unwrap();
            assert!((tw.north_r - w.north).abs() < 1e-9 && (tw.east_r - w.east).abs() < 1e-9);
        }
    }

    #[test]
    fn logged_magnitude_independent_of_yaw_policy() {
        let mut script = FlightScript::random(9, 4, 10.0, 0.2);
        let plant = PlantConfig::default();
        let (a, _) = simulate(&script, &gusty(2), &plant).unwrap();
        for leg in &mut script.legs {
            leg.yaw = YawPolicy::Fixed(33.0);
        }
        let (b, _) = simulate(&script, &gusty(2), &plant).unwrap();
        for (x, y) in a.wind().zip(b.wind()) {
            assert!((x.magnitude() - y.magnitude()).abs() < 1e-9);
        }
    }

    #[test]
    fn apparent_wind_subtracts_ground_velocity() {
        let script = FlightScript::new(vec![Leg::new(5.0, 0.0, 1.0, 10.0)]);
        let plant = PlantConfig { apparent_wind_sensing: true, compensation: 1.0, ..PlantConfig::default() };
        let (rec, _) = simulate(&script, &WindField::calm(), &plant).unwrap();
        let s = rec.samples()[0];
        let tw = to_true_north_east(&s.wind, s.telemetry.yaw).unwrap();
        assert!((tw.north_r + 5.0).abs() < 1e-12 && tw.east_r.abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let script = FlightScript::random(21, 6, 12.0, 0.2);
        let a = simulate(&script, &gusty(5), &PlantConfig::default()).unwrap();
        let b = simulate(&script, &gusty(5), &PlantConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = simulate(&script, &gusty(6), &PlantConfig::default()).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn config_errors() {
        let script = FlightScript::new(vec![Leg::new(20.0, 0.0, 1.0, 10.0)]);
        assert!(matches!(simulate(&script, &WindField::calm(), &PlantConfig::default()), Err(SimError::Config(_))));
        let ok = FlightScript::square(1.0, 1.0, 5.0);
        let bad = PlantConfig { compensation: 1.5, ..PlantConfig::default() };
        assert!(simulate(&ok, &WindField::calm(), &bad).is_err());
    }

    #[test]
    fn gamma_scaling() {
        let script = FlightScript::random(1, 3, 10.0, 0.2);
        let (rec, _) = simulate(&script, &gusty(1), &PlantConfig::default()).unwrap();
        assert_eq!(apply_gamma(&rec, (1.0, 1.0), 5).unwrap(), rec);
        let doubled = apply_gamma(&rec, (2.0, 2.0), 5).unwrap();
        for (a, b) in rec.samples().iter().zip(doubled.samples()) {
            assert_eq!(b.wind.u, 2.0 * a.wind.u);
            assert_eq!(b.wind.v, 2.0 * a.wind.v);
            assert_eq!(a.telemetry, b.telemetry);
        }
        let x = apply_gamma(&rec, (2.0, 3.0), 77).unwrap();
        assert_eq!(x, apply_gamma(&rec, (2.0, 3.0), 77).unwrap());
        for (a, b) in rec.wind().zip(x.wind()) {
            if a.u != 0.0 {
                let g = b.u / a.u;
                assert!((2.0 - 1e-12..=3.0 + 1e-12).contains(&g));
            }
        }
        assert!(apply_gamma(&rec, (3.0, 2.0), 1).is_err());
        assert!(apply_gamma(&rec, (0.0, 2.0), 1).is_err());
    }
}
