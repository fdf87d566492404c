//! Straight-line return with wind-predicted speed.
//!
//! After an initial climb the drone flies toward takeoff along the
//! dead-reckoned bearing. The per-axis models map live true-frame wind to an
//! achievable speed; their combined magnitude sets the commanded speed.

use serde::{Deserialize, Serialize};

use super::{clamp_magnitude, BackwardCommand, BackwardPlanner, LiveWind, PlanError};
use crate::deadreckon::Position;
use crate::frames::rotate_to_true;
use crate::lasso::{fit_lasso, fit_lasso_cv, pearson, r2_score, Dataset1D, LassoModel};
use crate::logstore::FlightRecord;

/// How predicted per-axis speeds become a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidanceMode {
    /// Predicted magnitude along the bearing to takeoff.
    #[default]
    Guided,
    /// Predicted `(x, y)` commanded verbatim. Not guaranteed to head home.
    RawPerAxis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoPlanConfig {
    /// Climb applied by the first command, m.
    pub height_raise: f64,
    pub arrival_radius: f64,
    pub max_steps: usize,
    pub speed_floor: f64,
    pub max_speed: f64,
    pub sample_dt: f64,
    pub mode: GuidanceMode,
}

impl Default for LassoPlanConfig {
    fn default() -> Self {
        LassoPlanConfig {
            height_raise: 20.0,
            arrival_radius: 1.0,
            max_steps: 20_000,
            speed_floor: 0.5,
            max_speed: 15.0,
            sample_dt: 0.2,
            mode: GuidanceMode::Guided,
        }
    }
}

impl LassoPlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidParams(m));
        if !(self.height_raise.is_finite() && self.height_raise >= 0.0) {
            return bad(format!("height_raise must be ≥ 0, got {}", self.height_raise));
        }
        if !(self.arrival_radius.is_finite() && self.arrival_radius > 0.0) {
            return bad(format!("arrival_radius must be > 0, got {}", self.arrival_radius));
        }
        if !(self.speed_floor.is_finite() && self.speed_floor > 0.0) {
            return bad(format!("speed_floor must be > 0, got {}", self.speed_floor));
        }
        if !(self.max_speed.is_finite() && self.max_speed >= self.speed_floor) {
            return bad(format!("max_speed must be ≥ speed_floor, got {}", self.max_speed));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return bad(format!("sample_dt must be > 0, got {}", self.sample_dt));
        }
        Ok(())
    }
}

/// `xSpeed ← northR` and `ySpeed ← eastR` models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisModels {
    pub north: LassoModel,
    pub east: LassoModel,
}

/// Paired `(true wind, ground speed)` samples per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisData {
    pub north: Dataset1D,
    pub east: Dataset1D,
}

/// Fit quality of trained models on their training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisDiagnostics {
    pub pearson_north: f64,
    pub pearson_east: f64,
    pub r2_north: f64,
    pub r2_east: f64,
}

impl AxisData {
    /// Pools every sample of `records`.
    pub fn from_records(records: &[FlightRecord]) -> Result<Self, PlanError> {
        let (mut nx, mut ny, mut ex, mut ey) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in records {
            for s in rec.samples() {
                let w = rotate_to_true(s.wind.u, s.wind.v, s.telemetry.yaw);
                nx.push(w.north_r);
                ny.push(s.telemetry.x_speed.mps());
                ex.push(w.east_r);
                ey.push(s.telemetry.y_speed.mps());
            }
        }
        Ok(AxisData { north: Dataset1D::new(nx, ny)?, east: Dataset1D::new(ex, ey)? })
    }

    /// Fits both axes, with λ from cross-validation when `lambda` is `None`.
    pub fn fit(&self, lambda: Option<f64>) -> Result<AxisModels, PlanError> {
        let one = |d: &Dataset1D| match lambda {
            Some(l) => fit_lasso(d, l),
            None => fit_lasso_cv(d),
        };
        Ok(AxisModels { north: one(&self.north)?, east: one(&self.east)? })
    }

    pub fn diagnostics(&self, models: &AxisModels) -> Result<AxisDiagnostics, PlanError> {
        Ok(AxisDiagnostics {
            pearson_north: pearson(self.north.xs(), self.north.ys())?,
            pearson_east: pearson(self.east.xs(), self.east.ys())?,
            r2_north: r2_score(&models.north, &self.north)?,
            r2_east: r2_score(&models.east, &self.east)?,
        })
    }
}

/// Dead-reckoning state machine for the straight-line return.
#[derive(Debug, Clone)]
pub struct LassoPlanner {
    models: AxisModels,
    cfg: LassoPlanConfig,
    north: f64,
    east: f64,
    height: f64,
    steps: usize,
}

impl LassoPlanner {
    pub fn new(start: Position, models: AxisModels, cfg: LassoPlanConfig) -> Result<Self, PlanError> {
        cfg.validate()?;
        if !(start.north.is_finite() && start.east.is_finite() && start.height.is_finite()) {
            return Err(PlanError::InvalidParams("start position must be finite".into()));
        }
        Ok(LassoPlanner {
            models,
            cfg,
            north: start.north,
            east: start.east,
            height: start.height + cfg.height_raise,
            steps: 0,
        })
    }

    /// Dead-reckoned `(north, east)` offset from takeoff.
    pub fn offset(&self) -> (f64, f64) {
        (self.north, self.east)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_home(&self) -> bool {
        self.north.hypot(self.east) < self.cfg.arrival_radius
    }

    fn emit(&mut self, v: [f64; 2]) -> BackwardCommand {
        self.north += v[0] * self.cfg.sample_dt;
        self.east += v[1] * self.cfg.sample_dt;
        self.steps += 1;
        BackwardCommand { x_speed_cmd: v[0], y_speed_cmd: v[1], duration: self.cfg.sample_dt, target_height: self.height }
    }
}

impl BackwardPlanner for LassoPlanner {
    fn next_command(&mut self, live: &LiveWind) -> Result<Option<BackwardCommand>, PlanError> {
        if self.is_home() {
            return Ok(None);
        }
        if self.steps >= self.cfg.max_steps {
            return Err(PlanError::NotArrived { steps: self.steps, north: self.north, east: self.east });
        }
        live.wind.validate()?;
        if self.steps == 0 {
            return Ok(Some(self.emit([0.0, 0.0])));
        }
        let w = rotate_to_true(live.wind.u, live.wind.v, live.yaw);
        let sx = self.models.north.predict(w.north_r);
        let sy = self.models.east.predict(w.east_r);
        let v = match self.cfg.mode {
            GuidanceMode::RawPerAxis => clamp_magnitude([sx, sy], self.cfg.max_speed),
            GuidanceMode::Guided => {
                let dist = self.north.hypot(self.east);
                // Never overshoot takeoff within one step.
                let speed = sx.hypot(sy).min(self.cfg.max_speed).min(dist / self.cfg.sample_dt);
                let speed = speed.max(self.cfg.speed_floor);
                [-self.north / dist * speed, -self.east / dist * speed]
            }
        };
        Ok(Some(self.emit(v)))
    }
}

/// Open-loop plan from `start` over a live-wind series. Running out of
/// live wind before arrival is a truncation error.
pub fn plan_backward_lasso(
    start: Position,
    models: AxisModels,
    live_wind: &[LiveWind],
    cfg: LassoPlanConfig,
) -> Result<Vec<BackwardCommand>, PlanError> {
    let mut planner = LassoPlanner::new(start, models, cfg)?;
    let mut out = Vec::new();
    let mut feed = live_wind.iter();
    loop {
        if planner.is_home() {
            return Ok(out);
        }
        let Some(live) = feed.next() else {
            if planner.steps >= cfg.max_steps {
                return Err(PlanError::NotArrived { steps: planner.steps, north: planner.north, east: planner.east });
            }
            return Err(PlanError::Truncated { step: out.len(), needed: cfg.max_steps.max(out.len() + 1) });
        };
        match planner.next_command(live)? {
            Some(cmd) => out.push(cmd),
            None => return Ok(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{Angle, WindSample};
    use proptest::prelude::*;

    fn constant_model(intercept: f64, slope: f64) -> LassoModel {
        LassoModel { intercept, slope, lambda: 0.0, x_mean: 0.0, x_std: 1.0 }
    }

    fn models(speed: f64) -> AxisModels {
        AxisModels { north: constant_model(speed, 0.0), east: constant_model(0.0, 0.0) }
    }

    fn calm(n: usize) -> Vec<LiveWind> {
        vec![LiveWind::new(WindSample::new(0.0, 0.0, 0.0), Angle::ZERO); n]
    }

    #[test]
    fn straight_west_in_one_metre_steps() {
        let cmds = plan_backward_lasso(Position::new(0.0, 100.0, 30.0), models(5.0), &calm(500), LassoPlanConfig::default()).unwrap();
        assert_eq!(cmds.len(), 101);
        assert_eq!(cmds[0].velocity(), [0.0, 0.0]);
        assert!(cmds.iter().all(|c| c.target_height == 50.0));
        for c in &cmds[1..] {
            assert_eq!(c.velocity(), [0.0, -5.0]);
        }
    }

    #[test]
    fn already_home_emits_nothing() {
        let cmds = plan_backward_lasso(Position::new(0.3, -0.4, 10.0), models(5.0), &[], LassoPlanConfig::default()).unwrap();
        assert!(cmds.is_empty());
    }

    #[test]
    fn exhausting_steps_reports_offset() {
        let cfg = LassoPlanConfig { max_steps: 10, ..Default::default() };
        match plan_backward_lasso(Position::new(100.0, 0.0, 0.0), models(5.0), &calm(500), cfg) {
            Err(PlanError::NotArrived { steps: 10, north, east }) => {
                assert!((north - 91.0).abs() < 1e-9 && east == 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let short = plan_backward_lasso(Position::new(100.0, 0.0, 0.0), models(5.0), &calm(3), LassoPlanConfig::default());
        assert!(matches!(short, Err(PlanError::Truncated { step: 3, .. })));
    }

    #[test]
    fn floor_prevents_stall() {
        let m = AxisModels { north: constant_model(0.0, 0.0), east: constant_model(0.0, 0.0) };
        let cmds = plan_backward_lasso(Position::new(3.0, 4.0, 0.0), m, &calm(100), LassoPlanConfig::default()).unwrap();
        assert!(cmds[1..].iter().all(|c| (c.speed() - 0.5).abs() < 1e-12));
    }

    #[test]
    fn raw_mode_commands_predictions() {
        let m = AxisModels { north: constant_model(1.0, 0.5), east: constant_model(-2.0, 0.0) };
        let cfg = LassoPlanConfig { mode: GuidanceMode::RawPerAxis, ..Default::default() };
        let live = [LiveWind::new(WindSample::new(0.0, 0.0, 2.0), Angle::ZERO); 2];
        let mut p = LassoPlanner::new(Position::new(50.0, 0.0, 0.0), m, cfg).unwrap();
        p.next_command(&live[0]).unwrap();
        // Heading 0: v is true north.
        assert_eq!(p.next_command(&live[1]).unwrap().unwrap().velocity(), [2.0, -2.0]);
    }

    #[test]
    fn trains_on_linear_records() {
        use crate::frames::{Speed, TelemetrySample};
        use crate::logstore::{RecordMeta, RecordSample};
        let samples: Vec<RecordSample> = (0..30)
            .map(|i| {
                let t = f64::from(i) * 0.2;
                let wind = f64::from(i % 7) - 3.0;
                RecordSample {
                    telemetry: TelemetrySample {
                        t,
                        x_speed: Speed::from_mps(6.0 - 0.5 * wind),
                        y_speed: Speed::from_mps(2.0 + 0.25 * wind),
                        height: 10.0,
                        yaw: Angle::ZERO,
                    },
                    wind: WindSample::new(t, wind, wind),
                }
            })
            .collect();
        let rec = FlightRecord::new(RecordMeta::new("train", 0.2), samples).unwrap();
        let data = AxisData::from_records(&[rec]).unwrap();
        let m = data.fit(Some(0.0)).unwrap();
        assert!((m.north.slope + 0.5).abs() < 1e-9 && (m.north.intercept - 6.0).abs() < 1e-9);
        assert!((m.east.slope - 0.25).abs() < 1e-9);
        let d = data.diagnostics(&m).unwrap();
        assert!((d.pearson_north + 1.0).abs() < 1e-12 && (d.r2_east - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn heads_home_monotonically(
            north in -250.0..250.0f64,
            east in -250.0..250.0f64,
            intercept in -3.0..8.0f64,
            slope in -1.0..1.0f64,
            winds in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -180.0..180.0f64), 64),
        ) {
            let m = AxisModels { north: constant_model(intercept, slope), east: constant_model(intercept * 0.5, -slope) };
            let cfg = LassoPlanConfig::default();
            let mut p = LassoPlanner::new(Position::new(north, east, 5.0), m, cfg).unwrap();
            let mut k = 0;
            while let Some(cmd) = p.next_command(&{
                let (u, v, y) = winds[k % winds.len()];
                LiveWind::new(WindSample::new(0.0, u, v), Angle::from_degrees(y).unwrap())
            }).unwrap() {
                let (n0, e0) = if k == 0 { (north, east) } else { (p.north - cmd.x_speed_cmd * 0.2, p.east - cmd.y_speed_cmd * 0.2) };
                prop_assert!(cmd.x_speed_cmd.is_finite() && cmd.y_speed_cmd.is_finite());
                if k > 0 {
                    let d0 = n0.hypot(e0);
                    prop_assert!(cmd.speed() >= cfg.speed_floor - 1e-12);
                    // Aimed at takeoff: anti-parallel to the offset.
                    let cross = cmd.x_speed_cmd * e0 - cmd.y_speed_cmd * n0;
                    let dot = cmd.x_speed_cmd * n0 + cmd.y_speed_cmd * e0;
                    prop_assert!(cross.abs() <= 1e-9 * cmd.speed() * d0);
                    prop_assert!(dot < 0.0);
                    prop_assert!(p.north.hypot(p.east) < d0);
                }
                k += 1;
            }
            prop_assert!(p.north.hypot(p.east) < cfg.arrival_radius);
        }
    }
}
