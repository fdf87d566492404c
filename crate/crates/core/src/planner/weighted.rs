//! Weighted proportion retrace.
//!
//! The forward route is flown in reverse with each recorded speed rescaled by
//! how the live wind compares with the wind logged at that point:
//!
//! ```text
//! x_cmd = −x_f · (α + β · north_rb / north_rf)
//! y_cmd = −y_f · (α + β · east_rb  / east_rf)
//! ```
//!
//! With `α + β = 1` and equal winds the factor is exactly one.

use serde::{Deserialize, Serialize};

use super::{clamp_magnitude, BackwardCommand, BackwardPlanner, LiveWind, PlanError};
use crate::deadreckon::{reverse_series, ReversedSeries};
use crate::frames::{rotate_to_true, TrueWind};
use crate::logstore::FlightRecord;

/// Largest wind ratio magnitude admitted into the factor.
pub const DEFAULT_RATIO_CLAMP: f64 = 10.0;
pub const DEFAULT_BETA: f64 = 0.10;
pub const DEFAULT_MAX_SPEED: f64 = 15.0;

/// Sign of the wind-ratio term. `Plus` is the retrace form; `Minus` is kept
/// for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioSign {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedParams {
    alpha: f64,
    beta: f64,
    pub sign: RatioSign,
    pub ratio_clamp: f64,
    /// Commanded speed cap, m/s.
    pub max_speed: f64,
}

impl WeightedParams {
    /// Requires `alpha, beta ≥ 0` and `alpha + beta = 1` (to 1e-9).
    pub fn new(alpha: f64, beta: f64) -> Result<Self, PlanError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0) {
            return Err(PlanError::InvalidParams(format!("alpha={alpha}, beta={beta} must be ≥ 0")));
        }
        if (alpha + beta - 1.0).abs() > 1e-9 {
            return Err(PlanError::InvalidParams(format!("alpha + beta must be 1, got {}", alpha + beta)));
        }
        Ok(WeightedParams {
            alpha,
            beta,
            sign: RatioSign::Plus,
            ratio_clamp: DEFAULT_RATIO_CLAMP,
            max_speed: DEFAULT_MAX_SPEED,
        })
    }

    pub fn from_beta(beta: f64) -> Result<Self, PlanError> {
        WeightedParams::new(1.0 - beta, beta)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_sign(mut self, sign: RatioSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_max_speed(mut self, max_speed: f64) -> Self {
        self.max_speed = max_speed;
        self
    }

    fn check(&self) -> Result<(), PlanError> {
        if !(self.ratio_clamp.is_finite() && self.ratio_clamp > 0.0) {
            return Err(PlanError::InvalidParams(format!("ratio_clamp must be positive, got {}", self.ratio_clamp)));
        }
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(PlanError::InvalidParams(format!("max_speed must be positive, got {}", self.max_speed)));
        }
        Ok(())
    }
}

impl Default for WeightedParams {
    fn default() -> Self {
        WeightedParams::from_beta(DEFAULT_BETA).expect("default weights are valid")
    }
}

/// One axis of the weighted rescaling. A zero forward wind leaves the
/// speed unchanged.
pub fn weighted_step(x_speed_f: f64, north_rf: f64, north_rb: f64, params: &WeightedParams) -> f64 {
    if north_rf == 0.0 {
        return x_speed_f;
    }
    let ratio = (north_rb / north_rf).clamp(-params.ratio_clamp, params.ratio_clamp);
    let term = params.beta * if ratio.is_nan() { 0.0 } else { ratio };
    match params.sign {
        RatioSign::Plus => x_speed_f * (params.alpha + term),
        RatioSign::Minus => x_speed_f * (params.alpha - term),
    }
}

/// Steps through the reversed forward series.
#[derive(Debug, Clone)]
pub struct WeightedPlanner {
    series: ReversedSeries,
    forward_wind: Vec<TrueWind>,
    params: WeightedParams,
    dt: f64,
    step: usize,
}

impl WeightedPlanner {
    pub fn new(record: &FlightRecord, params: WeightedParams) -> Result<Self, PlanError> {
        params.check()?;
        if record.is_empty() {
            return Err(PlanError::EmptyRecord);
        }
        let series = reverse_series(record);
        let forward_wind = series
            .telemetry
            .iter()
            .zip(&series.wind)
            .map(|(tel, w)| rotate_to_true(w.u, w.v, tel.yaw))
            .collect();
        Ok(WeightedPlanner { series, forward_wind, params, dt: record.sample_dt(), step: 0 })
    }

    /// Total number of commands the plan emits.
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.len() - self.step
    }

    pub fn params(&self) -> &WeightedParams {
        &self.params
    }

    /// Command for the current step from a backward wind already in the
    /// true frame.
    pub fn step_true(&mut self, backward: TrueWind) -> Option<BackwardCommand> {
        let tel = self.series.telemetry.get(self.step)?;
        let forward = self.forward_wind[self.step];
        let x = weighted_step(tel.x_speed.mps(), forward.north_r, backward.north_r, &self.params);
        let y = weighted_step(tel.y_speed.mps(), forward.east_r, backward.east_r, &self.params);
        let [x, y] = clamp_magnitude([-x, -y], self.params.max_speed);
        self.step += 1;
        Some(BackwardCommand { x_speed_cmd: x, y_speed_cmd: y, duration: self.dt, target_height: tel.height })
    }
}

impl BackwardPlanner for WeightedPlanner {
    fn next_command(&mut self, live: &LiveWind) -> Result<Option<BackwardCommand>, PlanError> {
        if self.step >= self.len() {
            return Ok(None);
        }
        live.wind.validate()?;
        Ok(self.step_true(rotate_to_true(live.wind.u, live.wind.v, live.yaw)))
    }
}

/// Open-loop plan over a full live-wind series.
pub fn plan_backward_weighted(
    record: &FlightRecord,
    live_wind: &[LiveWind],
    params: WeightedParams,
) -> Result<Vec<BackwardCommand>, PlanError> {
    let mut planner = WeightedPlanner::new(record, params)?;
    let needed = planner.len();
    if live_wind.len() < needed {
        return Err(PlanError::Truncated { step: live_wind.len(), needed });
    }
    let mut out = Vec::with_capacity(needed);
    for live in &live_wind[..needed] {
        if let Some(cmd) = planner.next_command(live)? {
            out.push(cmd);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{to_body, Angle, Speed, TelemetrySample, WindSample};
    use crate::logstore::{RecordMeta, RecordSample};
    use proptest::prelude::*;

    fn record(rows: &[(f64, f64, f64, f64, f64)]) -> FlightRecord {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, y, yaw, u, v))| {
                let t = i as f64 * 0.2;
                RecordSample {
                    telemetry: TelemetrySample {
                        t,
                        x_speed: Speed::from_mps(x),
                        y_speed: Speed::from_mps(y),
                        height: 10.0 + i as f64,
                        yaw: Angle::from_degrees(yaw).unwrap(),
                    },
                    wind: WindSample::new(t, u, v),
                }
            })
            .collect();
        FlightRecord::new(RecordMeta::new("t", 0.2), samples).unwrap()
    }

    fn live(u: f64, v: f64, yaw: f64) -> LiveWind {
        LiveWind::new(WindSample::new(0.0, u, v), Angle::from_degrees(yaw).unwrap())
    }

    #[test]
    fn step_examples() {
        let exact = WeightedParams::new(1.0, 0.0).unwrap();
        assert_eq!(weighted_step(4.0, 2.0, 9.0, &exact), 4.0);
        let p = WeightedParams::new(0.9, 0.1).unwrap();
        assert_eq!(weighted_step(4.0, 2.0, 2.0, &p), 4.0);
        assert_eq!(weighted_step(4.0, 0.0, 7.0, &p), 4.0);
        // 4·(0.9 + 0.1·3) vs 4·(0.9 − 0.1·3)
        assert!((weighted_step(4.0, 1.0, 3.0, &p) - 4.8).abs() < 1e-12);
        assert!((weighted_step(4.0, 1.0, 3.0, &p.with_sign(RatioSign::Minus)) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn ratio_is_clamped() {
        let p = WeightedParams::new(0.0, 1.0).unwrap();
        assert_eq!(weighted_step(1.0, 1e-12, 5.0, &p), 10.0);
        assert_eq!(weighted_step(1.0, -1e-12, 5.0, &p), -10.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(WeightedParams::new(0.9, 0.2).is_err());
        assert!(WeightedParams::new(-0.1, 1.1).is_err());
        let d = WeightedParams::default();
        assert!((d.alpha() - 0.9).abs() < 1e-15 && d.beta() == 0.1);
    }

    #[test]
    fn reverses_negates_and_replays_heights() {
        let rec = record(&[(1.0, 2.0, 0.0, 0.0, 0.0), (3.0, -1.0, 90.0, 0.0, 0.0)]);
        let winds = [live(0.0, 0.0, 0.0); 2];
        let cmds = plan_backward_weighted(&rec, &winds, WeightedParams::default()).unwrap();
        assert_eq!(cmds.len(), 2);
        assert_eq!((cmds[0].x_speed_cmd, cmds[0].y_speed_cmd, cmds[0].target_height), (-3.0, 1.0, 11.0));
        assert_eq!((cmds[1].x_speed_cmd, cmds[1].y_speed_cmd, cmds[1].target_height), (-1.0, -2.0, 10.0));
        assert!(cmds.iter().all(|c| c.duration == 0.2));
    }

    #[test]
    fn truncated_live_wind_names_step() {
        let rec = record(&[(1.0, 0.0, 0.0, 1.0, 1.0); 5]);
        let err = plan_backward_weighted(&rec, &[live(1.0, 1.0, 0.0); 3], WeightedParams::default()).unwrap_err();
        assert!(matches!(err, PlanError::Truncated { step: 3, needed: 5 }));
        assert!(err.to_string().contains("step 3"));
    }

    #[test]
    fn planner_stops_after_series() {
        let rec = record(&[(1.0, 0.0, 0.0, 1.0, 1.0)]);
        let mut p = WeightedPlanner::new(&rec, WeightedParams::default()).unwrap();
        assert_eq!(p.remaining(), 1);
        assert!(p.next_command(&live(1.0, 1.0, 0.0)).unwrap().is_some());
        assert!(p.next_command(&live(1.0, 1.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn speed_is_capped() {
        let rec = record(&[(10.0, 0.0, 0.0, 0.0, 1.0)]);
        let p = WeightedParams::new(0.0, 1.0).unwrap().with_max_speed(12.0);
        let cmds = plan_backward_weighted(&rec, &[live(0.0, 5.0, 0.0)], p).unwrap();
        assert!((cmds[0].speed() - 12.0).abs() < 1e-12);
    }

    fn arb_record() -> impl Strategy<Value = FlightRecord> {
        prop::collection::vec(
            (-10.0..10.0f64, -10.0..10.0f64, -180.0..180.0f64, -20.0..20.0f64, -20.0..20.0f64),
            1..40,
        )
        .prop_map(|rows| record(&rows))
    }

    proptest! {
        #[test]
        fn beta_zero_is_pure_mirroring(rec in arb_record(), u in -30.0..30.0f64, v in -30.0..30.0f64) {
            let winds = vec![live(u, v, 33.0); rec.len()];
            let cmds = plan_backward_weighted(&rec, &winds, WeightedParams::new(1.0, 0.0).unwrap()).unwrap();
            for (c, t) in cmds.iter().zip(rec.telemetry().rev()) {
                prop_assert_eq!(c.x_speed_cmd, -t.x_speed.mps());
                prop_assert_eq!(c.y_speed_cmd, -t.y_speed.mps());
            }
        }

        #[test]
        fn commands_are_finite(
            rec in arb_record(),
            beta in 0.0..1.0f64,
            winds in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64, -180.0..180.0f64), 40),
            zero_forward in any::<bool>(),
        ) {
            let rec = if zero_forward {
                let calm: Vec<WindSample> = rec.wind().map(|w| WindSample::new(w.t, 0.0, 0.0)).collect();
                rec.with_wind(&calm).unwrap()
            } else { rec };
            let live: Vec<LiveWind> = winds.iter().map(|&(u, v, y)| live(u, v, y)).collect();
            let cmds = plan_backward_weighted(&rec, &live, WeightedParams::from_beta(beta).unwrap()).unwrap();
            prop_assert_eq!(cmds.len(), rec.len());
            for c in &cmds {
                prop_assert!(c.x_speed_cmd.is_finite() && c.y_speed_cmd.is_finite());
                prop_assert!(c.speed() <= DEFAULT_MAX_SPEED + 1e-9);
            }
        }

        #[test]
        fn mirrored_wind_retraces_exactly(rec in arb_record(), beta in 0.0..1.0f64, heading in -180.0..180.0f64) {
            // Live readings carry the same true wind as the stored sample,
            // seen from an arbitrary heading.
            let yaw = Angle::from_degrees(heading).unwrap();
            let live: Vec<LiveWind> = rec
                .samples()
                .iter()
                .rev()
                .map(|s| {
                    let (u, v) = to_body(rotate_to_true(s.wind.u, s.wind.v, s.telemetry.yaw), yaw);
                    LiveWind::new(WindSample::new(0.0, u, v), yaw)
                })
                .collect();
            let cmds = plan_backward_weighted(&rec, &live, WeightedParams::from_beta(beta).unwrap()).unwrap();
            let (mut n, mut e) = (0.0, 0.0);
            for t in rec.telemetry() {
                n += t.x_speed.mps() * 0.2;
                e += t.y_speed.mps() * 0.2;
            }
            for c in &cmds {
                n += c.x_speed_cmd * 0.2;
                e += c.y_speed_cmd * 0.2;
            }
            prop_assert!(n.hypot(e) < 1e-6, "offset {} {}", n, e);
        }
    }
}
