//! Backward-phase planners.
//!
//! Both planners are sequential state machines that consume one live wind
//! reading per emitted command, so they can be driven closed-loop against
//! the simulator or replayed from a log.

use std::io::Write;

use thiserror::Error;

use crate::frames::{Angle, FrameError, WindSample};

pub mod lasso;
pub mod weighted;

pub use self::lasso::{plan_backward_lasso, AxisData, AxisDiagnostics, AxisModels, GuidanceMode, LassoPlanConfig, LassoPlanner};
pub use self::weighted::{plan_backward_weighted, weighted_step, RatioSign, WeightedParams, WeightedPlanner};

/// Header of the command CSV.
pub const COMMAND_COLUMNS: &str = "step,x_cmd_ms,y_cmd_ms,height_m";

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error("flight record is empty")]
    EmptyRecord,
    #[error("live wind ran out at step {step} of {needed}")]
    Truncated { step: usize, needed: usize },
    #[error("not home after {steps} steps; dead-reckoned offset ({north:.3}, {east:.3}) m")]
    NotArrived { steps: usize, north: f64, east: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Lasso(#[from] crate::lasso::LassoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One velocity setpoint held for `duration` seconds, true frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardCommand {
    pub x_speed_cmd: f64,
    pub y_speed_cmd: f64,
    pub duration: f64,
    pub target_height: f64,
}

impl BackwardCommand {
    pub fn velocity(&self) -> [f64; 2] {
        [self.x_speed_cmd, self.y_speed_cmd]
    }

    pub fn speed(&self) -> f64 {
        self.x_speed_cmd.hypot(self.y_speed_cmd)
    }
}

/// Anemometer reading taken during the return, with the heading it was
/// taken at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveWind {
    pub wind: WindSample,
    pub yaw: Angle,
}

impl LiveWind {
    pub fn new(wind: WindSample, yaw: Angle) -> Self {
        LiveWind { wind, yaw }
    }
}

/// Common driver interface for closed-loop evaluation.
pub trait BackwardPlanner {
    /// Next command given the current live reading, or `None` once the
    /// plan is complete.
    fn next_command(&mut self, live: &LiveWind) -> Result<Option<BackwardCommand>, PlanError>;
}

/// Scales `v` down so its magnitude is at most `max`.
pub(crate) fn clamp_magnitude(v: [f64; 2], max: f64) -> [f64; 2] {
    let m = v[0].hypot(v[1]);
    if m > max {
        [v[0] * max / m, v[1] * max / m]
    } else {
        v
    }
}

pub fn write_commands_csv<W: Write>(commands: &[BackwardCommand], mut sink: W) -> Result<(), PlanError> {
    writeln!(sink, "{COMMAND_COLUMNS}")?;
    for (i, c) in commands.iter().enumerate() {
        writeln!(sink, "{i},{},{},{}", c.x_speed_cmd, c.y_speed_cmd, c.target_height)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_csv_layout() {
        let cmds = [
            BackwardCommand { x_speed_cmd: -1.5, y_speed_cmd: 0.0, duration: 0.2, target_height: 20.0 },
            BackwardCommand { x_speed_cmd: 0.25, y_speed_cmd: 2.0, duration: 0.2, target_height: 10.0 },
        ];
        let mut buf = Vec::new();
        write_commands_csv(&cmds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,x_cmd_ms,y_cmd_ms,height_m\n0,-1.5,0,20\n1,0.25,2,10\n");
    }

    #[test]
    fn clamp_keeps_direction() {
        assert_eq!(clamp_magnitude([3.0, 4.0], 10.0), [3.0, 4.0]);
        let v = clamp_magnitude([30.0, 40.0], 10.0);
        assert!((v[0] - 6.0).abs() < 1e-12 && (v[1] - 8.0).abs() < 1e-12);
    }
}
