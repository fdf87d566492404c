//! Forward-phase route reconstruction from logged ground speeds.

use std::io::Write;

use thiserror::Error;

use crate::frames::{TelemetrySample, WindSample};
use crate::logstore::FlightRecord;

#[derive(Debug, Error)]
pub enum DeadReckonError {
    #[error("record is empty")]
    EmptyRecord,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Horizontal position relative to takeoff plus altitude, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub north: f64,
    pub east: f64,
    pub height: f64,
}

impl Position {
    pub fn new(north: f64, east: f64, height: f64) -> Self {
        Position { north, east, height }
    }

    pub fn horizontal_distance(&self) -> f64 {
        self.north.hypot(self.east)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub position: Position,
}

/// Dead-reckoned route.
///
/// `points[k]` is the position at the start of tick `k`, on the record's
/// time grid, so `points.len()` equals the record length and the first
/// point is at the origin. [`Path::end`] is the position after the final
/// tick has been flown.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<PathPoint>,
    end: PathPoint,
}

impl Path {
    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn end(&self) -> PathPoint {
        self.end
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rectangle-rule integration of the logged speeds:
/// `north[k+1] = north[k] + x_speed[k]·dt`, likewise for east. Height is
/// copied from the log.
pub fn integrate_path(record: &FlightRecord) -> Result<Path, DeadReckonError> {
    integrate_path_from(record, Position::default())
}

/// As [`integrate_path`], starting from `origin` instead of takeoff. Lets a
/// split record be integrated piecewise.
pub fn integrate_path_from(record: &FlightRecord, origin: Position) -> Result<Path, DeadReckonError> {
    let dt = record.sample_dt();
    let mut telemetry = record.telemetry();
    let first = telemetry.next().ok_or(DeadReckonError::EmptyRecord)?;
    let mut points = Vec::with_capacity(record.len());
    let mut north = origin.north;
    let mut east = origin.east;
    let mut last = *first;
    points.push(PathPoint { t: first.t, position: Position::new(north, east, first.height) });
    for s in telemetry {
        north += last.x_speed.mps() * dt;
        east += last.y_speed.mps() * dt;
        points.push(PathPoint { t: s.t, position: Position::new(north, east, s.height) });
        last = *s;
    }
    north += last.x_speed.mps() * dt;
    east += last.y_speed.mps() * dt;
    let end = PathPoint { t: last.t + dt, position: Position::new(north, east, last.height) };
    Ok(Path { points, end })
}

/// A record's telemetry and wind series in reverse order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedSeries {
    pub telemetry: Vec<TelemetrySample>,
    pub wind: Vec<WindSample>,
}

impl ReversedSeries {
    pub fn len(&self) -> usize {
        self.telemetry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.telemetry.is_empty()
    }
}

pub fn reverse_series(record: &FlightRecord) -> ReversedSeries {
    ReversedSeries {
        telemetry: record.telemetry().rev().copied().collect(),
        wind: record.wind().rev().copied().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalError {
    pub x_err: f64,
    pub y_err: f64,
    pub magnitude: f64,
}

/// Displacement of the landing point from takeoff, as (north, east, norm).
pub fn arrival_error(end: (f64, f64), takeoff: (f64, f64)) -> ArrivalError {
    let x_err = end.0 - takeoff.0;
    let y_err = end.1 - takeoff.1;
    ArrivalError { x_err, y_err, magnitude: x_err.hypot(y_err) }
}

pub const PATH_COLUMNS: &str = "time_s,north_m,east_m,height_m";

/// Writes one row per path point (`time_s,north_m,east_m,height_m`).
pub fn write_path_csv<W: Write>(path: &Path, mut sink: W) -> Result<(), DeadReckonError> {
    writeln!(sink, "{PATH_COLUMNS}")?;
    for p in path.points() {
        let pos = p.position;
        writeln!(sink, "{},{},{},{}", p.t, pos.north, pos.east, pos.height)?;
    }
    Ok(())
}
