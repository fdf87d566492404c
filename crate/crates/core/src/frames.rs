//! Domain value types and the body-frame to true-frame wind transform.
//!
//! Conventions held throughout the crate:
//! - North/East horizontal frame; `x` is the north axis, `y` the east axis.
//! - Angles are stored in degrees in `[-180, 180)` and only converted to
//!   radians inside trigonometric evaluation.
//! - Speeds are m/s internally. MPH only appears at log ingestion.
//!
//! The anemometer is mounted with its "north" axis along the drone's nose,
//! so its `V` component is along the nose and `U` points 90° clockwise of
//! it. Rotating by the drone yaw resolves the pair into true North/East.

use std::fmt;

use thiserror::Error;

/// Exact conversion factor, m/s per mile per hour.
pub const MPS_PER_MPH: f64 = 0.44704;

/// Default sanity bound on a single anemometer component.
pub const DEFAULT_WIND_COMPONENT_LIMIT: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn ensure_finite(name: &str, value: f64) -> Result<f64, FrameError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FrameError::InvalidInput(format!("{name} is not finite ({value})")))
    }
}

/// Heading in degrees, always normalized to `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Normalizes `degrees` into `[-180, 180)`.
    pub fn from_degrees(degrees: f64) -> Result<Self, FrameError> {
        normalize_angle(degrees)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Heading of a north/east vector (0° = north, 90° = east).
    ///
    /// Returns `None` for the zero vector, which has no heading.
    pub fn of_vector(north: f64, east: f64) -> Option<Self> {
        if north == 0.0 && east == 0.0 {
            return None;
        }
        normalize_angle(east.atan2(north).to_degrees()).ok()
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;

    fn add(self, rhs: Angle) -> Angle {
        Angle(wrap(self.0 + rhs.0))
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;

    fn sub(self, rhs: Angle) -> Angle {
        Angle(wrap(self.0 - rhs.0))
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;

    fn neg(self) -> Angle {
        Angle(wrap(-self.0))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.0)
    }
}

fn wrap(degrees: f64) -> f64 {
    let mut d = degrees.rem_euclid(360.0);
    // rem_euclid may round up to exactly 360 for tiny negative inputs.
    if d >= 180.0 {
        d -= 360.0;
    }
    if d < -180.0 {
        d = -180.0;
    }
    d
}

/// Wraps a finite angle in degrees into `[-180, 180)`.
pub fn normalize_angle(degrees: f64) -> Result<Angle, FrameError> {
    let degrees = ensure_finite("angle", degrees)?;
    Ok(Angle(wrap(degrees)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedUnit {
    Mph,
    MetersPerSecond,
}

/// A scalar speed, stored in m/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Speed(f64);

impl Speed {
    pub const ZERO: Speed = Speed(0.0);

    pub fn new(value: f64, unit: SpeedUnit) -> Self {
        match unit {
            SpeedUnit::Mph => Speed(value * MPS_PER_MPH),
            SpeedUnit::MetersPerSecond => Speed(value),
        }
    }

    pub fn from_mps(value: f64) -> Self {
        Speed(value)
    }

    pub fn from_mph(value: f64) -> Self {
        Speed::new(value, SpeedUnit::Mph)
    }

    pub fn mps(self) -> f64 {
        self.0
    }

    pub fn mph(self) -> f64 {
        self.0 / MPS_PER_MPH
    }

    pub fn value_in(self, unit: SpeedUnit) -> f64 {
        match unit {
            SpeedUnit::Mph => self.mph(),
            SpeedUnit::MetersPerSecond => self.mps(),
        }
    }
}

/// One drone state row from the flight log.
///
/// `x_speed` is the ground speed along true North (positive northbound) and
/// `y_speed` along true East (positive eastbound).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub t: f64,
    pub x_speed: Speed,
    pub y_speed: Speed,
    pub height: f64,
    pub yaw: Angle,
}

impl TelemetrySample {
    pub fn validate(&self) -> Result<(), FrameError> {
        ensure_finite("t", self.t)?;
        ensure_finite("x_speed", self.x_speed.mps())?;
        ensure_finite("y_speed", self.y_speed.mps())?;
        ensure_finite("height", self.height)?;
        if self.t < 0.0 {
            return Err(FrameError::InvalidInput(format!("negative time {}", self.t)));
        }
        if self.height < 0.0 {
            return Err(FrameError::InvalidInput(format!(
                "negative height {} at t={}",
                self.height, self.t
            )));
        }
        Ok(())
    }
}

/// One anemometer row in the body frame.
///
/// `v` lies along the nose, `u` is 90° clockwise of the nose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl WindSample {
    pub fn new(t: f64, u: f64, v: f64) -> Self {
        WindSample { t, u, v }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        self.validate_with_limit(DEFAULT_WIND_COMPONENT_LIMIT)
    }

    pub fn validate_with_limit(&self, limit: f64) -> Result<(), FrameError> {
        ensure_finite("t", self.t)?;
        ensure_finite("u", self.u)?;
        ensure_finite("v", self.v)?;
        if self.u.abs() > limit || self.v.abs() > limit {
            return Err(FrameError::InvalidInput(format!(
                "wind component exceeds {limit} m/s (u={}, v={})",
                self.u, self.v
            )));
        }
        Ok(())
    }

    pub fn magnitude(&self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// Wind resolved onto true North/East.
///
/// For anemometer logs, a positive `north_r` means a component blowing from
/// north to south. Everything downstream (ratios in the weighted planner,
/// regression slopes) only needs the sign to be used consistently.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrueWind {
    pub north_r: f64,
    pub east_r: f64,
}

impl TrueWind {
    pub fn new(north_r: f64, east_r: f64) -> Self {
        TrueWind { north_r, east_r }
    }

    pub fn magnitude(&self) -> f64 {
        self.north_r.hypot(self.east_r)
    }

    pub fn scaled(self, k: f64) -> Self {
        TrueWind::new(self.north_r * k, self.east_r * k)
    }
}

/// Wind magnitude `sqrt(u² + v²)`.
pub fn wind_magnitude(u: f64, v: f64) -> Result<f64, FrameError> {
    ensure_finite("u", u)?;
    ensure_finite("v", v)?;
    Ok(u.hypot(v))
}

/// Resolves a body-frame anemometer reading onto true North/East.
///
/// With yaw γ and the east axis offset α = γ − 90°, the nose component
/// contributes `(cos γ·V, sin γ·V)` and the lateral component
/// `(−cos α·U, −sin α·U)`; summing gives
/// `north_r = cos γ·v − sin γ·u`, `east_r = sin γ·v + cos γ·u`.
/// The same expression holds on both halves of the yaw range.
pub fn to_true_north_east(wind: &WindSample, yaw: Angle) -> Result<TrueWind, FrameError> {
    ensure_finite("u", wind.u)?;
    ensure_finite("v", wind.v)?;
    ensure_finite("yaw", yaw.degrees())?;
    Ok(rotate_to_true(wind.u, wind.v, yaw))
}

pub(crate) fn rotate_to_true(u: f64, v: f64, yaw: Angle) -> TrueWind {
    let (sin, cos) = yaw.radians().sin_cos();
    TrueWind {
        north_r: cos * v - sin * u,
        east_r: sin * v + cos * u,
    }
}

/// Inverse of [`to_true_north_east`]: what an anemometer on a drone with the
/// given yaw reads for a true-frame wind. Returns `(u, v)`.
pub fn to_body(wind: TrueWind, yaw: Angle) -> (f64, f64) {
    let (sin, cos) = yaw.radians().sin_cos();
    let v = cos * wind.north_r + sin * wind.east_r;
    let u = -sin * wind.north_r + cos * wind.east_r;
    (u, v)
}
