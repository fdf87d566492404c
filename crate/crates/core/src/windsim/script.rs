use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Line-of-sight radius limit for scripted flights, metres.
pub const DEFAULT_MAX_RADIUS: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YawPolicy {
    /// Nose points along the commanded velocity; heading is held while
    /// hovering.
    #[default]
    FaceVelocity,
    /// Constant heading in degrees.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    /// Commanded true-frame velocity `[north, east]`, m/s.
    pub velocity: [f64; 2],
    pub duration: f64,
    pub height: f64,
    #[serde(default)]
    pub yaw: YawPolicy,
}

impl Leg {
    pub fn new(north: f64, east: f64, duration: f64, height: f64) -> Self {
        Leg { velocity: [north, east], duration, height, yaw: YawPolicy::FaceVelocity }
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightScript {
    pub legs: Vec<Leg>,
    #[serde(default = "default_radius")]
    pub max_radius: f64,
}

fn default_radius() -> f64 {
    DEFAULT_MAX_RADIUS
}

impl FlightScript {
    pub fn new(legs: Vec<Leg>) -> Self {
        FlightScript { legs, max_radius: DEFAULT_MAX_RADIUS }
    }

    /// North, east, south, west legs of equal speed and duration.
    pub fn square(speed: f64, leg_duration: f64, height: f64) -> Self {
        FlightScript::new(vec![
            Leg::new(speed, 0.0, leg_duration, height),
            Leg::new(0.0, speed, leg_duration, height),
            Leg::new(-speed, 0.0, leg_duration, height),
            Leg::new(0.0, -speed, leg_duration, height),
        ])
    }

    /// A random multi-leg outbound flight that stays inside `max_radius`.
    ///
    /// Leg durations are whole multiples of `dt`.
    pub fn random(seed: u64, legs: usize, max_speed: f64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = 0.9 * DEFAULT_MAX_RADIUS;
        let (mut north, mut east) = (0.0f64, 0.0f64);
        let mut out = Vec::with_capacity(legs);
        for _ in 0..legs {
            let speed = rng.random_range(0.3..=0.9) * max_speed;
            let ticks: u32 = rng.random_range(15..=75);
            let duration = f64::from(ticks) * dt;
            let height = rng.random_range(10.0..=60.0);
            let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
            for _ in 0..16 {
                let (n, e) = (north + speed * duration * heading.cos(), east + speed * duration * heading.sin());
                if n.hypot(e) <= limit {
                    break;
                }
                heading = rng.random_range(0.0..std::f64::consts::TAU);
            }
            let (n, e) = (north + speed * duration * heading.cos(), east + speed * duration * heading.sin());
            if n.hypot(e) > limit {
                // Head straight back toward takeoff.
                heading = (-east).atan2(-north);
            }
            let leg = Leg::new(speed * heading.cos(), speed * heading.sin(), duration, height);
            north += leg.velocity[0] * duration;
            east += leg.velocity[1] * duration;
            out.push(leg);
        }
        FlightScript::new(out)
    }

    /// Checks durations, the speed cap, and the radius limit. Each leg is a
    /// straight segment, so its farthest point from takeoff is an endpoint.
    pub fn validate(&self, max_speed: f64) -> Result<(), SimError> {
        if self.legs.is_empty() {
            return Err(SimError::Config("flight script has no legs".into()));
        }
        let (mut north, mut east) = (0.0f64, 0.0f64);
        for (i, leg) in self.legs.iter().enumerate() {
            if !(leg.duration.is_finite() && leg.duration > 0.0) {
                return Err(SimError::Config(format!("leg {i}: duration must be positive")));
            }
            if !(leg.height.is_finite() && leg.height >= 0.0) {
                return Err(SimError::Config(format!("leg {i}: height must be ≥ 0")));
            }
            if !leg.speed().is_finite() || leg.speed() > max_speed {
                return Err(SimError::Config(format!(
                    "leg {i}: commanded speed {} exceeds the {max_speed} m/s cap",
                    leg.speed()
                )));
            }
            if let YawPolicy::Fixed(d) = leg.yaw {
                if !d.is_finite() {
                    return Err(SimError::Config(format!("leg {i}: yaw is not finite")));
                }
            }
            north += leg.velocity[0] * leg.duration;
            east += leg.velocity[1] * leg.duration;
            if north.hypot(east) > self.max_radius {
                return Err(SimError::Config(format!(
                    "leg {i} ends {:.1} m from takeoff, beyond the {} m radius",
                    north.hypot(east),
                    self.max_radius
                )));
            }
        }
        Ok(())
    }

    /// Number of whole ticks each leg spans at `dt`.
    pub fn ticks(&self, dt: f64) -> Vec<usize> {
        self.legs.iter().map(|l| ((l.duration / dt).round() as usize).max(1)).collect()
    }
}
