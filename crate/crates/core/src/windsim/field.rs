use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Default cap on sampled wind speed, m/s.
pub const DEFAULT_WIND_CAP: f64 = 25.0;

/// True-frame wind velocity (the direction the air moves), m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindVector {
    pub north: f64,
    pub east: f64,
}

impl WindVector {
    pub const ZERO: WindVector = WindVector { north: 0.0, east: 0.0 };

    pub fn new(north: f64, east: f64) -> Self {
        WindVector { north, east }
    }

    pub fn magnitude(&self) -> f64 {
        self.north.hypot(self.east)
    }

    pub fn scaled(self, k: f64) -> Self {
        WindVector::new(self.north * k, self.east * k)
    }

    fn capped(self, cap: f64) -> Self {
        let m = self.magnitude();
        if m > cap && m > 0.0 {
            self.scaled(cap / m)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum WindModel {
    /// The same vector everywhere and always.
    Constant { mean: WindVector },
    /// `mean` plus a gust that is redrawn every `period` seconds, with
    /// uniform direction and magnitude uniform in `[0, amplitude]`.
    PiecewiseGust { mean: WindVector, amplitude: f64, period: f64 },
    /// Per-axis discretized mean-reverting process
    /// `x[k+1] = x[k] + θ(μ − x[k])·dt + σ·√dt·ξ[k]`, `ξ ~ N(0, 1)`.
    MeanReverting {
        mean: WindVector,
        initial: WindVector,
        reversion: f64,
        noise: f64,
        dt: f64,
    },
}

/// A seeded, deterministic wind field.
///
/// Randomness comes from ChaCha8 (`rand_chacha`) seeded with `seed` via
/// `seed_from_u64`; gust segment `k` uses stream `k` of that generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindField {
    #[serde(flatten)]
    pub model: WindModel,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cap() -> f64 {
    DEFAULT_WIND_CAP
}

impl WindField {
    pub fn constant(north: f64, east: f64) -> Self {
        WindField {
            model: WindModel::Constant { mean: WindVector::new(north, east) },
            cap: DEFAULT_WIND_CAP,
            seed: 0,
        }
    }

    pub fn calm() -> Self {
        WindField::constant(0.0, 0.0)
    }

    pub fn mean_reverting(mean: WindVector, reversion: f64, noise: f64, dt: f64, seed: u64) -> Self {
        WindField {
            model: WindModel::MeanReverting { mean, initial: mean, reversion, noise, dt },
            cap: DEFAULT_WIND_CAP,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cap.is_finite() && self.cap >= 0.0) {
            return Err(format!("wind cap must be non-negative, got {}", self.cap));
        }
        let finite = |v: &WindVector| v.north.is_finite() && v.east.is_finite();
        match &self.model {
            WindModel::Constant { mean } if !finite(mean) => Err("constant wind must be finite".into()),
            WindModel::PiecewiseGust { mean, amplitude, period } => {
                if !finite(mean) || !(amplitude.is_finite() && *amplitude >= 0.0) {
                    Err("gust mean/amplitude must be finite and amplitude ≥ 0".into())
                } else if !(period.is_finite() && *period > 0.0) {
                    Err(format!("gust period must be positive, got {period}"))
                } else {
                    Ok(())
                }
            }
            WindModel::MeanReverting { mean, initial, reversion, noise, dt } => {
                if !finite(mean) || !finite(initial) {
                    Err("mean-reverting mean/initial must be finite".into())
                } else if !(dt.is_finite() && *dt > 0.0) {
                    Err(format!("mean-reverting dt must be positive, got {dt}"))
                } else if !(reversion.is_finite() && *reversion >= 0.0 && noise.is_finite() && *noise >= 0.0) {
                    Err("reversion and noise must be finite and non-negative".into())
                } else {
                    Ok(())
                }
            }
            WindModel::Constant { .. } => Ok(()),
        }
    }
}

/// Wind at time `t`, a pure function of `(field, t)`.
///
/// The mean-reverting model replays its recurrence from `t = 0` on every
/// call; use [`WindSampler`] for long monotone sweeps.
pub fn sample_wind(field: &WindField, t: f64) -> WindVector {
    WindSampler::new(field).sample(t)
}

/// Incremental sampler over a [`WindField`]. Gives the same values as
/// [`sample_wind`] but amortizes the mean-reverting recurrence when queried
/// at non-decreasing times.
#[derive(Debug, Clone)]
pub struct WindSampler {
    field: WindField,
    rng: ChaCha8Rng,
    step: u64,
    state: WindVector,
}

impl WindSampler {
    pub fn new(field: &WindField) -> Self {
        let state = match &field.model {
            WindModel::MeanReverting { initial, .. } => *initial,
            _ => WindVector::ZERO,
        };
        WindSampler { field: field.clone(), rng: ChaCha8Rng::seed_from_u64(field.seed), step: 0, state }
    }

    pub fn field(&self) -> &WindField {
        &self.field
    }

    pub fn sample(&mut self, t: f64) -> WindVector {
        let t = t.max(0.0);
        let raw = match self.field.model.clone() {
            WindModel::Constant { mean } => mean,
            WindModel::PiecewiseGust { mean, amplitude, period } => {
                let segment = (t / period).floor() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(self.field.seed);
                rng.set_stream(segment);
                let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let size: f64 = rng.random_range(0.0..=1.0) * amplitude;
                WindVector::new(mean.north + size * heading.cos(), mean.east + size * heading.sin())
            }
            WindModel::MeanReverting { mean, reversion, noise, dt, .. } => {
                let target = (t / dt + 1e-9).floor() as u64;
                if target < self.step {
                    *self = WindSampler::new(&self.field);
                }
                let kick = noise * dt.sqrt();
                while self.step < target {
                    let xi_n: f64 = self.rng.sample(StandardNormal);
                    let xi_e: f64 = self.rng.sample(StandardNormal);
                    let s = &mut self.state;
                    s.north += reversion * (mean.north - s.north) * dt + kick * xi_n;
                    s.east += reversion * (mean.east - s.east) * dt + kick * xi_e;
                    self.step += 1;
                }
                self.state
            }
        };
        raw.capped(self.field.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_everywhere() {
        let f = WindField::constant(2.0, 0.0);
        for t in [0.0, 0.2, 17.3, 1e4] {
            assert_eq!(sample_wind(&f, t), WindVector::new(2.0, 0.0));
        }
    }

    #[test]
    fn same_seed_same_value() {
        let f = WindField::mean_reverting(WindVector::new(3.0, -1.0), 0.5, 1.2, 0.2, 99);
        assert_eq!(sample_wind(&f, 12.4), sample_wind(&f, 12.4));
        let g = WindField { model: WindModel::PiecewiseGust { mean: WindVector::ZERO, amplitude: 4.0, period: 5.0 }, cap: 25.0, seed: 7 };
        assert_eq!(sample_wind(&g, 3.0), sample_wind(&g, 4.9));
        assert_ne!(sample_wind(&g, 3.0), sample_wind(&g, 5.1));
    }

    #[test]
    fn noiseless_reversion_follows_closed_form() {
        let mean = WindVector::new(4.0, -2.0);
        let initial = WindVector::new(-6.0, 8.0);
        let (theta, dt) = (0.3, 0.2);
        let f = WindField {
            model: WindModel::MeanReverting { mean, initial, reversion: theta, noise: 0.0, dt },
            cap: 100.0,
            seed: 1,
        };
        let mut prev_gap = f64::INFINITY;
        for k in 0..200 {
            let w = sample_wind(&f, k as f64 * dt);
            let decay = (1.0 - theta * dt).powi(k);
            assert!((w.north - (mean.north + decay * (initial.north - mean.north))).abs() < 1e-9);
            assert!((w.east - (mean.east + decay * (initial.east - mean.east))).abs() < 1e-9);
            let gap = (w.north - mean.north).hypot(w.east - mean.east);
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn sampler_matches_pure_function_and_rewinds() {
        let f = WindField::mean_reverting(WindVector::new(3.0, 1.0), 0.4, 2.0, 0.2, 5);
        let mut s = WindSampler::new(&f);
        let forward: Vec<_> = (0..50).map(|k| s.sample(k as f64 * 0.2)).collect();
        for (k, w) in forward.iter().enumerate() {
            assert_eq!(*w, sample_wind(&f, k as f64 * 0.2));
        }
        assert_eq!(s.sample(1.0), forward[5]);
    }

    proptest! {
        #[test]
        fn magnitude_is_capped(seed in any::<u64>(), t in 0.0..200.0f64) {
            let f = WindField {
                model: WindModel::MeanReverting { mean: WindVector::new(20.0, 15.0), initial: WindVector::ZERO, reversion: 0.5, noise: 10.0, dt: 0.2 },
                cap: DEFAULT_WIND_CAP,
                seed,
            };
            prop_assert!(sample_wind(&f, t).magnitude() <= DEFAULT_WIND_CAP + 1e-12);
            let g = WindField { model: WindModel::PiecewiseGust { mean: WindVector::new(20.0, 0.0), amplitude: 30.0, period: 2.0 }, cap: 25.0, seed };
            prop_assert!(sample_wind(&g, t).magnitude() <= DEFAULT_WIND_CAP + 1e-12);
        }
    }
}
