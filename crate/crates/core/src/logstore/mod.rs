//! Flight and anemometer logs: CSV ingestion, time alignment, and the
//! versioned on-disk record format.

mod align;
mod csvlog;
mod record;

pub use align::align;
pub use csvlog::{
    parse_anemometer_csv, parse_flight_csv, write_anemometer_csv, write_flight_csv,
    ANEMOMETER_COLUMNS, FLIGHT_COLUMNS,
};
pub use record::{load_record, save_record, RECORD_COLUMNS, RECORD_MAGIC};

use thiserror::Error;

use crate::frames::{FrameError, TelemetrySample, WindSample};

/// Default log grid spacing in seconds.
pub const DEFAULT_SAMPLE_DT: f64 = 0.2;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("unsupported record version: {0}")]
    Version(String),
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },
    #[error("record format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub flight_id: String,
    /// Free-form label for the takeoff position.
    pub takeoff: String,
    pub sample_dt: f64,
    pub created_at: String,
}

impl RecordMeta {
    pub fn new(flight_id: impl Into<String>, sample_dt: f64) -> Self {
        RecordMeta {
            flight_id: flight_id.into(),
            takeoff: "origin".to_string(),
            sample_dt,
            created_at: "unknown".to_string(),
        }
    }
}

impl Default for RecordMeta {
    fn default() -> Self {
        RecordMeta::new("flight", DEFAULT_SAMPLE_DT)
    }
}

/// One aligned grid tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSample {
    pub telemetry: TelemetrySample,
    pub wind: WindSample,
}

/// Telemetry and wind aligned on a uniform time grid.
///
/// Immutable once built; every constructor checks that timestamps are
/// strictly increasing with spacing `meta.sample_dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightRecord {
    meta: RecordMeta,
    samples: Vec<RecordSample>,
}

fn grid_tolerance(t: f64) -> f64 {
    1e-9 * (1.0 + t.abs())
}

impl FlightRecord {
    pub fn new(meta: RecordMeta, samples: Vec<RecordSample>) -> Result<Self, LogError> {
        let dt = meta.sample_dt;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(LogError::InvalidRecord(format!("sample_dt must be positive, got {dt}")));
        }
        for field in [&meta.flight_id, &meta.takeoff, &meta.created_at] {
            if field.contains(['\n', '\r']) {
                return Err(LogError::InvalidRecord("metadata may not contain line breaks".into()));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            s.telemetry.validate()?;
            s.wind.validate()?;
            if s.telemetry.t != s.wind.t {
                return Err(LogError::InvalidRecord(format!(
                    "sample {i}: telemetry t={} but wind t={}",
                    s.telemetry.t, s.wind.t
                )));
            }
            if i > 0 {
                let prev = samples[i - 1].telemetry.t;
                let step = s.telemetry.t - prev;
                if (step - dt).abs() > grid_tolerance(s.telemetry.t) {
                    return Err(LogError::InvalidRecord(format!(
                        "sample {i}: spacing {step} differs from sample_dt {dt}"
                    )));
                }
            }
        }
        Ok(FlightRecord { meta, samples })
    }

    pub fn meta(&self) -> &RecordMeta {
        &self.meta
    }

    pub fn sample_dt(&self) -> f64 {
        self.meta.sample_dt
    }

    pub fn samples(&self) -> &[RecordSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn telemetry(&self) -> impl DoubleEndedIterator<Item = &TelemetrySample> + ExactSizeIterator + '_ {
        self.samples.iter().map(|s| &s.telemetry)
    }

    pub fn wind(&self) -> impl DoubleEndedIterator<Item = &WindSample> + ExactSizeIterator + '_ {
        self.samples.iter().map(|s| &s.wind)
    }

    /// Same record with the wind series replaced. Timestamps are kept from
    /// the telemetry grid.
    pub fn with_wind(&self, wind: &[WindSample]) -> Result<Self, LogError> {
        if wind.len() != self.samples.len() {
            return Err(LogError::InvalidRecord(format!(
                "wind series has {} samples, record has {}",
                wind.len(),
                self.samples.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(wind)
            .map(|(s, w)| RecordSample {
                telemetry: s.telemetry,
                wind: WindSample::new(s.telemetry.t, w.u, w.v),
            })
            .collect();
        FlightRecord::new(self.meta.clone(), samples)
    }

    pub fn with_meta(mut self, meta: RecordMeta) -> Result<Self, LogError> {
        let samples = std::mem::take(&mut self.samples);
        FlightRecord::new(meta, samples)
    }
}
