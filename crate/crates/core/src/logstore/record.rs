//! Versioned record file.
//!
//! ```text
//! # windward-record v1
//! # flight_id=<id>
//! # takeoff=<label>
//! # sample_dt=<seconds>
//! # created_at=<text>
//! time_s,x_speed_ms,y_speed_ms,height_m,yaw_deg,u_ms,v_ms
//! <rows>
//! # crc32=<8 lowercase hex digits over every preceding byte>
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so `load(save(r)) == r`
//! bit for bit. UTF-8, LF line endings.

use std::io::{Read, Write};

use super::{FlightRecord, LogError, RecordMeta, RecordSample};
use crate::frames::{normalize_angle, Speed, TelemetrySample, WindSample};

pub const RECORD_MAGIC: &str = "# windward-record v1";
pub const RECORD_COLUMNS: &str = "time_s,x_speed_ms,y_speed_ms,height_m,yaw_deg,u_ms,v_ms";
const CRC_PREFIX: &str = "# crc32=";

fn render(record: &FlightRecord) -> String {
    use std::fmt::Write as _;
    let meta = record.meta();
    let mut out = String::new();
    // Writing into a String cannot fail.
    let _ = writeln!(out, "{RECORD_MAGIC}");
    let _ = writeln!(out, "# flight_id={}", meta.flight_id);
    let _ = writeln!(out, "# takeoff={}", meta.takeoff);
    let _ = writeln!(out, "# sample_dt={}", meta.sample_dt);
    let _ = writeln!(out, "# created_at={}", meta.created_at);
    let _ = writeln!(out, "{RECORD_COLUMNS}");
    for s in record.samples() {
        let t = &s.telemetry;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.t,
            t.x_speed.mps(),
            t.y_speed.mps(),
            t.height,
            t.yaw.degrees(),
            s.wind.u,
            s.wind.v
        );
    }
    let crc = crc32fast::hash(out.as_bytes());
    let _ = writeln!(out, "{CRC_PREFIX}{crc:08x}");
    out
}

/// Writes `record` to `sink`. Empty records are rejected.
pub fn save_record<W: Write>(record: &FlightRecord, mut sink: W) -> Result<(), LogError> {
    if record.is_empty() {
        return Err(LogError::InvalidRecord("refusing to save an empty record".into()));
    }
    sink.write_all(render(record).as_bytes())?;
    Ok(())
}

pub fn load_record<R: Read>(mut source: R) -> Result<FlightRecord, LogError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    if text.is_empty() {
        return Err(LogError::EmptyInput("record file is empty".into()));
    }

    let first = text.lines().next().unwrap_or_default();
    if first != RECORD_MAGIC {
        return Err(LogError::Version(first.to_string()));
    }

    // The trailer must be the last line and cover every byte before it.
    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or(LogError::Format { line: 1, message: "missing checksum trailer".into() })?;
    let (body, trailer) = text.split_at(body_end);
    let stored = trailer
        .strip_suffix('\n')
        .and_then(|t| t.strip_prefix(CRC_PREFIX))
        .ok_or(LogError::Format {
            line: body.lines().count() + 1,
            message: "missing or malformed checksum trailer".into(),
        })?;
    let computed = format!("{:08x}", crc32fast::hash(body.as_bytes()));
    if stored != computed {
        return Err(LogError::Checksum { stored: stored.to_string(), computed });
    }

    let mut lines = body.lines().enumerate().skip(1);
    let mut meta_field = |key: &str| -> Result<String, LogError> {
        let (i, line) = lines.next().ok_or(LogError::Format {
            line: 0,
            message: format!("missing `{key}` header"),
        })?;
        line.strip_prefix("# ")
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix('='))
            .map(str::to_string)
            .ok_or(LogError::Format { line: i + 1, message: format!("expected `# {key}=`") })
    };
    let flight_id = meta_field("flight_id")?;
    let takeoff = meta_field("takeoff")?;
    let sample_dt_text = meta_field("sample_dt")?;
    let created_at = meta_field("created_at")?;
    let sample_dt = sample_dt_text.parse::<f64>().map_err(|_| LogError::Format {
        line: 4,
        message: format!("bad sample_dt {sample_dt_text:?}"),
    })?;

    match lines.next() {
        Some((_, RECORD_COLUMNS)) => {}
        Some((i, other)) => {
            return Err(LogError::Format { line: i + 1, message: format!("unexpected columns {other:?}") })
        }
        None => return Err(LogError::Format { line: 6, message: "missing column header".into() }),
    }

    let mut samples = Vec::new();
    for (i, line) in lines {
        let bad = |message: String| LogError::Format { line: i + 1, message };
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|_| bad(format!("bad number {c:?}"))))
            .collect::<Result<_, _>>()?;
        let [t, x, y, h, yaw, u, v] = cells[..] else {
            return Err(bad(format!("expected 7 fields, found {}", cells.len())));
        };
        samples.push(RecordSample {
            telemetry: TelemetrySample {
                t,
                x_speed: Speed::from_mps(x),
                y_speed: Speed::from_mps(y),
                height: h,
                yaw: normalize_angle(yaw).map_err(|e| bad(e.to_string()))?,
            },
            wind: WindSample::new(t, u, v),
        });
    }
    if samples.is_empty() {
        return Err(LogError::EmptyInput("record has no samples".into()));
    }
    FlightRecord::new(RecordMeta { flight_id, takeoff, sample_dt, created_at }, samples)
}
