use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Trim};

use super::LogError;
use crate::frames::{normalize_angle, Speed, TelemetrySample, WindSample};

pub const FLIGHT_COLUMNS: [&str; 5] = ["time_s", "xSpeed_mph", "ySpeed_mph", "height_m", "yaw_deg"];
pub const ANEMOMETER_COLUMNS: [&str; 3] = ["time_s", "u_ms", "v_ms"];

/// Column indices resolved from a header row.
struct Columns<const N: usize> {
    index: [usize; N],
}

impl<const N: usize> Columns<N> {
    fn resolve(header: &StringRecord, names: &[&str; N]) -> Result<Self, LogError> {
        if header.is_empty() || header.iter().all(str::is_empty) {
            return Err(LogError::EmptyInput("no header row".into()));
        }
        let mut index = [0; N];
        for (slot, name) in index.iter_mut().zip(names) {
            *slot = header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| LogError::MissingColumn { column: name.to_string() })?;
        }
        Ok(Columns { index })
    }

    fn parse(&self, row: &StringRecord, names: &[&str; N], line: u64) -> Result<[f64; N], LogError> {
        let mut out = [0.0; N];
        for ((value, &i), name) in out.iter_mut().zip(&self.index).zip(names) {
            let cell = row.get(i).ok_or_else(|| LogError::Row {
                line,
                message: format!("missing cell for `{name}`"),
            })?;
            *value = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| LogError::Row {
                line,
                message: format!("cannot parse `{name}` value {cell:?}"),
            })?;
        }
        Ok(out)
    }
}

fn read_rows<R: Read, const N: usize>(
    stream: R,
    names: &[&str; N],
) -> Result<Vec<(u64, [f64; N])>, LogError> {
    let mut reader = ReaderBuilder::new().trim(Trim::All).flexible(true).from_reader(stream);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let columns = Columns::resolve(&header, names)?;
    let mut rows = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, columns.parse(&row, names, line)?));
    }
    if rows.is_empty() {
        return Err(LogError::EmptyInput("no data rows after header".into()));
    }
    Ok(rows)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> LogError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(io) => LogError::Io(io),
        other => LogError::Row { line, message: format!("{other:?}") },
    }
}

/// Parses a flight log with columns `time_s,xSpeed_mph,ySpeed_mph,height_m,yaw_deg`.
///
/// Speeds are converted to m/s and yaw is normalized. Malformed rows are
/// reported with their line number, never skipped.
pub fn parse_flight_csv<R: Read>(stream: R) -> Result<Vec<TelemetrySample>, LogError> {
    read_rows(stream, &FLIGHT_COLUMNS)?
        .into_iter()
        .map(|(line, [t, x, y, h, yaw])| {
            let sample = TelemetrySample {
                t,
                x_speed: Speed::from_mph(x),
                y_speed: Speed::from_mph(y),
                height: h,
                yaw: normalize_angle(yaw).map_err(|e| LogError::Row { line, message: e.to_string() })?,
            };
            sample.validate().map_err(|e| LogError::Row { line, message: e.to_string() })?;
            Ok(sample)
        })
        .collect()
}

/// Parses an anemometer log with columns `time_s,u_ms,v_ms`.
pub fn parse_anemometer_csv<R: Read>(stream: R) -> Result<Vec<WindSample>, LogError> {
    read_rows(stream, &ANEMOMETER_COLUMNS)?
        .into_iter()
        .map(|(line, [t, u, v])| {
            let sample = WindSample::new(t, u, v);
            sample.validate().map_err(|e| LogError::Row { line, message: e.to_string() })?;
            Ok(sample)
        })
        .collect()
}

pub fn write_flight_csv<W: Write>(samples: &[TelemetrySample], mut sink: W) -> Result<(), LogError> {
    writeln!(sink, "{}", FLIGHT_COLUMNS.join(","))?;
    for s in samples {
        writeln!(
            sink,
            "{},{},{},{},{}",
            s.t,
            s.x_speed.mph(),
            s.y_speed.mph(),
            s.height,
            s.yaw.degrees()
        )?;
    }
    Ok(())
}

pub fn write_anemometer_csv<W: Write>(samples: &[WindSample], mut sink: W) -> Result<(), LogError> {
    writeln!(sink, "{}", ANEMOMETER_COLUMNS.join(","))?;
    for s in samples {
        writeln!(sink, "{},{},{}", s.t, s.u, s.v)?;
    }
    Ok(())
}
