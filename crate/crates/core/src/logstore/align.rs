use super::{FlightRecord, LogError, RecordMeta, RecordSample};
use crate::frames::{TelemetrySample, WindSample};

const EPS: f64 = 1e-9;

fn check_monotone(name: &str, times: &[f64]) -> Result<(), LogError> {
    if times.is_empty() {
        return Err(LogError::Alignment(format!("{name} series is empty")));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(LogError::Alignment(format!(
            "{name} timestamps not increasing at index {} ({} -> {})",
            i + 1,
            times[i],
            times[i + 1]
        )));
    }
    Ok(())
}

/// Nearest sample per grid index over `k_first..=k_last`.
///
/// Each sample belongs to the grid point `floor(t/dt + 1/2)`, i.e. the
/// half-open window `[g - dt/2, g + dt/2)`. The buckets partition the time
/// axis, so a sample is never shared between grid points. Within a bucket
/// the closest sample wins; ties go to the earlier one.
fn bucket_nearest(times: &[f64], dt: f64, k_first: i64, k_last: i64) -> Vec<Option<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; (k_last - k_first + 1) as usize];
    for (i, &t) in times.iter().enumerate() {
        let k = (t / dt + 0.5).floor() as i64;
        if k < k_first || k > k_last {
            continue;
        }
        let slot = &mut best[(k - k_first) as usize];
        let g = k as f64 * dt;
        match slot {
            Some(j) if (times[*j] - g).abs() <= (t - g).abs() => {}
            _ => *slot = Some(i),
        }
    }
    best
}

/// Resamples telemetry and wind onto the grid `{k·dt}` by nearest neighbour
/// and zips them into a [`FlightRecord`].
///
/// Only grid points inside the overlap of both series are kept. Each grid
/// point owns a disjoint window of width `dt`, so no input sample is used
/// twice and the output is never longer than either input. A grid point
/// with no sample in its window is an alignment gap.
pub fn align(
    telemetry: &[TelemetrySample],
    wind: &[WindSample],
    sample_dt: f64,
) -> Result<FlightRecord, LogError> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(LogError::Alignment(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let tel_t: Vec<f64> = telemetry.iter().map(|s| s.t).collect();
    let wind_t: Vec<f64> = wind.iter().map(|s| s.t).collect();
    check_monotone("telemetry", &tel_t)?;
    check_monotone("wind", &wind_t)?;

    let lo = tel_t[0].max(wind_t[0]);
    let hi = tel_t[tel_t.len() - 1].min(wind_t[wind_t.len() - 1]);
    if lo > hi {
        return Err(LogError::Alignment(format!(
            "no temporal overlap (telemetry {}..{}, wind {}..{})",
            tel_t[0],
            tel_t[tel_t.len() - 1],
            wind_t[0],
            wind_t[wind_t.len() - 1]
        )));
    }
    let k_first = (lo / sample_dt - EPS).ceil() as i64;
    let k_last = (hi / sample_dt + EPS).floor() as i64;
    if k_first > k_last {
        return Err(LogError::Alignment(format!(
            "overlap {lo}..{hi} contains no grid point at spacing {sample_dt}"
        )));
    }

    let tel_best = bucket_nearest(&tel_t, sample_dt, k_first, k_last);
    let wind_best = bucket_nearest(&wind_t, sample_dt, k_first, k_last);
    let mut samples = Vec::with_capacity(tel_best.len());
    for (k, (ti, wi)) in (k_first..=k_last).zip(tel_best.into_iter().zip(wind_best)) {
        let g = k as f64 * sample_dt;
        let ti = ti.ok_or_else(|| LogError::Alignment(format!("telemetry gap at grid time {g}")))?;
        let wi = wi.ok_or_else(|| LogError::Alignment(format!("wind gap at grid time {g}")))?;
        let mut tel = telemetry[ti];
        tel.t = g;
        let w = wind[wi];
        samples.push(RecordSample { telemetry: tel, wind: WindSample::new(g, w.u, w.v) });
    }
    FlightRecord::new(RecordMeta::new("aligned", sample_dt), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{Angle, Speed};

    fn tel(t: f64, x: f64) -> TelemetrySample {
        TelemetrySample {
            t,
            x_speed: Speed::from_mps(x),
            y_speed: Speed::ZERO,
            height: 10.0,
            yaw: Angle::ZERO,
        }
    }

    #[test]
    fn identical_grids_zip_one_to_one() {
        let t: Vec<_> = (0..6).map(|i| tel(f64::from(i) * 0.2, f64::from(i))).collect();
        let w: Vec<_> = (0..6).map(|i| WindSample::new(f64::from(i) * 0.2, f64::from(i), 0.0)).collect();
        let rec = align(&t, &w, 0.2).unwrap();
        assert_eq!(rec.len(), 6);
        for (i, s) in rec.samples().iter().enumerate() {
            assert_eq!(s.telemetry.x_speed.mps(), i as f64);
            assert_eq!(s.wind.u, i as f64);
        }
    }

    #[test]
    fn ten_hz_wind_on_five_hz_grid_keeps_every_other_row() {
        let t: Vec<_> = (0..10).map(|i| tel(f64::from(i) * 0.2, 1.0)).collect();
        let w: Vec<_> = (0..10).map(|i| WindSample::new(f64::from(i) * 0.1, f64::from(i), 0.0)).collect();
        let rec = align(&t, &w, 0.2).unwrap();

        // Brute-force oracle: for each grid point in the overlap, scan every
        // wind row for the closest timestamp.
        let overlap_end = 0.9;
        let expected: Vec<f64> = (0..)
            .map(|k| f64::from(k) * 0.2)
            .take_while(|g| *g <= overlap_end + 1e-9)
            .map(|g| {
                let mut best = 0;
                for (i, s) in w.iter().enumerate() {
                    if (s.t - g).abs() < (w[best].t - g).abs() {
                        best = i;
                    }
                }
                w[best].u
            })
            .collect();
        assert_eq!(expected, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let got: Vec<f64> = rec.wind().map(|s| s.u).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn disjoint_ranges_fail() {
        let t = vec![tel(0.0, 1.0), tel(0.2, 1.0)];
        let w = vec![WindSample::new(5.0, 0.0, 0.0), WindSample::new(5.2, 0.0, 0.0)];
        assert!(matches!(align(&t, &w, 0.2), Err(LogError::Alignment(_))));
    }

    #[test]
    fn gaps_and_disorder_are_reported() {
        let t = vec![tel(0.0, 1.0), tel(0.2, 1.0), tel(1.0, 1.0)];
        let w: Vec<_> = (0..6).map(|i| WindSample::new(f64::from(i) * 0.2, 0.0, 0.0)).collect();
        assert!(matches!(align(&t, &w, 0.2), Err(LogError::Alignment(m)) if m.contains("gap")));
        let t = vec![tel(0.2, 1.0), tel(0.0, 1.0)];
        assert!(align(&t, &w, 0.2).is_err());
    }

    #[test]
    fn output_never_longer_than_inputs() {
        // Half-step offset: every grid point sits on a window boundary.
        let t: Vec<_> = (0..5).map(|i| tel(0.1 + f64::from(i) * 0.2, 1.0)).collect();
        let w: Vec<_> = (0..5).map(|i| WindSample::new(0.1 + f64::from(i) * 0.2, 0.0, 0.0)).collect();
        let rec = align(&t, &w, 0.2).unwrap();
        assert!(rec.len() <= 5);
    }
}
