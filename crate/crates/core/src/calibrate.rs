//! Turn raw `batch,latency_ms` measurements into a valid calibration table.

use std::path::Path;

use crate::error::{CalibrationError, Result};
use crate::latency::{CalibrationPoint, LatencyCalibration};

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub points: Vec<CalibrationPoint>,
    pub warnings: Vec<String>,
}

/// Sort by batch size, average repeated measurements of one batch size, and
/// repair latency inversions with pool-adjacent-violators (the closest
/// non-decreasing fit in least squares). Every repair is reported.
pub fn normalize(raw: &[CalibrationPoint]) -> Result<Normalized, CalibrationError> {
    if raw.is_empty() {
        return Err(CalibrationError::Empty);
    }
    for (row, p) in raw.iter().enumerate() {
        if p.batch == 0 {
            return Err(CalibrationError::ZeroBatch { row });
        }
        if !(p.latency_ms.is_finite() && p.latency_ms > 0.0) {
            return Err(CalibrationError::NonPositiveLatency {
                batch: p.batch,
                latency_ms: p.latency_ms,
            });
        }
    }
    let mut warnings = Vec::new();
    let mut sorted = raw.to_vec();
    if sorted.windows(2).any(|w| w[0].batch > w[1].batch) {
        warnings.push("rows were not sorted by batch size; sorted".to_string());
    }
    sorted.sort_by_key(|p| p.batch);

    // (batch, mean latency, weight)
    let mut merged: Vec<(u32, f64, f64)> = Vec::new();
    for p in sorted {
        match merged.last_mut() {
            Some((b, mean, w)) if *b == p.batch => {
                *mean = (*mean * *w + p.latency_ms) / (*w + 1.0);
                *w += 1.0;
            }
            _ => merged.push((p.batch, p.latency_ms, 1.0)),
        }
    }
    for &(b, mean, w) in &merged {
        if w > 1.0 {
            warnings.push(format!("batch {b}: {w} measurements averaged to {mean} ms"));
        }
    }

    // blocks of (first index, mean, weight)
    let mut blocks: Vec<(usize, f64, f64)> = Vec::new();
    for (i, &(_, mean, w)) in merged.iter().enumerate() {
        blocks.push((i, mean, w));
        while blocks.len() > 1 {
            let (_, m2, w2) = blocks[blocks.len() - 1];
            let (s1, m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1, (m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2);
        }
    }
    let mut fitted = vec![0.0; merged.len()];
    for (k, &(start, mean, _)) in blocks.iter().enumerate() {
        let end = blocks.get(k + 1).map_or(merged.len(), |b| b.0);
        fitted[start..end].fill(mean);
    }
    let points: Vec<CalibrationPoint> = merged
        .iter()
        .zip(&fitted)
        .map(|(&(batch, mean, _), &fit)| {
            if fit != mean {
                warnings.push(format!("batch {batch}: latency {mean} ms breaks monotonicity; adjusted to {fit} ms"));
            }
            CalibrationPoint::new(batch, fit)
        })
        .collect();
    Ok(Normalized { points, warnings })
}

/// Read raw measurements, normalize them and write the result. Returns the
/// repair warnings.
pub fn calibrate_file(input: &Path, output: &Path) -> Result<Vec<String>> {
    let raw = LatencyCalibration::read_points_csv(input)?;
    let n = normalize(&raw)?;
    LatencyCalibration::write_points_csv(&n.points, output)?;
    Ok(n.warnings)
}
