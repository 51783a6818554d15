//! Batch-latency model.
//!
//! A [`LatencyCalibration`] is a table of measured `(batch size, per-iteration
//! latency)` points plus an affine prefill cost. [`LatencyModel`] answers
//! `l(b)` queries by piecewise-linear interpolation over that table. Every
//! scheduler and the period estimator go through the same model, and the
//! simulator works on the nanosecond-rounded value from
//! [`LatencyModel::decode_nanos`] so that sums of iteration latencies are exact.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, Error, Result};
use crate::time::{ms_to_nanos, Nanos};

/// One measured point of the batch-latency curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub batch: u32,
    pub latency_ms: f64,
}

impl CalibrationPoint {
    pub const fn new(batch: u32, latency_ms: f64) -> Self {
        Self { batch, latency_ms }
    }
}

/// Default prefill constant cost (ms).
pub const DEFAULT_PREFILL_BASE_MS: f64 = 8.0;
/// Default prefill cost per prompt token (ms).
pub const DEFAULT_PREFILL_PER_TOKEN_MS: f64 = 0.04;

/// Synthetic reference curve. Only `l(9) = 128.59 ms` is a measured anchor;
/// the rest is shaped to keep `l(8) < 100 ms < l(9)`, a flat tail beyond 9,
/// and `l(1)` low enough that a 20 tok/s task fits in a one-second period.
pub const REFERENCE_POINTS: [CalibrationPoint; 8] = [
    CalibrationPoint::new(1, 24.0),
    CalibrationPoint::new(2, 28.0),
    CalibrationPoint::new(4, 36.0),
    CalibrationPoint::new(6, 50.0),
    CalibrationPoint::new(8, 96.0),
    CalibrationPoint::new(9, 128.59),
    CalibrationPoint::new(16, 135.0),
    CalibrationPoint::new(32, 150.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyCalibration {
    pub points: Vec<CalibrationPoint>,
    #[serde(default = "default_prefill_per_token")]
    pub prefill_per_token_ms: f64,
    #[serde(default = "default_prefill_base")]
    pub prefill_base_ms: f64,
}

fn default_prefill_per_token() -> f64 {
    DEFAULT_PREFILL_PER_TOKEN_MS
}

fn default_prefill_base() -> f64 {
    DEFAULT_PREFILL_BASE_MS
}

impl LatencyCalibration {
    pub fn new(points: Vec<CalibrationPoint>, prefill_base_ms: f64, prefill_per_token_ms: f64) -> Self {
        Self {
            points,
            prefill_per_token_ms,
            prefill_base_ms,
        }
    }

    /// The shipped reference calibration with default prefill parameters.
    pub fn reference() -> Self {
        Self::new(
            REFERENCE_POINTS.to_vec(),
            DEFAULT_PREFILL_BASE_MS,
            DEFAULT_PREFILL_PER_TOKEN_MS,
        )
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.points.is_empty() {
            return Err(CalibrationError::Empty);
        }
        if !(self.prefill_base_ms.is_finite()
            && self.prefill_per_token_ms.is_finite()
            && self.prefill_base_ms >= 0.0
            && self.prefill_per_token_ms >= 0.0)
        {
            return Err(CalibrationError::BadPrefill);
        }
        for (row, p) in self.points.iter().enumerate() {
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
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.batch <= a.batch {
                return Err(CalibrationError::NonIncreasingBatch {
                    prev: a.batch,
                    next: b.batch,
                });
            }
            if b.latency_ms < a.latency_ms {
                return Err(CalibrationError::NonMonotone {
                    prev_batch: a.batch,
                    prev_ms: a.latency_ms,
                    batch: b.batch,
                    latency_ms: b.latency_ms,
                });
            }
        }
        Ok(())
    }

    /// Replace (or insert) the latency at individual batch sizes.
    pub fn with_overrides(mut self, overrides: &[CalibrationPoint]) -> Self {
        for o in overrides {
            match self.points.binary_search_by_key(&o.batch, |p| p.batch) {
                Ok(i) => self.points[i].latency_ms = o.latency_ms,
                Err(i) => self.points.insert(i, *o),
            }
        }
        self
    }

    /// Read `batch,latency_ms` rows. Rows are taken as-is; use
    /// [`crate::calibrate::normalize`] to sort and repair raw measurements.
    pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<CalibrationPoint>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        parse_points_csv(file, &path.display().to_string())
    }

    pub fn write_points_csv(points: &[CalibrationPoint], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("batch,latency_ms\n");
        for p in points {
            out.push_str(&format!("{},{}\n", p.batch, p.latency_ms));
        }
        crate::io::write_atomic(path, out.as_bytes())
    }
}

/// Parse calibration rows from any reader. `source` names the input in errors.
pub fn parse_points_csv<R: Read>(reader: R, source: &str) -> Result<Vec<CalibrationPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: source.to_string(),
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "batch" || &headers[1] != "latency_ms" {
        return Err(Error::Csv {
            path: source.to_string(),
            message: format!("expected header `batch,latency_ms`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let bad = |msg: String| Error::Csv {
            path: source.to_string(),
            message: format!("row at line {line}: {msg}"),
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let batch: u32 = rec[0]
            .parse()
            .map_err(|_| bad(format!("batch `{}` is not a positive integer", &rec[0])))?;
        let latency_ms: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("latency_ms `{}` is not a number", &rec[1])))?;
        if batch == 0 {
            return Err(bad("batch must be at least 1".into()));
        }
        if !latency_ms.is_finite() || latency_ms <= 0.0 {
            return Err(bad(format!("latency_ms `{}` must be positive", &rec[1])));
        }
        points.push(CalibrationPoint { batch, latency_ms });
    }
    Ok(points)
}

/// Validated, immutable batch-latency function.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    cal: LatencyCalibration,
}

impl LatencyModel {
    pub fn new(cal: LatencyCalibration) -> Result<Self, CalibrationError> {
        cal.validate()?;
        Ok(Self { cal })
    }

    pub fn reference() -> Self {
        Self::new(LatencyCalibration::reference()).expect("reference calibration is valid")
    }

    pub fn calibration(&self) -> &LatencyCalibration {
        &self.cal
    }

    /// `l(b)` in milliseconds. `b = 0` is treated as `b = 1`.
    pub fn decode_latency(&self, b: u32) -> f64 {
        let pts = &self.cal.points;
        let b = b.max(1);
        let first = pts[0];
        if b <= first.batch {
            return first.latency_ms;
        }
        match pts.binary_search_by_key(&b, |p| p.batch) {
            Ok(i) => pts[i].latency_ms,
            Err(i) if i < pts.len() => interpolate(pts[i - 1], pts[i], b),
            Err(_) => {
                let n = pts.len();
                if n == 1 {
                    pts[0].latency_ms
                } else {
                    interpolate(pts[n - 2], pts[n - 1], b)
                }
            }
        }
    }

    /// `l(b)` rounded to whole nanoseconds; the unit of simulated time.
    pub fn decode_nanos(&self, b: u32) -> Nanos {
        ms_to_nanos(self.decode_latency(b))
    }

    /// `prefill_base + prefill_per_token * prompt_tokens`, in milliseconds.
    pub fn prefill_latency(&self, prompt_tokens: u64) -> f64 {
        self.cal.prefill_base_ms + self.cal.prefill_per_token_ms * prompt_tokens as f64
    }

    /// One blocking prefill step over a group admitted together: the base
    /// cost is paid once and the per-token cost over the summed prompts.
    pub fn prefill_nanos(&self, total_prompt_tokens: u64) -> Nanos {
        ms_to_nanos(self.prefill_latency(total_prompt_tokens))
    }

    /// Maximum throughput `b / l(b)` in tokens per second.
    pub fn max_throughput(&self, b: u32) -> f64 {
        let b = b.max(1);
        b as f64 / (self.decode_latency(b) / 1000.0)
    }
}

fn interpolate(lo: CalibrationPoint, hi: CalibrationPoint, b: u32) -> f64 {
    let t = (b - lo.batch) as f64 / (hi.batch - lo.batch) as f64;
    let v = lo.latency_ms + t * (hi.latency_ms - lo.latency_ms);
    // guard against rounding pushing the value below the left end
    v.max(lo.latency_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(points: &[(u32, f64)]) -> LatencyModel {
        let pts = points
            .iter()
            .map(|&(b, l)| CalibrationPoint::new(b, l))
            .collect();
        LatencyModel::new(LatencyCalibration::new(pts, 20.0, 0.5)).unwrap()
    }

    #[test]
    fn table_anchor_is_exact() {
        let m = model(&[(9, 128.59)]);
        assert_eq!(m.decode_latency(9), 128.59);
        assert_eq!(LatencyModel::reference().decode_latency(9), 128.59);
    }

    #[test]
    fn single_point_and_midpoint() {
        assert_eq!(model(&[(1, 50.0)]).decode_latency(1), 50.0);
        assert_eq!(model(&[(1, 50.0), (9, 130.0)]).decode_latency(5), 90.0);
    }

    #[test]
    fn extrapolation() {
        let m = model(&[(2, 40.0), (4, 60.0)]);
        assert_eq!(m.decode_latency(1), 40.0);
        assert_eq!(m.decode_latency(6), 80.0);
        assert_eq!(model(&[(3, 70.0)]).decode_latency(30), 70.0);
    }

    #[test]
    fn prefill_is_affine() {
        let m = model(&[(1, 50.0)]);
        assert_eq!(m.prefill_latency(100), 70.0);
        assert_eq!(m.prefill_latency(0), 20.0);
        let off = LatencyModel::new(LatencyCalibration::new(vec![CalibrationPoint::new(1, 5.0)], 0.0, 0.0)).unwrap();
        assert_eq!(off.prefill_latency(12345), 0.0);
    }

    #[test]
    fn throughput() {
        let m = model(&[(9, 128.59)]);
        // 9 / 0.12859
        assert!((m.max_throughput(9) - 69.99). abs() < 0.01);
        assert_eq!(model(&[(1, 50.0)]).max_throughput(1), 20.0);
        let m = model(&[(1, 50.0), (2, 60.0)]);
        assert!((m.max_throughput(2) - 33.333).abs() < 1e-3);
        assert!(m.max_throughput(2) > m.max_throughput(1));
    }

    #[test]
    fn validation_errors() {
        let empty = LatencyCalibration::new(vec![], 0.0, 0.0);
        assert_eq!(LatencyModel::new(empty).unwrap_err(), CalibrationError::Empty);
        let dup = LatencyCalibration::new(
            vec![CalibrationPoint::new(2, 1.0), CalibrationPoint::new(2, 2.0)],
            0.0,
            0.0,
        );
        assert!(matches!(
            LatencyModel::new(dup),
            Err(CalibrationError::NonIncreasingBatch { .. })
        ));
        let down = LatencyCalibration::new(
            vec![CalibrationPoint::new(1, 5.0), CalibrationPoint::new(2, 4.0)],
            0.0,
            0.0,
        );
        assert!(matches!(
            LatencyModel::new(down),
            Err(CalibrationError::NonMonotone { .. })
        ));
    }

    #[test]
    fn reference_shape() {
        let m = LatencyModel::reference();
        assert!(m.decode_latency(8) < 100.0 && m.decode_latency(9) > 100.0);
        assert!(m.decode_latency(16) > 120.0);
        assert!(20.0 * m.decode_latency(1) < 1000.0);
    }

    #[test]
    fn overrides_replace_points() {
        let cal = LatencyCalibration::reference().with_overrides(&[CalibrationPoint::new(9, 129.56)]);
        let m = LatencyModel::new(cal).unwrap();
        assert_eq!(m.decode_latency(9), 129.56);
        assert_eq!(m.decode_latency(8), 96.0);
    }

    #[test]
    fn csv_rows_are_named_in_errors() {
        let err = parse_points_csv("batch,latency_ms\n1,50\nx,3\n".as_bytes(), "t.csv").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let pts = parse_points_csv("batch,latency_ms\n1, 50\n9,128.59\n".as_bytes(), "t.csv").unwrap();
        assert_eq!(pts[1], CalibrationPoint::new(9, 128.59));
    }

    fn monotone_points() -> impl Strategy<Value = Vec<CalibrationPoint>> {
        prop::collection::vec((1u32..6, 0.0f64..40.0), 1..8).prop_map(|steps| {
            let mut b = 0;
            let mut l = 5.0;
            steps
                .into_iter()
                .map(|(db, dl)| {
                    b += db;
                    l += dl;
                    CalibrationPoint::new(b, l)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn monotone_exact_and_bracketed(points in monotone_points(), b1 in 1u32..60, b2 in 1u32..60) {
            let m = LatencyModel::new(LatencyCalibration::new(points.clone(), 0.0, 0.0)).unwrap();
            let (lo, hi) = (b1.min(b2), b1.max(b2));
            prop_assert!(m.decode_latency(lo) <= m.decode_latency(hi));
            for p in &points {
                prop_assert_eq!(m.decode_latency(p.batch).to_bits(), p.latency_ms.to_bits());
            }
            for w in points.windows(2) {
                for b in w[0].batch..=w[1].batch {
                    let l = m.decode_latency(b);
                    prop_assert!(l >= w[0].latency_ms && l <= w[1].latency_ms);
                }
            }
        }
    }
}
