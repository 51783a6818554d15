//! Scenario configuration files (JSON). See `docs/config.md` for the schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{CalibrationPoint, LatencyCalibration, LatencyModel, DEFAULT_PREFILL_BASE_MS, DEFAULT_PREFILL_PER_TOKEN_MS};
use crate::scheduler::{SchedulerRegistry, SchedulerSettings};
use crate::workload::WorkloadSpec;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SLICESIM_OUTPUT_DIR";

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_RATE_AXIS: [f64; 10] = [0.1, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 7.0];
pub const DEFAULT_RATIO_AXIS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Poisson arrivals drawn from `workload`.
    #[default]
    Poisson,
    /// The fixed nine-task static scenario.
    Table2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// CSV with `batch,latency_ms` rows, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Inline points; used when `file` is absent.
    #[serde(default)]
    pub points: Option<Vec<CalibrationPoint>>,
    #[serde(default = "default_prefill_base")]
    pub prefill_base_ms: f64,
    #[serde(default = "default_prefill_per_token")]
    pub prefill_per_token_ms: f64,
}

fn default_prefill_base() -> f64 {
    DEFAULT_PREFILL_BASE_MS
}

fn default_prefill_per_token() -> f64 {
    DEFAULT_PREFILL_PER_TOKEN_MS
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            file: None,
            points: None,
            prefill_base_ms: DEFAULT_PREFILL_BASE_MS,
            prefill_per_token_ms: DEFAULT_PREFILL_PER_TOKEN_MS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub arrival_rate: Option<Vec<f64>>,
    #[serde(default)]
    pub rt_fraction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ArrivalRate,
    RtFraction,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::ArrivalRate => "arrival_rate",
            SweepAxis::RtFraction => "rt_fraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: ScenarioKind,
    /// Required for `poisson`. `workload.seed` is replaced by each entry of `seeds`.
    #[serde(default)]
    pub workload: Option<WorkloadSpec>,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default = "default_schedulers")]
    pub schedulers: Vec<String>,
    #[serde(default)]
    pub settings: SchedulerSettings,
    /// Per-scheduler calibration points that replace the shared table's.
    #[serde(default)]
    pub latency_overrides: BTreeMap<String, Vec<CalibrationPoint>>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Absolute simulation horizon (s); defaults to last arrival + 120 s.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub verbose: bool,
    /// Directory relative paths resolve against; set by [`ScenarioConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_schedulers() -> Vec<String> {
    SchedulerRegistry::builtin().names().iter().map(|s| s.to_string()).collect()
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Poisson,
            workload: Some(WorkloadSpec::default()),
            calibration: CalibrationSection::default(),
            schedulers: default_schedulers(),
            settings: SchedulerSettings::default(),
            latency_overrides: BTreeMap::new(),
            sweep: SweepSection::default(),
            seeds: default_seeds(),
            horizon: None,
            output_dir: default_output_dir(),
            verbose: false,
            base_dir: PathBuf::new(),
        }
    }
}

impl ScenarioConfig {
    /// Parse JSON; errors carry the offending field path and line/column.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("{source}: at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
        })
    }

    /// Load and validate a config file. Relative paths inside it resolve
    /// against its directory; `SLICESIM_OUTPUT_DIR` overrides `output_dir`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        let registry = SchedulerRegistry::builtin();
        if self.schedulers.is_empty() {
            return Err(Error::Config("`schedulers` must name at least one scheduler".into()));
        }
        for s in &self.schedulers {
            registry.check(s)?;
        }
        for s in self.latency_overrides.keys() {
            registry.check(s)?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("`seeds` must be distinct".into()));
        }
        match (self.scenario, &self.workload) {
            (ScenarioKind::Poisson, None) => return Err(Error::Config("`workload` is required for the poisson scenario".into())),
            (_, Some(w)) => w.validate()?,
            _ => {}
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config("`horizon` must be a positive number of seconds".into()));
            }
        }
        if !(self.settings.slice.period_limit_ms.is_finite() && self.settings.slice.period_limit_ms > 0.0) {
            return Err(Error::Config("`settings.slice.period_limit_ms` must be positive".into()));
        }
        self.settings.adaptor.validate().map_err(|m| Error::Config(format!("settings.{m}")))?;
        self.settings.fastserve.validate().map_err(|m| Error::Config(format!("settings.fastserve: {m}")))?;
        if self.settings.orca.max_batch == Some(0) {
            return Err(Error::Config("`settings.orca.max_batch` must be at least 1".into()));
        }
        for (name, values) in [("arrival_rate", &self.sweep.arrival_rate), ("rt_fraction", &self.sweep.rt_fraction)] {
            if let Some(v) = values {
                if v.is_empty() {
                    return Err(Error::Config(format!("`sweep.{name}` must not be empty")));
                }
                let ok = |x: f64| match name {
                    "arrival_rate" => x.is_finite() && x > 0.0,
                    _ => (0.0..=1.0).contains(&x),
                };
                if let Some(bad) = v.iter().find(|&&x| !ok(x)) {
                    return Err(Error::Config(format!("`sweep.{name}` value {bad} is out of range")));
                }
            }
        }
        for s in &self.schedulers {
            self.model_for(s)?;
        }
        Ok(())
    }

    /// The shared calibration table.
    pub fn calibration(&self) -> Result<LatencyCalibration> {
        let c = &self.calibration;
        let points = match (&c.file, &c.points) {
            (Some(f), _) => LatencyCalibration::read_points_csv(self.resolve(f))?,
            (None, Some(p)) => p.clone(),
            (None, None) => LatencyCalibration::reference().points,
        };
        let cal = LatencyCalibration::new(points, c.prefill_base_ms, c.prefill_per_token_ms);
        cal.validate()?;
        Ok(cal)
    }

    /// Latency model for one scheduler, with its overrides applied.
    pub fn model_for(&self, scheduler: &str) -> Result<LatencyModel> {
        let mut cal = self.calibration()?;
        if let Some(o) = self.latency_overrides.get(scheduler) {
            cal = cal.with_overrides(o);
        }
        Ok(LatencyModel::new(cal)?)
    }

    pub fn sweep_values(&self, axis: SweepAxis) -> Vec<f64> {
        match axis {
            SweepAxis::ArrivalRate => self.sweep.arrival_rate.clone().unwrap_or_else(|| DEFAULT_RATE_AXIS.to_vec()),
            SweepAxis::RtFraction => self.sweep.rt_fraction.clone().unwrap_or_else(|| DEFAULT_RATIO_AXIS.to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"workload": {"arrival_rate": 1.0, "rt_fraction": 0.7, "size": {"task_count": 10}}}"#,
            "t",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.schedulers, ["slice", "orca", "fastserve"]);
        assert_eq!(cfg.seeds, DEFAULT_SEEDS);
        assert_eq!(cfg.model_for("orca").unwrap(), LatencyModel::reference());
    }

    #[test]
    fn unknown_field_reports_path_and_line() {
        let err = ScenarioConfig::from_json("{\n  \"settings\": {\"slice\": {\"period_limit\": 5}}\n}", "cfg.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("settings.slice"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(err.is_usage());
    }

    #[test]
    fn validation_failures() {
        let base = ScenarioConfig::default();
        let bad = [
            ScenarioConfig { seeds: vec![1, 1], ..base.clone() },
            ScenarioConfig { schedulers: vec!["sjf".into()], ..base.clone() },
            ScenarioConfig { workload: None, ..base.clone() },
            ScenarioConfig {
                sweep: SweepSection { rt_fraction: Some(vec![1.5]), arrival_rate: None },
                ..base.clone()
            },
            ScenarioConfig {
                calibration: CalibrationSection { points: Some(vec![CalibrationPoint::new(2, 5.0), CalibrationPoint::new(1, 4.0)]), ..Default::default() },
                ..base.clone()
            },
        ];
        for cfg in bad {
            let e = cfg.validate().unwrap_err();
            assert!(e.is_usage(), "{e}");
        }
        base.validate().unwrap();
    }

    #[test]
    fn overrides_apply_per_scheduler() {
        let mut cfg = ScenarioConfig::default();
        cfg.latency_overrides.insert("fastserve".into(), vec![CalibrationPoint::new(9, 129.56)]);
        assert_eq!(cfg.model_for("fastserve").unwrap().decode_latency(9), 129.56);
        assert_eq!(cfg.model_for("orca").unwrap().decode_latency(9), 128.59);
    }

    #[test]
    fn calibration_file_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cal.csv"), "batch,latency_ms\n1,10\n8,80\n").unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"scenario": "table2", "calibration": {"file": "cal.csv"}}"#).unwrap();
        let cfg = ScenarioConfig::load(&path).unwrap();
        assert_eq!(cfg.model_for("slice").unwrap().decode_latency(8), 80.0);
    }
}
