//! Running configured scenarios and parameter sweeps, and writing results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, ScenarioKind, SweepAxis};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{fmt_f, fmt_opt, fmt_opt_pct, RunReport};
use crate::scheduler::SchedulerRegistry;
use crate::sim::{run_simulation, SimOptions, SimOutput};
use crate::workload::{generate, static_table2_scenario, Task, WorkloadSpec};

/// Tasks for one seed, optionally with one workload axis replaced.
pub fn build_tasks(cfg: &ScenarioConfig, seed: u64, axis: Option<(SweepAxis, f64)>) -> Result<Vec<Task>> {
    match cfg.scenario {
        ScenarioKind::Table2 => Ok(static_table2_scenario()),
        ScenarioKind::Poisson => {
            let mut spec: WorkloadSpec = cfg
                .workload
                .clone()
                .ok_or_else(|| Error::Config("`workload` is required for the poisson scenario".into()))?;
            spec.seed = seed;
            match axis {
                Some((SweepAxis::ArrivalRate, v)) => spec.arrival_rate = v,
                Some((SweepAxis::RtFraction, v)) => spec.rt_fraction = v,
                None => {}
            }
            Ok(generate(&spec)?)
        }
    }
}

/// Simulate one scheduler on one task set.
pub fn simulate(cfg: &ScenarioConfig, scheduler: &str, tasks: &[Task]) -> Result<SimOutput> {
    let registry = SchedulerRegistry::builtin();
    let mut s = registry.create(scheduler, &cfg.settings)?;
    let model = cfg.model_for(scheduler)?;
    let opts = SimOptions {
        horizon: cfg.horizon,
        verbose: cfg.verbose,
    };
    run_simulation(tasks, s.as_mut(), &model, &opts)
}

pub fn run_one(cfg: &ScenarioConfig, scheduler: &str, seed: u64, axis: Option<(SweepAxis, f64)>) -> Result<RunReport> {
    let tasks = build_tasks(cfg, seed, axis)?;
    RunReport::from_sim(&simulate(cfg, scheduler, &tasks)?, seed)
}

/// Run every configured scheduler (or just `only`) over every seed, writing
/// `report_<scheduler>_<seed>.{json,csv}` (and `.log` when verbose) into
/// the output directory. Reports come back in (scheduler, seed) order.
pub fn cmd_run(cfg: &ScenarioConfig, only: Option<&str>) -> Result<Vec<RunReport>> {
    let registry = SchedulerRegistry::builtin();
    let schedulers: Vec<String> = match only {
        Some(s) => {
            registry.check(s)?;
            vec![s.to_string()]
        }
        None => cfg.schedulers.clone(),
    };
    let out = cfg.output_path();
    let jobs: Vec<(&String, u64)> = schedulers.iter().flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    jobs.par_iter()
        .map(|&(s, seed)| {
            let tasks = build_tasks(cfg, seed, None)?;
            let sim = simulate(cfg, s, &tasks)?;
            let report = RunReport::from_sim(&sim, seed)?;
            let stem = out.join(format!("report_{s}_{seed}"));
            write_atomic(&stem.with_extension("json"), report.to_json().as_bytes())?;
            write_atomic(&stem.with_extension("csv"), report.to_csv().as_bytes())?;
            if cfg.verbose {
                write_atomic(&stem.with_extension("log"), sim.log_tsv().as_bytes())?;
            }
            Ok(report)
        })
        .collect()
}

/// Fixed-width table of per-report attainment.
pub fn summary_table(reports: &[RunReport]) -> String {
    let pct = fmt_opt_pct;
    let mut s = format!(
        "{:<10} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "scheduler", "seed", "overall", "rt", "nrt", "ttft", "tpot"
    );
    for r in reports {
        let a = &r.aggregates;
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
            r.scheduler,
            r.seed,
            pct(a.overall.attainment),
            pct(a.real_time.attainment),
            pct(a.non_real_time.attainment),
            pct(a.non_real_time.ttft_attainment),
            pct(a.non_real_time.tpot_attainment),
        );
    }
    s
}

/// One (axis value, scheduler, seed) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub scheduler: String,
    pub seed: u64,
    pub tasks: usize,
    pub overall: Option<f64>,
    pub real_time: Option<f64>,
    pub non_real_time: Option<f64>,
    pub ttft: Option<f64>,
    pub tpot: Option<f64>,
    pub mean_completion_s: Option<f64>,
    pub total_utility: f64,
}

impl SweepCell {
    fn from_report(value: f64, r: &RunReport) -> Self {
        let a = &r.aggregates;
        Self {
            value,
            scheduler: r.scheduler.clone(),
            seed: r.seed,
            tasks: a.overall.count,
            overall: a.overall.attainment,
            real_time: a.real_time.attainment,
            non_real_time: a.non_real_time.attainment,
            ttft: a.non_real_time.ttft_attainment,
            tpot: a.non_real_time.tpot_attainment,
            mean_completion_s: a.overall.mean_completion_time,
            total_utility: a.total_utility,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Sorted by (value, scheduler order in the config, seed).
    pub cells: Vec<SweepCell>,
    /// Cells loaded from a previous interrupted run instead of recomputed.
    pub reused: usize,
}

impl SweepResult {
    /// Mean over seeds per (value, scheduler); `None` entries are skipped.
    pub fn means(&self) -> Vec<SweepCell> {
        let mut out: Vec<SweepCell> = Vec::new();
        for group in self.cells.chunk_by(|a, b| a.value == b.value && a.scheduler == b.scheduler) {
            let avg = |f: fn(&SweepCell) -> Option<f64>| {
                let v: Vec<f64> = group.iter().filter_map(f).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            out.push(SweepCell {
                value: group[0].value,
                scheduler: group[0].scheduler.clone(),
                seed: group.len() as u64,
                tasks: group.iter().map(|c| c.tasks).sum::<usize>() / group.len(),
                overall: avg(|c| c.overall),
                real_time: avg(|c| c.real_time),
                non_real_time: avg(|c| c.non_real_time),
                ttft: avg(|c| c.ttft),
                tpot: avg(|c| c.tpot),
                mean_completion_s: avg(|c| c.mean_completion_s),
                total_utility: group.iter().map(|c| c.total_utility).sum::<f64>() / group.len() as f64,
            });
        }
        out
    }

    pub fn mean_of(&self, value: f64, scheduler: &str) -> Option<SweepCell> {
        self.means().into_iter().find(|c| c.value == value && c.scheduler == scheduler)
    }
}

/// Header of `sweep_<axis>.csv`; the mean file uses `seeds` in place of `seed`.
pub fn sweep_csv_header(axis: SweepAxis, mean: bool) -> String {
    format!(
        "{},scheduler,{},tasks,overall,real_time,non_real_time,ttft,tpot,mean_completion_s,total_utility",
        axis.as_str(),
        if mean { "seeds" } else { "seed" }
    )
}

fn sweep_csv(axis: SweepAxis, cells: &[SweepCell], mean: bool) -> String {
    let mut s = sweep_csv_header(axis, mean);
    s.push('\n');
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f(c.value),
            c.scheduler,
            c.seed,
            c.tasks,
            fmt_opt(c.overall),
            fmt_opt(c.real_time),
            fmt_opt(c.non_real_time),
            fmt_opt(c.ttft),
            fmt_opt(c.tpot),
            fmt_opt(c.mean_completion_s),
            fmt_f(c.total_utility),
        );
    }
    s
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Manifest {
    axis: SweepAxis,
    /// The config as run; cells from a different config are never reused.
    config: serde_json::Value,
}

fn cell_path(dir: &Path, axis: SweepAxis, value: f64, scheduler: &str, seed: u64) -> PathBuf {
    dir.join(format!("{}_{}_{}_{}.json", axis.as_str(), fmt_f(value), scheduler, seed))
}

/// Sweep one workload axis over every scheduler and seed in parallel.
///
/// Each finished cell is written atomically under `cells_<axis>/` next to a
/// manifest of the config; rerunning the same config after an interruption
/// reuses finished cells. Writes `sweep_<axis>.csv` and `sweep_<axis>_mean.csv`.
pub fn cmd_sweep(cfg: &ScenarioConfig, axis: SweepAxis) -> Result<SweepResult> {
    if cfg.scenario != ScenarioKind::Poisson {
        return Err(Error::Config("sweeps need the poisson scenario".into()));
    }
    let out = cfg.output_path();
    let cell_dir = out.join(format!("cells_{}", axis.as_str()));
    let manifest = Manifest {
        axis,
        config: serde_json::to_value(cfg)?,
    };
    let manifest_path = cell_dir.join("manifest.json");
    let resumable = std::fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .is_some_and(|m| m == manifest);
    if !resumable && cell_dir.exists() {
        std::fs::remove_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
    }
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let values = cfg.sweep_values(axis);
    let jobs: Vec<(f64, &String, u64)> = values
        .iter()
        .flat_map(|&v| cfg.schedulers.iter().flat_map(move |s| cfg.seeds.iter().map(move |&seed| (v, s, seed))))
        .collect();
    let results: Vec<(SweepCell, bool)> = jobs
        .par_iter()
        .map(|&(v, s, seed)| {
            let path = cell_path(&cell_dir, axis, v, s, seed);
            if resumable {
                if let Some(cell) = std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str(&t).ok()) {
                    return Ok((cell, true));
                }
            }
            let report = run_one(cfg, s, seed, Some((axis, v)))?;
            let cell = SweepCell::from_report(v, &report);
            write_atomic(&path, serde_json::to_string(&cell)?.as_bytes())?;
            Ok((cell, false))
        })
        .collect::<Result<_>>()?;
    let reused = results.iter().filter(|r| r.1).count();
    let result = SweepResult {
        axis,
        cells: results.into_iter().map(|r| r.0).collect(),
        reused,
    };
    write_atomic(
        &out.join(format!("sweep_{}.csv", axis.as_str())),
        sweep_csv(axis, &result.cells, false).as_bytes(),
    )?;
    write_atomic(
        &out.join(format!("sweep_{}_mean.csv", axis.as_str())),
        sweep_csv(axis, &result.means(), true).as_bytes(),
    )?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::WorkloadSize;

    fn small(dir: &Path) -> ScenarioConfig {
        ScenarioConfig {
            workload: Some(WorkloadSpec {
                size: WorkloadSize::TaskCount(20),
                ..WorkloadSpec::default()
            }),
            seeds: vec![3, 4],
            sweep: crate::config::SweepSection {
                arrival_rate: Some(vec![0.5, 2.0]),
                rt_fraction: None,
            },
            output_dir: dir.to_path_buf(),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn run_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let reports = cmd_run(&cfg, Some("orca")).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(dir.path().join("report_orca_3.json").exists());
        assert!(dir.path().join("report_orca_4.csv").exists());
        assert!(summary_table(&reports).lines().count() == 3);
        assert!(cmd_run(&cfg, Some("nope")).unwrap_err().is_usage());
    }

    #[test]
    fn sweep_resumes_and_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let first = cmd_sweep(&cfg, SweepAxis::ArrivalRate).unwrap();
        assert_eq!(first.cells.len(), 2 * 3 * 2);
        assert_eq!(first.reused, 0);
        let csv = std::fs::read_to_string(dir.path().join("sweep_arrival_rate.csv")).unwrap();
        // simulate an interrupted run: drop one cell and the outputs
        std::fs::remove_file(cell_path(&dir.path().join("cells_arrival_rate"), SweepAxis::ArrivalRate, 2.0, "slice", 4)).unwrap();
        std::fs::remove_file(dir.path().join("sweep_arrival_rate.csv")).unwrap();
        let second = cmd_sweep(&cfg, SweepAxis::ArrivalRate).unwrap();
        assert_eq!(second.reused, 11);
        assert_eq!(second.cells, first.cells);
        assert_eq!(std::fs::read_to_string(dir.path().join("sweep_arrival_rate.csv")).unwrap(), csv);
        let means = first.means();
        assert_eq!(means.len(), 6);
        assert!(means.iter().all(|c| c.seed == 2));
    }

    #[test]
    fn changed_config_discards_cells() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cmd_sweep(&cfg, SweepAxis::ArrivalRate).unwrap();
        cfg.settings.slice.period_limit_ms = 900.0;
        assert_eq!(cmd_sweep(&cfg, SweepAxis::ArrivalRate).unwrap().reused, 0);
    }
}
