//! SLO-driven task selection and rate allocation.
//!
//! The offline pipeline has two stages. [`select_tasks`] greedily admits tasks
//! in descending utility-rate order while the estimated scheduling period stays
//! under the period limit; [`DecodeMaskMatrix`] then turns the admitted tasks'
//! per-second token quotas into a column schedule that [`run_period`] scans
//! left to right, one decode iteration per column.

mod mask;
mod offline;
mod select;

pub use mask::{build_mask_matrix, run_period, DecodeMaskMatrix, PeriodCursor, PeriodOutcome, RateEntry};
pub use offline::{slice_offline, OfflineOutcome};
pub use select::{select_tasks, SelectionResult};

use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, ExecutorError};
use crate::latency::LatencyModel;
use crate::time::{ms_to_nanos, nanos_to_ms, Nanos};
use crate::workload::{Task, TaskId};

/// Default scheduling-period limit. Quotas are tokens per second, so a period
/// must finish inside one second for the quota to be a rate guarantee.
pub const DEFAULT_PERIOD_LIMIT_MS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    #[serde(default = "default_period_limit")]
    pub period_limit_ms: f64,
    /// Online only: a restart keeps the current scan column instead of
    /// starting the new matrix at column 0. Without it, frequent restarts
    /// replay the full-batch leading columns and no task reaches its rate.
    #[serde(default = "default_resume_scan")]
    pub resume_scan: bool,
}

fn default_resume_scan() -> bool {
    true
}

fn default_period_limit() -> f64 {
    DEFAULT_PERIOD_LIMIT_MS
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            period_limit_ms: DEFAULT_PERIOD_LIMIT_MS,
            resume_scan: true,
        }
    }
}

impl SliceConfig {
    pub fn period_limit_nanos(&self) -> Nanos {
        ms_to_nanos(self.period_limit_ms)
    }
}

/// What the selector needs to know about a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: TaskId,
    pub utility: f64,
    pub tpot_limit: f64,
}

impl Candidate {
    pub fn from_task(task: &Task) -> Self {
        Self {
            id: task.id,
            utility: task.utility,
            tpot_limit: task.slo.tpot_limit,
        }
    }

    pub fn utility_rate(&self) -> UtilityRate {
        UtilityRate {
            task_id: self.id,
            rate: utility_rate(self.utility, self.tpot_limit),
        }
    }

    pub fn rate_entry(&self) -> RateEntry {
        RateEntry {
            id: self.id,
            rate: 1.0 / self.tpot_limit,
        }
    }
}

/// Utility earned per generated token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityRate {
    pub task_id: TaskId,
    pub rate: f64,
}

/// `utility * tpot_limit`: the task's utility spread over the tokens it needs
/// each second.
pub fn utility_rate(utility: f64, tpot_limit: f64) -> f64 {
    utility * tpot_limit
}

// Absorbs representation error so that e.g. 1/0.1 does not round up to 11.
const QUOTA_EPS: f64 = 1e-9;

/// Per-period token quota for a required rate: `max(1, ceil(rate))`.
pub fn quota_for_rate(rate: f64) -> u32 {
    let q = (rate - QUOTA_EPS).ceil();
    if q >= u32::MAX as f64 {
        u32::MAX
    } else {
        (q as u32).max(1)
    }
}

pub fn quota_for_tpot(tpot_limit: f64) -> u32 {
    quota_for_rate(1.0 / tpot_limit)
}

/// Closed-form period length for non-increasing quotas `q_0 >= ... >= q_b`:
/// `q_b * l(b+1) + sum_{j<b} (q_j - q_{j+1}) * l(j+1)`, in nanoseconds.
pub fn period_nanos(quotas: &[u32], model: &LatencyModel) -> Nanos {
    let Some((&last, _)) = quotas.split_last() else {
        return 0;
    };
    let n = quotas.len() as u32;
    let mut total = last as Nanos * model.decode_nanos(n);
    for (j, w) in quotas.windows(2).enumerate() {
        let steps = (w[0] - w[1]) as Nanos;
        if steps > 0 {
            total += steps * model.decode_nanos(j as u32 + 1);
        }
    }
    total
}

/// Estimated duration (ms) of one period over the given required rates,
/// which must be sorted in descending order. Rates are rounded to quotas with
/// [`quota_for_rate`], the same rounding the mask matrix uses.
pub fn estimate_period(rates: &[f64], model: &LatencyModel) -> Result<f64, ContractError> {
    if rates.is_empty() {
        return Err(ContractError::EmptyRates);
    }
    for (i, &r) in rates.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(ContractError::BadRate(r));
        }
        if i > 0 && rates[i - 1] < r {
            return Err(ContractError::UnsortedRates {
                index: i,
                prev: rates[i - 1],
                next: r,
            });
        }
    }
    let quotas: Vec<u32> = rates.iter().map(|&r| quota_for_rate(r)).collect();
    Ok(nanos_to_ms(period_nanos(&quotas, model)))
}

/// Runs one decode iteration over a batch; each batched task emits one token.
pub trait Executor {
    /// Returns the tasks of `batch` that emitted their final token.
    fn decode(&mut self, batch: &[TaskId]) -> Result<Vec<TaskId>, ExecutorError>;
}

/// Polled between decode iterations; `true` asks the period loop to stop.
pub trait InterruptProbe {
    fn interrupted(&mut self) -> bool;
}

/// A probe that never fires.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoInterrupt;

impl InterruptProbe for NoInterrupt {
    fn interrupted(&mut self) -> bool {
        false
    }
}

impl<F: FnMut() -> bool> InterruptProbe for F {
    fn interrupted(&mut self) -> bool {
        self()
    }
}

/// Reschedule messages posted by any producer thread. Drains one message
/// per poll.
impl<T> InterruptProbe for mpsc::Receiver<T> {
    fn interrupted(&mut self) -> bool {
        self.try_recv().is_ok()
    }
}
