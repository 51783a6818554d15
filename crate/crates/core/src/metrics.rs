//! Per-task SLO scoring and run-level aggregates.
//!
//! A task's TTFT is its first emit minus its arrival; its TPOT is the mean gap
//! between consecutive tokens after the first. A real-time task is satisfied
//! when it completes within its deadline. An interactive task is satisfied
//! when it completes with TTFT and mean TPOT both within their limits. All
//! comparisons are inclusive. Every task counts in the denominators, whether
//! or not it was ever scheduled.

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Error};
use crate::sim::{SimOutput, SimStats};
use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};
use crate::workload::{Task, TaskId, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCause {
    None,
    Ttft,
    Tpot,
    Deadline,
    Unfinished,
}

impl ViolationCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCause::None => "none",
            ViolationCause::Ttft => "ttft",
            ViolationCause::Tpot => "tpot",
            ViolationCause::Deadline => "deadline",
            ViolationCause::Unfinished => "unfinished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub class: String,
    pub kind: TaskKind,
    pub arrival: f64,
    pub output_tokens: u32,
    pub tokens_emitted: u32,
    pub completed: bool,
    pub utility: f64,
    /// Seconds from arrival to the first token.
    pub t_ttft: Option<f64>,
    /// Mean inter-token gap after the first token (s); needs two tokens.
    pub mean_tpot: Option<f64>,
    /// `1 / mean_tpot` (tokens/s).
    pub realized_rate: Option<f64>,
    /// Seconds from arrival to the last token, for completed tasks.
    pub completion_time: Option<f64>,
    pub ttft_ok: bool,
    pub tpot_ok: bool,
    pub satisfied: bool,
    pub violation_cause: ViolationCause,
}

/// Score one task from its emit times (ns, strictly increasing).
pub fn score_task(task: &Task, emits: &[Nanos]) -> Result<TaskOutcome, ContractError> {
    for (i, w) in emits.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(ContractError::TokensOutOfOrder {
                task: task.id,
                index: i + 1,
            });
        }
    }
    let arrival = secs_to_nanos(task.arrival);
    if emits.first().is_some_and(|&t| t < arrival) {
        return Err(ContractError::TokensOutOfOrder { task: task.id, index: 0 });
    }
    let n = emits.len() as u32;
    let completed = n >= task.output_tokens;
    let t_ttft = emits.first().map(|&t| nanos_to_secs(t - arrival));
    let mean_tpot = if n >= 2 {
        Some(nanos_to_secs(emits[emits.len() - 1] - emits[0]) / (n - 1) as f64)
    } else {
        None
    };
    let completion = if completed { emits.last().map(|&t| t - arrival) } else { None };

    let ttft_ok = t_ttft.is_some_and(|t| t <= task.slo.ttft_limit);
    let tpot_ok = completed && mean_tpot.is_none_or(|m| m <= task.slo.tpot_limit);
    let cause = match task.kind {
        TaskKind::RealTime => {
            let deadline = secs_to_nanos(task.slo.deadline.unwrap_or(f64::INFINITY).min(1e9));
            match completion {
                None => ViolationCause::Unfinished,
                Some(c) if c <= deadline => ViolationCause::None,
                Some(_) => ViolationCause::Deadline,
            }
        }
        TaskKind::NonRealTime => {
            if !completed {
                ViolationCause::Unfinished
            } else if !ttft_ok {
                ViolationCause::Ttft
            } else if !tpot_ok {
                ViolationCause::Tpot
            } else {
                ViolationCause::None
            }
        }
    };
    Ok(TaskOutcome {
        task_id: task.id,
        class: task.class.clone(),
        kind: task.kind,
        arrival: task.arrival,
        output_tokens: task.output_tokens,
        tokens_emitted: n,
        completed,
        utility: task.utility,
        t_ttft,
        mean_tpot,
        realized_rate: mean_tpot.map(|m| 1.0 / m),
        completion_time: completion.map(nanos_to_secs),
        ttft_ok,
        tpot_ok,
        satisfied: cause == ViolationCause::None,
        violation_cause: cause,
    })
}

/// Summary over one group of tasks. Fractions are `None` for empty groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub satisfied: usize,
    pub attainment: Option<f64>,
    pub ttft_attainment: Option<f64>,
    pub tpot_attainment: Option<f64>,
    /// Mean of per-task mean TPOT over tasks with at least two tokens (s).
    pub mean_tpot: Option<f64>,
    /// Mean completion time over completed tasks (s).
    pub mean_completion_time: Option<f64>,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: GroupSummary,
    pub real_time: GroupSummary,
    pub non_real_time: GroupSummary,
    /// One entry per class label, sorted by label.
    pub classes: Vec<GroupSummary>,
    /// Sum of utilities over satisfied tasks.
    pub total_utility: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(group: &str, outcomes: &[&TaskOutcome]) -> GroupSummary {
    let count = outcomes.len();
    let satisfied = outcomes.iter().filter(|o| o.satisfied).count();
    GroupSummary {
        group: group.to_string(),
        count,
        satisfied,
        attainment: ratio(satisfied, count),
        ttft_attainment: ratio(outcomes.iter().filter(|o| o.ttft_ok).count(), count),
        tpot_attainment: ratio(outcomes.iter().filter(|o| o.tpot_ok).count(), count),
        mean_tpot: mean(outcomes.iter().filter_map(|o| o.mean_tpot)),
        mean_completion_time: mean(outcomes.iter().filter_map(|o| o.completion_time)),
        utility: outcomes.iter().filter(|o| o.satisfied).map(|o| o.utility).sum(),
    }
}

/// Aggregate outcomes. Input order does not matter.
pub fn aggregate(outcomes: &[TaskOutcome]) -> Aggregates {
    let mut sorted: Vec<&TaskOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.task_id);
    let of_kind = |k: TaskKind| -> Vec<&TaskOutcome> { sorted.iter().copied().filter(|o| o.kind == k).collect() };
    let mut labels: Vec<&str> = sorted.iter().map(|o| o.class.as_str()).collect();
    labels.sort();
    labels.dedup();
    let classes = labels
        .iter()
        .map(|&c| {
            let members: Vec<&TaskOutcome> = sorted.iter().copied().filter(|o| o.class == c).collect();
            summarize(c, &members)
        })
        .collect();
    let overall = summarize("overall", &sorted);
    Aggregates {
        total_utility: overall.utility,
        overall,
        real_time: summarize("real_time", &of_kind(TaskKind::RealTime)),
        non_real_time: summarize("non_real_time", &of_kind(TaskKind::NonRealTime)),
        classes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub decode_iterations: u64,
    pub prefill_steps: u64,
    pub reschedule_messages: u64,
    pub restarts: u32,
}

impl From<SimStats> for RunStats {
    fn from(s: SimStats) -> Self {
        Self {
            decode_iterations: s.decode_iterations,
            prefill_steps: s.prefill_steps,
            reschedule_messages: s.reschedule_messages,
            restarts: s.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheduler: String,
    pub seed: u64,
    pub aggregates: Aggregates,
    pub stats: RunStats,
    pub outcomes: Vec<TaskOutcome>,
}

impl RunReport {
    pub fn from_sim(sim: &SimOutput, seed: u64) -> Result<Self, Error> {
        let outcomes = sim
            .tasks
            .iter()
            .zip(&sim.emits)
            .map(|(t, e)| score_task(t, e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            scheduler: sim.scheduler.clone(),
            seed,
            aggregates: aggregate(&outcomes),
            stats: sim.stats.into(),
            outcomes,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: one `task` row per task, then `class`, `kind` and
    /// `overall` summary rows. See [`REPORT_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        let prefix = format!("{},{}", self.scheduler, self.seed);
        for o in &self.outcomes {
            let row = [
                "task".to_string(),
                prefix.clone(),
                o.task_id.to_string(),
                o.class.clone(),
                o.kind.as_str().to_string(),
                fmt_f(o.arrival),
                o.output_tokens.to_string(),
                o.tokens_emitted.to_string(),
                o.completed.to_string(),
                fmt_opt(o.t_ttft),
                fmt_opt(o.mean_tpot),
                fmt_opt(o.realized_rate),
                fmt_opt(o.completion_time),
                o.satisfied.to_string(),
                o.violation_cause.as_str().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_f(o.utility),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let a = &self.aggregates;
        let groups = a
            .classes
            .iter()
            .map(|g| ("class", g))
            .chain([("kind", &a.real_time), ("kind", &a.non_real_time), ("overall", &a.overall)]);
        for (row_type, g) in groups {
            let row = [
                row_type.to_string(),
                prefix.clone(),
                String::new(),
                g.group.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_opt(g.mean_tpot),
                String::new(),
                String::new(),
                g.satisfied.to_string(),
                String::new(),
                g.count.to_string(),
                fmt_opt(g.attainment),
                fmt_opt(g.ttft_attainment),
                fmt_opt(g.tpot_attainment),
                fmt_opt(g.mean_completion_time),
                fmt_f(g.utility),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Column order of [`RunReport::to_csv`]. Summary rows put the group label
/// in `class` and the satisfied count in `satisfied`.
pub const REPORT_CSV_HEADER: &str = "row_type,scheduler,seed,task_id,class,kind,arrival_s,output_tokens,tokens_emitted,completed,ttft_s,mean_tpot_s,realized_rate,completion_time_s,satisfied,violation_cause,count,attainment,ttft_attainment,tpot_attainment,mean_completion_s,utility";

/// Marker for fractions over an empty group.
pub const NOT_APPLICABLE: &str = "NA";

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// Fraction as a percentage with one decimal, or `NA`.
pub fn fmt_opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_APPLICABLE.to_string(), |x| format!("{:.1}%", x * 100.0))
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_APPLICABLE.to_string(), fmt_f)
}
