use std::cmp::Ordering;

use serde::Serialize;

use crate::scheduler::Step;
use crate::time::{nanos_to_secs, Nanos};
use crate::workload::TaskId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// The in-flight prefill or decode step finished.
    StepDone(Step),
    TaskCompleted(TaskId),
    Arrival(TaskId),
    /// A reschedule message was posted to the scheduler's queue.
    Reschedule,
}

impl EventKind {
    /// Same-time ordering: finish the step, then report completions, then
    /// deliver arrivals.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::StepDone(_) => 0,
            EventKind::TaskCompleted(_) => 1,
            EventKind::Arrival(_) => 2,
            EventKind::Reschedule => 3,
        }
    }

    fn task(&self) -> Option<TaskId> {
        match self {
            EventKind::TaskCompleted(id) | EventKind::Arrival(id) => Some(*id),
            _ => None,
        }
    }
}

/// Ordered by `(time, kind rank, task id, insertion sequence)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time: Nanos,
    pub kind: EventKind,
    pub seq: u64,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.kind.task().cmp(&other.kind.task()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One emitted output token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TokenRecord {
    pub task_id: TaskId,
    pub token_index: u32,
    pub emit_time: Nanos,
}

/// A line of the verbose run log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub time: Nanos,
    pub kind: &'static str,
    pub task: Option<TaskId>,
    pub batch: Option<usize>,
}

impl LogEntry {
    /// `time<TAB>kind<TAB>task_id<TAB>batch_size`, with `-` for missing fields.
    pub fn to_tsv(&self) -> String {
        let task = self.task.map_or("-".to_string(), |t| t.to_string());
        let batch = self.batch.map_or("-".to_string(), |b| b.to_string());
        format!("{:.6}\t{}\t{}\t{}", nanos_to_secs(self.time), self.kind, task, batch)
    }
}
