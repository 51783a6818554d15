//! Reference schedulers: FCFS iteration-level batching (Orca) and a
//! skip-join multi-level feedback queue (FastServe).

mod fastserve;
mod orca;

pub use fastserve::{fastserve_step, FastServe, MlfqConfig, MlfqQueues};
pub use orca::{orca_step, Orca, OrcaConfig};

use crate::workload::TaskId;

/// What a baseline does at one iteration boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IterationPlan {
    /// Tasks newly moved into the running set (they need prefill first).
    pub admitted: Vec<TaskId>,
    /// Tasks in the next decode iteration.
    pub batch: Vec<TaskId>,
}
