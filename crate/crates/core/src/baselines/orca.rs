use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::IterationPlan;
use crate::scheduler::{Scheduler, SimView, Step};
use crate::workload::TaskId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrcaConfig {
    /// `None` means unbounded.
    #[serde(default)]
    pub max_batch: Option<u32>,
}

/// Admit waiting tasks first-come first-served until the batch limit, then
/// batch every running task.
pub fn orca_step(active: &[TaskId], waiting: &[TaskId], cfg: &OrcaConfig) -> IterationPlan {
    let room = match cfg.max_batch {
        Some(m) => (m as usize).saturating_sub(active.len()),
        None => usize::MAX,
    };
    let admitted: Vec<TaskId> = waiting.iter().take(room).copied().collect();
    let batch = active.iter().chain(&admitted).copied().collect();
    IterationPlan { admitted, batch }
}

#[derive(Debug)]
pub struct Orca {
    cfg: OrcaConfig,
    waiting: VecDeque<TaskId>,
    active: Vec<TaskId>,
    needs_prefill: Vec<TaskId>,
}

impl Orca {
    pub fn new(cfg: OrcaConfig) -> Self {
        Self {
            cfg,
            waiting: VecDeque::new(),
            active: Vec::new(),
            needs_prefill: Vec::new(),
        }
    }
}

impl Scheduler for Orca {
    fn name(&self) -> &str {
        "orca"
    }

    fn on_arrival(&mut self, id: TaskId, _view: &SimView<'_>) -> bool {
        self.waiting.push_back(id);
        false
    }

    fn on_completion(&mut self, id: TaskId, _view: &SimView<'_>) -> bool {
        self.active.retain(|&t| t != id);
        self.needs_prefill.retain(|&t| t != id);
        false
    }

    fn next_step(&mut self, _view: &SimView<'_>) -> Step {
        let waiting: Vec<TaskId> = self.waiting.iter().copied().collect();
        let plan = orca_step(&self.active, &waiting, &self.cfg);
        self.waiting.drain(..plan.admitted.len());
        self.active.extend(&plan.admitted);
        self.needs_prefill.extend(&plan.admitted);
        if !self.needs_prefill.is_empty() {
            return Step::Prefill(std::mem::take(&mut self.needs_prefill));
        }
        if plan.batch.is_empty() {
            Step::Idle
        } else {
            Step::Decode(plan.batch)
        }
    }
}
