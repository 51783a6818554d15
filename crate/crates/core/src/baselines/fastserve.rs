use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::IterationPlan;
use crate::scheduler::{Scheduler, SimView, Step};
use crate::workload::TaskId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlfqConfig {
    #[serde(default = "default_queues")]
    pub num_queues: u32,
    /// Token quantum of the top queue.
    #[serde(default = "default_base_quantum")]
    pub base_quantum: u32,
    /// Each lower queue's quantum is this many times the one above it.
    #[serde(default = "default_growth")]
    pub quantum_growth: u32,
    /// `None` means unbounded.
    #[serde(default = "default_max_batch")]
    pub max_batch: Option<u32>,
}

fn default_queues() -> u32 {
    4
}
fn default_base_quantum() -> u32 {
    16
}
fn default_growth() -> u32 {
    2
}
fn default_max_batch() -> Option<u32> {
    Some(32)
}

impl Default for MlfqConfig {
    fn default() -> Self {
        Self {
            num_queues: default_queues(),
            base_quantum: default_base_quantum(),
            quantum_growth: default_growth(),
            max_batch: default_max_batch(),
        }
    }
}

impl MlfqConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_queues == 0 {
            return Err("fastserve.num_queues must be at least 1".into());
        }
        if self.base_quantum == 0 {
            return Err("fastserve.base_quantum must be at least 1".into());
        }
        if self.num_queues > 1 && self.quantum_growth < 2 {
            return Err("fastserve.quantum_growth must be at least 2 so quanta strictly increase".into());
        }
        if self.max_batch == Some(0) {
            return Err("fastserve.max_batch must be at least 1".into());
        }
        Ok(())
    }

    pub fn quantum(&self, level: usize) -> u64 {
        self.base_quantum as u64 * (self.quantum_growth as u64).saturating_pow(level as u32)
    }

    /// Skip-join: the first queue whose quantum covers the prompt length.
    pub fn entry_level(&self, prompt_tokens: u32) -> usize {
        let last = self.num_queues as usize - 1;
        (0..=last)
            .find(|&l| self.quantum(l) >= prompt_tokens as u64)
            .unwrap_or(last)
    }
}

/// Queue state: FCFS order within each priority level plus the tokens each
/// task has used at its current level.
#[derive(Debug, Clone, Default)]
pub struct MlfqQueues {
    levels: Vec<VecDeque<TaskId>>,
    level_of: BTreeMap<TaskId, usize>,
    used: BTreeMap<TaskId, u64>,
}

impl MlfqQueues {
    pub fn new(cfg: &MlfqConfig) -> Self {
        Self {
            levels: vec![VecDeque::new(); cfg.num_queues.max(1) as usize],
            ..Default::default()
        }
    }

    pub fn enqueue(&mut self, id: TaskId, level: usize) {
        let level = level.min(self.levels.len() - 1);
        self.levels[level].push_back(id);
        self.level_of.insert(id, level);
        self.used.insert(id, 0);
    }

    pub fn remove(&mut self, id: TaskId) {
        if let Some(l) = self.level_of.remove(&id) {
            self.levels[l].retain(|&t| t != id);
        }
        self.used.remove(&id);
    }

    pub fn level_of(&self, id: TaskId) -> Option<usize> {
        self.level_of.get(&id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.level_of.is_empty()
    }

    /// Charge one token to every task of `batch`; demote those that used up
    /// their level's quantum. The last level never demotes.
    pub fn charge(&mut self, batch: &[TaskId], cfg: &MlfqConfig) {
        let last = self.levels.len() - 1;
        for id in batch {
            let Some(&level) = self.level_of.get(id) else { continue };
            let used = self.used.entry(*id).or_default();
            *used += 1;
            if level < last && *used >= cfg.quantum(level) {
                self.levels[level].retain(|t| t != id);
                self.enqueue(*id, level + 1);
            }
        }
    }

    fn iter_priority(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.levels.iter().flat_map(|q| q.iter().copied())
    }
}

/// Batch the highest-priority tasks up to the batch limit. Tasks entering
/// the batch for the first time are reported as admitted.
pub fn fastserve_step(queues: &MlfqQueues, started: &BTreeSet<TaskId>, cfg: &MlfqConfig) -> IterationPlan {
    let limit = cfg.max_batch.map_or(usize::MAX, |m| m as usize);
    let batch: Vec<TaskId> = queues.iter_priority().take(limit).collect();
    let admitted = batch.iter().copied().filter(|id| !started.contains(id)).collect();
    IterationPlan { admitted, batch }
}

#[derive(Debug)]
pub struct FastServe {
    cfg: MlfqConfig,
    queues: MlfqQueues,
    started: BTreeSet<TaskId>,
}

impl FastServe {
    pub fn new(cfg: MlfqConfig) -> Self {
        let queues = MlfqQueues::new(&cfg);
        Self {
            cfg,
            queues,
            started: BTreeSet::new(),
        }
    }

    pub fn queues(&self) -> &MlfqQueues {
        &self.queues
    }
}

impl Scheduler for FastServe {
    fn name(&self) -> &str {
        "fastserve"
    }

    fn on_arrival(&mut self, id: TaskId, view: &SimView<'_>) -> bool {
        let level = self.cfg.entry_level(view.task(id).prompt_tokens);
        self.queues.enqueue(id, level);
        false
    }

    fn on_completion(&mut self, id: TaskId, _view: &SimView<'_>) -> bool {
        self.queues.remove(id);
        self.started.remove(&id);
        false
    }

    fn on_step_done(&mut self, step: &Step, _view: &SimView<'_>) {
        if let Step::Decode(batch) = step {
            self.queues.charge(batch, &self.cfg);
        }
    }

    fn next_step(&mut self, _view: &SimView<'_>) -> Step {
        let plan = fastserve_step(&self.queues, &self.started, &self.cfg);
        if !plan.admitted.is_empty() {
            self.started.extend(&plan.admitted);
            return Step::Prefill(plan.admitted);
        }
        if plan.batch.is_empty() {
            Step::Idle
        } else {
            Step::Decode(plan.batch)
        }
    }
}
