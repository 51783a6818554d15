//! Scheduler strategies and their registry.
//!
//! Every scheduling policy implements [`Scheduler`] and is registered under a
//! name in a [`SchedulerRegistry`]. The simulator only talks to the trait: it
//! reports arrivals, completions and finished steps, and asks for the next
//! step whenever the (simulated) GPU is free.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::{FastServe, MlfqConfig, Orca, OrcaConfig};
use crate::error::Error;
use crate::latency::LatencyModel;
use crate::sim::{SliceOnline, UtilityAdaptorPolicy};
use crate::slice::SliceConfig;
use crate::time::Nanos;
use crate::workload::{Task, TaskId};

/// One unit of GPU work. Steps never overlap and are never cut short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Idle,
    /// Blocking prompt pass; each task emits its first token at the end.
    Prefill(Vec<TaskId>),
    /// One decode iteration; each batched task emits one token.
    Decode(Vec<TaskId>),
}

/// Read-only view of the simulation handed to schedulers.
pub struct SimView<'a> {
    pub(crate) now: Nanos,
    pub(crate) tasks: &'a [Task],
    pub(crate) index: &'a BTreeMap<TaskId, usize>,
    pub(crate) emitted: &'a [u32],
    pub(crate) model: &'a LatencyModel,
}

impl<'a> SimView<'a> {
    pub fn now(&self) -> Nanos {
        self.now
    }

    pub fn task(&self, id: TaskId) -> &'a Task {
        &self.tasks[self.index[&id]]
    }

    /// Tokens emitted so far, including the prefill token.
    pub fn emitted(&self, id: TaskId) -> u32 {
        self.emitted[self.index[&id]]
    }

    pub fn model(&self) -> &'a LatencyModel {
        self.model
    }
}

pub trait Scheduler: Send {
    fn name(&self) -> &str;

    /// A task entered the system. Returns `true` if the scheduler posted a
    /// reschedule message in response.
    fn on_arrival(&mut self, id: TaskId, view: &SimView<'_>) -> bool;

    /// A task emitted its last token. Same return convention as `on_arrival`.
    fn on_completion(&mut self, id: TaskId, view: &SimView<'_>) -> bool;

    /// Called after each step finishes, before completions are reported.
    fn on_step_done(&mut self, _step: &Step, _view: &SimView<'_>) {}

    /// Decide what the GPU does next.
    fn next_step(&mut self, view: &SimView<'_>) -> Step;

    /// Number of times the scheduler rebuilt its plan from scratch.
    fn restarts(&self) -> u32 {
        0
    }
}

/// Settings for every built-in scheduler; each factory reads its own section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSettings {
    #[serde(default)]
    pub slice: SliceConfig,
    #[serde(default)]
    pub adaptor: UtilityAdaptorPolicy,
    #[serde(default)]
    pub orca: OrcaConfig,
    #[serde(default)]
    pub fastserve: MlfqConfig,
}

pub type SchedulerFactory = fn(&SchedulerSettings) -> Box<dyn Scheduler>;

#[derive(Clone)]
pub struct SchedulerRegistry {
    entries: Vec<(String, SchedulerFactory)>,
}

impl SchedulerRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// `slice`, `orca` and `fastserve`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("slice", |s| Box::new(SliceOnline::new(s.slice, s.adaptor.clone())));
        r.register("orca", |s| Box::new(Orca::new(s.orca)));
        r.register("fastserve", |s| Box::new(FastServe::new(s.fastserve.clone())));
        r
    }

    /// Register a factory; a later registration under the same name wins.
    pub fn register(&mut self, name: &str, factory: SchedulerFactory) {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn check(&self, name: &str) -> Result<(), Error> {
        if self.contains(name) {
            Ok(())
        } else {
            Err(Error::UnknownScheduler {
                name: name.to_string(),
                valid: self.names().join(", "),
            })
        }
    }

    pub fn create(&self, name: &str, settings: &SchedulerSettings) -> Result<Box<dyn Scheduler>, Error> {
        self.check(name)?;
        let (_, f) = self.entries.iter().find(|(n, _)| n == name).expect("checked");
        Ok(f(settings))
    }
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
