//! Deterministic discrete-event simulator.
//!
//! The engine owns simulated time and the per-task token streams. It hands
//! arrivals and completions to a [`Scheduler`], and whenever no step is in
//! flight asks it for the next one. Events that fall inside a step are held
//! until the step ends, so preemption only ever happens at iteration
//! boundaries.

mod adaptor;
mod event;
mod online;

pub use adaptor::{apply_adaptor, UtilityAdaptorPolicy, DEFAULT_PIN_BOOST};
pub use event::{EventKind, LogEntry, SimEvent, TokenRecord};
pub use online::SliceOnline;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, ExecutorError, WorkloadError};
use crate::latency::LatencyModel;
use crate::scheduler::{Scheduler, SimView, Step};
use crate::time::{secs_to_nanos, Nanos};
use crate::workload::{Task, TaskId};

/// Drain window after the last arrival when no horizon is given (s).
pub const DEFAULT_DRAIN_SECS: f64 = 120.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Absolute horizon in seconds. Defaults to last arrival + 120 s.
    pub horizon: Option<f64>,
    /// Keep a per-event log.
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    pub decode_iterations: u64,
    pub prefill_steps: u64,
    pub reschedule_messages: u64,
    pub restarts: u32,
}

/// A step as executed: `[start, end)` and its batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub start: Nanos,
    pub end: Nanos,
    pub prefill: bool,
    pub batch: Vec<TaskId>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub scheduler: String,
    pub tasks: Vec<Task>,
    /// Emit times per task, indexed like `tasks`.
    pub emits: Vec<Vec<Nanos>>,
    pub horizon: Nanos,
    pub end_time: Nanos,
    pub stats: SimStats,
    pub steps: Vec<StepRecord>,
    /// `(message posted, scheduler consulted)` for each reschedule message
    /// (coalesced messages share one entry).
    pub reschedule_delays: Vec<(Nanos, Nanos)>,
    pub log: Vec<LogEntry>,
}

impl SimOutput {
    pub fn token_records(&self, id: TaskId) -> Vec<TokenRecord> {
        let Some(i) = self.tasks.iter().position(|t| t.id == id) else {
            return Vec::new();
        };
        self.emits[i]
            .iter()
            .enumerate()
            .map(|(k, &t)| TokenRecord {
                task_id: id,
                token_index: k as u32,
                emit_time: t,
            })
            .collect()
    }

    pub fn log_tsv(&self) -> String {
        let mut s = String::from("time\tkind\ttask_id\tbatch_size\n");
        for e in &self.log {
            s.push_str(&e.to_tsv());
            s.push('\n');
        }
        s
    }
}

struct Engine<'a> {
    tasks: &'a [Task],
    index: BTreeMap<TaskId, usize>,
    model: &'a LatencyModel,
    emitted: Vec<u32>,
    emits: Vec<Vec<Nanos>>,
    heap: BinaryHeap<Reverse<SimEvent>>,
    seq: u64,
    now: Nanos,
    verbose: bool,
    log: Vec<LogEntry>,
}

impl<'a> Engine<'a> {
    fn view(&self) -> SimView<'_> {
        SimView {
            now: self.now,
            tasks: self.tasks,
            index: &self.index,
            emitted: &self.emitted,
            model: self.model,
        }
    }

    fn push(&mut self, time: Nanos, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(SimEvent {
            time,
            kind,
            seq: self.seq,
        }));
    }

    fn log(&mut self, kind: &'static str, task: Option<TaskId>, batch: Option<usize>) {
        if self.verbose {
            self.log.push(LogEntry {
                time: self.now,
                kind,
                task,
                batch,
            });
        }
    }

    fn step_duration(&self, step: &Step) -> Result<Nanos, ExecutorError> {
        match step {
            Step::Idle => Ok(0),
            Step::Prefill(ids) => {
                let mut prompt = 0u64;
                for id in ids {
                    let i = self.slot(*id)?;
                    if self.emitted[i] != 0 {
                        return Err(ExecutorError(format!("task {id} prefilled twice")));
                    }
                    prompt += self.tasks[i].prompt_tokens as u64;
                }
                Ok(self.model.prefill_nanos(prompt))
            }
            Step::Decode(ids) => {
                for id in ids {
                    let i = self.slot(*id)?;
                    if self.emitted[i] == 0 {
                        return Err(ExecutorError(format!("task {id} decoded before prefill")));
                    }
                    if self.emitted[i] >= self.tasks[i].output_tokens {
                        return Err(ExecutorError(format!("task {id} decoded after completion")));
                    }
                }
                Ok(self.model.decode_nanos(ids.len() as u32))
            }
        }
    }

    fn slot(&self, id: TaskId) -> Result<usize, ExecutorError> {
        self.index
            .get(&id)
            .copied()
            .ok_or_else(|| ExecutorError(format!("unknown task {id}")))
    }
}

fn horizon_for(tasks: &[Task], opts: &SimOptions) -> Nanos {
    match opts.horizon {
        Some(h) => secs_to_nanos(h),
        None => secs_to_nanos(tasks.last().map_or(0.0, |t| t.arrival) + DEFAULT_DRAIN_SECS),
    }
}

/// Run `tasks` (sorted by arrival) through `scheduler` until every task has
/// finished, nothing more can happen, or the horizon is reached. Tasks still
/// unfinished at that point simply have short token streams.
pub fn run_simulation(
    tasks: &[Task],
    scheduler: &mut dyn Scheduler,
    model: &LatencyModel,
    opts: &SimOptions,
) -> Result<SimOutput, Error> {
    let mut index = BTreeMap::new();
    for (i, t) in tasks.iter().enumerate() {
        if index.insert(t.id, i).is_some() {
            return Err(WorkloadError::Invalid(format!("duplicate task id {}", t.id)).into());
        }
        if t.output_tokens == 0 || !(t.arrival >= 0.0) || !t.slo.is_valid() || !(t.utility >= 0.0) {
            return Err(WorkloadError::Invalid(format!("task {} is malformed", t.id)).into());
        }
    }
    if tasks.windows(2).any(|w| w[0].arrival > w[1].arrival) {
        return Err(WorkloadError::Invalid("tasks must be sorted by arrival".into()).into());
    }

    let horizon = horizon_for(tasks, opts);
    let mut eng = Engine {
        tasks,
        index,
        model,
        emitted: vec![0; tasks.len()],
        emits: vec![Vec::new(); tasks.len()],
        heap: BinaryHeap::new(),
        seq: 0,
        now: 0,
        verbose: opts.verbose,
        log: Vec::new(),
    };
    for t in tasks {
        eng.push(secs_to_nanos(t.arrival), EventKind::Arrival(t.id));
    }

    let mut stats = SimStats::default();
    let mut steps = Vec::new();
    let mut delays = Vec::new();
    let mut busy = false;
    let mut pending_msg: Option<Nanos> = None;

    while let Some(Reverse(ev)) = eng.heap.pop() {
        if ev.time > horizon {
            break;
        }
        eng.now = ev.time;
        let mut posted = false;
        match ev.kind {
            EventKind::Arrival(id) => {
                eng.log("arrival", Some(id), None);
                posted = scheduler.on_arrival(id, &eng.view());
            }
            EventKind::StepDone(step) => {
                let (ids, kind) = match &step {
                    Step::Prefill(ids) => (ids, "prefill_done"),
                    Step::Decode(ids) => (ids, "decode_iteration_done"),
                    Step::Idle => unreachable!("idle steps are never scheduled"),
                };
                eng.log(kind, None, Some(ids.len()));
                let mut finished = Vec::new();
                for id in ids {
                    let i = eng.index[id];
                    eng.emitted[i] += 1;
                    eng.emits[i].push(eng.now);
                    if eng.emitted[i] == tasks[i].output_tokens {
                        finished.push(*id);
                    }
                }
                scheduler.on_step_done(&step, &eng.view());
                for id in finished {
                    eng.push(eng.now, EventKind::TaskCompleted(id));
                }
                busy = false;
            }
            EventKind::TaskCompleted(id) => {
                eng.log("task_completed", Some(id), None);
                posted = scheduler.on_completion(id, &eng.view());
            }
            EventKind::Reschedule => eng.log("reschedule", None, None),
        }
        if posted {
            stats.reschedule_messages += 1;
            if pending_msg.is_none() {
                pending_msg = Some(eng.now);
                eng.push(eng.now, EventKind::Reschedule);
            }
        }

        let more_now = eng.heap.peek().is_some_and(|Reverse(e)| e.time == eng.now);
        if busy || more_now {
            continue;
        }
        let step = scheduler.next_step(&eng.view());
        if let Some(t0) = pending_msg.take() {
            delays.push((t0, eng.now));
        }
        if step == Step::Idle {
            continue;
        }
        let d = eng.step_duration(&step)?;
        let end = eng.now + d;
        if end > horizon {
            break;
        }
        match &step {
            Step::Prefill(ids) => {
                stats.prefill_steps += 1;
                steps.push(StepRecord { start: eng.now, end, prefill: true, batch: ids.clone() });
            }
            Step::Decode(ids) => {
                stats.decode_iterations += 1;
                steps.push(StepRecord { start: eng.now, end, prefill: false, batch: ids.clone() });
            }
            Step::Idle => {}
        }
        eng.push(end, EventKind::StepDone(step));
        busy = true;
    }
    stats.restarts = scheduler.restarts();

    Ok(SimOutput {
        scheduler: scheduler.name().to_string(),
        tasks: tasks.to_vec(),
        emits: eng.emits,
        horizon,
        end_time: eng.now,
        stats,
        steps,
        reschedule_delays: delays,
        log: eng.log,
    })
}
