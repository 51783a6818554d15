use std::collections::BTreeSet;

use super::UtilityAdaptorPolicy;
use crate::scheduler::{Scheduler, SimView, Step};
use crate::slice::{build_mask_matrix, select_tasks, Candidate, PeriodCursor, SliceConfig};
use crate::workload::TaskId;

/// Online SLICE: the offline select-then-scan pipeline restarted at the next
/// iteration boundary after every arrival or completion.
///
/// Arrivals and completions post a reschedule message; messages posted before
/// the next boundary coalesce into one restart. A restart rewrites utilities
/// through the adaptor and re-runs selection over every unfinished task. The
/// new matrix is scanned from the interrupted column (or from column 0 when
/// `resume_scan` is off). Tokens already emitted are kept.
#[derive(Debug)]
pub struct SliceOnline {
    cfg: SliceConfig,
    adaptor: UtilityAdaptorPolicy,
    buffer: BTreeSet<TaskId>,
    unprefilled: Vec<TaskId>,
    cursor: Option<PeriodCursor>,
    pending: bool,
    restarts: u32,
}

impl SliceOnline {
    pub fn new(cfg: SliceConfig, adaptor: UtilityAdaptorPolicy) -> Self {
        Self {
            cfg,
            adaptor,
            buffer: BTreeSet::new(),
            unprefilled: Vec::new(),
            cursor: None,
            pending: false,
            restarts: 0,
        }
    }

    /// Current plan's row order, fastest first.
    pub fn scheduled(&self) -> Vec<TaskId> {
        self.cursor.as_ref().map(|c| c.remaining()).unwrap_or_default()
    }

    fn restart(&mut self, view: &SimView<'_>) {
        let column = match self.cursor.take() {
            Some(c) if self.cfg.resume_scan => c.column(),
            _ => 0,
        };
        if self.buffer.is_empty() {
            return;
        }
        self.restarts += 1;
        let candidates: Vec<Candidate> = self
            .buffer
            .iter()
            .map(|&id| {
                let task = view.task(id);
                Candidate {
                    id,
                    utility: self.adaptor.adapt(id, task.utility, view.emitted(id)),
                    tpot_limit: task.slo.tpot_limit,
                }
            })
            .collect();
        let selection = select_tasks(&candidates, view.model(), &self.cfg);
        if selection.selected.is_empty() {
            return;
        }
        let entries: Vec<_> = candidates
            .iter()
            .filter(|c| selection.selected.contains(&c.id))
            .map(Candidate::rate_entry)
            .collect();
        self.cursor = Some(PeriodCursor::resume(build_mask_matrix(&entries), column));
    }
}

impl Scheduler for SliceOnline {
    fn name(&self) -> &str {
        "slice"
    }

    fn on_arrival(&mut self, id: TaskId, _view: &SimView<'_>) -> bool {
        self.buffer.insert(id);
        self.unprefilled.push(id);
        self.pending = true;
        true
    }

    fn on_completion(&mut self, id: TaskId, _view: &SimView<'_>) -> bool {
        self.buffer.remove(&id);
        self.unprefilled.retain(|&t| t != id);
        if let Some(c) = self.cursor.as_mut() {
            c.mark_finished([id]);
        }
        self.pending = true;
        true
    }

    fn next_step(&mut self, view: &SimView<'_>) -> Step {
        if std::mem::take(&mut self.pending) {
            self.restart(view);
        }
        if !self.unprefilled.is_empty() {
            return Step::Prefill(std::mem::take(&mut self.unprefilled));
        }
        let Some(cursor) = self.cursor.as_mut() else {
            return Step::Idle;
        };
        if let Some(batch) = cursor.next_batch() {
            return Step::Decode(batch);
        }
        cursor.rewind();
        match cursor.next_batch() {
            Some(batch) => Step::Decode(batch),
            None => {
                self.cursor = None;
                Step::Idle
            }
        }
    }

    fn restarts(&self) -> u32 {
        self.restarts
    }
}
