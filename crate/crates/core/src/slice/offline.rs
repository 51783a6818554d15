use super::{build_mask_matrix, run_period, select_tasks, Candidate, Executor, InterruptProbe, PeriodCursor, SelectionResult, SliceConfig};
use crate::error::ExecutorError;
use crate::latency::LatencyModel;
use crate::workload::TaskId;

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineOutcome {
    pub selection: SelectionResult,
    /// Rejected tasks plus selected tasks that did not finish, by ascending id.
    pub unfinished: Vec<TaskId>,
    pub iterations: u32,
    pub periods: u32,
    pub interrupted: bool,
}

/// Select a batch, then repeat periods over its mask matrix until every
/// selected task finishes or the probe fires.
pub fn slice_offline<E, P>(
    candidates: &[Candidate],
    model: &LatencyModel,
    cfg: &SliceConfig,
    executor: &mut E,
    probe: &mut P,
) -> Result<OfflineOutcome, ExecutorError>
where
    E: Executor + ?Sized,
    P: InterruptProbe + ?Sized,
{
    let selection = select_tasks(candidates, model, cfg);
    let entries: Vec<_> = candidates
        .iter()
        .filter(|c| selection.selected.contains(&c.id))
        .map(Candidate::rate_entry)
        .collect();
    let mut cursor = PeriodCursor::new(build_mask_matrix(&entries));
    let mut iterations = 0;
    let mut periods = 0;
    let mut interrupted = false;
    while !cursor.matrix().is_empty() && !cursor.all_finished() {
        let out = run_period(&mut cursor, executor, probe)?;
        iterations += out.iterations;
        periods += 1;
        if out.interrupted {
            interrupted = true;
            break;
        }
        cursor.rewind();
    }
    let mut unfinished = cursor.remaining();
    unfinished.extend(selection.rejected.iter().copied());
    unfinished.sort();
    Ok(OfflineOutcome {
        selection,
        unfinished,
        iterations,
        periods,
        interrupted,
    })
}
