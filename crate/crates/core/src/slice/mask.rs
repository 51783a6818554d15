use std::collections::BTreeSet;

use super::{quota_for_rate, Executor, InterruptProbe};
use crate::error::ExecutorError;
use crate::workload::TaskId;

/// A task together with its required generation rate (tokens/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEntry {
    pub id: TaskId,
    pub rate: f64,
}

/// Binary schedule for one period. Row `k` belongs to `row_order[k]` and
/// has ones in its first `row_quota[k]` columns; rows are sorted by required
/// rate, fastest first, so every column is a prefix of the rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeMaskMatrix {
    row_order: Vec<TaskId>,
    row_quota: Vec<u32>,
    rows: Vec<Vec<bool>>,
}

impl DecodeMaskMatrix {
    pub fn row_order(&self) -> &[TaskId] {
        &self.row_order
    }

    pub fn row_quota(&self) -> &[u32] {
        &self.row_quota
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.row_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_order.is_empty()
    }

    /// Number of columns, i.e. the fastest task's quota.
    pub fn width(&self) -> u32 {
        self.row_quota.first().copied().unwrap_or(0)
    }

    /// Tasks batched in column `j`.
    pub fn column(&self, j: u32) -> &[TaskId] {
        let n = self.row_quota.partition_point(|&q| q > j);
        &self.row_order[..n]
    }

    pub fn quota_of(&self, id: TaskId) -> Option<u32> {
        self.row_order.iter().position(|&t| t == id).map(|k| self.row_quota[k])
    }
}

/// Sort by required rate (descending, ties by ascending id) and lay out one
/// ones-prefix row per task of length equal to its quota.
pub fn build_mask_matrix(entries: &[RateEntry]) -> DecodeMaskMatrix {
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| b.rate.total_cmp(&a.rate).then(a.id.cmp(&b.id)));
    let row_quota: Vec<u32> = sorted.iter().map(|e| quota_for_rate(e.rate)).collect();
    let width = row_quota.first().copied().unwrap_or(0) as usize;
    let rows = row_quota
        .iter()
        .map(|&q| (0..width).map(|m| m < q as usize).collect())
        .collect();
    DecodeMaskMatrix {
        row_order: sorted.iter().map(|e| e.id).collect(),
        row_quota,
        rows,
    }
}

/// Column-scan position within a matrix, skipping tasks that already finished.
#[derive(Debug, Clone)]
pub struct PeriodCursor {
    matrix: DecodeMaskMatrix,
    column: u32,
    finished: BTreeSet<TaskId>,
}

impl PeriodCursor {
    pub fn new(matrix: DecodeMaskMatrix) -> Self {
        Self {
            matrix,
            column: 0,
            finished: BTreeSet::new(),
        }
    }

    /// Continue an interrupted period on a new matrix from `column`.
    pub fn resume(matrix: DecodeMaskMatrix, column: u32) -> Self {
        Self {
            column: column.min(matrix.width()),
            ..Self::new(matrix)
        }
    }

    pub fn matrix(&self) -> &DecodeMaskMatrix {
        &self.matrix
    }

    pub fn column(&self) -> u32 {
        self.column
    }

    /// Batch for the current column, advancing the cursor. `None` once the
    /// period is over (every remaining column is empty).
    pub fn next_batch(&mut self) -> Option<Vec<TaskId>> {
        while self.column < self.matrix.width() {
            let j = self.column;
            self.column += 1;
            let batch: Vec<TaskId> = self
                .matrix
                .column(j)
                .iter()
                .copied()
                .filter(|id| !self.finished.contains(id))
                .collect();
            if !batch.is_empty() {
                return Some(batch);
            }
        }
        None
    }

    /// Start the next period from column 0.
    pub fn rewind(&mut self) {
        self.column = 0;
    }

    pub fn mark_finished(&mut self, ids: impl IntoIterator<Item = TaskId>) {
        self.finished.extend(ids);
    }

    pub fn all_finished(&self) -> bool {
        self.matrix.row_order.iter().all(|id| self.finished.contains(id))
    }

    /// Unfinished tasks in row order.
    pub fn remaining(&self) -> Vec<TaskId> {
        self.matrix
            .row_order
            .iter()
            .copied()
            .filter(|id| !self.finished.contains(id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodOutcome {
    pub iterations: u32,
    /// Tasks that emitted their final token during this period.
    pub finished: Vec<TaskId>,
    pub interrupted: bool,
    /// Unfinished tasks in row order.
    pub remaining: Vec<TaskId>,
}

/// Scan one period from the cursor's current column. Each non-empty column
/// is one call to `executor`; `probe` is polled after every iteration and a
/// positive answer ends the period early.
pub fn run_period<E, P>(cursor: &mut PeriodCursor, executor: &mut E, probe: &mut P) -> Result<PeriodOutcome, ExecutorError>
where
    E: Executor + ?Sized,
    P: InterruptProbe + ?Sized,
{
    let mut iterations = 0;
    let mut finished = Vec::new();
    let mut interrupted = false;
    while let Some(batch) = cursor.next_batch() {
        let done = executor.decode(&batch)?;
        iterations += 1;
        cursor.mark_finished(done.iter().copied());
        finished.extend(done);
        if cursor.all_finished() {
            break;
        }
        if probe.interrupted() {
            interrupted = true;
            break;
        }
    }
    Ok(PeriodOutcome {
        iterations,
        finished,
        interrupted,
        remaining: cursor.remaining(),
    })
}
