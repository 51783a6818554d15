use std::cmp::Ordering;

use super::{period_nanos, quota_for_tpot, Candidate, SliceConfig};
use crate::latency::LatencyModel;
use crate::time::nanos_to_ms;
use crate::workload::TaskId;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Admitted tasks in descending utility-rate order.
    pub selected: Vec<TaskId>,
    pub rejected: Vec<TaskId>,
    /// Estimated period of the admitted batch (ms); 0 when nothing is admitted.
    pub estimated_period_ms: f64,
}

/// Descending utility rate, ties broken by ascending id.
pub(crate) fn by_utility_rate(a: &Candidate, b: &Candidate) -> Ordering {
    b.utility_rate()
        .rate
        .total_cmp(&a.utility_rate().rate)
        .then(a.id.cmp(&b.id))
}

/// Greedy admission: take candidates in descending utility-rate order and
/// stop at the first one whose addition pushes the estimated period to the
/// limit or beyond. That candidate and everything after it is rejected.
pub fn select_tasks(candidates: &[Candidate], model: &LatencyModel, cfg: &SliceConfig) -> SelectionResult {
    let mut order: Vec<Candidate> = candidates.to_vec();
    order.sort_by(by_utility_rate);

    let limit = cfg.period_limit_nanos();
    let mut quotas: Vec<u32> = Vec::with_capacity(order.len());
    let mut selected = Vec::new();
    let mut period = 0;
    let mut cut = order.len();
    for (i, c) in order.iter().enumerate() {
        let q = quota_for_tpot(c.tpot_limit);
        // keep quotas sorted descending
        let at = quotas.partition_point(|&x| x >= q);
        quotas.insert(at, q);
        let p = period_nanos(&quotas, model);
        if p >= limit {
            quotas.remove(at);
            cut = i;
            break;
        }
        period = p;
        selected.push(c.id);
    }
    SelectionResult {
        selected,
        rejected: order[cut..].iter().map(|c| c.id).collect(),
        estimated_period_ms: nanos_to_ms(period),
    }
}
