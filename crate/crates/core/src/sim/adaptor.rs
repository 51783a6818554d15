use serde::{Deserialize, Serialize};

use crate::workload::TaskId;

pub const DEFAULT_PIN_BOOST: f64 = 1000.0;

/// Utility rewrite applied before every SLICE restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityAdaptorPolicy {
    #[default]
    Identity,
    /// `U * rate^(emitted / 100)`: long-running tasks lose priority.
    LongTaskDecay { rate: f64 },
    /// Multiply the listed tasks' utilities by `boost`.
    Pin {
        ids: Vec<TaskId>,
        #[serde(default = "default_boost")]
        boost: f64,
    },
}

fn default_boost() -> f64 {
    DEFAULT_PIN_BOOST
}

impl UtilityAdaptorPolicy {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            UtilityAdaptorPolicy::Identity => Ok(()),
            UtilityAdaptorPolicy::LongTaskDecay { rate } if *rate >= 0.0 && rate.is_finite() => Ok(()),
            UtilityAdaptorPolicy::LongTaskDecay { .. } => Err("adaptor.rate must be a non-negative number".into()),
            UtilityAdaptorPolicy::Pin { boost, .. } if *boost >= 0.0 && boost.is_finite() => Ok(()),
            UtilityAdaptorPolicy::Pin { .. } => Err("adaptor.boost must be a non-negative number".into()),
        }
    }

    /// Adapted utility of one task. Always computed from the task's base
    /// utility, so repeated restarts do not compound.
    pub fn adapt(&self, id: TaskId, base_utility: f64, emitted_tokens: u32) -> f64 {
        let u = match self {
            UtilityAdaptorPolicy::Identity => base_utility,
            UtilityAdaptorPolicy::LongTaskDecay { rate } => base_utility * rate.powf(emitted_tokens as f64 / 100.0),
            UtilityAdaptorPolicy::Pin { ids, boost } => {
                if ids.contains(&id) {
                    base_utility * boost
                } else {
                    base_utility
                }
            }
        };
        u.max(0.0)
    }
}

/// Adapt a set of `(id, base utility, emitted tokens)` entries.
pub fn apply_adaptor(policy: &UtilityAdaptorPolicy, tasks: &[(TaskId, f64, u32)]) -> Vec<f64> {
    tasks
        .iter()
        .map(|&(id, u, emitted)| policy.adapt(id, u, emitted))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_noop() {
        let input = [(TaskId(0), 3.5, 10), (TaskId(1), 0.0, 500)];
        assert_eq!(apply_adaptor(&UtilityAdaptorPolicy::Identity, &input), vec![3.5, 0.0]);
    }

    #[test]
    fn decay_halves_per_hundred_tokens() {
        let p = UtilityAdaptorPolicy::LongTaskDecay { rate: 0.5 };
        assert_eq!(p.adapt(TaskId(0), 1.0, 200), 0.25);
        assert_eq!(p.adapt(TaskId(0), 1.0, 0), 1.0);
    }

    #[test]
    fn pin_boosts_listed_ids() {
        let p = UtilityAdaptorPolicy::Pin {
            ids: vec![TaskId(3)],
            boost: 10.0,
        };
        assert_eq!(apply_adaptor(&p, &[(TaskId(3), 1.0, 0), (TaskId(4), 1.0, 0)]), vec![10.0, 1.0]);
    }

    #[test]
    fn serde_shape() {
        let p: UtilityAdaptorPolicy = serde_json::from_str(r#"{"kind":"pin","ids":[1,2]}"#).unwrap();
        assert_eq!(
            p,
            UtilityAdaptorPolicy::Pin {
                ids: vec![TaskId(1), TaskId(2)],
                boost: DEFAULT_PIN_BOOST
            }
        );
        let d: UtilityAdaptorPolicy = serde_json::from_str(r#"{"kind":"long_task_decay","rate":0.9}"#).unwrap();
        assert_eq!(d, UtilityAdaptorPolicy::LongTaskDecay { rate: 0.9 });
    }
}
