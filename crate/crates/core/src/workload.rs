//! Tasks, SLOs and synthetic workload generation.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::WorkloadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    RealTime,
    NonRealTime,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::RealTime => "real_time",
            TaskKind::NonRealTime => "non_real_time",
        }
    }
}

/// Per-task service objective. All values in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloSpec {
    pub tpot_limit: f64,
    pub ttft_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
}

impl SloSpec {
    pub fn interactive(tpot_limit: f64, ttft_limit: f64) -> Self {
        Self {
            tpot_limit,
            ttft_limit,
            deadline: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.tpot_limit > 0.0 && self.ttft_limit > 0.0 && self.deadline.is_none_or(|d| d > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    /// Workload class label, used for per-class reporting.
    pub class: String,
    /// Arrival time in seconds.
    pub arrival: f64,
    pub prompt_tokens: u32,
    pub output_tokens: u32,
    pub slo: SloSpec,
    pub utility: f64,
}

impl Task {
    pub fn required_rate(&self) -> f64 {
        required_rate(self.slo.tpot_limit)
    }
}

/// Tokens per second a task needs: `1 / tpot_limit`.
pub fn required_rate(tpot_limit: f64) -> f64 {
    1.0 / tpot_limit
}

/// Turn an end-to-end deadline into a TTFT budget plus a TPOT limit: the task
/// runs at `rt_rate` and whatever remains of the deadline is the TTFT budget.
pub fn derive_rt_slo(deadline: f64, output_tokens: u32, rt_rate: f64) -> Result<SloSpec, WorkloadError> {
    let needed = output_tokens as f64 / rt_rate;
    let ttft = deadline - needed;
    if !(rt_rate > 0.0) || !(ttft > 0.0) {
        return Err(WorkloadError::InfeasibleDeadline {
            deadline,
            output_tokens,
            rate: rt_rate,
            needed,
        });
    }
    Ok(SloSpec {
        tpot_limit: 1.0 / rt_rate,
        ttft_limit: ttft,
        deadline: Some(deadline),
    })
}

/// Inclusive integer range sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenRange {
    pub min: u32,
    pub max: u32,
}

impl TokenRange {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.min..=self.max)
    }
}

/// Template for one class of requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub kind: TaskKind,
    /// Relative share among classes of the same kind.
    #[serde(default = "one")]
    pub weight: f64,
    /// Required generation rate in tokens/s.
    pub rate: f64,
    /// TTFT limit for interactive classes (s). Real-time classes derive theirs.
    #[serde(default)]
    pub ttft_limit: Option<f64>,
    /// End-to-end deadline for real-time classes (s).
    #[serde(default)]
    pub deadline: Option<f64>,
    pub utility: f64,
    pub prompt_tokens: TokenRange,
    pub output_tokens: TokenRange,
}

fn one() -> f64 {
    1.0
}

pub const DEFAULT_RT_UTILITY: f64 = 100.0;
pub const DEFAULT_NRT_UTILITY: f64 = 1.0;
pub const DEFAULT_NRT_TTFT: f64 = 1.0;
pub const DEFAULT_RT_DEADLINE: f64 = 1.5;
pub const DEFAULT_PROMPT: TokenRange = TokenRange::new(32, 256);

impl ClassSpec {
    /// Machine control / navigation: 20 tok/s, 1.5 s deadline, short outputs.
    pub fn default_real_time() -> Self {
        Self {
            name: "rt".into(),
            kind: TaskKind::RealTime,
            weight: 1.0,
            rate: 20.0,
            ttft_limit: None,
            deadline: Some(DEFAULT_RT_DEADLINE),
            utility: DEFAULT_RT_UTILITY,
            prompt_tokens: DEFAULT_PROMPT,
            // 30 tokens at 20 tok/s would leave a zero TTFT budget
            output_tokens: TokenRange::new(15, 29),
        }
    }

    pub fn default_voice() -> Self {
        Self {
            name: "voice".into(),
            kind: TaskKind::NonRealTime,
            weight: 1.0,
            rate: 8.0,
            ttft_limit: Some(DEFAULT_NRT_TTFT),
            deadline: None,
            utility: DEFAULT_NRT_UTILITY,
            prompt_tokens: DEFAULT_PROMPT,
            output_tokens: TokenRange::new(150, 400),
        }
    }

    pub fn default_text_qa() -> Self {
        Self {
            name: "text_qa".into(),
            kind: TaskKind::NonRealTime,
            weight: 1.0,
            rate: 10.0,
            ttft_limit: Some(DEFAULT_NRT_TTFT),
            deadline: None,
            utility: DEFAULT_NRT_UTILITY,
            prompt_tokens: DEFAULT_PROMPT,
            output_tokens: TokenRange::new(200, 500),
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: &str| Err(WorkloadError::Invalid(format!("class `{}`: {msg}", self.name)));
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return bad("weight must be positive");
        }
        if !(self.utility >= 0.0 && self.utility.is_finite()) {
            return bad("utility must be non-negative");
        }
        if self.prompt_tokens.min == 0 || self.prompt_tokens.min > self.prompt_tokens.max {
            return bad("prompt_tokens must satisfy 1 <= min <= max");
        }
        if self.output_tokens.min == 0 || self.output_tokens.min > self.output_tokens.max {
            return bad("output_tokens must satisfy 1 <= min <= max");
        }
        match self.kind {
            TaskKind::RealTime => {
                let Some(deadline) = self.deadline else {
                    return bad("real-time classes need a deadline");
                };
                derive_rt_slo(deadline, self.output_tokens.max, self.rate)?;
            }
            TaskKind::NonRealTime => match self.ttft_limit {
                Some(t) if t > 0.0 => {}
                _ => return bad("non-real-time classes need a positive ttft_limit"),
            },
        }
        Ok(())
    }

    fn slo_for(&self, output_tokens: u32) -> Result<SloSpec, WorkloadError> {
        match self.kind {
            TaskKind::RealTime => derive_rt_slo(self.deadline.unwrap_or(0.0), output_tokens, self.rate),
            TaskKind::NonRealTime => Ok(SloSpec::interactive(1.0 / self.rate, self.ttft_limit.unwrap_or(0.0))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSize {
    /// Generate exactly this many tasks.
    TaskCount(u32),
    /// Generate tasks arriving within `[0, duration)` seconds.
    Duration(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    /// Poisson arrival rate in tasks per second.
    pub arrival_rate: f64,
    pub rt_fraction: f64,
    pub size: WorkloadSize,
    #[serde(default = "default_classes")]
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub seed: u64,
}

pub fn default_classes() -> Vec<ClassSpec> {
    vec![
        ClassSpec::default_real_time(),
        ClassSpec::default_voice(),
        ClassSpec::default_text_qa(),
    ]
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            arrival_rate: 1.0,
            rt_fraction: 0.7,
            size: WorkloadSize::TaskCount(300),
            classes: default_classes(),
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err(WorkloadError::Invalid("arrival_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rt_fraction) {
            return Err(WorkloadError::Invalid("rt_fraction must lie in [0, 1]".into()));
        }
        match self.size {
            WorkloadSize::TaskCount(_) => {}
            WorkloadSize::Duration(d) if d > 0.0 && d.is_finite() => {}
            WorkloadSize::Duration(_) => return Err(WorkloadError::Invalid("duration must be positive".into())),
        }
        for c in &self.classes {
            c.validate()?;
        }
        let has = |k: TaskKind| self.classes.iter().any(|c| c.kind == k);
        if self.rt_fraction > 0.0 && !has(TaskKind::RealTime) {
            return Err(WorkloadError::Invalid("rt_fraction > 0 but no real_time class".into()));
        }
        if self.rt_fraction < 1.0 && !has(TaskKind::NonRealTime) {
            return Err(WorkloadError::Invalid("rt_fraction < 1 but no non_real_time class".into()));
        }
        Ok(())
    }
}

/// Generate a Poisson-arrival task list. A pure function of `spec`.
pub fn generate(spec: &WorkloadSpec) -> Result<Vec<Task>, WorkloadError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaps = Exp::new(spec.arrival_rate).map_err(|e| WorkloadError::Invalid(e.to_string()))?;

    let pick = |kind: TaskKind| -> (Vec<&ClassSpec>, Option<WeightedIndex<f64>>) {
        let cs: Vec<&ClassSpec> = spec.classes.iter().filter(|c| c.kind == kind).collect();
        let w = WeightedIndex::new(cs.iter().map(|c| c.weight)).ok();
        (cs, w)
    };
    let (rt_classes, rt_w) = pick(TaskKind::RealTime);
    let (nrt_classes, nrt_w) = pick(TaskKind::NonRealTime);

    let mut tasks = Vec::new();
    let mut t = 0.0;
    loop {
        if let WorkloadSize::TaskCount(n) = spec.size {
            if tasks.len() as u32 >= n {
                break;
            }
        }
        t += gaps.sample(&mut rng);
        if let WorkloadSize::Duration(d) = spec.size {
            if t >= d {
                break;
            }
        }
        let real_time = rng.gen_bool(spec.rt_fraction);
        let class = if real_time {
            rt_classes[rt_w.as_ref().expect("validated").sample(&mut rng)]
        } else {
            nrt_classes[nrt_w.as_ref().expect("validated").sample(&mut rng)]
        };
        let prompt_tokens = class.prompt_tokens.sample(&mut rng);
        let output_tokens = class.output_tokens.sample(&mut rng);
        tasks.push(Task {
            id: TaskId(tasks.len() as u32),
            kind: class.kind,
            class: class.name.clone(),
            arrival: t,
            prompt_tokens,
            output_tokens,
            slo: class.slo_for(output_tokens)?,
            utility: class.utility,
        });
    }
    Ok(tasks)
}

/// Output length used for every task of the static scenario.
pub const TABLE2_OUTPUT_TOKENS: u32 = 101;
pub const TABLE2_PROMPT_TOKENS: u32 = 64;

/// The static mixed-TPOT scenario: nine interactive tasks arriving together,
/// three at 100 ms TPOT (class A), four at 120 ms (B) and two at 250 ms (C).
pub fn static_table2_scenario() -> Vec<Task> {
    let classes = [("A", 3, 0.100), ("B", 4, 0.120), ("C", 2, 0.250)];
    let mut tasks = Vec::with_capacity(9);
    for (name, count, tpot) in classes {
        for _ in 0..count {
            tasks.push(Task {
                id: TaskId(tasks.len() as u32),
                kind: TaskKind::NonRealTime,
                class: name.to_string(),
                arrival: 0.0,
                prompt_tokens: TABLE2_PROMPT_TOKENS,
                output_tokens: TABLE2_OUTPUT_TOKENS,
                slo: SloSpec::interactive(tpot, DEFAULT_NRT_TTFT),
                utility: 1.0,
            });
        }
    }
    tasks
}
