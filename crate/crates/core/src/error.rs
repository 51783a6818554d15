use thiserror::Error;

use crate::workload::TaskId;

/// Problems with a latency calibration table.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration has no points")]
    Empty,
    #[error("batch size must be at least 1 (row {row})")]
    ZeroBatch { row: usize },
    #[error("batch sizes must be strictly increasing: {prev} then {next}")]
    NonIncreasingBatch { prev: u32, next: u32 },
    #[error("latency at batch {batch} must be positive and finite, got {latency_ms}")]
    NonPositiveLatency { batch: u32, latency_ms: f64 },
    #[error("latency must be non-decreasing in batch size: l({prev_batch})={prev_ms} > l({batch})={latency_ms}")]
    NonMonotone {
        prev_batch: u32,
        prev_ms: f64,
        batch: u32,
        latency_ms: f64,
    },
    #[error("prefill parameters must be non-negative and finite")]
    BadPrefill,
}

/// Problems with a workload description or a task's SLO.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("infeasible deadline: {output_tokens} tokens at {rate} tok/s need {needed}s but the deadline is {deadline}s")]
    InfeasibleDeadline {
        deadline: f64,
        output_tokens: u32,
        rate: f64,
        needed: f64,
    },
    #[error("invalid workload spec: {0}")]
    Invalid(String),
}

/// A caller broke a documented precondition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("rates must be sorted in descending order (index {index}: {prev} < {next})")]
    UnsortedRates { index: usize, prev: f64, next: f64 },
    #[error("rate list is empty")]
    EmptyRates,
    #[error("rate {0} is not a positive finite number")]
    BadRate(f64),
    #[error("token records for task {task} are out of order at index {index}")]
    TokensOutOfOrder { task: TaskId, index: usize },
}

/// Failure reported by a decode executor.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("executor failed: {0}")]
pub struct ExecutorError(pub String);

/// Top-level error for configuration loading and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scheduler `{name}` (valid choices: {valid})")]
    UnknownScheduler { name: String, valid: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for problems the user fixes by editing inputs (exit code 2).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Calibration(_)
                | Error::Workload(_)
                | Error::Config(_)
                | Error::UnknownScheduler { .. }
                | Error::Csv { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
