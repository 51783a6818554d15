//! Discrete-event testbed for SLO-driven LLM inference scheduling.
//!
//! SLICE (utility-maximizing selection plus a decode-mask matrix) runs against
//! Orca and FastServe on a simulated GPU whose decode step latency is a
//! calibrated function of batch size.

pub mod baselines;
pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod latency;
pub mod metrics;
pub mod scheduler;
pub mod sim;
pub mod slice;
pub mod time;
pub mod workload;

pub use config::{ScenarioConfig, SweepAxis};
pub use error::{Error, Result};
pub use latency::{CalibrationPoint, LatencyCalibration, LatencyModel};
pub use scheduler::{Scheduler, SchedulerRegistry, SchedulerSettings, Step};
pub use sim::{run_simulation, SimOptions, SimOutput};
pub use workload::{Task, TaskId, TaskKind, WorkloadSpec};
