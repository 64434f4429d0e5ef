//! Incremental build engine: dataset discovery, task planning, staleness
//! by content digest, and execution with per-task state persistence.

use thiserror::Error;

pub mod digest;
pub mod discover;
pub mod execute;
pub mod manifest;
pub mod plan;
pub mod runner;
pub mod stale;

pub use discover::{discover_pieces, PieceBundle};
pub use execute::{
    clean, forget, run, status, CleanReport, RunOptions, RunReport, StatusRow, TaskReport,
    TaskStatus,
};
pub use manifest::{Manifest, TaskState};
pub use plan::{build_plan, plan_tasks, resolve_targets, with_dependencies, Feature, Plan, TaskSpec};
pub use stale::{params_digest, StaleReason};

/// Environment variable that makes the engine call `exit(70)` after the
/// Nth successful manifest persist. Exists for crash-recovery tests.
pub const EXIT_AFTER_ENV: &str = "PERFFORGE_EXIT_AFTER_TASKS";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dataset directory {0} does not exist")]
    DatasetNotFound(String),
    #[error("unknown target \"{0}\": not a task id, feature, or piece")]
    UnknownTarget(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
