//! Scheduling and execution of stale tasks.
//!
//! Tasks run on a small worker pool; the ready queue always yields the
//! lowest plan index so single-worker runs are fully deterministic. The
//! manifest is rewritten after every task success, which bounds the damage
//! of a killed build to "some work is repeated", never to a wrong record.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet, HashMap};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use super::manifest::{Manifest, TaskState};
use super::plan::{resolve_targets, with_dependencies, Plan};
use super::runner;
use super::stale::{evaluate, params_digest, StaleReason};
use super::{EngineError, EXIT_AFTER_ENV};
use crate::config::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStatus {
    Fresh,
    Ran,
    WouldRun,
    Failed,
    Skipped,
}

impl TaskStatus {
    pub fn label(self) -> &'static str {
        match self {
            TaskStatus::Fresh => "fresh",
            TaskStatus::Ran => "ran",
            TaskStatus::WouldRun => "would-run",
            TaskStatus::Failed => "failed",
            TaskStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskReport {
    pub task_id: String,
    pub piece: String,
    pub feature: &'static str,
    pub status: TaskStatus,
    pub reason: Option<StaleReason>,
    pub message: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// Rows in (piece, feature) order.
    pub rows: Vec<TaskReport>,
}

impl RunReport {
    pub fn count(&self, status: TaskStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    /// True when any task failed or was skipped behind a failure.
    pub fn any_failed(&self) -> bool {
        self.rows
            .iter()
            .any(|r| matches!(r.status, TaskStatus::Failed | TaskStatus::Skipped))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    pub dry_run: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            dry_run: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatusRow {
    pub task_id: String,
    pub piece: String,
    pub feature: &'static str,
    pub reason: Option<StaleReason>,
    pub last_success: Option<String>,
}

/// Read-only view of the plan and its staleness, for `list` and `status`.
pub fn status(
    plan: &Plan,
    params: &ParamSet,
    targets: &[String],
) -> Result<Vec<StatusRow>, EngineError> {
    let selection = resolve_targets(plan, targets)?;
    let manifest = Manifest::load(&plan.dataset);
    let reasons = evaluate(plan, &manifest, params);
    Ok(selection
        .into_iter()
        .map(|idx| {
            let task = &plan.tasks[idx];
            StatusRow {
                task_id: task.task_id.clone(),
                piece: task.piece.clone(),
                feature: task.feature.name(),
                reason: reasons[idx].clone(),
                last_success: manifest
                    .states
                    .get(&task.task_id)
                    .map(|s| s.last_success.clone()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct CleanReport {
    pub tasks: Vec<String>,
    pub files_removed: usize,
}

/// Deletes outputs and manifest records of the selected tasks only; no
/// dependency closure is applied.
pub fn clean(plan: &Plan, targets: &[String]) -> Result<CleanReport, EngineError> {
    let selection = resolve_targets(plan, targets)?;
    let mut manifest = Manifest::load(&plan.dataset);
    let mut report = CleanReport::default();
    for idx in selection {
        let task = &plan.tasks[idx];
        for output in &task.outputs {
            match std::fs::remove_file(plan.abs(output)) {
                Ok(()) => report.files_removed += 1,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(EngineError::Io(e)),
            }
        }
        manifest.states.remove(&task.task_id);
        report.tasks.push(task.task_id.clone());
    }
    manifest.save(&plan.dataset)?;
    Ok(report)
}

/// Drops manifest records of the selected tasks, leaving outputs on disk.
pub fn forget(plan: &Plan, targets: &[String]) -> Result<usize, EngineError> {
    let selection = resolve_targets(plan, targets)?;
    let mut manifest = Manifest::load(&plan.dataset);
    let mut dropped = 0;
    for idx in selection {
        if manifest.states.remove(&plan.tasks[idx].task_id).is_some() {
            dropped += 1;
        }
    }
    manifest.save(&plan.dataset)?;
    Ok(dropped)
}

struct SchedState {
    ready: BinaryHeap<Reverse<usize>>,
    pending_deps: HashMap<usize, usize>,
    dependents: HashMap<usize, Vec<usize>>,
    done: HashMap<usize, Result<f64, String>>,
    skipped: HashMap<usize, String>,
    remaining: usize,
    manifest: Manifest,
    persists: usize,
}

struct Shared<'a> {
    plan: &'a Plan,
    params: &'a ParamSet,
    live_ids: BTreeSet<String>,
    exit_after: Option<usize>,
    state: Mutex<SchedState>,
    cond: Condvar,
}

/// Runs the selected targets plus their dependency closure.
pub fn run(
    plan: &Plan,
    params: &ParamSet,
    targets: &[String],
    options: &RunOptions,
) -> Result<RunReport, EngineError> {
    let selection = with_dependencies(plan, &resolve_targets(plan, targets)?);
    let manifest = Manifest::load(&plan.dataset);
    let reasons = evaluate(plan, &manifest, params);

    if options.dry_run {
        let rows = selection
            .iter()
            .map(|&idx| {
                let task = &plan.tasks[idx];
                TaskReport {
                    task_id: task.task_id.clone(),
                    piece: task.piece.clone(),
                    feature: task.feature.name(),
                    status: if reasons[idx].is_some() {
                        TaskStatus::WouldRun
                    } else {
                        TaskStatus::Fresh
                    },
                    reason: reasons[idx].clone(),
                    message: None,
                    seconds: 0.0,
                }
            })
            .collect();
        return Ok(RunReport { rows });
    }

    let stale: Vec<usize> = selection
        .iter()
        .copied()
        .filter(|&idx| reasons[idx].is_some())
        .collect();
    let stale_set: BTreeSet<usize> = stale.iter().copied().collect();

    let id_to_idx: HashMap<&str, usize> = plan
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.task_id.as_str(), i))
        .collect();
    let mut pending_deps = HashMap::new();
    let mut dependents: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut ready = BinaryHeap::new();
    for &idx in &stale {
        let stale_deps: Vec<usize> = plan.tasks[idx]
            .depends_on
            .iter()
            .map(|d| id_to_idx[d.as_str()])
            .filter(|d| stale_set.contains(d))
            .collect();
        if stale_deps.is_empty() {
            ready.push(Reverse(idx));
        }
        pending_deps.insert(idx, stale_deps.len());
        for dep in stale_deps {
            dependents.entry(dep).or_default().push(idx);
        }
    }

    let shared = Shared {
        plan,
        params,
        live_ids: plan.tasks.iter().map(|t| t.task_id.clone()).collect(),
        exit_after: std::env::var(EXIT_AFTER_ENV)
            .ok()
            .and_then(|v| v.parse().ok()),
        state: Mutex::new(SchedState {
            ready,
            pending_deps,
            dependents,
            done: HashMap::new(),
            skipped: HashMap::new(),
            remaining: stale.len(),
            manifest,
            persists: 0,
        }),
        cond: Condvar::new(),
    };

    let workers = options.jobs.clamp(1, 64).min(stale.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| worker(&shared));
        }
    });

    let state = shared.state.into_inner().expect("no worker panicked");
    let rows = selection
        .iter()
        .map(|&idx| {
            let task = &plan.tasks[idx];
            let (status, message, seconds) = match (state.done.get(&idx), state.skipped.get(&idx))
            {
                (Some(Ok(secs)), _) => (TaskStatus::Ran, None, *secs),
                (Some(Err(msg)), _) => (TaskStatus::Failed, Some(msg.clone()), 0.0),
                (None, Some(dep)) => (
                    TaskStatus::Skipped,
                    Some(format!("dependency {dep} failed")),
                    0.0,
                ),
                (None, None) => (TaskStatus::Fresh, None, 0.0),
            };
            TaskReport {
                task_id: task.task_id.clone(),
                piece: task.piece.clone(),
                feature: task.feature.name(),
                status,
                reason: reasons[idx].clone(),
                message,
                seconds,
            }
        })
        .collect();
    Ok(RunReport { rows })
}

fn worker(shared: &Shared<'_>) {
    loop {
        let idx = {
            let mut state = shared.state.lock().expect("scheduler lock");
            loop {
                if state.remaining == 0 {
                    return;
                }
                if let Some(Reverse(idx)) = state.ready.pop() {
                    break idx;
                }
                state = shared.cond.wait(state).expect("scheduler lock");
            }
        };

        let task = &shared.plan.tasks[idx];
        let started = Instant::now();
        let result = runner::run_task(shared.plan, task, shared.params);
        let elapsed = started.elapsed().as_secs_f64();

        let mut state = shared.state.lock().expect("scheduler lock");
        match result {
            Ok(outcome) => {
                state.manifest.states.insert(
                    task.task_id.clone(),
                    TaskState {
                        inputs: outcome.inputs,
                        params: params_digest(shared.params, task.feature.param_section()),
                        outputs: outcome.outputs,
                        last_success: chrono::Utc::now()
                            .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    },
                );
                state.manifest.prune(&shared.live_ids);
                match state.manifest.save(&shared.plan.dataset) {
                    Ok(()) => {
                        state.persists += 1;
                        if shared.exit_after == Some(state.persists) {
                            // Fault-injection hook used by crash tests.
                            std::process::exit(70);
                        }
                        state.done.insert(idx, Ok(elapsed));
                        state.remaining -= 1;
                        if let Some(deps) = state.dependents.get(&idx).cloned() {
                            for dependent in deps {
                                let pending = state
                                    .pending_deps
                                    .get_mut(&dependent)
                                    .expect("dependent is scheduled");
                                *pending -= 1;
                                if *pending == 0 {
                                    state.ready.push(Reverse(dependent));
                                }
                            }
                        }
                    }
                    Err(e) => {
                        state
                            .done
                            .insert(idx, Err(format!("persisting manifest: {e}")));
                        state.remaining -= 1;
                        skip_dependents(&mut state, idx, &task.task_id);
                    }
                }
            }
            Err(message) => {
                state.done.insert(idx, Err(message));
                state.remaining -= 1;
                skip_dependents(&mut state, idx, &task.task_id);
            }
        }
        shared.cond.notify_all();
    }
}

/// Marks every transitive dependent of `idx` skipped, charging the failure
/// to `failed_id`. Unrelated branches keep running.
fn skip_dependents(state: &mut SchedState, idx: usize, failed_id: &str) {
    let mut stack = vec![idx];
    while let Some(current) = stack.pop() {
        let deps = state.dependents.get(&current).cloned().unwrap_or_default();
        for dependent in deps {
            if state.done.contains_key(&dependent) || state.skipped.contains_key(&dependent) {
                continue;
            }
            state.skipped.insert(dependent, failed_id.to_string());
            state.remaining -= 1;
            stack.push(dependent);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::plan::build_plan;

    fn dataset_with(files: &[(&str, &[u8])]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, bytes) in files {
            std::fs::write(dir.path().join(name), bytes).unwrap();
        }
        dir
    }

    #[test]
    fn dry_run_reports_without_touching_disk() {
        let dir = dataset_with(&[("p.mid", b"x"), ("p_score.mid", b"y")]);
        let plan = build_plan(dir.path()).unwrap();
        let params = ParamSet::defaults();
        let report = run(
            &plan,
            &params,
            &[],
            &RunOptions {
                jobs: 2,
                dry_run: true,
            },
        )
        .unwrap();
        assert_eq!(report.count(TaskStatus::WouldRun), 5);
        assert!(!dir.path().join(".perfforge").exists());
        assert!(!dir.path().join("p_velocity.csv").exists());
    }

    #[test]
    fn status_is_read_only() {
        let dir = dataset_with(&[("p.mid", b"x")]);
        let plan = build_plan(dir.path()).unwrap();
        let rows = status(&plan, &ParamSet::defaults(), &[]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.reason.is_some()));
        assert!(rows.iter().all(|r| r.last_success.is_none()));
        assert!(!dir.path().join(".perfforge").exists());
    }

    #[test]
    fn clean_removes_outputs_and_records() {
        let dir = dataset_with(&[("p.mid", b"x"), ("p_velocity.csv", b"v")]);
        let plan = build_plan(dir.path()).unwrap();
        let report = clean(&plan, &["velocity".into()]).unwrap();
        assert_eq!(report.files_removed, 1);
        assert_eq!(report.tasks, ["velocity:p"]);
        assert!(!dir.path().join("p_velocity.csv").exists());
        // Untargeted outputs survive.
        assert!(dir.path().join("p.mid").exists());
    }

    #[test]
    fn forget_leaves_outputs() {
        let dir = dataset_with(&[("p.mid", b"x"), ("p_velocity.csv", b"v")]);
        let plan = build_plan(dir.path()).unwrap();
        assert_eq!(forget(&plan, &[]).unwrap(), 0);
        assert!(dir.path().join("p_velocity.csv").exists());
    }

    #[test]
    fn run_reports_parse_failures_per_task() {
        // Garbage performance MIDI: every task of the piece fails, none
        // crash the build.
        let dir = dataset_with(&[("p.mid", b"not midi")]);
        let plan = build_plan(dir.path()).unwrap();
        let report = run(&plan, &ParamSet::defaults(), &[], &RunOptions::default()).unwrap();
        assert_eq!(report.count(TaskStatus::Failed), 3);
        assert!(report.any_failed());
        for row in &report.rows {
            assert!(row.message.as_deref().unwrap().contains("p.mid"));
        }
    }

    #[test]
    fn failed_alignment_skips_beats_but_not_velocity() {
        let dir = dataset_with(&[("p.mid", b"not midi"), ("p_score.mid", b"also bad")]);
        let plan = build_plan(dir.path()).unwrap();
        let report = run(&plan, &ParamSet::defaults(), &[], &RunOptions::default()).unwrap();
        let by_id = |id: &str| report.rows.iter().find(|r| r.task_id == id).unwrap();
        assert_eq!(by_id("alignment:p").status, TaskStatus::Failed);
        assert_eq!(by_id("beats:p").status, TaskStatus::Skipped);
        assert!(by_id("beats:p")
            .message
            .as_deref()
            .unwrap()
            .contains("alignment:p"));
        // velocity also fails here (same bad file) but independently.
        assert_eq!(by_id("velocity:p").status, TaskStatus::Failed);
    }
}
