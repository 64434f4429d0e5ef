//! Staleness evaluation.
//!
//! A task is stale for the first reason that applies, checked in a fixed
//! order so reports are deterministic. Dependency staleness propagates
//! statically: a stale dependency marks every dependent stale up front,
//! which is sound because a fresh dependency is never re-run and so never
//! rewrites the inputs a dependent's recorded digests refer to.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::digest::digest_file;
use super::manifest::Manifest;
use super::plan::Plan;
use crate::config::ParamSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaleReason {
    NoRecord,
    InputMissing(String),
    InputChanged(String),
    ParamsChanged,
    OutputMissing(String),
    OutputChanged(String),
    DependencyStale(String),
}

impl fmt::Display for StaleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaleReason::NoRecord => write!(f, "no record of a previous run"),
            StaleReason::InputMissing(p) => write!(f, "input {p} missing"),
            StaleReason::InputChanged(p) => write!(f, "input {p} changed"),
            StaleReason::ParamsChanged => write!(f, "parameters changed"),
            StaleReason::OutputMissing(p) => write!(f, "output {p} missing"),
            StaleReason::OutputChanged(p) => write!(f, "output {p} changed"),
            StaleReason::DependencyStale(id) => write!(f, "dependency {id} is stale"),
        }
    }
}

/// Digest of the parameter section governing `section`, the value stored in
/// the manifest's `params` field.
pub fn params_digest(params: &ParamSet, section: &str) -> String {
    super::digest::digest_str(&params.section_text(section))
}

fn rel_str(path: &std::path::Path) -> String {
    path.to_string_lossy().into_owned()
}

/// Evaluates every task in plan order. `None` means fresh.
pub fn evaluate(plan: &Plan, manifest: &Manifest, params: &ParamSet) -> Vec<Option<StaleReason>> {
    let mut reasons: Vec<Option<StaleReason>> = Vec::with_capacity(plan.tasks.len());
    let mut stale_ids: HashMap<&str, bool> = HashMap::new();
    for task in &plan.tasks {
        let reason = (|| {
            if let Some(dep) = task
                .depends_on
                .iter()
                .find(|d| *stale_ids.get(d.as_str()).unwrap_or(&false))
            {
                // Checked last by priority, but computed first so the
                // closure below can return early on its own reasons.
                return evaluate_own(plan, manifest, params, task)
                    .or(Some(StaleReason::DependencyStale(dep.clone())));
            }
            evaluate_own(plan, manifest, params, task)
        })();
        stale_ids.insert(task.task_id.as_str(), reason.is_some());
        reasons.push(reason);
    }
    reasons
}

/// The task's own reasons, in priority order, ignoring dependencies.
fn evaluate_own(
    plan: &Plan,
    manifest: &Manifest,
    params: &ParamSet,
    task: &super::plan::TaskSpec,
) -> Option<StaleReason> {
    let Some(state) = manifest.states.get(&task.task_id) else {
        return Some(StaleReason::NoRecord);
    };
    let mut current_inputs = BTreeMap::new();
    for input in &task.inputs {
        let abs = plan.abs(input);
        let Ok(digest) = digest_file(&abs) else {
            return Some(StaleReason::InputMissing(rel_str(input)));
        };
        current_inputs.insert(rel_str(input), digest);
    }
    if current_inputs != state.inputs {
        let changed = task
            .inputs
            .iter()
            .map(|p| rel_str(p))
            .find(|p| current_inputs.get(p) != state.inputs.get(p))
            .unwrap_or_else(|| "input set".to_string());
        return Some(StaleReason::InputChanged(changed));
    }
    if params_digest(params, task.feature.param_section()) != state.params {
        return Some(StaleReason::ParamsChanged);
    }
    let mut current_outputs = BTreeMap::new();
    for output in &task.outputs {
        let abs = plan.abs(output);
        let Ok(digest) = digest_file(&abs) else {
            return Some(StaleReason::OutputMissing(rel_str(output)));
        };
        current_outputs.insert(rel_str(output), digest);
    }
    if current_outputs != state.outputs {
        let changed = task
            .outputs
            .iter()
            .map(|p| rel_str(p))
            .find(|p| current_outputs.get(p) != state.outputs.get(p))
            .unwrap_or_else(|| "output set".to_string());
        return Some(StaleReason::OutputChanged(changed));
    }
    None
}
