//! Task graph construction and target resolution.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use super::discover::PieceBundle;
use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Alignment,
    Beats,
    Loudness,
    Pedal,
    Tension,
    Velocity,
}

pub const ALL_FEATURES: [Feature; 6] = [
    Feature::Alignment,
    Feature::Beats,
    Feature::Loudness,
    Feature::Pedal,
    Feature::Tension,
    Feature::Velocity,
];

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Alignment => "alignment",
            Feature::Beats => "beats",
            Feature::Loudness => "loudness",
            Feature::Pedal => "pedal",
            Feature::Tension => "tension",
            Feature::Velocity => "velocity",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        ALL_FEATURES.iter().copied().find(|f| f.name() == name)
    }

    /// Config section whose keys parameterize this feature.
    pub fn param_section(self) -> &'static str {
        match self {
            Feature::Alignment => "alignment",
            Feature::Beats => "beats",
            Feature::Loudness => "loudness",
            Feature::Pedal | Feature::Velocity => "dynamics",
            Feature::Tension => "tension",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    /// `<feature>:<piece>`, the stable identity used in the manifest.
    pub task_id: String,
    pub feature: Feature,
    pub piece: String,
    /// Dataset-relative input paths, order significant for reporting.
    pub inputs: Vec<PathBuf>,
    /// Dataset-relative output paths.
    pub outputs: Vec<PathBuf>,
    /// Task ids that must be fresh before this task runs.
    pub depends_on: Vec<String>,
}

impl TaskSpec {
    fn new(feature: Feature, piece: &str) -> TaskSpec {
        TaskSpec {
            task_id: format!("{}:{piece}", feature.name()),
            feature,
            piece: piece.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            depends_on: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub dataset: PathBuf,
    /// Tasks in dependency-safe order: pieces ascending, features ascending
    /// by name within a piece, which places alignment before beats.
    pub tasks: Vec<TaskSpec>,
}

impl Plan {
    pub fn abs(&self, rel: &Path) -> PathBuf {
        self.dataset.join(rel)
    }

    pub fn index_of(&self, task_id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.task_id == task_id)
    }
}

/// Builds the full task list for a set of pieces.
pub fn plan_tasks(pieces: &[PieceBundle]) -> Vec<TaskSpec> {
    let mut tasks = Vec::new();
    for piece in pieces {
        let csv = |suffix: &str| PathBuf::from(format!("{}_{suffix}.csv", piece.id));
        if let Some(score) = &piece.score {
            let mut t = TaskSpec::new(Feature::Alignment, &piece.id);
            t.inputs = vec![piece.performance.clone(), score.clone()];
            t.outputs = vec![csv("alignment")];
            tasks.push(t);

            let mut t = TaskSpec::new(Feature::Beats, &piece.id);
            t.inputs = vec![csv("alignment"), score.clone()];
            t.outputs = vec![csv("beats")];
            t.depends_on = vec![format!("alignment:{}", piece.id)];
            tasks.push(t);
        }
        if let Some(audio) = &piece.audio {
            let mut t = TaskSpec::new(Feature::Loudness, &piece.id);
            t.inputs = vec![audio.clone()];
            t.outputs = vec![csv("loudness")];
            tasks.push(t);
        }
        for feature in [Feature::Pedal, Feature::Tension, Feature::Velocity] {
            let mut t = TaskSpec::new(feature, &piece.id);
            t.inputs = vec![piece.performance.clone()];
            t.outputs = vec![csv(feature.name())];
            tasks.push(t);
        }
    }
    tasks
}

/// Discovers pieces under `dataset` and builds the plan.
pub fn build_plan(dataset: &Path) -> Result<Plan, EngineError> {
    let pieces = super::discover::discover_pieces(dataset)?;
    Ok(Plan {
        dataset: dataset.to_path_buf(),
        tasks: plan_tasks(&pieces),
    })
}

/// Maps target strings to task indices.
///
/// A target containing `:` names one task exactly; otherwise it selects
/// every task of the named feature, or every task of the named piece. An
/// empty target list selects everything. The result is sorted and
/// duplicate-free.
pub fn resolve_targets(plan: &Plan, targets: &[String]) -> Result<Vec<usize>, EngineError> {
    if targets.is_empty() {
        return Ok((0..plan.tasks.len()).collect());
    }
    let mut selected = BTreeSet::new();
    for target in targets {
        if target.contains(':') {
            match plan.index_of(target) {
                Some(idx) => {
                    selected.insert(idx);
                }
                None => return Err(EngineError::UnknownTarget(target.clone())),
            }
        } else if let Some(feature) = Feature::from_name(target) {
            selected.extend(
                plan.tasks
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.feature == feature)
                    .map(|(i, _)| i),
            );
        } else if plan.tasks.iter().any(|t| t.piece == *target) {
            selected.extend(
                plan.tasks
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.piece == *target)
                    .map(|(i, _)| i),
            );
        } else {
            return Err(EngineError::UnknownTarget(target.clone()));
        }
    }
    Ok(selected.into_iter().collect())
}

/// Extends a selection with every transitive dependency.
pub fn with_dependencies(plan: &Plan, selection: &[usize]) -> Vec<usize> {
    let by_id: HashMap<&str, usize> = plan
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.task_id.as_str(), i))
        .collect();
    let mut seen: BTreeSet<usize> = selection.iter().copied().collect();
    let mut queue: Vec<usize> = selection.to_vec();
    while let Some(idx) = queue.pop() {
        for dep in &plan.tasks[idx].depends_on {
            let dep_idx = by_id[dep.as_str()];
            if seen.insert(dep_idx) {
                queue.push(dep_idx);
            }
        }
    }
    seen.into_iter().collect()
}
