//! Build state persisted across runs.
//!
//! The manifest maps task ids to the digests observed at their last
//! successful execution. It lives at `.perfforge/state.json` under the
//! dataset root and is rewritten atomically after every task success, so a
//! killed build never records a task whose outputs were not yet on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_DIR: &str = ".perfforge";
pub const MANIFEST_FILE: &str = "state.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TaskState {
    /// Input path (dataset-relative) to content digest.
    pub inputs: BTreeMap<String, String>,
    /// Digest of the task's parameter section.
    pub params: String,
    /// Output path (dataset-relative) to content digest.
    pub outputs: BTreeMap<String, String>,
    /// RFC 3339 timestamp of the last successful run.
    pub last_success: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub version: u32,
    pub states: BTreeMap<String, TaskState>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            states: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn path(dataset: &Path) -> PathBuf {
        dataset.join(MANIFEST_DIR).join(MANIFEST_FILE)
    }

    /// Loads the manifest, treating a missing, unreadable, or
    /// unknown-version file as empty state.
    pub fn load(dataset: &Path) -> Manifest {
        let Ok(bytes) = std::fs::read(Self::path(dataset)) else {
            return Manifest::default();
        };
        match serde_json::from_slice::<Manifest>(&bytes) {
            Ok(m) if m.version == MANIFEST_VERSION => m,
            _ => Manifest::default(),
        }
    }

    /// Writes the manifest atomically, creating `.perfforge/` if needed.
    pub fn save(&self, dataset: &Path) -> std::io::Result<()> {
        let path = Self::path(dataset);
        std::fs::create_dir_all(path.parent().expect("manifest path has a parent"))?;
        let mut body = serde_json::to_vec_pretty(self).expect("manifest serializes");
        body.push(b'\n');
        crate::csvio::write_atomic(&path, &body)
    }

    /// Drops states for tasks no longer present in the plan.
    pub fn prune(&mut self, live_task_ids: &std::collections::BTreeSet<String>) {
        self.states.retain(|id, _| live_task_ids.contains(id));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        let mut m = Manifest::default();
        m.states.insert(
            "velocity:waltz".into(),
            TaskState {
                inputs: BTreeMap::from([("waltz.mid".into(), "aa".into())]),
                params: "bb".into(),
                outputs: BTreeMap::from([("waltz_velocity.csv".into(), "cc".into())]),
                last_success: "2024-05-01T10:00:00Z".into(),
            },
        );
        m
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        m.save(dir.path()).unwrap();
        assert!(Manifest::path(dir.path()).is_file());
        assert_eq!(Manifest::load(dir.path()), m);
    }

    #[test]
    fn missing_or_corrupt_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Manifest::load(dir.path()).states.is_empty());
        std::fs::create_dir_all(dir.path().join(MANIFEST_DIR)).unwrap();
        std::fs::write(Manifest::path(dir.path()), b"{ not json").unwrap();
        assert!(Manifest::load(dir.path()).states.is_empty());
    }

    #[test]
    fn unknown_version_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = sample();
        m.version = 99;
        std::fs::create_dir_all(dir.path().join(MANIFEST_DIR)).unwrap();
        std::fs::write(
            Manifest::path(dir.path()),
            serde_json::to_vec(&m).unwrap(),
        )
        .unwrap();
        assert!(Manifest::load(dir.path()).states.is_empty());
    }

    #[test]
    fn prune_drops_dead_tasks() {
        let mut m = sample();
        m.prune(&std::collections::BTreeSet::new());
        assert!(m.states.is_empty());
    }
}
