//! Dataset scanning.
//!
//! A piece is defined by its performance MIDI `<id>.mid`. A sibling
//! `<id>_score.mid` contributes the score and `<id>.wav` the audio; either
//! may be absent. Files whose stem ends in `_score` never define a piece of
//! their own, and files that pair with no performance are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceBundle {
    pub id: String,
    /// Performance MIDI, relative to the dataset root.
    pub performance: PathBuf,
    pub score: Option<PathBuf>,
    pub audio: Option<PathBuf>,
}

/// Scans the top level of `dataset` and returns bundles sorted by id.
pub fn discover_pieces(dataset: &Path) -> Result<Vec<PieceBundle>, EngineError> {
    if !dataset.is_dir() {
        return Err(EngineError::DatasetNotFound(dataset.display().to_string()));
    }
    let mut performances: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut scores: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut audio: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(dataset)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = match entry.file_name().into_string() {
            Ok(n) => n,
            Err(_) => continue,
        };
        let rel = PathBuf::from(&name);
        if let Some(stem) = name.strip_suffix(".mid") {
            if let Some(id) = stem.strip_suffix("_score") {
                scores.insert(id.to_string(), rel);
            } else {
                performances.insert(stem.to_string(), rel);
            }
        } else if let Some(stem) = name.strip_suffix(".wav") {
            audio.insert(stem.to_string(), rel);
        }
    }
    Ok(performances
        .into_iter()
        .map(|(id, performance)| PieceBundle {
            score: scores.remove(&id),
            audio: audio.remove(&id),
            id,
            performance,
        })
        .collect())
}
