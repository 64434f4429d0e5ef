//! Executes one task: reads inputs, computes the feature, writes the CSV.

use std::collections::BTreeMap;
use std::path::Path;

use crate::alignment::{align, ScoreNote};
use crate::beats::{anchor_points, interpolate_beats, score_beat_grid};
use crate::config::ParamSet;
use crate::csvio;
use crate::dynamics::{pedal_series, velocity_series};
use crate::engine::digest::{digest_bytes, digest_file};
use crate::engine::plan::{Feature, Plan, TaskSpec};
use crate::loudness::loudness_series;
use crate::midi::{
    extract_notes, extract_pedal, extract_tick_notes, parse_smf, MidiFile, SUSTAIN_CONTROLLER,
};
use crate::tension::tension_series;

/// Digests observed while executing a task, recorded in the manifest.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn parse_midi(bytes: &[u8], path: &Path) -> Result<MidiFile, String> {
    parse_smf(bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Score notes in beat domain, sorted by (beats, pitch); the row index is
/// the score note id reported in alignment output.
pub fn score_notes_in_beats(file: &MidiFile) -> Vec<ScoreNote> {
    let (ticks, _) = extract_tick_notes(file);
    let ppq = f64::from(file.ppq);
    let mut notes: Vec<ScoreNote> = ticks
        .iter()
        .map(|n| ScoreNote {
            pitch: n.pitch,
            beats: n.on_tick as f64 / ppq,
        })
        .collect();
    notes.sort_by(|a, b| a.beats.total_cmp(&b.beats).then(a.pitch.cmp(&b.pitch)));
    notes
}

/// Runs `task` to completion. Errors are rendered as messages; the caller
/// decides scheduling consequences.
pub fn run_task(plan: &Plan, task: &TaskSpec, params: &ParamSet) -> Result<TaskOutcome, String> {
    let mut inputs = BTreeMap::new();
    let mut raw: Vec<Vec<u8>> = Vec::with_capacity(task.inputs.len());
    for input in &task.inputs {
        let abs = plan.abs(input);
        let bytes =
            std::fs::read(&abs).map_err(|e| format!("reading {}: {e}", input.display()))?;
        inputs.insert(input.to_string_lossy().into_owned(), digest_bytes(&bytes));
        raw.push(bytes);
    }

    let out_path = plan.abs(&task.outputs[0]);
    let io_err = |e: std::io::Error| format!("writing {}: {e}", task.outputs[0].display());
    match task.feature {
        Feature::Velocity => {
            let file = parse_midi(&raw[0], &task.inputs[0])?;
            let (notes, _) = extract_notes(&file);
            csvio::write_velocity_csv(&out_path, &velocity_series(&notes)).map_err(io_err)?;
        }
        Feature::Pedal => {
            let file = parse_midi(&raw[0], &task.inputs[0])?;
            let events = extract_pedal(&file, SUSTAIN_CONTROLLER);
            let records =
                pedal_series(&events, params.pedal_threshold()).map_err(|e| e.to_string())?;
            csvio::write_pedal_csv(&out_path, &records).map_err(io_err)?;
        }
        Feature::Tension => {
            let file = parse_midi(&raw[0], &task.inputs[0])?;
            let (notes, _) = extract_notes(&file);
            let frames = tension_series(&notes, &params.tension());
            csvio::write_tension_csv(&out_path, &frames).map_err(io_err)?;
        }
        Feature::Loudness => {
            let buffer = crate::audio::read_wav(&raw[0])
                .map_err(|e| format!("{}: {e}", task.inputs[0].display()))?;
            let frames =
                loudness_series(&buffer, &params.loudness()).map_err(|e| e.to_string())?;
            csvio::write_loudness_csv(&out_path, &frames).map_err(io_err)?;
        }
        Feature::Alignment => {
            let perf = parse_midi(&raw[0], &task.inputs[0])?;
            let score = parse_midi(&raw[1], &task.inputs[1])?;
            let score_notes = score_notes_in_beats(&score);
            let (perf_notes, _) = extract_notes(&perf);
            let rows = align(&score_notes, &perf_notes, &params.alignment())
                .map_err(|e| e.to_string())?;
            csvio::write_alignment_csv(&out_path, &rows).map_err(io_err)?;
        }
        Feature::Beats => {
            let rows = csvio::read_alignment_csv(&plan.abs(&task.inputs[0]))
                .map_err(|e| e.to_string())?;
            let score = parse_midi(&raw[1], &task.inputs[1])?;
            let subdivision = params.beats_subdivision();
            let grid = score_beat_grid(&score, subdivision).map_err(|e| e.to_string())?;
            let anchors = anchor_points(&rows).map_err(|e| e.to_string())?;
            let records =
                interpolate_beats(&grid, &anchors, subdivision).map_err(|e| e.to_string())?;
            csvio::write_beats_csv(&out_path, &records).map_err(io_err)?;
        }
    }

    let mut outputs = BTreeMap::new();
    for output in &task.outputs {
        let digest = digest_file(&plan.abs(output))
            .map_err(|e| format!("digesting {}: {e}", output.display()))?;
        outputs.insert(output.to_string_lossy().into_owned(), digest);
    }
    Ok(TaskOutcome { inputs, outputs })
}
