//! Note-velocity and sustain-pedal time series.

use thiserror::Error;

use crate::midi::{MidiNote, PedalEvent};

pub const DEFAULT_PEDAL_THRESHOLD: u8 = 64;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityRecord {
    pub time_s: f64,
    pub pitch: u8,
    pub velocity: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedalRecord {
    pub time_s: f64,
    pub value: u8,
    pub engaged: bool,
}

/// One record per note at its onset, ordered by (time, pitch).
pub fn velocity_series(notes: &[MidiNote]) -> Vec<VelocityRecord> {
    let mut records: Vec<VelocityRecord> = notes
        .iter()
        .map(|n| VelocityRecord {
            time_s: n.onset_s,
            pitch: n.pitch,
            velocity: n.velocity,
        })
        .collect();
    records.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.pitch.cmp(&b.pitch)));
    records
}

/// One record per pedal event; engaged iff value >= threshold. Duplicate
/// consecutive values are preserved.
pub fn pedal_series(
    events: &[PedalEvent],
    threshold: u8,
) -> Result<Vec<PedalRecord>, DynamicsError> {
    if !(1..=127).contains(&threshold) {
        return Err(DynamicsError::InvalidParams(format!(
            "pedal threshold {threshold} outside 1..=127"
        )));
    }
    Ok(events
        .iter()
        .map(|e| PedalRecord {
            time_s: e.time_s,
            value: e.value,
            engaged: e.value >= threshold,
        })
        .collect())
}
