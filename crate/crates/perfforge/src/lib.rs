//! Incremental feature extraction for recorded music performances.
//!
//! A dataset directory holds one subdirectory per piece, each containing a
//! performance MIDI file and optionally a score MIDI and an audio recording.
//! The pipeline derives per-performance feature tables (note velocities,
//! sustain pedal, loudness, score alignment, beats, tonal tension) and writes
//! them as CSV next to a state manifest that makes re-runs incremental: only
//! work invalidated by changed inputs or parameters is redone.

pub mod alignment;
pub mod audio;
pub mod beats;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod dynamics;
pub mod engine;
pub mod loudness;
pub mod midi;
pub mod tension;
