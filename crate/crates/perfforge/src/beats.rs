//! Performed beat times and local tempo from the alignment.
//!
//! A quarter-note grid over the score is mapped to performance time by
//! piecewise-linear interpolation between anchors, where an anchor is the
//! median performed onset of the matched notes at one score position.

use thiserror::Error;

use crate::alignment::{AlignStatus, AlignedNote};
use crate::midi::{extract_tick_notes, MidiFile};

#[derive(Debug, Error)]
pub enum BeatsError {
    #[error("fewer than two usable anchors")]
    InsufficientAnchors,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatRecord {
    pub index: usize,
    pub score_beats: f64,
    pub perf_time_s: f64,
    /// Tempo to the next beat; absent on the last record.
    pub local_bpm: Option<f64>,
    /// True when no anchor lies within half a grid step of this beat.
    pub interpolated: bool,
}

/// Quarter-note grid from beat 0 through the last score onset, inclusive of
/// the covering beat, at 1/subdivision steps.
pub fn score_beat_grid(score: &MidiFile, subdivision: u32) -> Result<Vec<f64>, BeatsError> {
    if subdivision < 1 {
        return Err(BeatsError::InvalidParams(
            "subdivision must be at least 1".into(),
        ));
    }
    let (notes, _) = extract_tick_notes(score);
    if notes.is_empty() {
        return Ok(Vec::new());
    }
    let ppq = f64::from(score.ppq);
    let last = notes
        .iter()
        .map(|n| n.on_tick as f64 / ppq)
        .fold(0.0, f64::max);
    let top = (last * f64::from(subdivision)).ceil() as u64;
    Ok((0..=top)
        .map(|k| k as f64 / f64::from(subdivision))
        .collect())
}

/// Derives (score_beats, perf_time) anchors from matched notes.
///
/// Matched notes are grouped by score position; each group's time is the
/// median of its onsets. Groups that would move backwards in time are
/// dropped, keeping the earlier anchor.
pub fn anchor_points(aligned: &[AlignedNote]) -> Result<Vec<(f64, f64)>, BeatsError> {
    let mut pairs: Vec<(f64, f64)> = aligned
        .iter()
        .filter(|r| r.status == AlignStatus::Matched)
        .filter_map(|r| Some((r.score_beats?, r.perf_time_s?)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut anchors: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let beat = pairs[i].0;
        let mut times: Vec<f64> = Vec::new();
        while i < pairs.len() && pairs[i].0 == beat {
            times.push(pairs[i].1);
            i += 1;
        }
        let mid = times.len() / 2;
        let median = if times.len() % 2 == 1 {
            times[mid]
        } else {
            (times[mid - 1] + times[mid]) / 2.0
        };
        match anchors.last() {
            Some(&(_, prev)) if median <= prev => {}
            _ => anchors.push((beat, median)),
        }
    }
    if anchors.len() < 2 {
        return Err(BeatsError::InsufficientAnchors);
    }
    Ok(anchors)
}

/// Maps the grid to performance time over the anchors.
///
/// Beats outside the anchor span extrapolate with the nearest segment's
/// slope. local_bpm is the tempo toward the following beat.
pub fn interpolate_beats(
    grid: &[f64],
    anchors: &[(f64, f64)],
    subdivision: u32,
) -> Result<Vec<BeatRecord>, BeatsError> {
    if anchors.len() < 2 {
        return Err(BeatsError::InsufficientAnchors);
    }
    if subdivision < 1 {
        return Err(BeatsError::InvalidParams(
            "subdivision must be at least 1".into(),
        ));
    }
    debug_assert!(anchors.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));

    let near = 0.5 / f64::from(subdivision);
    let times: Vec<f64> = grid
        .iter()
        .map(|&beat| {
            // Segment index clamped so outside beats reuse the edge slope.
            let seg = anchors
                .partition_point(|a| a.0 <= beat)
                .clamp(1, anchors.len() - 1)
                - 1;
            let (b0, t0) = anchors[seg];
            let (b1, t1) = anchors[seg + 1];
            t0 + (beat - b0) * (t1 - t0) / (b1 - b0)
        })
        .collect();

    Ok(grid
        .iter()
        .enumerate()
        .map(|(index, &beat)| {
            let local_bpm = (index + 1 < grid.len()).then(|| {
                60.0 * (grid[index + 1] - beat) / (times[index + 1] - times[index])
            });
            let idx = anchors.partition_point(|a| a.0 < beat);
            let mut dist = f64::INFINITY;
            if idx < anchors.len() {
                dist = dist.min((anchors[idx].0 - beat).abs());
            }
            if idx > 0 {
                dist = dist.min((beat - anchors[idx - 1].0).abs());
            }
            BeatRecord {
                index,
                score_beats: beat,
                perf_time_s: times[index],
                local_bpm,
                interpolated: dist > near,
            }
        })
        .collect())
}
