//! Score-to-performance alignment via chord-level dynamic time warping.
//!
//! Both note streams are grouped into chords (greedy onset clustering
//! anchored at the chord start), chords are compared by Jaccard distance on
//! pitch sets, and a full-sequence DTW with gap steps produces the minimum
//! cost monotone path. Matched chord pairs are then expanded to note-level
//! correspondences.

use thiserror::Error;

use crate::midi::MidiNote;

/// Onset clustering width for performance notes, in seconds.
pub const DEFAULT_CHORD_EPSILON_S: f64 = 0.03;
/// Cost of skipping one chord on either side.
pub const DEFAULT_GAP_COST: f64 = 0.75;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("empty {0} chord sequence")]
    EmptySequence(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentParams {
    pub chord_epsilon_s: f64,
    pub gap_cost: f64,
}

impl Default for AlignmentParams {
    fn default() -> AlignmentParams {
        AlignmentParams {
            chord_epsilon_s: DEFAULT_CHORD_EPSILON_S,
            gap_cost: DEFAULT_GAP_COST,
        }
    }
}

/// A note of the score reference; onset in quarter-note beats.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNote {
    pub pitch: u8,
    pub beats: f64,
}

/// A group of (near-)simultaneous notes.
#[derive(Debug, Clone, PartialEq)]
pub struct Chord {
    pub onset: f64,
    /// Distinct pitches, sorted.
    pub pitches: Vec<u8>,
    /// Indices of all member notes, duplicates included.
    pub note_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Match(usize, usize),
    SkipScore(usize),
    SkipPerf(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub steps: Vec<Step>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStatus {
    Matched,
    Deletion,
    Insertion,
}

impl AlignStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignStatus::Matched => "matched",
            AlignStatus::Deletion => "deletion",
            AlignStatus::Insertion => "insertion",
        }
    }
}

/// One row of the alignment result. Insertions carry score_note_id -1 and
/// no score position; deletions carry no performance data.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedNote {
    pub score_note_id: i64,
    pub pitch: u8,
    pub score_beats: Option<f64>,
    pub perf_time_s: Option<f64>,
    pub velocity: Option<u8>,
    pub status: AlignStatus,
}

/// Greedy left-to-right chord grouping of (onset, pitch) notes.
///
/// A note joins the current chord iff its onset is within epsilon of the
/// chord's first onset; note ids are positions in the input slice.
pub fn chordify(notes: &[(f64, u8)], epsilon: f64) -> Vec<Chord> {
    debug_assert!(notes.windows(2).all(|w| w[0].0 <= w[1].0));
    let mut chords: Vec<Chord> = Vec::new();
    for (id, &(onset, pitch)) in notes.iter().enumerate() {
        match chords.last_mut() {
            Some(chord) if onset - chord.onset <= epsilon => {
                if let Err(pos) = chord.pitches.binary_search(&pitch) {
                    chord.pitches.insert(pos, pitch);
                }
                chord.note_ids.push(id);
            }
            _ => chords.push(Chord {
                onset,
                pitches: vec![pitch],
                note_ids: vec![id],
            }),
        }
    }
    chords
}

/// Jaccard distance between the chords' pitch sets.
pub fn chord_distance(a: &Chord, b: &Chord) -> f64 {
    let mut inter = 0usize;
    let mut i = 0;
    let mut j = 0;
    while i < a.pitches.len() && j < b.pitches.len() {
        match a.pitches[i].cmp(&b.pitches[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.pitches.len() + b.pitches.len() - inter;
    1.0 - inter as f64 / union as f64
}

/// Full-sequence DTW over chords with gap steps.
///
/// Ties prefer match, then skip-score, then skip-perf. The backtrace
/// recomputes the recurrence's expressions, so exact float equality
/// identifies the step taken.
pub fn dtw_align(
    score: &[Chord],
    perf: &[Chord],
    gap_cost: f64,
) -> Result<AlignmentPath, AlignError> {
    if score.is_empty() {
        return Err(AlignError::EmptySequence("score"));
    }
    if perf.is_empty() {
        return Err(AlignError::EmptySequence("performance"));
    }
    let m = score.len();
    let n = perf.len();
    let mut cost = vec![vec![0.0f64; n + 1]; m + 1];
    for i in 1..=m {
        cost[i][0] = cost[i - 1][0] + gap_cost;
    }
    for j in 1..=n {
        cost[0][j] = cost[0][j - 1] + gap_cost;
    }
    for i in 1..=m {
        for j in 1..=n {
            let matched = cost[i - 1][j - 1] + chord_distance(&score[i - 1], &perf[j - 1]);
            let skip_score = cost[i - 1][j] + gap_cost;
            let skip_perf = cost[i][j - 1] + gap_cost;
            cost[i][j] = matched.min(skip_score).min(skip_perf);
        }
    }

    let mut steps = Vec::with_capacity(m + n);
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        if i > 0
            && j > 0
            && cost[i][j] == cost[i - 1][j - 1] + chord_distance(&score[i - 1], &perf[j - 1])
        {
            steps.push(Step::Match(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && cost[i][j] == cost[i - 1][j] + gap_cost {
            steps.push(Step::SkipScore(i - 1));
            i -= 1;
        } else {
            steps.push(Step::SkipPerf(j - 1));
            j -= 1;
        }
    }
    steps.reverse();
    Ok(AlignmentPath {
        steps,
        cost: cost[m][n],
    })
}

/// Expands a chord path into note-level matches.
///
/// Within a matched chord pair, equal pitches pair lowest-id first; leftover
/// score notes become deletions and leftover performance notes insertions.
/// Rows are ordered by (score_beats, pitch, id), with insertions appended
/// by (perf_time, pitch, id).
pub fn note_matches(
    path: &AlignmentPath,
    score_chords: &[Chord],
    perf_chords: &[Chord],
    score_notes: &[ScoreNote],
    perf_notes: &[MidiNote],
) -> Vec<AlignedNote> {
    let mut rows = Vec::with_capacity(score_notes.len() + perf_notes.len());
    let deletion = |id: usize| AlignedNote {
        score_note_id: id as i64,
        pitch: score_notes[id].pitch,
        score_beats: Some(score_notes[id].beats),
        perf_time_s: None,
        velocity: None,
        status: AlignStatus::Deletion,
    };
    let insertion = |id: usize| AlignedNote {
        score_note_id: -1,
        pitch: perf_notes[id].pitch,
        score_beats: None,
        perf_time_s: Some(perf_notes[id].onset_s),
        velocity: Some(perf_notes[id].velocity),
        status: AlignStatus::Insertion,
    };
    for step in &path.steps {
        match *step {
            Step::SkipScore(i) => {
                rows.extend(score_chords[i].note_ids.iter().map(|&id| deletion(id)));
            }
            Step::SkipPerf(j) => {
                rows.extend(perf_chords[j].note_ids.iter().map(|&id| insertion(id)));
            }
            Step::Match(i, j) => {
                let sc = &score_chords[i];
                let pc = &perf_chords[j];
                for &pitch in &sc.pitches {
                    let mut s_ids: Vec<usize> = sc
                        .note_ids
                        .iter()
                        .copied()
                        .filter(|&id| score_notes[id].pitch == pitch)
                        .collect();
                    s_ids.sort_unstable();
                    let mut p_ids: Vec<usize> = pc
                        .note_ids
                        .iter()
                        .copied()
                        .filter(|&id| perf_notes[id].pitch == pitch)
                        .collect();
                    p_ids.sort_unstable();
                    let paired = s_ids.len().min(p_ids.len());
                    for k in 0..paired {
                        rows.push(AlignedNote {
                            score_note_id: s_ids[k] as i64,
                            pitch,
                            score_beats: Some(score_notes[s_ids[k]].beats),
                            perf_time_s: Some(perf_notes[p_ids[k]].onset_s),
                            velocity: Some(perf_notes[p_ids[k]].velocity),
                            status: AlignStatus::Matched,
                        });
                    }
                    rows.extend(s_ids[paired..].iter().map(|&id| deletion(id)));
                    rows.extend(p_ids[paired..].iter().map(|&id| insertion(id)));
                }
                // Performance pitches absent from the score chord.
                for &id in &pc.note_ids {
                    if sc.pitches.binary_search(&perf_notes[id].pitch).is_err() {
                        rows.push(insertion(id));
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        let key = |r: &AlignedNote| {
            (
                r.score_beats.is_none(),
                r.score_beats
                    .unwrap_or_else(|| r.perf_time_s.unwrap_or(0.0)),
                r.pitch,
                r.score_note_id,
                r.perf_time_s.unwrap_or(-1.0),
            )
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(ka.4.total_cmp(&kb.4))
    });
    rows
}

/// End-to-end alignment of performance notes against score notes.
pub fn align(
    score_notes: &[ScoreNote],
    perf_notes: &[MidiNote],
    params: &AlignmentParams,
) -> Result<Vec<AlignedNote>, AlignError> {
    debug_assert!(score_notes.windows(2).all(|w| w[0].beats <= w[1].beats));
    debug_assert!(perf_notes.windows(2).all(|w| w[0].onset_s <= w[1].onset_s));
    let score_pairs: Vec<(f64, u8)> = score_notes.iter().map(|n| (n.beats, n.pitch)).collect();
    let perf_pairs: Vec<(f64, u8)> = perf_notes.iter().map(|n| (n.onset_s, n.pitch)).collect();
    // Score chords group exact-tick onsets only.
    let score_chords = chordify(&score_pairs, 0.0);
    let perf_chords = chordify(&perf_pairs, params.chord_epsilon_s);
    let path = dtw_align(&score_chords, &perf_chords, params.gap_cost)?;
    Ok(note_matches(
        &path,
        &score_chords,
        &perf_chords,
        score_notes,
        perf_notes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chord(onset: f64, pitches: &[u8]) -> Chord {
        let mut sorted: Vec<u8> = pitches.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Chord {
            onset,
            pitches: sorted,
            note_ids: (0..pitches.len()).collect(),
        }
    }

    fn perf_note(onset: f64, pitch: u8, velocity: u8) -> MidiNote {
        MidiNote {
            onset_s: onset,
            duration_s: 0.5,
            pitch,
            velocity,
            channel: 0,
            track: 0,
        }
    }

    fn path_cost_left_to_right(
        path: &AlignmentPath,
        score: &[Chord],
        perf: &[Chord],
        gap: f64,
    ) -> f64 {
        let mut acc = 0.0;
        for step in &path.steps {
            acc += match *step {
                Step::Match(i, j) => chord_distance(&score[i], &perf[j]),
                _ => gap,
            };
        }
        acc
    }

    #[test]
    fn chordify_threshold_rule() {
        let chords = chordify(&[(0.0, 60), (0.01, 64), (0.5, 67)], 0.03);
        assert_eq!(chords.len(), 2);
        assert_eq!(chords[0].pitches, vec![60, 64]);
        assert_eq!(chords[0].note_ids, vec![0, 1]);
        assert_eq!(chords[1].pitches, vec![67]);
    }

    #[test]
    fn chordify_zero_epsilon_splits_distinct_onsets() {
        let chords = chordify(&[(0.0, 60), (0.0, 64), (1.0, 67)], 0.0);
        assert_eq!(chords.len(), 2);
        assert_eq!(chords[0].pitches, vec![60, 64]);
    }

    #[test]
    fn chordify_anchors_at_chord_start() {
        // 0.04 is beyond epsilon of the chord start even though it is
        // within epsilon of the previous note.
        let chords = chordify(&[(0.0, 60), (0.02, 64), (0.04, 67)], 0.03);
        assert_eq!(chords.len(), 2);
        assert_eq!(chords[0].pitches, vec![60, 64]);
        assert_eq!(chords[1].pitches, vec![67]);
    }

    #[test]
    fn chordify_collapses_duplicate_pitches() {
        let chords = chordify(&[(0.0, 60), (0.005, 60)], 0.03);
        assert_eq!(chords.len(), 1);
        assert_eq!(chords[0].pitches, vec![60]);
        assert_eq!(chords[0].note_ids, vec![0, 1]);
    }

    #[test]
    fn chord_distance_cases() {
        let a = chord(0.0, &[60, 64, 67]);
        assert_eq!(chord_distance(&a, &a), 0.0);
        let disjoint = chord(0.0, &[40, 41]);
        assert_eq!(chord_distance(&a, &disjoint), 1.0);
        let partial = chord(0.0, &[60, 64]);
        assert!((chord_distance(&a, &partial) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_sequences_align_on_diagonal() {
        let seq = vec![chord(0.0, &[60]), chord(1.0, &[62, 65]), chord(2.0, &[64])];
        let path = dtw_align(&seq, &seq, 0.75).unwrap();
        assert_eq!(path.cost, 0.0);
        assert_eq!(
            path.steps,
            vec![Step::Match(0, 0), Step::Match(1, 1), Step::Match(2, 2)]
        );
    }

    #[test]
    fn disjoint_extra_chord_is_skipped() {
        let score = vec![chord(0.0, &[60]), chord(1.0, &[64])];
        let perf = vec![chord(0.0, &[60]), chord(0.5, &[30]), chord(1.0, &[64])];
        let path = dtw_align(&score, &perf, 0.75).unwrap();
        assert!(path.steps.contains(&Step::SkipPerf(1)));
        assert_eq!(path.cost, 0.75);
    }

    #[test]
    fn empty_sequences_rejected() {
        let seq = vec![chord(0.0, &[60])];
        assert!(matches!(
            dtw_align(&[], &seq, 0.75),
            Err(AlignError::EmptySequence("score"))
        ));
        assert!(matches!(
            dtw_align(&seq, &[], 0.75),
            Err(AlignError::EmptySequence("performance"))
        ));
    }

    #[test]
    fn cost_is_symmetric() {
        let a = vec![chord(0.0, &[60, 64]), chord(1.0, &[65]), chord(2.0, &[67])];
        let b = vec![chord(0.0, &[60]), chord(1.0, &[65, 69])];
        let ab = dtw_align(&a, &b, 0.75).unwrap();
        let ba = dtw_align(&b, &a, 0.75).unwrap();
        assert_eq!(ab.cost, ba.cost);
    }

    fn brute_force_min(score: &[Chord], perf: &[Chord], gap: f64) -> f64 {
        // Exhaustive enumeration of monotone paths, accumulating cost left
        // to right exactly as the DP does.
        fn go(score: &[Chord], perf: &[Chord], i: usize, j: usize, acc: f64, gap: f64, best: &mut f64) {
            if i == score.len() && j == perf.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i < score.len() && j < perf.len() {
                let d = chord_distance(&score[i], &perf[j]);
                go(score, perf, i + 1, j + 1, acc + d, gap, best);
            }
            if i < score.len() {
                go(score, perf, i + 1, j, acc + gap, gap, best);
            }
            if j < perf.len() {
                go(score, perf, i, j + 1, acc + gap, gap, best);
            }
        }
        let mut best = f64::INFINITY;
        go(score, perf, 0, 0, 0.0, gap, &mut best);
        best
    }

    fn pseudo_chords(seed: u64, len: usize) -> Vec<Chord> {
        // Small deterministic generator; pitch sets of size 1..=3.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        (0..len)
            .map(|i| {
                let size = 1 + (next() % 3) as usize;
                let pitches: Vec<u8> = (0..size).map(|_| 48 + (next() % 16) as u8).collect();
                chord(i as f64, &pitches)
            })
            .collect()
    }

    #[test]
    fn dp_matches_brute_force_on_random_pairs() {
        for seed in 0..200u64 {
            let m = 1 + (seed % 8) as usize;
            let n = 1 + ((seed / 8) % 8) as usize;
            let score = pseudo_chords(seed * 2 + 1, m);
            let perf = pseudo_chords(seed * 2 + 2, n);
            let path = dtw_align(&score, &perf, 0.75).unwrap();
            let brute = brute_force_min(&score, &perf, 0.75);
            assert_eq!(path.cost, brute, "seed {seed}");
            let recomputed = path_cost_left_to_right(&path, &score, &perf, 0.75);
            assert_eq!(recomputed, path.cost, "seed {seed}");
        }
    }

    #[test]
    fn path_is_monotone_and_total() {
        for seed in 0..50u64 {
            let score = pseudo_chords(seed + 1000, 1 + (seed % 7) as usize);
            let perf = pseudo_chords(seed + 2000, 1 + ((seed * 3) % 7) as usize);
            let path = dtw_align(&score, &perf, 0.75).unwrap();
            let mut next_i = 0;
            let mut next_j = 0;
            for step in &path.steps {
                match *step {
                    Step::Match(i, j) => {
                        assert_eq!((i, j), (next_i, next_j));
                        next_i += 1;
                        next_j += 1;
                    }
                    Step::SkipScore(i) => {
                        assert_eq!(i, next_i);
                        next_i += 1;
                    }
                    Step::SkipPerf(j) => {
                        assert_eq!(j, next_j);
                        next_j += 1;
                    }
                }
            }
            assert_eq!(next_i, score.len());
            assert_eq!(next_j, perf.len());
        }
    }

    #[test]
    fn perfect_performance_fully_matched() {
        let score_notes = vec![
            ScoreNote { pitch: 60, beats: 0.0 },
            ScoreNote { pitch: 64, beats: 0.0 },
            ScoreNote { pitch: 67, beats: 1.0 },
        ];
        let perf_notes = vec![
            perf_note(0.0, 60, 80),
            perf_note(0.01, 64, 70),
            perf_note(0.5, 67, 60),
        ];
        let rows = align(&score_notes, &perf_notes, &AlignmentParams::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.status == AlignStatus::Matched));
        assert_eq!(rows[0].velocity, Some(80));
        assert_eq!(rows[0].perf_time_s, Some(0.0));
        assert_eq!(rows[2].score_beats, Some(1.0));
    }

    #[test]
    fn missing_pitch_becomes_deletion() {
        let score = vec![chord(0.0, &[60, 64])];
        let perf = vec![chord(0.0, &[60])];
        let score_notes = vec![
            ScoreNote { pitch: 60, beats: 0.0 },
            ScoreNote { pitch: 64, beats: 0.0 },
        ];
        let perf_notes = vec![perf_note(0.1, 60, 90)];
        let path = dtw_align(&score, &perf, 0.75).unwrap();
        let rows = note_matches(&path, &score, &perf, &score_notes, &perf_notes);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].status, AlignStatus::Matched);
        assert_eq!(rows[1].status, AlignStatus::Deletion);
        assert_eq!(rows[1].pitch, 64);
        assert_eq!(rows[1].perf_time_s, None);
    }

    #[test]
    fn extra_pitch_becomes_insertion() {
        let score = vec![chord(0.0, &[60])];
        let perf = Chord {
            onset: 0.0,
            pitches: vec![60, 61],
            note_ids: vec![0, 1],
        };
        let score_notes = vec![ScoreNote { pitch: 60, beats: 0.0 }];
        let perf_notes = vec![perf_note(0.0, 60, 90), perf_note(0.005, 61, 40)];
        let path = dtw_align(&score, &[perf], 0.75).unwrap();
        let rows = note_matches(
            &path,
            &score,
            &[Chord {
                onset: 0.0,
                pitches: vec![60, 61],
                note_ids: vec![0, 1],
            }],
            &score_notes,
            &perf_notes,
        );
        assert_eq!(rows.len(), 2);
        let ins = rows.iter().find(|r| r.status == AlignStatus::Insertion).unwrap();
        assert_eq!(ins.score_note_id, -1);
        assert_eq!(ins.pitch, 61);
        assert_eq!(ins.score_beats, None);
        assert_eq!(ins.velocity, Some(40));
    }

    #[test]
    fn duplicate_pitches_pair_lowest_id_first() {
        let score_notes = vec![
            ScoreNote { pitch: 60, beats: 0.0 },
            ScoreNote { pitch: 60, beats: 0.0 },
        ];
        let perf_notes = vec![perf_note(0.0, 60, 90)];
        let rows = align(&score_notes, &perf_notes, &AlignmentParams::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].score_note_id, 0);
        assert_eq!(rows[0].status, AlignStatus::Matched);
        assert_eq!(rows[1].score_note_id, 1);
        assert_eq!(rows[1].status, AlignStatus::Deletion);
    }

    #[test]
    fn conservation_of_notes() {
        for seed in 0..40u64 {
            let score_chords = pseudo_chords(seed + 300, 1 + (seed % 6) as usize);
            let mut score_notes = Vec::new();
            for c in &score_chords {
                for &p in &c.pitches {
                    score_notes.push(ScoreNote { pitch: p, beats: c.onset });
                }
            }
            score_notes.sort_by(|a, b| a.beats.total_cmp(&b.beats).then(a.pitch.cmp(&b.pitch)));
            let perf_chords = pseudo_chords(seed + 700, 1 + ((seed * 5) % 6) as usize);
            let mut perf_notes = Vec::new();
            for c in &perf_chords {
                for &p in &c.pitches {
                    perf_notes.push(perf_note(c.onset * 0.5, p, 64));
                }
            }
            perf_notes.sort_by(|a, b| {
                a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch))
            });
            let rows = align(&score_notes, &perf_notes, &AlignmentParams::default()).unwrap();
            let matched = rows.iter().filter(|r| r.status == AlignStatus::Matched).count();
            let deletions = rows.iter().filter(|r| r.status == AlignStatus::Deletion).count();
            let insertions = rows.iter().filter(|r| r.status == AlignStatus::Insertion).count();
            assert_eq!(matched + deletions, score_notes.len(), "seed {seed}");
            assert_eq!(matched + insertions, perf_notes.len(), "seed {seed}");
        }
    }

    #[test]
    fn matched_rows_sorted_before_insertions() {
        let score_notes = vec![
            ScoreNote { pitch: 60, beats: 0.0 },
            ScoreNote { pitch: 64, beats: 1.0 },
        ];
        let perf_notes = vec![
            perf_note(0.0, 60, 90),
            perf_note(0.25, 30, 50),
            perf_note(0.5, 64, 70),
        ];
        let rows = align(&score_notes, &perf_notes, &AlignmentParams::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].pitch, 60);
        assert_eq!(rows[1].pitch, 64);
        assert_eq!(rows[2].status, AlignStatus::Insertion);
        assert_eq!(rows[2].pitch, 30);
    }
}
