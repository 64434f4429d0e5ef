//! Standard MIDI File parsing and symbolic event extraction.
//!
//! Supports SMF formats 0 and 1 with PPQ time division. Events are decoded
//! into per-track absolute-tick lists; note pairing, pedal extraction, and
//! tick-to-seconds conversion are separate passes so callers can work in
//! either tick or real-time domain.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

/// Default tempo when a file carries no Set-Tempo event (120 BPM).
pub const DEFAULT_US_PER_QUARTER: u32 = 500_000;

/// Sustain pedal controller number.
pub const SUSTAIN_CONTROLLER: u8 = 64;

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated track {track}: {detail}")]
    TruncatedTrack { track: usize, detail: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
}

/// A performed note with real-time onset and duration.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiNote {
    pub onset_s: f64,
    pub duration_s: f64,
    pub pitch: u8,
    pub velocity: u8,
    pub channel: u8,
    pub track: usize,
}

/// A control-change event converted to real time.
#[derive(Debug, Clone, PartialEq)]
pub struct PedalEvent {
    pub time_s: f64,
    pub value: u8,
    pub controller: u8,
}

/// A note in tick domain, before any tempo conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct TickNote {
    pub on_tick: u64,
    pub off_tick: u64,
    pub pitch: u8,
    pub velocity: u8,
    pub channel: u8,
    pub track: usize,
}

/// Counters for irregularities found while pairing notes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoteDiagnostics {
    /// Note-ons closed at end-of-track because no matching off arrived.
    pub unterminated_notes: usize,
    /// Note-offs with no preceding open note of the same pitch/channel.
    pub orphan_note_offs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8 },
    ControlChange { channel: u8, controller: u8, value: u8 },
    SetTempo { us_per_quarter: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEvent {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub events: Vec<TrackEvent>,
    /// Tick of the End-of-Track meta event, or of the last event if absent.
    pub end_tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignature {
    pub tick: u64,
    pub numerator: u8,
    pub denominator: u16,
}

/// A decoded SMF: header fields plus per-track event lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiFile {
    pub format: u8,
    pub ppq: u16,
    pub tracks: Vec<Track>,
    pub time_signatures: Vec<TimeSignature>,
}

/// Tick positions of tempo changes with cumulative seconds precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct TempoMap {
    entries: Vec<TempoEntry>,
    ppq: u16,
}

#[derive(Debug, Clone, PartialEq)]
struct TempoEntry {
    tick: u64,
    us_per_quarter: u32,
    seconds_at: f64,
}

impl TempoMap {
    /// Builds a map from (tick, µs/quarter) pairs. Pairs are sorted by tick;
    /// for duplicate ticks the last pair in input order wins. An entry at
    /// tick 0 is inserted with the SMF default tempo if none is present.
    pub fn new(ppq: u16, changes: &[(u64, u32)]) -> TempoMap {
        assert!(ppq > 0, "ppq must be positive");
        let mut sorted: Vec<(u64, u32)> = changes.to_vec();
        sorted.sort_by_key(|&(tick, _)| tick);
        let mut dedup: Vec<(u64, u32)> = Vec::with_capacity(sorted.len() + 1);
        for (tick, us) in sorted {
            match dedup.last_mut() {
                Some(last) if last.0 == tick => last.1 = us,
                _ => dedup.push((tick, us)),
            }
        }
        if dedup.first().map_or(true, |&(tick, _)| tick != 0) {
            dedup.insert(0, (0, DEFAULT_US_PER_QUARTER));
        }
        let mut entries = Vec::with_capacity(dedup.len());
        let mut seconds = 0.0;
        let mut prev: Option<(u64, u32)> = None;
        for (tick, us) in dedup {
            if let Some((ptick, pus)) = prev {
                seconds += segment_seconds(tick - ptick, pus, ppq);
            }
            entries.push(TempoEntry {
                tick,
                us_per_quarter: us,
                seconds_at: seconds,
            });
            prev = Some((tick, us));
        }
        TempoMap { entries, ppq }
    }

    pub fn ppq(&self) -> u16 {
        self.ppq
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.entries.iter().map(|e| (e.tick, e.us_per_quarter))
    }

    /// Converts an absolute tick to seconds by piecewise-linear accumulation
    /// over the tempo segments.
    pub fn tick_to_seconds(&self, tick: u64) -> f64 {
        let idx = self
            .entries
            .partition_point(|e| e.tick <= tick)
            .saturating_sub(1);
        let entry = &self.entries[idx];
        entry.seconds_at + segment_seconds(tick - entry.tick, entry.us_per_quarter, self.ppq)
    }
}

fn segment_seconds(delta_ticks: u64, us_per_quarter: u32, ppq: u16) -> f64 {
    delta_ticks as f64 * us_per_quarter as f64 / (ppq as f64 * 1e6)
}

/// Collects all Set-Tempo events across all tracks into a [`TempoMap`].
pub fn build_tempo_map(file: &MidiFile) -> TempoMap {
    let mut changes = Vec::new();
    for track in &file.tracks {
        for event in &track.events {
            if let EventKind::SetTempo { us_per_quarter } = event.kind {
                changes.push((event.tick, us_per_quarter));
            }
        }
    }
    TempoMap::new(file.ppq, &changes)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.bytes(1).map(|b| b[0])
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    fn u16(&mut self) -> Option<u16> {
        self.bytes(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.bytes(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes per the SMF spec.
    fn vlq(&mut self) -> Option<u32> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | u32::from(byte & 0x7F);
            if byte & 0x80 == 0 {
                return Some(value);
            }
        }
        None
    }
}

/// Parses SMF bytes into a [`MidiFile`].
///
/// Formats 0 and 1 with PPQ division are accepted; format 2 and SMPTE
/// division are rejected. Unknown meta and sysex events are skipped.
/// Running status is honored and canceled by meta/sysex events.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiFile, MidiError> {
    let mut r = Reader::new(bytes);
    let magic = r
        .bytes(4)
        .ok_or_else(|| MidiError::MalformedHeader("file shorter than chunk id".into()))?;
    if magic != b"MThd" {
        return Err(MidiError::MalformedHeader("missing MThd magic".into()));
    }
    let header_len = r
        .u32()
        .ok_or_else(|| MidiError::MalformedHeader("missing header length".into()))?;
    if header_len < 6 {
        return Err(MidiError::MalformedHeader(format!(
            "header length {header_len} < 6"
        )));
    }
    let format = r
        .u16()
        .ok_or_else(|| MidiError::MalformedHeader("missing format field".into()))?;
    let declared_tracks = r
        .u16()
        .ok_or_else(|| MidiError::MalformedHeader("missing track count".into()))?;
    let division = r
        .u16()
        .ok_or_else(|| MidiError::MalformedHeader("missing division field".into()))?;
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format!("format {format}")));
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedFormat("SMPTE time division".into()));
    }
    if division == 0 {
        return Err(MidiError::MalformedHeader("zero ticks per quarter".into()));
    }
    // Per the spec the header length may exceed 6; skip the extra bytes.
    if r.bytes(header_len as usize - 6).is_none() {
        return Err(MidiError::MalformedHeader("header extends past file".into()));
    }

    let mut tracks = Vec::new();
    let mut time_signatures = Vec::new();
    while tracks.len() < declared_tracks as usize && r.remaining() > 0 {
        let track_index = tracks.len();
        if r.remaining() < 8 {
            return Err(MidiError::TruncatedTrack {
                track: track_index,
                detail: "incomplete chunk header".into(),
            });
        }
        let chunk_id: [u8; 4] = r.bytes(4).unwrap().try_into().unwrap();
        let chunk_len = r.u32().unwrap() as usize;
        let Some(chunk) = r.bytes(chunk_len) else {
            return Err(MidiError::TruncatedTrack {
                track: track_index,
                detail: format!("chunk length {chunk_len} exceeds file"),
            });
        };
        if &chunk_id != b"MTrk" {
            // Alien chunk: skip without counting it as a track.
            continue;
        }
        let track = parse_track(chunk, track_index, &mut time_signatures)?;
        tracks.push(track);
    }
    time_signatures.sort_by_key(|ts| ts.tick);

    Ok(MidiFile {
        format: format as u8,
        ppq: division,
        tracks,
        time_signatures,
    })
}

fn parse_track(
    chunk: &[u8],
    track_index: usize,
    time_signatures: &mut Vec<TimeSignature>,
) -> Result<Track, MidiError> {
    let truncated = |detail: &str| MidiError::TruncatedTrack {
        track: track_index,
        detail: detail.into(),
    };
    let mut r = Reader::new(chunk);
    let mut events = Vec::new();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut end_tick: Option<u64> = None;

    while r.remaining() > 0 {
        let delta = r.vlq().ok_or_else(|| truncated("bad delta time"))?;
        tick += u64::from(delta);

        let first = r.peek().ok_or_else(|| truncated("missing status byte"))?;
        let status = if first >= 0x80 {
            r.u8();
            if first < 0xF0 {
                running = Some(first);
            }
            first
        } else {
            running.ok_or_else(|| truncated("data byte with no running status"))?
        };

        let data_byte = |r: &mut Reader| -> Result<u8, MidiError> {
            let b = r.u8().ok_or_else(|| truncated("event ends mid-data"))?;
            if b & 0x80 != 0 {
                return Err(truncated("data byte with high bit set"));
            }
            Ok(b)
        };

        match status & 0xF0 {
            0x80 => {
                let channel = status & 0x0F;
                let pitch = data_byte(&mut r)?;
                let _velocity = data_byte(&mut r)?;
                events.push(TrackEvent {
                    tick,
                    kind: EventKind::NoteOff { channel, pitch },
                });
            }
            0x90 => {
                let channel = status & 0x0F;
                let pitch = data_byte(&mut r)?;
                let velocity = data_byte(&mut r)?;
                let kind = if velocity == 0 {
                    EventKind::NoteOff { channel, pitch }
                } else {
                    EventKind::NoteOn {
                        channel,
                        pitch,
                        velocity,
                    }
                };
                events.push(TrackEvent { tick, kind });
            }
            0xA0 | 0xE0 => {
                data_byte(&mut r)?;
                data_byte(&mut r)?;
            }
            0xB0 => {
                let channel = status & 0x0F;
                let controller = data_byte(&mut r)?;
                let value = data_byte(&mut r)?;
                events.push(TrackEvent {
                    tick,
                    kind: EventKind::ControlChange {
                        channel,
                        controller,
                        value,
                    },
                });
            }
            0xC0 | 0xD0 => {
                data_byte(&mut r)?;
            }
            0xF0 => {
                running = None;
                match status {
                    0xFF => {
                        let meta_type = r.u8().ok_or_else(|| truncated("meta type missing"))?;
                        let len = r.vlq().ok_or_else(|| truncated("bad meta length"))? as usize;
                        let data = r.bytes(len).ok_or_else(|| truncated("meta data missing"))?;
                        match meta_type {
                            0x51 if len == 3 => {
                                let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                                // A zero tempo would stall the timeline; skip it.
                                if us > 0 {
                                    events.push(TrackEvent {
                                        tick,
                                        kind: EventKind::SetTempo { us_per_quarter: us },
                                    });
                                }
                            }
                            0x58 if len >= 2 => {
                                let shift = data[1].min(15);
                                time_signatures.push(TimeSignature {
                                    tick,
                                    numerator: data[0],
                                    denominator: 1u16 << shift,
                                });
                            }
                            0x2F => {
                                end_tick = Some(tick);
                                break;
                            }
                            _ => {}
                        }
                    }
                    0xF0 | 0xF7 => {
                        let len = r.vlq().ok_or_else(|| truncated("bad sysex length"))? as usize;
                        r.bytes(len).ok_or_else(|| truncated("sysex data missing"))?;
                    }
                    other => {
                        return Err(truncated(&format!("unexpected status byte {other:#04x}")));
                    }
                }
            }
            _ => unreachable!("status bytes are >= 0x80 here"),
        }
    }

    Ok(Track {
        events,
        end_tick: end_tick.unwrap_or(tick),
    })
}

/// Pairs note-on/note-off events into tick-domain notes.
///
/// Pairing is FIFO per (track, channel, pitch): the earliest open note-on
/// takes the next off. Unterminated notes close at the track's end tick.
pub fn extract_tick_notes(file: &MidiFile) -> (Vec<TickNote>, NoteDiagnostics) {
    let mut notes = Vec::new();
    let mut diagnostics = NoteDiagnostics::default();
    for (track_index, track) in file.tracks.iter().enumerate() {
        let mut open: BTreeMap<(u8, u8), VecDeque<(u64, u8)>> = BTreeMap::new();
        for event in &track.events {
            match event.kind {
                EventKind::NoteOn {
                    channel,
                    pitch,
                    velocity,
                } => {
                    open.entry((channel, pitch))
                        .or_default()
                        .push_back((event.tick, velocity));
                }
                EventKind::NoteOff { channel, pitch } => {
                    match open.get_mut(&(channel, pitch)).and_then(VecDeque::pop_front) {
                        Some((on_tick, velocity)) => notes.push(TickNote {
                            on_tick,
                            off_tick: event.tick,
                            pitch,
                            velocity,
                            channel,
                            track: track_index,
                        }),
                        None => diagnostics.orphan_note_offs += 1,
                    }
                }
                _ => {}
            }
        }
        for ((channel, pitch), queue) in open {
            for (on_tick, velocity) in queue {
                diagnostics.unterminated_notes += 1;
                notes.push(TickNote {
                    on_tick,
                    off_tick: track.end_tick.max(on_tick),
                    pitch,
                    velocity,
                    channel,
                    track: track_index,
                });
            }
        }
    }
    (notes, diagnostics)
}

/// Extracts real-time notes from all tracks, sorted by (onset, pitch).
pub fn extract_notes(file: &MidiFile) -> (Vec<MidiNote>, NoteDiagnostics) {
    let tempo = build_tempo_map(file);
    let (tick_notes, diagnostics) = extract_tick_notes(file);
    let mut notes: Vec<MidiNote> = tick_notes
        .into_iter()
        .map(|n| {
            let onset_s = tempo.tick_to_seconds(n.on_tick);
            MidiNote {
                onset_s,
                duration_s: tempo.tick_to_seconds(n.off_tick) - onset_s,
                pitch: n.pitch,
                velocity: n.velocity,
                channel: n.channel,
                track: n.track,
            }
        })
        .collect();
    notes.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then_with(|| a.pitch.cmp(&b.pitch))
    });
    (notes, diagnostics)
}

/// Extracts all control-change events for one controller, time-converted
/// and sorted.
pub fn extract_pedal(file: &MidiFile, controller: u8) -> Vec<PedalEvent> {
    let tempo = build_tempo_map(file);
    let mut events = Vec::new();
    for track in &file.tracks {
        for event in &track.events {
            if let EventKind::ControlChange {
                controller: c,
                value,
                ..
            } = event.kind
            {
                if c == controller {
                    events.push(PedalEvent {
                        time_s: tempo.tick_to_seconds(event.tick),
                        value,
                        controller,
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    events
}
