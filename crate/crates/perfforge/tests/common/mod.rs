//! Shared fixtures for integration tests: raw SMF and WAV builders, dataset
//! generators, and helpers for driving the binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vlq(value: u32) -> Vec<u8> {
    let mut out = vec![(value & 0x7f) as u8];
    let mut rest = value >> 7;
    while rest > 0 {
        out.push((rest & 0x7f) as u8 | 0x80);
        rest >>= 7;
    }
    out.reverse();
    out
}

/// Event-stream builder for one MTrk chunk. Events must be appended in
/// nondecreasing tick order.
pub struct TrackBytes {
    bytes: Vec<u8>,
    last_tick: u64,
}

impl TrackBytes {
    pub fn new() -> TrackBytes {
        TrackBytes {
            bytes: Vec::new(),
            last_tick: 0,
        }
    }

    fn delta(&mut self, tick: u64) {
        assert!(tick >= self.last_tick, "events out of order");
        let delta = u32::try_from(tick - self.last_tick).unwrap();
        self.bytes.extend(vlq(delta));
        self.last_tick = tick;
    }

    pub fn note_on(&mut self, tick: u64, channel: u8, pitch: u8, velocity: u8) -> &mut Self {
        self.delta(tick);
        self.bytes.extend([0x90 | channel, pitch, velocity]);
        self
    }

    pub fn note_off(&mut self, tick: u64, channel: u8, pitch: u8) -> &mut Self {
        self.delta(tick);
        self.bytes.extend([0x80 | channel, pitch, 0x40]);
        self
    }

    pub fn control(&mut self, tick: u64, channel: u8, controller: u8, value: u8) -> &mut Self {
        self.delta(tick);
        self.bytes.extend([0xb0 | channel, controller, value]);
        self
    }

    pub fn tempo(&mut self, tick: u64, us_per_quarter: u32) -> &mut Self {
        self.delta(tick);
        self.bytes.extend([0xff, 0x51, 0x03]);
        self.bytes.extend(&us_per_quarter.to_be_bytes()[1..]);
        self
    }

    pub fn finish(mut self, end_tick: u64) -> Vec<u8> {
        self.delta(end_tick);
        self.bytes.extend([0xff, 0x2f, 0x00]);
        let mut chunk = b"MTrk".to_vec();
        chunk.extend(u32::try_from(self.bytes.len()).unwrap().to_be_bytes());
        chunk.extend(self.bytes);
        chunk
    }
}

pub fn smf(format: u16, ppq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend(6u32.to_be_bytes());
    out.extend(format.to_be_bytes());
    out.extend(u16::try_from(tracks.len()).unwrap().to_be_bytes());
    out.extend(ppq.to_be_bytes());
    for track in tracks {
        out.extend(track);
    }
    out
}

/// Performance MIDI at ppq 500 under the default tempo, so one tick is
/// exactly one millisecond. Notes are (onset_ms, duration_ms, pitch,
/// velocity); pedal events are (time_ms, value).
pub fn perf_midi(notes: &[(u64, u64, u8, u8)], pedal: &[(u64, u8)]) -> Vec<u8> {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Ev {
        On(u8, u8),
        Off(u8),
        Cc(u8),
    }
    let mut events: Vec<(u64, Ev)> = Vec::new();
    for &(onset, duration, pitch, velocity) in notes {
        events.push((onset, Ev::On(pitch, velocity)));
        events.push((onset + duration, Ev::Off(pitch)));
    }
    for &(time, value) in pedal {
        events.push((time, Ev::Cc(value)));
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut track = TrackBytes::new();
    let mut end = 0;
    for (tick, ev) in events {
        match ev {
            Ev::On(p, v) => track.note_on(tick, 0, p, v),
            Ev::Off(p) => track.note_off(tick, 0, p),
            Ev::Cc(v) => track.control(tick, 0, 64, v),
        };
        end = end.max(tick);
    }
    smf(0, 500, &[track.finish(end)])
}

/// Score MIDI at ppq 480. Notes are (tick, pitch); each lasts a quarter.
pub fn score_midi(notes: &[(u64, u8)]) -> Vec<u8> {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Ev {
        On(u8),
        Off(u8),
    }
    let mut events: Vec<(u64, Ev)> = Vec::new();
    for &(tick, pitch) in notes {
        events.push((tick, Ev::On(pitch)));
        events.push((tick + 480, Ev::Off(pitch)));
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut track = TrackBytes::new();
    let mut end = 0;
    for (tick, ev) in events {
        match ev {
            Ev::On(p) => track.note_on(tick, 0, p, 80),
            Ev::Off(p) => track.note_off(tick, 0, p),
        };
        end = end.max(tick);
    }
    smf(0, 480, &[track.finish(end)])
}

pub fn wav_pcm16(rate: u32, channels: u16, samples: &[i16]) -> Vec<u8> {
    let data_len = u32::try_from(samples.len() * 2).unwrap();
    let mut out = b"RIFF".to_vec();
    out.extend((36 + data_len).to_le_bytes());
    out.extend(b"WAVE");
    out.extend(b"fmt ");
    out.extend(16u32.to_le_bytes());
    out.extend(1u16.to_le_bytes());
    out.extend(channels.to_le_bytes());
    out.extend(rate.to_le_bytes());
    out.extend((rate * u32::from(channels) * 2).to_le_bytes());
    out.extend((channels * 2).to_le_bytes());
    out.extend(16u16.to_le_bytes());
    out.extend(b"data");
    out.extend(data_len.to_le_bytes());
    for s in samples {
        out.extend(s.to_le_bytes());
    }
    out
}

pub fn sine_wav(rate: u32, seconds: f64, freq: f64, amplitude: f64) -> Vec<u8> {
    let n = (f64::from(rate) * seconds) as usize;
    let samples: Vec<i16> = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            let x = amplitude * (2.0 * std::f64::consts::PI * freq * t).sin();
            (x * 32767.0).round() as i16
        })
        .collect();
    wav_pcm16(rate, 1, &samples)
}

/// Standard performance content: eight notes every 250 ms plus pedal
/// motion. `seed` perturbs velocities only, keeping onsets stable.
pub fn perf_bytes_for(seed: u8) -> Vec<u8> {
    let vel = |k: u8| 40 + ((seed.wrapping_mul(7).wrapping_add(k * 11)) % 80);
    let notes: Vec<(u64, u64, u8, u8)> = (0..8u8)
        .map(|k| {
            let onset = u64::from(k) * 250;
            (onset, 200, 60 + (k % 12), vel(k))
        })
        .collect();
    let pedal = [(0, 100), (500, 30), (1000, 90)];
    perf_midi(&notes, &pedal)
}

/// Standard audio content: a half-second sine whose frequency depends on
/// `seed`.
pub fn audio_bytes_for(seed: u8) -> Vec<u8> {
    let freq = 440.0 + f64::from(seed % 4) * 110.0;
    sine_wav(8000, 0.5, freq, 0.5)
}

pub fn rewrite_perf(dir: &Path, id: &str, seed: u8) {
    std::fs::write(dir.join(format!("{id}.mid")), perf_bytes_for(seed)).unwrap();
}

pub fn rewrite_audio(dir: &Path, id: &str, seed: u8) {
    std::fs::write(dir.join(format!("{id}.wav")), audio_bytes_for(seed)).unwrap();
}

/// Deterministic full bundle for piece `id`: performance, score, and a
/// short sine.
pub fn write_piece(dir: &Path, id: &str, seed: u8) {
    rewrite_perf(dir, id, seed);
    let score: Vec<(u64, u8)> = (0..8u64).map(|k| (k * 240, 60 + (k % 12) as u8)).collect();
    std::fs::write(dir.join(format!("{id}_score.mid")), score_midi(&score)).unwrap();
    rewrite_audio(dir, id, seed);
}

/// Performance-only piece (no score, no audio).
pub fn write_bare_piece(dir: &Path, id: &str, seed: u8) {
    let notes: Vec<(u64, u64, u8, u8)> = (0..4u8)
        .map(|k| (u64::from(k) * 300, 250, 48 + k, 50 + seed % 60))
        .collect();
    std::fs::write(dir.join(format!("{id}.mid")), perf_midi(&notes, &[])).unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_perfforge"))
}

pub fn perfforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .arg("--dataset")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary expecting success; returns stdout.
pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = perfforge(dir, args);
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Parses report rows into (piece, feature, status), skipping the summary.
pub fn report_rows(stdout: &str) -> Vec<(String, String, String)> {
    stdout
        .lines()
        .filter(|l| !l.contains(','))
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some((
                it.next()?.to_string(),
                it.next()?.to_string(),
                it.next()?.to_string(),
            ))
        })
        .collect()
}

/// Tasks reported with a given status, as a sorted (piece, feature) set.
pub fn tasks_with_status(stdout: &str, status: &str) -> Vec<(String, String)> {
    report_rows(stdout)
        .into_iter()
        .filter(|(_, _, s)| s == status)
        .map(|(p, f, _)| (p, f))
        .collect()
}

/// All feature CSVs in the dataset, name to bytes.
pub fn csv_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        if name.ends_with(".csv") {
            out.insert(name, std::fs::read(entry.path()).unwrap());
        }
    }
    out
}
