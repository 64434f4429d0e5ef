//! Feature CSV writers and the alignment reader.
//!
//! All real values are written with six decimals. Files are written to a
//! sibling temporary name and renamed so readers never observe a partial
//! file.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::alignment::{AlignStatus, AlignedNote};
use crate::beats::BeatRecord;
use crate::dynamics::{PedalRecord, VelocityRecord};
use crate::loudness::LoudnessFrame;
use crate::tension::TensionFrame;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{path} line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}

/// Canonical rendering of a real CSV field.
pub fn format_real(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes bytes to `path` via a sibling temp file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn write_rows(path: &Path, header: &str, rows: Vec<String>) -> std::io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_loudness_csv(path: &Path, frames: &[LoudnessFrame]) -> std::io::Result<()> {
    let rows = frames
        .iter()
        .map(|f| format!("{},{}", format_real(f.time_s), format_real(f.total_sone)))
        .collect();
    write_rows(path, "time,loudness", rows)
}

pub fn write_velocity_csv(path: &Path, records: &[VelocityRecord]) -> std::io::Result<()> {
    let rows = records
        .iter()
        .map(|r| format!("{},{},{}", format_real(r.time_s), r.pitch, r.velocity))
        .collect();
    write_rows(path, "time,pitch,velocity", rows)
}

pub fn write_pedal_csv(path: &Path, records: &[PedalRecord]) -> std::io::Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            format!(
                "{},{},{}",
                format_real(r.time_s),
                r.value,
                u8::from(r.engaged)
            )
        })
        .collect();
    write_rows(path, "time,value,engaged", rows)
}

pub fn write_alignment_csv(path: &Path, rows: &[AlignedNote]) -> std::io::Result<()> {
    let rendered = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.score_note_id,
                r.pitch,
                r.score_beats.map(format_real).unwrap_or_default(),
                r.perf_time_s.map(format_real).unwrap_or_default(),
                r.velocity.map(|v| v.to_string()).unwrap_or_default(),
                r.status.as_str()
            )
        })
        .collect();
    write_rows(path, "score_id,pitch,score_beats,perf_time,velocity,status", rendered)
}

pub fn write_beats_csv(path: &Path, records: &[BeatRecord]) -> std::io::Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.index,
                format_real(r.score_beats),
                format_real(r.perf_time_s),
                r.local_bpm.map(format_real).unwrap_or_default(),
                u8::from(r.interpolated)
            )
        })
        .collect();
    write_rows(path, "index,score_beats,perf_time,local_bpm,interpolated", rows)
}

pub fn write_tension_csv(path: &Path, frames: &[TensionFrame]) -> std::io::Result<()> {
    let rows = frames
        .iter()
        .map(|f| {
            format!(
                "{},{},{},{}",
                format_real(f.time_s),
                format_real(f.diameter),
                format_real(f.momentum),
                format_real(f.strain)
            )
        })
        .collect();
    write_rows(path, "time,diameter,momentum,strain", rows)
}

/// Reads an alignment CSV back into rows (the beats task's input).
pub fn read_alignment_csv(path: &Path) -> Result<Vec<AlignedNote>, CsvError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, detail: String| CsvError::Parse {
        path: display.clone(),
        line,
        detail,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "score_id,pitch,score_beats,perf_time,velocity,status")) => {}
        Some((_, other)) => {
            return Err(parse_err(1, format!("unexpected header \"{other}\"")));
        }
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(idx + 1, format!("{} fields, expected 6", fields.len())));
        }
        let opt_real = |s: &str, what: &str| -> Result<Option<f64>, CsvError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| parse_err(idx + 1, format!("bad {what} \"{s}\"")))
            }
        };
        let status = match fields[5] {
            "matched" => AlignStatus::Matched,
            "deletion" => AlignStatus::Deletion,
            "insertion" => AlignStatus::Insertion,
            other => return Err(parse_err(idx + 1, format!("unknown status \"{other}\""))),
        };
        rows.push(AlignedNote {
            score_note_id: fields[0]
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad score_id \"{}\"", fields[0])))?,
            pitch: fields[1]
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad pitch \"{}\"", fields[1])))?,
            score_beats: opt_real(fields[2], "score_beats")?,
            perf_time_s: opt_real(fields[3], "perf_time")?,
            velocity: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| {
                    parse_err(idx + 1, format!("bad velocity \"{}\"", fields[4]))
                })?)
            },
            status,
        });
    }
    Ok(rows)
}
