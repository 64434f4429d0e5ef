//! WAV (RIFF) decoding to mono f64 samples and windowed framing.
//!
//! Supports PCM integer (16/24-bit) and IEEE float32 encodings, one or two
//! channels. Multi-channel input is downmixed by averaging. Framing applies
//! a periodic Hann window; the frame series feeds spectral analysis.

use thiserror::Error;

pub const MIN_SAMPLE_RATE: u32 = 8_000;
pub const MAX_SAMPLE_RATE: u32 = 192_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF structure: {0}")]
    MalformedRiff(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid framing parameters: {0}")]
    InvalidParams(String),
}

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Windowed frames plus their center times.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub frames: Vec<Vec<f64>>,
    pub frame_times: Vec<f64>,
    pub window_length: usize,
    pub hop_s: f64,
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Decodes WAV bytes into mono samples in [-1, 1].
///
/// Integer PCM is scaled by 1/2^(bits-1); float samples are clamped to
/// [-1, 1] and NaN becomes 0. Chunks other than fmt/data are skipped,
/// honoring RIFF's odd-size pad byte.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    let malformed = |s: &str| AudioError::MalformedRiff(s.into());
    if bytes.len() < 12 {
        return Err(malformed("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut pos = 12;
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        if bytes.len() - pos < size {
            return Err(malformed("chunk extends past end of file"));
        }
        let chunk = &bytes[pos..pos + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                fmt = Some(FmtChunk {
                    format_tag: u16::from_le_bytes(chunk[0..2].try_into().unwrap()),
                    channels: u16::from_le_bytes(chunk[2..4].try_into().unwrap()),
                    sample_rate: u32::from_le_bytes(chunk[4..8].try_into().unwrap()),
                    bits_per_sample: u16::from_le_bytes(chunk[14..16].try_into().unwrap()),
                });
            }
            b"data" => {
                data = Some(chunk);
                // fmt is required to interpret data; once both are present
                // the scan can stop.
                if fmt.is_some() {
                    break;
                }
            }
            _ => {}
        }
        // Chunks are word-aligned: odd sizes carry a pad byte.
        pos += size + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;

    if !(MIN_SAMPLE_RATE..=MAX_SAMPLE_RATE).contains(&fmt.sample_rate) {
        return Err(AudioError::UnsupportedEncoding(format!(
            "sample rate {} outside {}..={}",
            fmt.sample_rate, MIN_SAMPLE_RATE, MAX_SAMPLE_RATE
        )));
    }
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo supported)",
            fmt.channels
        )));
    }

    let interleaved: Vec<f64> = match (fmt.format_tag, fmt.bits_per_sample) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect(),
        (1, 24) => data
            .chunks_exact(3)
            .map(|b| {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8388608.0
            })
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|b| {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(-1.0, 1.0)
                }
            })
            .collect(),
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format tag {tag} with {bits} bits per sample"
            )));
        }
    };

    let samples = if fmt.channels == 1 {
        interleaved
    } else {
        // Trailing partial frames are dropped by chunks_exact.
        interleaved
            .chunks_exact(2)
            .map(|frame| (frame[0] + frame[1]) / 2.0)
            .collect()
    };

    Ok(AudioBuffer {
        sample_rate: fmt.sample_rate,
        samples,
    })
}

/// Periodic Hann window of the given length.
pub fn hann_window(length: usize) -> Vec<f64> {
    (0..length)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / length as f64).cos())
        .collect()
}

/// Slices the buffer into hop-spaced windowed frames.
///
/// Frame k covers samples [k*hop, k*hop + window); the trailing partial
/// frame is zero-padded, and signals shorter than one window yield a single
/// padded frame. Frame time is the window center (k*hop + window/2) / rate.
pub fn frame_signal(
    buffer: &AudioBuffer,
    window_length: usize,
    hop_length: usize,
) -> Result<FrameSeries, AudioError> {
    if window_length == 0 || hop_length == 0 {
        return Err(AudioError::InvalidParams(
            "window and hop must be positive".into(),
        ));
    }
    if hop_length > window_length {
        return Err(AudioError::InvalidParams(format!(
            "hop {hop_length} exceeds window {window_length}"
        )));
    }
    let window = hann_window(window_length);
    let len = buffer.samples.len();
    let frame_count = if len <= window_length {
        1
    } else {
        (len - window_length).div_ceil(hop_length) + 1
    };
    let mut frames = Vec::with_capacity(frame_count);
    let mut frame_times = Vec::with_capacity(frame_count);
    for k in 0..frame_count {
        let start = k * hop_length;
        let mut frame = vec![0.0; window_length];
        if start < len {
            let take = (len - start).min(window_length);
            for (i, s) in buffer.samples[start..start + take].iter().enumerate() {
                frame[i] = s * window[i];
            }
        }
        frames.push(frame);
        frame_times
            .push((start as f64 + window_length as f64 / 2.0) / buffer.sample_rate as f64);
    }
    Ok(FrameSeries {
        frames,
        frame_times,
        window_length,
        hop_s: hop_length as f64 / buffer.sample_rate as f64,
    })
}
