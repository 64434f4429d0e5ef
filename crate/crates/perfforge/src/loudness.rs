//! Psychoacoustic loudness in sone from mono audio.
//!
//! Per windowed frame: normalized power spectrum -> outer-ear (Terhardt)
//! weighting in the power domain -> 24 Bark band energies -> dB with a
//! full-scale calibration -> Schroeder spreading -> dB read as phon ->
//! per-band sone -> Stevens-style total. The dB scale is anchored so that a
//! full-scale sine at a bin center peaks at `db_max`.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::audio::{frame_signal, hann_window, AudioBuffer, AudioError};

/// Upper edge of each Bark band in Hz; bins above the last edge join band 24.
pub const BARK_EDGES_HZ: [f64; 24] = [
    100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];

pub const N_BANDS: usize = 24;

/// Floor for band levels; keeps zero energies finite through spreading.
pub const DB_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessParams {
    pub window_length: usize,
    pub hop_length: usize,
    pub db_max: f64,
}

impl Default for LoudnessParams {
    fn default() -> LoudnessParams {
        LoudnessParams {
            window_length: 4096,
            hop_length: 1024,
            db_max: 96.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessFrame {
    pub time_s: f64,
    pub total_sone: f64,
    pub specific_sone: [f64; N_BANDS],
}

/// Terhardt outer-ear weighting in dB for a frequency in Hz.
pub fn outer_ear_weight_db(f_hz: f64) -> f64 {
    let f = f_hz / 1000.0;
    -3.64 * f.powf(-0.8) + 6.5 * (-0.6 * (f - 3.3) * (f - 3.3)).exp() - 1e-3 * f.powi(4)
}

/// Schroeder spreading profile at a band offset x.
pub fn spreading_db(x: f64) -> f64 {
    15.81 + 7.5 * (x + 0.474) - 17.5 * (1.0 + (x + 0.474) * (x + 0.474)).sqrt()
}

/// Groups a one-sided power spectrum into outer-ear-weighted Bark energies.
///
/// The spectrum must come from a real FFT of an even-length frame, so bin k
/// sits at k*rate/(2*(len-1)) Hz. The DC bin is excluded (weight 0).
pub fn bark_band_energies(power_spectrum: &[f64], sample_rate: u32) -> [f64; N_BANDS] {
    let mut bands = [0.0; N_BANDS];
    if power_spectrum.len() < 2 {
        return bands;
    }
    let n_fft = 2 * (power_spectrum.len() - 1);
    let bin_hz = sample_rate as f64 / n_fft as f64;
    for (k, p) in power_spectrum.iter().enumerate().skip(1) {
        let f = k as f64 * bin_hz;
        let weighted = p * 10f64.powf(outer_ear_weight_db(f) / 10.0);
        let band = BARK_EDGES_HZ
            .iter()
            .position(|&edge| f <= edge)
            .unwrap_or(N_BANDS - 1);
        bands[band] += weighted;
    }
    bands
}

/// Converts band energies to dB with `db_max` at unit energy, floored.
pub fn bands_to_db(bands: &[f64; N_BANDS], db_max: f64) -> [f64; N_BANDS] {
    let mut out = [DB_FLOOR; N_BANDS];
    for (o, &e) in out.iter_mut().zip(bands) {
        if e > 0.0 {
            *o = (10.0 * e.log10() + db_max).max(DB_FLOOR);
        }
    }
    out
}

/// Applies the spreading function across bands, in dB.
pub fn spread(bands_db: &[f64; N_BANDS]) -> [f64; N_BANDS] {
    let mut out = [0.0; N_BANDS];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &b) in bands_db.iter().enumerate() {
            let s = spreading_db(i as f64 - j as f64);
            acc += 10f64.powf((b + s) / 10.0);
        }
        *o = 10.0 * acc.log10();
    }
    out
}

/// Loudness level (phon) to loudness (sone).
pub fn phon_to_sone(phon: f64) -> f64 {
    if phon >= 40.0 {
        2f64.powf((phon - 40.0) / 10.0)
    } else {
        (phon.max(0.0) / 40.0).powf(2.642)
    }
}

/// Stevens-style summation of specific loudness.
pub fn total_from_specific(specific: &[f64; N_BANDS]) -> f64 {
    let max = specific.iter().cloned().fold(0.0, f64::max);
    let sum: f64 = specific.iter().sum();
    max + 0.15 * (sum - max)
}

struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    norm: f64,
    buf: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    fn new(window_length: usize) -> SpectrumAnalyzer {
        let window_sum: f64 = hann_window(window_length).iter().sum();
        let half = window_sum / 2.0;
        SpectrumAnalyzer {
            fft: FftPlanner::new().plan_fft_forward(window_length),
            norm: half * half,
            buf: vec![Complex::new(0.0, 0.0); window_length],
        }
    }

    /// One-sided normalized power spectrum of an already-windowed frame.
    fn analyze(&mut self, windowed_frame: &[f64]) -> Vec<f64> {
        for (c, &s) in self.buf.iter_mut().zip(windowed_frame) {
            *c = Complex::new(s, 0.0);
        }
        self.fft.process(&mut self.buf);
        self.buf[..windowed_frame.len() / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / self.norm)
            .collect()
    }
}

/// One-sided normalized power spectrum of an already-windowed frame.
///
/// Normalization is (sum(hann)/2)^2 so a full-scale sine at a bin center
/// yields peak power 1.
pub fn power_spectrum(windowed_frame: &[f64]) -> Vec<f64> {
    SpectrumAnalyzer::new(windowed_frame.len()).analyze(windowed_frame)
}

/// Computes the loudness time series for a buffer.
///
/// The window length must be even (real-FFT bin layout); hop and window
/// follow the framing contract.
pub fn loudness_series(
    buffer: &AudioBuffer,
    params: &LoudnessParams,
) -> Result<Vec<LoudnessFrame>, AudioError> {
    if params.window_length % 2 != 0 {
        return Err(AudioError::InvalidParams(format!(
            "window length {} must be even",
            params.window_length
        )));
    }
    if !(params.db_max > 0.0) {
        return Err(AudioError::InvalidParams(format!(
            "db_max {} must be positive",
            params.db_max
        )));
    }
    let series = frame_signal(buffer, params.window_length, params.hop_length)?;
    let mut analyzer = SpectrumAnalyzer::new(params.window_length);
    let mut out = Vec::with_capacity(series.frames.len());
    for (frame, &time_s) in series.frames.iter().zip(&series.frame_times) {
        let power = analyzer.analyze(frame);
        let bands = bark_band_energies(&power, buffer.sample_rate);
        let db = bands_to_db(&bands, params.db_max);
        let phon = spread(&db);
        let mut specific = [0.0; N_BANDS];
        for (s, &p) in specific.iter_mut().zip(&phon) {
            *s = phon_to_sone(p);
        }
        out.push(LoudnessFrame {
            time_s,
            total_sone: total_from_specific(&specific),
            specific_sone: specific,
        });
    }
    Ok(out)
}
