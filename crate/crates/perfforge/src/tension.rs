//! Spiral-array tonal tension over sliding time windows.
//!
//! Pitch classes are embedded on a helix along the line of fifths; each
//! window's note cloud yields a diameter (max pairwise distance), a momentum
//! (center-of-effect displacement from the previous window), and a strain
//! (distance from the whole piece's duration-weighted center).

use crate::midi::MidiNote;

/// Helix radius.
pub const R: f64 = 1.0;

/// Helix rise per line-of-fifths step, sqrt(2/15).
pub fn helix_h() -> f64 {
    f64::sqrt(2.0 / 15.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpiralPoint {
    pub fn distance(self, other: SpiralPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Note duration overlapped with the window.
    Duration,
    /// One per note.
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensionParams {
    pub window_s: f64,
    pub hop_s: f64,
    pub weight: WeightMode,
}

impl Default for TensionParams {
    fn default() -> TensionParams {
        TensionParams {
            window_s: 1.0,
            hop_s: 0.5,
            weight: WeightMode::Duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensionFrame {
    pub time_s: f64,
    pub diameter: f64,
    pub momentum: f64,
    pub strain: f64,
}

/// Line-of-fifths index of a pitch class: the unique k in 0..12 with
/// (7*k) mod 12 = pc, so C->0, G->1, D->2, ...
pub fn fifths_index(pitch_class: u8) -> u8 {
    debug_assert!(pitch_class < 12);
    // 7 is its own inverse mod 12: k = (7 * pc) mod 12.
    (7 * pitch_class) % 12
}

/// Helix coordinates of a pitch class.
pub fn spiral_position(pitch_class: u8) -> SpiralPoint {
    let k = f64::from(fifths_index(pitch_class));
    let angle = k * std::f64::consts::FRAC_PI_2;
    SpiralPoint {
        x: R * angle.sin(),
        y: R * angle.cos(),
        z: k * helix_h(),
    }
}

/// Weighted arithmetic mean of points; None when total weight is zero.
pub fn center_of_effect(points: &[(SpiralPoint, f64)]) -> Option<SpiralPoint> {
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = SpiralPoint { x: 0.0, y: 0.0, z: 0.0 };
    for (p, w) in points {
        acc.x += p.x * w;
        acc.y += p.y * w;
        acc.z += p.z * w;
    }
    Some(SpiralPoint {
        x: acc.x / total,
        y: acc.y / total,
        z: acc.z / total,
    })
}

/// Maximum pairwise distance over the distinct pitch classes present.
pub fn cloud_diameter(pitch_classes: &[u8]) -> f64 {
    let mut seen = [false; 12];
    let mut points: Vec<SpiralPoint> = Vec::new();
    for &pc in pitch_classes {
        if !seen[usize::from(pc % 12)] {
            seen[usize::from(pc % 12)] = true;
            points.push(spiral_position(pc % 12));
        }
    }
    let mut max = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            max = max.max(points[i].distance(points[j]));
        }
    }
    max
}

struct WindowCloud {
    pitch_classes: Vec<u8>,
    weighted: Vec<(SpiralPoint, f64)>,
}

fn window_cloud(notes: &[MidiNote], start: f64, end: f64, weight: WeightMode) -> WindowCloud {
    let mut pitch_classes = Vec::new();
    let mut weighted = Vec::new();
    for n in notes {
        let off = n.onset_s + n.duration_s;
        if n.onset_s < end && off > start {
            let pc = n.pitch % 12;
            pitch_classes.push(pc);
            let w = match weight {
                WeightMode::Duration => off.min(end) - n.onset_s.max(start),
                WeightMode::Count => 1.0,
            };
            weighted.push((spiral_position(pc), w));
        }
    }
    WindowCloud {
        pitch_classes,
        weighted,
    }
}

/// Tension frames over [t, t+window) hopped by hop from t = 0 while the
/// window start precedes the last note offset.
pub fn tension_series(notes: &[MidiNote], params: &TensionParams) -> Vec<TensionFrame> {
    if notes.is_empty() {
        return Vec::new();
    }
    let last_offset = notes
        .iter()
        .map(|n| n.onset_s + n.duration_s)
        .fold(0.0f64, f64::max);

    let global_weighted: Vec<(SpiralPoint, f64)> = notes
        .iter()
        .map(|n| (spiral_position(n.pitch % 12), n.duration_s))
        .collect();
    let global_ce = center_of_effect(&global_weighted);

    let mut frames = Vec::new();
    let mut prev_ce: Option<SpiralPoint> = None;
    let mut k = 0u64;
    loop {
        let start = k as f64 * params.hop_s;
        if start >= last_offset {
            break;
        }
        let end = start + params.window_s;
        let cloud = window_cloud(notes, start, end, params.weight);
        let ce = center_of_effect(&cloud.weighted);
        let diameter = cloud_diameter(&cloud.pitch_classes);
        let momentum = match (ce, prev_ce) {
            (Some(cur), Some(prev)) => cur.distance(prev),
            _ => 0.0,
        };
        let strain = match (ce, global_ce) {
            (Some(cur), Some(global)) => cur.distance(global),
            _ => 0.0,
        };
        frames.push(TensionFrame {
            time_s: start + params.window_s / 2.0,
            diameter,
            momentum,
            strain,
        });
        prev_ce = ce;
        k += 1;
    }
    frames
}
