//! Per-track Doppler-versus-time patterns.
//!
//! Every frame, each live track contributes one column: the range-compensated
//! intensity of its points binned by radial velocity and folded down to the
//! profile's depth. A sliding window of the last `width` columns, normalized
//! to a peak of one, is the classifier input.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::dsp::RadarPoint;
use crate::error::{ConfigError, OrderingError};
use crate::tracking::TrackerOutput;

/// Raw Doppler bins per frame before folding.
pub const RAW_DOPPLER_BINS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureProfile {
    pub name: String,
    /// Folded Doppler bins (image height).
    pub depth: usize,
    /// Frames per pattern (image width).
    pub width: usize,
    pub fold: usize,
    /// Frames between successive patterns of one track.
    pub stride: usize,
    pub range_exponent: i32,
    pub reference_range: f64,
}

impl SignatureProfile {
    /// 64 × 48: the input size that yields the published parameter count.
    pub fn paper_match() -> Self {
        Self { name: "paper-match".into(), depth: 64, width: 48, fold: 2, stride: 1, range_exponent: 4, reference_range: 1.0 }
    }

    /// 64 × 20: one second of 50 ms frames.
    pub fn paper_timing() -> Self {
        Self { width: 20, name: "paper-timing".into(), ..Self::paper_match() }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.fold == 0 || self.depth * self.fold != RAW_DOPPLER_BINS {
            return Err(ConfigError::inconsistent(
                "fold * depth = 128",
                format!("fold {} * depth {}", self.fold, self.depth),
            ));
        }
        if self.width == 0 || self.stride == 0 {
            return Err(ConfigError::inconsistent("width, stride >= 1", format!("width {} stride {}", self.width, self.stride)));
        }
        if self.range_exponent != 2 && self.range_exponent != 4 {
            return Err(ConfigError::inconsistent("range_exponent in {2, 4}", self.range_exponent.to_string()));
        }
        if !(self.reference_range > 0.0) {
            return Err(ConfigError::inconsistent("reference_range > 0", self.reference_range.to_string()));
        }
        Ok(())
    }
}

impl FromStr for SignatureProfile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-match" => Ok(Self::paper_match()),
            "paper-timing" => Ok(Self::paper_timing()),
            other => Err(ConfigError::Parse { line: 0, message: format!("unknown profile `{other}` (paper-match, paper-timing)") }),
        }
    }
}

/// Raw (unfolded) Doppler bin for a radial velocity, clipped to the span.
pub fn raw_doppler_bin(radial_velocity: f64, velocity_resolution: f64) -> usize {
    let b = (radial_velocity / velocity_resolution).round() + (RAW_DOPPLER_BINS / 2) as f64;
    b.clamp(0.0, (RAW_DOPPLER_BINS - 1) as f64) as usize
}

/// Range-compensated weight of one point.
pub fn compensated_weight(p: &RadarPoint, profile: &SignatureProfile) -> f64 {
    p.intensity * (p.range() / profile.reference_range).powi(profile.range_exponent)
}

/// One folded column from the points of a single track in a single frame.
pub fn accumulate_column<'a>(
    points: impl IntoIterator<Item = &'a RadarPoint>,
    profile: &SignatureProfile,
    velocity_resolution: f64,
) -> Vec<f64> {
    let mut col = vec![0.0; profile.depth];
    for p in points {
        let bin = raw_doppler_bin(p.radial_velocity, velocity_resolution);
        col[bin / profile.fold] += compensated_weight(p, profile);
    }
    col
}

/// Normalized D × T pattern, row-major with rows as Doppler bins and
/// columns as frames (oldest first).
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerPattern {
    pub depth: usize,
    pub width: usize,
    pub values: Vec<f32>,
    pub track_id: u64,
    pub start_frame: u64,
}

impl DopplerPattern {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// 8-bit binary graymap, highest Doppler bin on the top row.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = write!(header, "P5\n{} {}\n255\n", self.width, self.depth);
        let mut out = header.into_bytes();
        for row in (0..self.depth).rev() {
            for col in 0..self.width {
                out.push((255.0 * self.get(row, col).clamp(0.0, 1.0)).round() as u8);
            }
        }
        out
    }
}

/// Divides by the maximum; an all-zero matrix is returned as zeros.
pub fn normalize_pattern(raw: &[f64]) -> Vec<f32> {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|&v| (v / max) as f32).collect()
    } else {
        raw.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Debug, Clone, Default)]
struct TrackBuffer {
    columns: VecDeque<Vec<f64>>,
    last_frame: Option<u64>,
    pushed: u64,
}

/// Sliding-window pattern builder keyed by track id.
#[derive(Debug, Clone)]
pub struct Collector {
    profile: SignatureProfile,
    velocity_resolution: f64,
    buffers: BTreeMap<u64, TrackBuffer>,
}

impl Collector {
    pub fn new(profile: SignatureProfile, velocity_resolution: f64) -> Self {
        Self { profile, velocity_resolution, buffers: BTreeMap::new() }
    }

    pub fn profile(&self) -> &SignatureProfile {
        &self.profile
    }

    pub fn live_tracks(&self) -> impl Iterator<Item = u64> + '_ {
        self.buffers.keys().copied()
    }

    /// Appends one column; returns a pattern when the window is full and the
    /// stride is due.
    pub fn push_frame(&mut self, track_id: u64, column: Vec<f64>, frame_index: u64) -> Result<Option<DopplerPattern>, OrderingError> {
        assert_eq!(column.len(), self.profile.depth, "column depth");
        let buf = self.buffers.entry(track_id).or_default();
        if let Some(last) = buf.last_frame {
            if frame_index <= last {
                return Err(OrderingError { last, got: frame_index });
            }
        }
        buf.last_frame = Some(frame_index);
        buf.pushed += 1;
        buf.columns.push_back(column);
        let (depth, width) = (self.profile.depth, self.profile.width);
        if buf.columns.len() > width {
            buf.columns.pop_front();
        }
        if buf.columns.len() < width || (buf.pushed - width as u64) % self.profile.stride as u64 != 0 {
            return Ok(None);
        }
        let mut raw = vec![0.0; depth * width];
        for (t, col) in buf.columns.iter().enumerate() {
            for (d, v) in col.iter().enumerate() {
                raw[d * width + t] = *v;
            }
        }
        Ok(Some(DopplerPattern {
            depth,
            width,
            values: normalize_pattern(&raw),
            track_id,
            start_frame: frame_index + 1 - width as u64,
        }))
    }

    /// Drops a track's buffer.
    pub fn remove(&mut self, track_id: u64) {
        self.buffers.remove(&track_id);
    }

    /// Pushes one column for every live track in a tracker output and drops
    /// deleted tracks.
    pub fn process(&mut self, out: &TrackerOutput) -> Result<Vec<DopplerPattern>, OrderingError> {
        for id in &out.deleted {
            self.remove(*id);
        }
        let mut by_track: BTreeMap<u64, Vec<&RadarPoint>> = out.tracks.iter().map(|t| (t.id, Vec::new())).collect();
        for p in &out.points {
            if let Some(list) = p.track_id.and_then(|id| by_track.get_mut(&id)) {
                list.push(p);
            }
        }
        let mut patterns = Vec::new();
        for (id, pts) in by_track {
            let col = accumulate_column(pts, &self.profile, self.velocity_resolution);
            if let Some(p) = self.push_frame(id, col, out.frame_index)? {
                patterns.push(p);
            }
        }
        Ok(patterns)
    }
}
