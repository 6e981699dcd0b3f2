//! Per-frame clustering and multi-target tracking.

mod dbscan;
mod kalman;

pub use dbscan::{dbscan, ClusterLabeling};
pub use kalman::{KalmanParams, KalmanState};

use crate::dsp::RadarPoint;
use crate::error::OrderingError;

/// Chi-square 99% point for two degrees of freedom.
pub const GATE_CHI2_2DOF_99: f64 = 9.21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    pub eps: f64,
    pub min_pts: usize,
    /// Metres of clustering distance per m/s of radial velocity.
    pub doppler_weight: f64,
    pub gate: f64,
    pub confirm_hits: u32,
    pub confirm_window: u32,
    pub max_misses: u32,
    /// Seconds between consecutive frame indices.
    pub frame_period: f64,
    pub kalman: KalmanParams,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            eps: 0.5,
            min_pts: 5,
            doppler_weight: 0.2,
            gate: GATE_CHI2_2DOF_99,
            confirm_hits: 3,
            confirm_window: 5,
            max_misses: 10,
            frame_period: 0.05,
            kalman: KalmanParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Coasting,
}

impl TrackStatus {
    /// Confirmed or coasting.
    pub fn is_established(self) -> bool {
        !matches!(self, TrackStatus::Tentative)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub status: TrackStatus,
    pub hits: u32,
    /// Consecutive misses.
    pub misses: u32,
    pub last_update_frame: u64,
    /// Hit history, newest frame in bit 0.
    history: u32,
    /// Frames since birth, saturating at the confirmation window.
    window_len: u32,
}

impl Track {
    fn new(id: u64, z: (f64, f64), frame: u64, params: &TrackerParams) -> Self {
        Self {
            id,
            state: KalmanState::at(z, &params.kalman),
            status: TrackStatus::Tentative,
            hits: 1,
            misses: 0,
            last_update_frame: frame,
            history: 1,
            window_len: 1,
        }
    }

    fn push_history(&mut self, hit: bool, window: u32) {
        let mask = (1u32 << window) - 1;
        self.history = ((self.history << 1) | hit as u32) & mask;
        self.window_len = (self.window_len + 1).min(window);
    }

    fn window_hits(&self) -> u32 {
        self.history.count_ones()
    }

    fn window_misses(&self) -> u32 {
        self.window_len - self.window_hits()
    }

    pub fn summary(&self) -> TrackSummary {
        TrackSummary {
            id: self.id,
            status: self.status,
            position: self.state.position(),
            velocity: self.state.velocity(),
            hits: self.hits,
            misses: self.misses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSummary {
    pub id: u64,
    pub status: TrackStatus,
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub hits: u32,
    pub misses: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// (track index, cluster index)
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_clusters: Vec<usize>,
}

/// Greedy nearest-neighbour assignment in ascending Mahalanobis distance,
/// with pairs beyond `gate` forbidden.
pub fn associate(tracks: &[Track], centroids: &[(f64, f64)], kalman: &KalmanParams, gate: f64) -> Association {
    let mut pairs = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for (ci, &c) in centroids.iter().enumerate() {
            let d2 = t.state.mahalanobis2(c, kalman);
            if d2 <= gate {
                pairs.push((d2, ti, ci));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut track_used = vec![false; tracks.len()];
    let mut cluster_used = vec![false; centroids.len()];
    let mut out = Association::default();
    for (_, ti, ci) in pairs {
        if !track_used[ti] && !cluster_used[ci] {
            track_used[ti] = true;
            cluster_used[ci] = true;
            out.matches.push((ti, ci));
        }
    }
    out.matches.sort_unstable();
    out.unmatched_tracks = (0..tracks.len()).filter(|&i| !track_used[i]).collect();
    out.unmatched_clusters = (0..centroids.len()).filter(|&i| !cluster_used[i]).collect();
    out
}

/// Intensity-weighted mean position; plain mean when all weights are zero.
pub fn weighted_centroid(points: &[RadarPoint], members: &[usize]) -> (f64, f64) {
    let total: f64 = members.iter().map(|&i| points[i].intensity.max(0.0)).sum();
    if total > 0.0 {
        let x = members.iter().map(|&i| points[i].x * points[i].intensity.max(0.0)).sum::<f64>() / total;
        let y = members.iter().map(|&i| points[i].y * points[i].intensity.max(0.0)).sum::<f64>() / total;
        (x, y)
    } else {
        let n = members.len() as f64;
        (members.iter().map(|&i| points[i].x).sum::<f64>() / n, members.iter().map(|&i| points[i].y).sum::<f64>() / n)
    }
}

/// Result of one tracker step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerOutput {
    pub frame_index: u64,
    /// Input points, stamped with the id of the track their cluster fed.
    pub points: Vec<RadarPoint>,
    /// Tracks alive after this frame.
    pub tracks: Vec<TrackSummary>,
    /// Ids deleted in this frame.
    pub deleted: Vec<u64>,
}

impl TrackerOutput {
    pub fn points_of(&self, id: u64) -> impl Iterator<Item = &RadarPoint> {
        self.points.iter().filter(move |p| p.track_id == Some(id))
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Self { params, tracks: Vec::new(), next_id: 1, last_frame: None }
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn cluster(&self, points: &[RadarPoint]) -> ClusterLabeling {
        let w = self.params.doppler_weight;
        let features: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, w * p.radial_velocity]).collect();
        dbscan(&features, self.params.eps, self.params.min_pts)
    }

    pub fn step(&mut self, points: &[RadarPoint], frame_index: u64) -> Result<TrackerOutput, OrderingError> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(OrderingError { last, got: frame_index });
            }
        }
        let gap = self.last_frame.map_or(1, |last| frame_index - last);
        self.last_frame = Some(frame_index);
        let p = self.params;
        let dt = gap as f64 * p.frame_period;

        let labeling = self.cluster(points);
        let members = labeling.members();
        let centroids: Vec<(f64, f64)> = members.iter().map(|m| weighted_centroid(points, m)).collect();

        for t in &mut self.tracks {
            t.state.predict(dt, &p.kalman);
        }
        let assoc = associate(&self.tracks, &centroids, &p.kalman, p.gate);

        let mut cluster_track = vec![None; centroids.len()];
        for &(ti, ci) in &assoc.matches {
            let t = &mut self.tracks[ti];
            t.state.update(centroids[ci], &p.kalman);
            t.hits += 1;
            t.misses = 0;
            t.last_update_frame = frame_index;
            t.push_history(true, p.confirm_window);
            t.status = match t.status {
                TrackStatus::Tentative if t.window_hits() >= p.confirm_hits => TrackStatus::Confirmed,
                TrackStatus::Coasting => TrackStatus::Confirmed,
                s => s,
            };
            cluster_track[ci] = Some(t.id);
        }
        for &ti in &assoc.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.misses += 1;
            t.push_history(false, p.confirm_window);
            if t.status == TrackStatus::Confirmed {
                t.status = TrackStatus::Coasting;
            }
        }
        let tentative_limit = p.confirm_window.saturating_sub(p.confirm_hits);
        let mut deleted = Vec::new();
        self.tracks.retain(|t| {
            let drop = t.misses >= p.max_misses
                || (t.status == TrackStatus::Tentative && t.window_misses() > tentative_limit);
            if drop {
                deleted.push(t.id);
            }
            !drop
        });
        for &ci in &assoc.unmatched_clusters {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track::new(id, centroids[ci], frame_index, &p));
            cluster_track[ci] = Some(id);
        }

        let stamped = points
            .iter()
            .zip(&labeling.labels)
            .map(|(pt, label)| RadarPoint {
                track_id: label.and_then(|c| cluster_track[c]),
                frame_index,
                ..*pt
            })
            .collect();
        Ok(TrackerOutput {
            frame_index,
            points: stamped,
            tracks: self.tracks.iter().map(Track::summary).collect(),
            deleted,
        })
    }
}
