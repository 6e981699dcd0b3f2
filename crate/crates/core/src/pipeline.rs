//! Streaming runtime: a point-cloud source (sim, signal chain, tracker), a
//! signature collector and a classifier, either as one loop or as three
//! threads joined by bounded queues.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dsp::{CfarParams, RadarPoint, SignalChain};
use crate::error::{ConfigError, Result};
use crate::nn::Model;
use crate::signature::{Collector, DopplerPattern, SignatureProfile};
use crate::sim::{synthesize_frame, Scene};
use crate::tracking::{Tracker, TrackerOutput, TrackerParams};
use crate::waveform::{derive_params, DerivedParams, WaveformConfig};

/// Frames buffered between two stages before the producer blocks.
pub const QUEUE_CAPACITY: usize = 8;

/// One line of the output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamRecord {
    Point { frame: u64, track_id: Option<u64>, x: f64, y: f64, v: f64, intensity: f64 },
    Prediction { frame: u64, track_id: u64, label: u8, class: String, probability: f64 },
}

impl StreamRecord {
    pub fn frame(&self) -> u64 {
        match self {
            StreamRecord::Point { frame, .. } | StreamRecord::Prediction { frame, .. } => *frame,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Three threads connected by bounded queues.
    Staged,
    /// One thread running the stages back to back.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub waveform: WaveformConfig,
    pub cfar: CfarParams,
    pub tracker: TrackerParams,
    pub profile: SignatureProfile,
    /// Hold each frame until its wall-clock slot.
    pub paced: bool,
    pub mode: Mode,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::default(),
            cfar: CfarParams::default(),
            tracker: TrackerParams::default(),
            profile: SignatureProfile::paper_match(),
            paced: true,
            mode: Mode::Staged,
        }
    }
}

/// Per-frame timing. `latency` covers signal chain, tracking, signature and
/// prediction; simulation is reported separately.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamStats {
    pub frames: u64,
    pub points: u64,
    pub predictions: u64,
    pub mean_sim: Duration,
    pub mean_latency: Duration,
    pub max_latency: Duration,
}

struct SourceMsg {
    out: TrackerOutput,
    sim: Duration,
    work: Duration,
}

struct CollectedMsg {
    frame: u64,
    points: Vec<RadarPoint>,
    patterns: Vec<DopplerPattern>,
    sim: Duration,
    work: Duration,
}

struct Source<'a> {
    scene: &'a Scene,
    waveform: &'a WaveformConfig,
    derived: DerivedParams,
    chain: SignalChain<f32>,
    tracker: Tracker,
}

impl Source<'_> {
    fn frame(&mut self, frame: u64) -> Result<SourceMsg> {
        let t = Instant::now();
        let cube = synthesize_frame::<f32>(self.scene, frame, self.waveform, &self.derived);
        let sim = t.elapsed();
        let t = Instant::now();
        let points = self.chain.process(cube)?;
        let out = self.tracker.step(&points, frame)?;
        Ok(SourceMsg { out, sim, work: t.elapsed() })
    }
}

fn collect(collector: &mut Collector, msg: SourceMsg) -> Result<CollectedMsg> {
    let t = Instant::now();
    let patterns = collector.process(&msg.out)?;
    Ok(CollectedMsg {
        frame: msg.out.frame_index,
        points: msg.out.points,
        patterns,
        sim: msg.sim,
        work: msg.work + t.elapsed(),
    })
}

struct Classifier<'a, F> {
    model: &'a Model<f32>,
    sink: F,
    stats: StreamStats,
    sim_total: Duration,
    latency_total: Duration,
}

impl<F: FnMut(&StreamRecord) -> std::io::Result<()>> Classifier<'_, F> {
    fn frame(&mut self, msg: CollectedMsg) -> Result<()> {
        let t = Instant::now();
        let mut predictions = Vec::with_capacity(msg.patterns.len());
        for p in &msg.patterns {
            let (class, probs) = self.model.predict(p)?;
            predictions.push(StreamRecord::Prediction {
                frame: msg.frame,
                track_id: p.track_id,
                label: class.label(),
                class: class.name().to_string(),
                probability: probs[class.label() as usize],
            });
        }
        let latency = msg.work + t.elapsed();
        for p in &msg.points {
            (self.sink)(&StreamRecord::Point {
                frame: msg.frame,
                track_id: p.track_id,
                x: p.x,
                y: p.y,
                v: p.radial_velocity,
                intensity: p.intensity,
            })?;
        }
        for r in &predictions {
            (self.sink)(r)?;
        }
        self.stats.frames += 1;
        self.stats.points += msg.points.len() as u64;
        self.stats.predictions += predictions.len() as u64;
        self.stats.max_latency = self.stats.max_latency.max(latency);
        self.latency_total += latency;
        self.sim_total += msg.sim;
        Ok(())
    }

    fn finish(mut self) -> StreamStats {
        if self.stats.frames > 0 {
            let n = self.stats.frames as u32;
            self.stats.mean_latency = self.latency_total / n;
            self.stats.mean_sim = self.sim_total / n;
        }
        self.stats
    }
}

/// Runs `scene` for its full duration, handing every record to `sink` in
/// frame order with points before predictions.
pub fn run_stream<F>(scene: &Scene, model: &Model<f32>, cfg: &StreamConfig, sink: F) -> Result<StreamStats>
where
    F: FnMut(&StreamRecord) -> std::io::Result<()>,
{
    let derived = derive_params(&cfg.waveform)?;
    scene.check(&derived)?;
    cfg.profile.check()?;
    let mc = model.config();
    if (mc.input_height, mc.input_width) != (cfg.profile.depth, cfg.profile.width) {
        return Err(ConfigError::inconsistent(
            "model input matches the signature profile",
            format!("model {}x{}, profile {}x{}", mc.input_height, mc.input_width, cfg.profile.depth, cfg.profile.width),
        )
        .into());
    }
    let frames = scene.frames(&derived);
    let frame_period = derived.frame_period;
    let mut source = Source {
        scene,
        waveform: &cfg.waveform,
        chain: SignalChain::new(derived.clone(), cfg.cfar)?,
        tracker: Tracker::new(TrackerParams { frame_period, ..cfg.tracker }),
        derived: derived.clone(),
    };
    let mut collector = Collector::new(cfg.profile.clone(), derived.velocity_resolution);
    let mut classifier =
        Classifier { model, sink, stats: StreamStats::default(), sim_total: Duration::ZERO, latency_total: Duration::ZERO };
    let start = Instant::now();
    let pace = |frame: u64| {
        if cfg.paced {
            let due = Duration::from_secs_f64(frame as f64 * frame_period);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
    };

    match cfg.mode {
        Mode::Sequential => {
            for frame in 0..frames {
                pace(frame);
                let msg = collect(&mut collector, source.frame(frame)?)?;
                classifier.frame(msg)?;
            }
        }
        Mode::Staged => {
            let (tx1, rx1): (SyncSender<SourceMsg>, Receiver<SourceMsg>) = sync_channel(QUEUE_CAPACITY);
            let (tx2, rx2): (SyncSender<CollectedMsg>, Receiver<CollectedMsg>) = sync_channel(QUEUE_CAPACITY);
            thread::scope(|s| -> Result<()> {
                let producer = s.spawn(move || -> Result<()> {
                    for frame in 0..frames {
                        pace(frame);
                        let msg = source.frame(frame)?;
                        if tx1.send(msg).is_err() {
                            break;
                        }
                    }
                    Ok(())
                });
                let middle = s.spawn(move || -> Result<()> {
                    for msg in rx1 {
                        if tx2.send(collect(&mut collector, msg)?).is_err() {
                            break;
                        }
                    }
                    Ok(())
                });
                // The classifier runs here so the sink need not be `Send`.
                let mut result = Ok(());
                for msg in rx2 {
                    if let Err(e) = classifier.frame(msg) {
                        result = Err(e);
                        break;
                    }
                }
                let up = producer.join().expect("source stage panicked");
                let mid = middle.join().expect("signature stage panicked");
                // Report the earliest stage's failure: downstream errors are
                // often a consequence of it.
                up.and(mid).and(result)
            })?;
        }
    }
    Ok(classifier.finish())
}

/// Predictions of one track scored against the simulated ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackScore {
    pub track_id: u64,
    /// Index of the actor most of the track's points lie nearest to.
    pub actor: usize,
    pub predictions: usize,
    pub correct: usize,
}

impl TrackScore {
    pub fn accuracy(&self) -> f64 {
        if self.predictions == 0 {
            0.0
        } else {
            self.correct as f64 / self.predictions as f64
        }
    }
}

/// Scores stream predictions per track. Each track is attributed to the actor
/// nearest the majority of its points; each prediction is right when it names
/// the behavior that actor showed over the prediction's window (a falling
/// actor counts as `Other` between falls).
pub fn score_tracks(scene: &Scene, derived: &DerivedParams, window: usize, records: &[StreamRecord]) -> Vec<TrackScore> {
    use std::collections::BTreeMap;
    let mut votes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for r in records {
        let StreamRecord::Point { frame, track_id: Some(id), x, y, .. } = r else { continue };
        let t = Scene::time_of(*frame, derived);
        let nearest = scene
            .actors
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_active(t))
            .map(|(i, a)| {
                let (ax, ay) = a.torso_position(t);
                (i, (ax - x).hypot(ay - y))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = nearest {
            votes.entry(*id).or_insert_with(|| vec![0; scene.actors.len()])[i] += 1;
        }
    }
    let owner: BTreeMap<u64, usize> = votes
        .into_iter()
        .map(|(id, v)| (id, v.iter().enumerate().max_by_key(|&(i, n)| (*n, std::cmp::Reverse(i))).map(|(i, _)| i).unwrap_or(0)))
        .collect();
    let mut scores: BTreeMap<u64, TrackScore> = BTreeMap::new();
    for r in records {
        let StreamRecord::Prediction { frame, track_id, label, .. } = r else { continue };
        let Some(&actor) = owner.get(track_id) else { continue };
        let first = (frame + 1).saturating_sub(window as u64);
        let truth = scene.actors[actor].window_label(Scene::time_of(first, derived), Scene::time_of(*frame, derived));
        let s = scores.entry(*track_id).or_insert(TrackScore { track_id: *track_id, actor, predictions: 0, correct: 0 });
        s.predictions += 1;
        s.correct += usize::from(truth.label() == *label);
    }
    scores.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nn::ModelConfig;
    use crate::sim::{Actor, BehaviorClass};

    fn small() -> (StreamConfig, Model<f32>) {
        let profile = SignatureProfile { width: 16, ..SignatureProfile::paper_match() };
        let model = Model::new(ModelConfig::for_profile(&profile), 1).unwrap();
        (StreamConfig { profile, paced: false, ..Default::default() }, model)
    }

    #[test]
    fn record_json_shape() {
        let r = StreamRecord::Prediction { frame: 3, track_id: 1, label: 2, class: "Falling".into(), probability: 0.5 };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["type"], "prediction");
        assert_eq!(v["label"], 2);
        let back: StreamRecord = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_scene_emits_nothing() {
        let (cfg, model) = small();
        let scene = Scene { duration: 1.0, ..Scene::default() };
        let mut n = 0;
        let stats = run_stream(&scene, &model, &cfg, |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!((n, stats.frames, stats.predictions), (0, 20, 0));
    }

    #[test]
    fn staged_and_sequential_agree() {
        let (cfg, model) = small();
        let scene = Scene {
            actors: vec![Actor::with_defaults(BehaviorClass::Walking, (0.0, 2.5), 0.0, 3.0, 2)],
            duration: 3.0,
            seed: 4,
            ..Scene::default()
        };
        let run = |mode| {
            let mut out = Vec::new();
            run_stream(&scene, &model, &StreamConfig { mode, ..cfg.clone() }, |r| {
                out.push(r.clone());
                Ok(())
            })
            .unwrap();
            out
        };
        let staged = run(Mode::Staged);
        assert!(staged.iter().any(|r| matches!(r, StreamRecord::Prediction { .. })));
        assert_eq!(staged, run(Mode::Sequential));
    }

    #[test]
    fn sink_failure_stops_the_stream() {
        let (cfg, model) = small();
        let scene = Scene {
            actors: vec![Actor::with_defaults(BehaviorClass::Walking, (0.0, 2.5), 0.0, 3.0, 2)],
            duration: 3.0,
            ..Scene::default()
        };
        let r = run_stream(&scene, &model, &cfg, |_| Err(std::io::Error::other("closed")));
        assert!(matches!(r, Err(Error::Io(_))));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let (cfg, _) = small();
        let model = Model::new(ModelConfig::default(), 1).unwrap();
        let r = run_stream(&Scene::default(), &model, &cfg, |_| Ok(()));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn scoring_attributes_tracks_to_nearest_actor() {
        let scene = Scene {
            actors: vec![
                Actor::with_defaults(BehaviorClass::Swing, (-1.5, 2.5), 0.0, 10.0, 1),
                Actor::with_defaults(BehaviorClass::Seizure, (1.5, 2.5), 0.0, 10.0, 2),
            ],
            ..Scene::default()
        };
        let d = derive_params(&WaveformConfig::default()).unwrap();
        let point = |frame, id, x| StreamRecord::Point { frame, track_id: Some(id), x, y: 2.5, v: 0.0, intensity: 1.0 };
        let pred = |frame, id, label: u8| StreamRecord::Prediction { frame, track_id: id, label, class: String::new(), probability: 1.0 };
        let records = vec![point(0, 7, 1.4), point(0, 9, -1.6), point(1, 9, -1.5), pred(20, 7, 4), pred(21, 7, 3), pred(20, 9, 3), pred(20, 11, 3)];
        let scores = score_tracks(&scene, &d, 20, &records);
        assert_eq!(scores.len(), 2);
        assert_eq!((scores[0].track_id, scores[0].actor, scores[0].predictions, scores[0].correct), (7, 1, 2, 1));
        assert_eq!((scores[1].track_id, scores[1].actor, scores[1].accuracy()), (9, 0, 1.0));
    }
}
