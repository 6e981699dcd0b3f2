//! Labeled synthetic datasets: single-actor scenes run through the full
//! sim, signal chain, tracker and collector, harvesting the actor's patterns.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binio::{Reader, Writer};
use crate::dsp::{CfarParams, SignalChain};
use crate::error::{Error, FormatError, Result};
use crate::nn::LabeledInput;
use crate::signature::{Collector, DopplerPattern, SignatureProfile};
use crate::sim::{synthesize_frame, Actor, BehaviorClass, Motion, Scene};
use crate::tracking::{Tracker, TrackerParams};
use crate::waveform::{derive_params, WaveformConfig};

pub const DATASET_MAGIC: [u8; 4] = *b"RBDS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub pattern: DopplerPattern,
    pub label: BehaviorClass,
}

impl LabeledInput for LabeledSample {
    fn input(&self) -> &[f32] {
        &self.pattern.values
    }

    fn label(&self) -> usize {
        self.label.label() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub profile: SignatureProfile,
    /// Seed the samples were generated from.
    pub seed: u64,
}

impl Dataset {
    pub fn empty(profile: SignatureProfile, seed: u64) -> Self {
        Self { samples: Vec::new(), profile, seed }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per class, indexed by label.
    pub fn class_counts(&self) -> [usize; BehaviorClass::COUNT] {
        let mut counts = [0; BehaviorClass::COUNT];
        for s in &self.samples {
            counts[s.label.label() as usize] += 1;
        }
        counts
    }

    /// JSON-lines summary: one header line, then one line per class.
    pub fn manifest(&self) -> String {
        let mut out = serde_json::json!({
            "format": "RBDS",
            "version": DATASET_VERSION,
            "samples": self.samples.len(),
            "seed": self.seed,
            "profile": {
                "name": self.profile.name,
                "depth": self.profile.depth,
                "width": self.profile.width,
                "fold": self.profile.fold,
                "stride": self.profile.stride,
                "range_exponent": self.profile.range_exponent,
                "reference_range": self.profile.reference_range,
            },
        })
        .to_string();
        out.push('\n');
        for (b, n) in BehaviorClass::ALL.iter().zip(self.class_counts()) {
            out.push_str(&serde_json::json!({ "class": b.key(), "label": b.label(), "count": n }).to_string());
            out.push('\n');
        }
        out
    }
}

/// Knobs of the generator. Scene geometry is drawn per scene from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub waveform: WaveformConfig,
    pub cfar: CfarParams,
    /// `frame_period` is replaced by the waveform's.
    pub tracker: TrackerParams,
    pub profile: SignatureProfile,
    /// Samples harvested from one scene before a fresh one is drawn.
    pub samples_per_scene: usize,
    /// Minimum frames between two harvested windows of one scene.
    pub harvest_stride: u64,
    /// Harvest stride for falling scenes, where only windows holding a fall
    /// are usable.
    pub fall_harvest_stride: u64,
    /// Falling windows need a peak radial speed above this, m/s.
    pub fall_speed_threshold: f64,
    /// Actor anchor range interval, m.
    pub anchor_range: (f64, f64),
    /// Actor anchor azimuth limit, rad.
    pub anchor_azimuth: f64,
    /// Every n-th `Other` scene uses a falling actor between falls; 0 disables.
    pub other_from_falls: u64,
    /// Give up on a scene that has not filled its quota after this many frames.
    pub max_scene_frames: u64,
    /// Fresh scenes tried per slot before generation fails.
    pub attempts: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::default(),
            cfar: CfarParams::default(),
            tracker: TrackerParams::default(),
            profile: SignatureProfile::paper_match(),
            samples_per_scene: 12,
            harvest_stride: 10,
            fall_harvest_stride: 6,
            fall_speed_threshold: 2.0,
            anchor_range: (1.8, 3.0),
            anchor_azimuth: 25f64.to_radians(),
            other_from_falls: 3,
            max_scene_frames: 1500,
            attempts: 3,
        }
    }
}

/// One scene's worth of work: `quota` samples of `class`.
#[derive(Debug, Clone, Copy)]
struct Slot {
    class: BehaviorClass,
    index: u64,
    quota: usize,
}

fn plan_slots(counts: &[usize; BehaviorClass::COUNT], per_scene: usize) -> Vec<Slot> {
    let mut slots = Vec::new();
    for (class, &n) in BehaviorClass::ALL.iter().zip(counts) {
        let mut left = n;
        let mut index = 0;
        while left > 0 {
            let quota = left.min(per_scene);
            slots.push(Slot { class: *class, index, quota });
            left -= quota;
            index += 1;
        }
    }
    slots
}

/// Which emitted windows of a scene are usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Harvest {
    Any,
    /// Windows holding a fast fall.
    Fall,
    /// Windows of a falling actor well clear of every fall: standing, lying
    /// and getting up, all of which count as `Other`.
    Idle,
}

/// The scene for one attempt at a slot. Every random choice comes from a
/// stream keyed by (class, scene index, attempt), so slots are independent of
/// each other and of the order they run in.
fn slot_scene(cfg: &GenerationConfig, seed: u64, slot: Slot, attempt: u64, duration: f64) -> Result<(Scene, Harvest)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((slot.class.label() as u64) << 56) | (attempt << 40) | slot.index);
    let range = rng.random_range(cfg.anchor_range.0..=cfg.anchor_range.1);
    let az = rng.random_range(-cfg.anchor_azimuth..=cfg.anchor_azimuth);
    let (mut motion, harvest) = match slot.class {
        BehaviorClass::Falling => (Motion::default_for(BehaviorClass::Falling), Harvest::Fall),
        BehaviorClass::Other if cfg.other_from_falls > 0 && slot.index % cfg.other_from_falls == cfg.other_from_falls - 1 => {
            (Motion::default_for(BehaviorClass::Falling), Harvest::Idle)
        }
        c => (Motion::default_for(c), Harvest::Any),
    };
    if let Motion::Walking { heading, .. } = &mut motion {
        // Walk mostly along the line of sight, in either direction.
        *heading = rng.random_range(-0.3..0.3) + if rng.random::<bool>() { 0.0 } else { PI };
    }
    let actor = Actor::new(motion, (range * az.sin(), range * az.cos()), 0.0, duration, rng.random())?;
    Ok((Scene { actors: vec![actor], seed: rng.random(), duration, ..Scene::default() }, harvest))
}

fn run_slot(cfg: &GenerationConfig, seed: u64, slot: Slot) -> Result<Vec<LabeledSample>> {
    let mut failures = Vec::new();
    for attempt in 0..cfg.attempts.max(1) {
        match run_scene(cfg, seed, slot, attempt)? {
            Ok(samples) => return Ok(samples),
            Err(diagnostic) => failures.push(diagnostic),
        }
    }
    Err(Error::Generation(format!("{} scene {}: {}", slot.class.key(), slot.index, failures.join("; "))))
}

/// Outer error: the pipeline failed. Inner error: the scene did not yield
/// its quota, with a diagnostic.
fn run_scene(cfg: &GenerationConfig, seed: u64, slot: Slot, attempt: u64) -> Result<Result<Vec<LabeledSample>, String>> {
    let derived = derive_params(&cfg.waveform)?;
    let fp = derived.frame_period;
    let (scene, harvest) = slot_scene(cfg, seed, slot, attempt, cfg.max_scene_frames as f64 * fp)?;
    scene.check(&derived)?;
    let actor = &scene.actors[0];
    let chain = SignalChain::<f32>::new(derived.clone(), cfg.cfar)?;
    let mut tracker = Tracker::new(TrackerParams { frame_period: fp, ..cfg.tracker });
    let mut collector = Collector::new(cfg.profile.clone(), derived.velocity_resolution);
    let stride = if harvest == Harvest::Fall { cfg.fall_harvest_stride } else { cfg.harvest_stride };
    let width = cfg.profile.width as u64;
    let fall_duration = match *actor.motion() {
        Motion::Falling { fall_duration, .. } => fall_duration,
        _ => 0.0,
    };

    let mut out = Vec::with_capacity(slot.quota);
    let mut last_harvest: Option<u64> = None;
    let (mut tracked_frames, mut actor_patterns) = (0u64, 0u64);
    for frame in 0..cfg.max_scene_frames {
        let cube = synthesize_frame::<f32>(&scene, frame, &cfg.waveform, &derived);
        let points = chain.process(cube)?;
        let step = tracker.step(&points, frame)?;
        let patterns = collector.process(&step)?;
        let torso = actor.torso_position(Scene::time_of(frame, &derived));
        let Some(nearest) = step
            .tracks
            .iter()
            .filter(|t| t.status.is_established())
            .map(|t| (t.id, (t.position.0 - torso.0).hypot(t.position.1 - torso.1)))
            .filter(|&(_, d)| d < 1.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        tracked_frames += 1;
        let Some(pattern) = patterns.into_iter().find(|p| p.track_id == nearest.0) else {
            continue;
        };
        actor_patterns += 1;
        if last_harvest.is_some_and(|h| frame < h + stride) {
            continue;
        }
        let t0 = Scene::time_of(frame + 1 - width, &derived);
        let t1 = Scene::time_of(frame, &derived);
        let usable = match harvest {
            Harvest::Any => true,
            Harvest::Fall => actor.fall_peaks(t0, t1).iter().any(|&(_, v)| v > cfg.fall_speed_threshold),
            Harvest::Idle => actor.fall_peaks(t0 - fall_duration, t1 + fall_duration).is_empty(),
        };
        if !usable {
            continue;
        }
        last_harvest = Some(frame);
        out.push(LabeledSample {
            pattern: DopplerPattern { track_id: 0, start_frame: 0, ..pattern },
            label: slot.class,
        });
        if out.len() == slot.quota {
            return Ok(Ok(out));
        }
    }
    Ok(Err(format!(
        "attempt {attempt}: tracker held the actor in {tracked_frames} of {} frames, {actor_patterns} actor patterns, \
         harvested {} of {}",
        cfg.max_scene_frames,
        out.len(),
        slot.quota
    )))
}

/// Generates `counts[label]` samples per class. Identical inputs give
/// identical datasets regardless of thread count.
pub fn generate_dataset(counts: &[usize; BehaviorClass::COUNT], cfg: &GenerationConfig, seed: u64) -> Result<Dataset> {
    cfg.profile.check()?;
    if cfg.samples_per_scene == 0 || cfg.harvest_stride == 0 || cfg.fall_harvest_stride == 0 {
        return Err(crate::ConfigError::inconsistent(
            "samples_per_scene, harvest strides >= 1",
            format!("{} {} {}", cfg.samples_per_scene, cfg.harvest_stride, cfg.fall_harvest_stride),
        )
        .into());
    }
    let slots = plan_slots(counts, cfg.samples_per_scene);
    let chunks: Vec<Vec<LabeledSample>> = slots.par_iter().map(|&s| run_slot(cfg, seed, s)).collect::<Result<_>>()?;
    Ok(Dataset { samples: chunks.into_iter().flatten().collect(), profile: cfg.profile.clone(), seed })
}

/// Uniform split without replacement; validation gets
/// `round(val_fraction * N)` samples. Both sides keep the original order.
pub fn split_dataset(dataset: &Dataset, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Split(format!("validation fraction {val_fraction} outside (0, 1)")));
    }
    let n = dataset.len();
    let n_val = (val_fraction * n as f64).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::Split(format!("{n} samples at fraction {val_fraction} leave one side empty")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Dataset::empty(dataset.profile.clone(), dataset.seed), Dataset::empty(dataset.profile.clone(), dataset.seed));
    for (s, v) in dataset.samples.iter().zip(is_val) {
        if v { &mut val } else { &mut train }.samples.push(s.clone());
    }
    Ok((train, val))
}

/// `RBDS` layout, little-endian: magic; version u32; profile name (u32 length
/// and UTF-8 bytes); depth, width, fold, stride u32; range exponent i32;
/// reference range f64; generation seed u64; sample count u64; then per
/// sample label u8, depth u16, width u16 and depth × width f32 values, row
/// major with the highest Doppler bin last.
pub fn dataset_to_bytes(dataset: &Dataset) -> Vec<u8> {
    let p = &dataset.profile;
    let mut w = Writer::default();
    w.bytes(&DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.string(&p.name);
    for v in [p.depth, p.width, p.fold, p.stride] {
        w.u32(v as u32);
    }
    w.u32(p.range_exponent as u32);
    w.f64(p.reference_range);
    w.u64(dataset.seed);
    w.u64(dataset.samples.len() as u64);
    for s in &dataset.samples {
        w.u8(s.label.label());
        w.u16(s.pattern.depth as u16);
        w.u16(s.pattern.width as u16);
        w.f32_slice(&s.pattern.values);
    }
    w.buf
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != DATASET_VERSION {
        return Err(FormatError::Version { version, offset: at });
    }
    let at = r.offset();
    let name = r.string("profile name")?;
    let depth = r.u32("profile depth")? as usize;
    let width = r.u32("profile width")? as usize;
    let fold = r.u32("profile fold")? as usize;
    let stride = r.u32("profile stride")? as usize;
    let range_exponent = r.u32("range exponent")? as i32;
    let reference_range = r.f64("reference range")?;
    let profile = SignatureProfile { name, depth, width, fold, stride, range_exponent, reference_range };
    profile.check().map_err(|e| FormatError::Invalid { offset: at, what: "profile", detail: e.to_string() })?;
    let seed = r.u64("seed")?;
    let count = r.u64("sample count")?;
    let per_sample = 5 + 4 * depth * width;
    if count > (r.remaining() / per_sample) as u64 {
        // Reading on would fail anyway; report where the data runs out.
        return Err(FormatError::Truncated { offset: bytes.len() as u64, what: "samples" });
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let raw = r.u8("label")?;
        let label = BehaviorClass::from_label(raw)
            .ok_or_else(|| FormatError::Invalid { offset: at, what: "label", detail: raw.to_string() })?;
        let at = r.offset();
        let (d, t) = (r.u16("pattern depth")? as usize, r.u16("pattern width")? as usize);
        if (d, t) != (depth, width) {
            return Err(FormatError::Invalid {
                offset: at,
                what: "pattern size",
                detail: format!("{d}x{t}, profile is {depth}x{width}"),
            });
        }
        let at = r.offset();
        let values = r.f32_vec(d * t, "pattern values")?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FormatError::Invalid { offset: at, what: "pattern value", detail: v.to_string() });
        }
        samples.push(LabeledSample { pattern: DopplerPattern { depth, width, values, track_id: 0, start_frame: 0 }, label });
    }
    r.finish()?;
    Ok(Dataset { samples, profile, seed })
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, dataset_to_bytes(dataset))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, FormatError> {
    dataset_from_bytes(&std::fs::read(path)?)
}
