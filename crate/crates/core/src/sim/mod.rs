//! Synthetic raw-data generation: scenes of moving bodies and static clutter
//! rendered into per-frame complex data cubes at the virtual-array level.

mod behavior;
mod motion;

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

pub use behavior::BehaviorClass;
pub use motion::{scatterer_ensemble, Actor, Motion, Scatterer, BODY_POINTS, LEFT_ARM, LEFT_LEG, RIGHT_ARM, RIGHT_LEG, TORSO};

use crate::error::ConfigError;
use crate::kv;
use crate::scalar::Scalar;
use crate::waveform::{DerivedParams, WaveformConfig, SPEED_OF_LIGHT};

/// Noise power giving a 1 m, unit-amplitude scatterer about 30 dB SNR after
/// the Hann-windowed 128-point range FFT: (sum w)^2 / sum w^2 = 4096 / 48.
pub const DEFAULT_NOISE_POWER: f64 = 4096.0 / 48.0 / 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub actors: Vec<Actor>,
    pub clutter: Vec<Scatterer>,
    /// Complex noise variance per sample (linear).
    pub noise_power: f64,
    pub seed: u64,
    /// Scene length, s.
    pub duration: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Self { actors: Vec::new(), clutter: Vec::new(), noise_power: DEFAULT_NOISE_POWER, seed: 0, duration: 10.0 }
    }
}

/// Raw samples of one frame, indexed `[chirp][fast-time sample][virtual channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube<T> {
    data: Vec<Complex<T>>,
    chirps: usize,
    samples: usize,
    channels: usize,
    pub frame_index: u64,
    /// Scatterers skipped because they were outside the detection range.
    pub excluded_scatterers: usize,
}

impl<T: Scalar> DataCube<T> {
    pub fn zeros(chirps: usize, samples: usize, channels: usize, frame_index: u64) -> Self {
        Self {
            data: vec![Complex::new(T::zero(), T::zero()); chirps * samples * channels],
            chirps,
            samples,
            channels,
            frame_index,
            excluded_scatterers: 0,
        }
    }

    pub fn for_waveform(derived: &DerivedParams, frame_index: u64) -> Self {
        Self::zeros(derived.doppler_bins, derived.range_bins, derived.virtual_channels, frame_index)
    }

    /// (chirps, samples, channels)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.chirps, self.samples, self.channels)
    }

    #[inline]
    pub fn index(&self, chirp: usize, sample: usize, channel: usize) -> usize {
        (chirp * self.samples + sample) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, chirp: usize, sample: usize, channel: usize) -> Complex<T> {
        self.data[self.index(chirp, sample, channel)]
    }

    #[inline]
    pub fn set(&mut self, chirp: usize, sample: usize, channel: usize, v: Complex<T>) {
        let i = self.index(chirp, sample, channel);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    /// Adds one ideal beat-tone return.
    pub fn add_scatterer(&mut self, s: &Scatterer, cfg: &WaveformConfig, derived: &DerivedParams) {
        let range = s.range();
        let amplitude = s.rcs_amplitude / (range * range);
        let beat = 2.0 * range * cfg.chirp_rate / SPEED_OF_LIGHT;
        let doppler = 2.0 * s.radial_velocity / derived.wavelength;
        let spatial = 0.5 * s.azimuth().sin();
        let tone = |cycles_per_step: f64, n: usize| -> Vec<Complex<T>> {
            (0..n)
                .map(|i| {
                    let phase = 2.0 * PI * (cycles_per_step * i as f64).fract();
                    Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
                })
                .collect()
        };
        let fast = tone(beat * derived.sample_period, self.samples);
        let slow = tone(doppler * derived.chirp_repetition_per_tx, self.chirps);
        let array = tone(spatial, self.channels);
        let a = T::lit(amplitude);
        let channels = self.channels;
        for (c, sc) in slow.iter().enumerate() {
            let sc = sc.scale(a);
            for (n, fs) in fast.iter().enumerate() {
                let base = sc * fs;
                let start = (c * self.samples + n) * channels;
                for (out, ak) in self.data[start..start + channels].iter_mut().zip(&array) {
                    *out += base * ak;
                }
            }
        }
    }

    pub fn add_noise<R: Rng + ?Sized>(&mut self, noise_power: f64, rng: &mut R) {
        if noise_power <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, (noise_power / 2.0).sqrt()).expect("finite noise power");
        for v in self.data.iter_mut() {
            let re: f64 = normal.sample(rng);
            let im: f64 = normal.sample(rng);
            *v += Complex::new(T::lit(re), T::lit(im));
        }
    }
}

/// Independent, reproducible stream for one (seed, frame) pair.
pub fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

impl Scene {
    pub fn time_of(frame_index: u64, derived: &DerivedParams) -> f64 {
        frame_index as f64 * derived.frame_period
    }

    pub fn frames(&self, derived: &DerivedParams) -> u64 {
        (self.duration / derived.frame_period).round() as u64
    }

    /// Every scatterer in the scene at time `t`.
    pub fn scatterers_at(&self, t: f64) -> Vec<Scatterer> {
        let mut out = self.clutter.clone();
        for a in &self.actors {
            out.extend(scatterer_ensemble(a, t));
        }
        out
    }

    /// Checks actor placement and samples every trajectory at the frame rate
    /// to confirm all scatterers stay within range and velocity limits.
    pub fn check(&self, derived: &DerivedParams) -> Result<(), ConfigError> {
        if !(self.noise_power >= 0.0) || !self.noise_power.is_finite() {
            return Err(ConfigError::inconsistent("noise_power >= 0", format!("{}", self.noise_power)));
        }
        if !(self.duration > 0.0) {
            return Err(ConfigError::inconsistent("duration > 0", format!("{}", self.duration)));
        }
        for (i, a) in self.actors.iter().enumerate() {
            let (x, y) = a.anchor();
            if x.hypot(y) > derived.max_range {
                return Err(ConfigError::inconsistent("actor anchor within max_range", format!("actor {i} at ({x}, {y})")));
            }
            let (start, stop) = a.active_interval();
            let mut t = start;
            while t < stop.min(self.duration) {
                for s in scatterer_ensemble(a, t) {
                    if s.range() > derived.max_range || s.y <= 0.0 {
                        return Err(ConfigError::inconsistent(
                            "actor motion stays within max_range",
                            format!("actor {i} scatterer at ({:.2}, {:.2}) at t={t:.2}", s.x, s.y),
                        ));
                    }
                    if s.radial_velocity.abs() > derived.max_radial_velocity {
                        return Err(ConfigError::inconsistent(
                            "|radial_velocity| <= max_radial_velocity",
                            format!("actor {i} moving at {:.2} m/s at t={t:.2}", s.radial_velocity),
                        ));
                    }
                }
                t += derived.frame_period;
            }
        }
        Ok(())
    }

    /// Parses a scene file. Each `actor = <behavior>` line opens a new actor
    /// block; following `actor.*` keys apply to it.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        struct Pending {
            motion: Motion,
            x: f64,
            y: f64,
            start: f64,
            stop: Option<f64>,
            seed: Option<u64>,
            line: usize,
        }
        let mut scene = Scene::default();
        let mut pending: Vec<Pending> = Vec::new();
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "noise_power" => scene.noise_power = e.f64()?,
                "seed" => scene.seed = e.u64()?,
                "duration" => scene.duration = e.f64()?,
                "clutter" => {
                    let v = e.f64_list()?;
                    if v.len() != 3 {
                        return Err(e.err("clutter expects `x, y, amplitude`"));
                    }
                    scene.clutter.push(Scatterer::fixed(v[0], v[1], v[2]));
                }
                "actor" => {
                    let behavior: BehaviorClass = e.value.parse().map_err(|m: String| e.err(m))?;
                    pending.push(Pending {
                        motion: Motion::default_for(behavior),
                        x: 0.0,
                        y: 2.5,
                        start: 0.0,
                        stop: None,
                        seed: None,
                        line: e.line,
                    });
                }
                key if key.starts_with("actor.") => {
                    let p = pending.last_mut().ok_or_else(|| e.err("`actor.*` key before any `actor = <behavior>` line"))?;
                    match &key["actor.".len()..] {
                        "x" => p.x = e.f64()?,
                        "y" => p.y = e.f64()?,
                        "start" => p.start = e.f64()?,
                        "stop" => p.stop = Some(e.f64()?),
                        "seed" => p.seed = Some(e.u64()?),
                        param => {
                            let v = e.f64()?;
                            p.motion.set(param, v).map_err(|_| e.unknown())?;
                        }
                    }
                }
                _ => return Err(e.unknown()),
            }
        }
        for (i, p) in pending.into_iter().enumerate() {
            let stop = p.stop.unwrap_or(scene.duration);
            let seed = p.seed.unwrap_or_else(|| scene.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1));
            let actor = Actor::new(p.motion, (p.x, p.y), p.start, stop, seed)
                .map_err(|err| ConfigError::Parse { line: p.line, message: err.to_string() })?;
            scene.actors.push(actor);
        }
        Ok(scene)
    }
}

/// Renders frame `frame_index` of the scene: the sum of every in-range
/// scatterer's beat tone plus circular complex Gaussian noise.
pub fn synthesize_frame<T: Scalar>(
    scene: &Scene,
    frame_index: u64,
    cfg: &WaveformConfig,
    derived: &DerivedParams,
) -> DataCube<T> {
    let mut cube = DataCube::for_waveform(derived, frame_index);
    let t = Scene::time_of(frame_index, derived);
    for s in scene.scatterers_at(t) {
        let r = s.range();
        if !(r > 0.0) || r > derived.max_range {
            cube.excluded_scatterers += 1;
            continue;
        }
        cube.add_scatterer(&s, cfg, derived);
    }
    if scene.noise_power > 0.0 {
        // A quarter-million normals per frame: draw them from a fast
        // generator keyed by the frame's ChaCha stream.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(frame_rng(scene.seed, frame_index).next_u64());
        cube.add_noise(scene.noise_power, &mut rng);
    }
    cube
}
