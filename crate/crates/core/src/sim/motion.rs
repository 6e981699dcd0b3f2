//! Kinematic body models for the six behaviors.
//!
//! A body is five point scatterers: torso plus four limbs. Bulk motion
//! (walking, falling) moves the whole body; limb motion is expressed as
//! displacement along the line of sight. All randomness (twitch schedules,
//! tone phases) is drawn once from the actor's seed, so an actor's trajectory
//! is a pure function of time.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::behavior::BehaviorClass;
use crate::error::ConfigError;

pub const TORSO: usize = 0;
pub const LEFT_ARM: usize = 1;
pub const RIGHT_ARM: usize = 2;
pub const LEFT_LEG: usize = 3;
pub const RIGHT_LEG: usize = 4;
pub const BODY_POINTS: usize = 5;

const BODY_RCS: [f64; BODY_POINTS] = [1.0, 0.4, 0.4, 0.35, 0.35];
/// (along line of sight, lateral) offsets from the torso, m.
const BODY_OFFSETS: [(f64, f64); BODY_POINTS] = [(0.0, 0.0), (0.0, -0.25), (0.0, 0.25), (0.06, -0.12), (0.06, 0.12)];
/// Limb speed relative to the torso during a fall.
const FALL_LIMB_GAIN: [f64; BODY_POINTS] = [1.0, 1.25, 1.2, 0.85, 0.8];

/// A point reflector. `radial_velocity` is the range rate: negative when
/// approaching the radar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub radial_velocity: f64,
    pub rcs_amplitude: f64,
}

impl Scatterer {
    pub fn fixed(x: f64, y: f64, rcs_amplitude: f64) -> Self {
        Self { x, y, radial_velocity: 0.0, rcs_amplitude }
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Angle from boresight (+y), positive toward +x.
    pub fn azimuth(&self) -> f64 {
        self.x.atan2(self.y)
    }
}

/// Per-behavior motion parameters. Speeds in m/s, times in s, frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Near-static body with sporadic small twitches.
    Other { mean_gap: f64, peak_speed: f64, diversity: f64 },
    /// Back-and-forth walk along `heading` (rad from the line of sight) with
    /// anti-phase arm and leg swing.
    Walking { speed: f64, leg_length: f64, turn_time: f64, limb_amplitude: f64, limb_frequency: f64, heading: f64 },
    /// Repeated stand, fall toward the radar, lie, get up.
    Falling { peak_speed: f64, fall_duration: f64, stand_time: f64, lie_time: f64, rise_speed: f64, heading: f64 },
    /// One arm swinging, rest of the body still.
    Swing { amplitude: f64, frequency: f64 },
    /// Every scatterer shaking at a common frequency.
    Seizure { amplitude: f64, frequency: f64 },
    /// Band-limited random velocity on every scatterer.
    Restless { amplitude: f64, min_frequency: f64, max_frequency: f64 },
}

impl Motion {
    pub fn default_for(behavior: BehaviorClass) -> Self {
        match behavior {
            BehaviorClass::Other => Motion::Other { mean_gap: 1.0, peak_speed: 0.3, diversity: 0.5 },
            BehaviorClass::Walking => Motion::Walking {
                speed: 1.0,
                leg_length: 2.0,
                turn_time: 0.6,
                limb_amplitude: 1.5,
                limb_frequency: 2.0,
                heading: 0.0,
            },
            BehaviorClass::Falling => Motion::Falling {
                peak_speed: 3.4,
                fall_duration: 0.5,
                stand_time: 2.0,
                lie_time: 1.5,
                rise_speed: 0.3,
                heading: 0.0,
            },
            BehaviorClass::Swing => Motion::Swing { amplitude: 2.0, frequency: 1.5 },
            BehaviorClass::Seizure => Motion::Seizure { amplitude: 0.5, frequency: 5.0 },
            BehaviorClass::RestlessMovement => {
                Motion::Restless { amplitude: 1.0, min_frequency: 0.5, max_frequency: 2.5 }
            }
        }
    }

    pub fn behavior(&self) -> BehaviorClass {
        match self {
            Motion::Other { .. } => BehaviorClass::Other,
            Motion::Walking { .. } => BehaviorClass::Walking,
            Motion::Falling { .. } => BehaviorClass::Falling,
            Motion::Swing { .. } => BehaviorClass::Swing,
            Motion::Seizure { .. } => BehaviorClass::Seizure,
            Motion::Restless { .. } => BehaviorClass::RestlessMovement,
        }
    }

    /// Sets a named parameter (scene-file key without the `actor.` prefix).
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        let slot: Option<&mut f64> = match self {
            Motion::Other { mean_gap, peak_speed, diversity } => match key {
                "mean_gap" => Some(mean_gap),
                "peak_speed" => Some(peak_speed),
                "diversity" => Some(diversity),
                _ => None,
            },
            Motion::Walking { speed, leg_length, turn_time, limb_amplitude, limb_frequency, heading } => match key {
                "speed" => Some(speed),
                "leg_length" => Some(leg_length),
                "turn_time" => Some(turn_time),
                "limb_amplitude" => Some(limb_amplitude),
                "limb_frequency" => Some(limb_frequency),
                "heading" => Some(heading),
                _ => None,
            },
            Motion::Falling { peak_speed, fall_duration, stand_time, lie_time, rise_speed, heading } => match key {
                "peak_speed" => Some(peak_speed),
                "fall_duration" => Some(fall_duration),
                "stand_time" => Some(stand_time),
                "lie_time" => Some(lie_time),
                "rise_speed" => Some(rise_speed),
                "heading" => Some(heading),
                _ => None,
            },
            Motion::Swing { amplitude, frequency } | Motion::Seizure { amplitude, frequency } => match key {
                "amplitude" => Some(amplitude),
                "frequency" => Some(frequency),
                _ => None,
            },
            Motion::Restless { amplitude, min_frequency, max_frequency } => match key {
                "amplitude" => Some(amplitude),
                "min_frequency" => Some(min_frequency),
                "max_frequency" => Some(max_frequency),
                _ => None,
            },
        };
        match slot {
            Some(s) => {
                *s = value;
                Ok(())
            }
            None => Err(format!("`{key}` is not a parameter of {}", self.behavior().key())),
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |what: &str| Err(ConfigError::inconsistent("motion parameters", what.to_string()));
        match *self {
            Motion::Other { mean_gap, peak_speed, diversity } => {
                if mean_gap <= 0.0 || peak_speed <= 0.0 || !(0.0..=1.0).contains(&diversity) {
                    return bad("other: mean_gap, peak_speed > 0 and diversity in [0, 1]");
                }
            }
            Motion::Walking { speed, leg_length, turn_time, limb_frequency, .. } => {
                if speed <= 0.0 || leg_length <= 0.0 || turn_time <= 0.0 || limb_frequency <= 0.0 {
                    return bad("walking: speed, leg_length, turn_time, limb_frequency > 0");
                }
            }
            Motion::Falling { peak_speed, fall_duration, stand_time, lie_time, rise_speed, .. } => {
                if peak_speed <= 0.0 || fall_duration <= 0.0 || fall_duration > 1.0 || stand_time < 0.0 || lie_time < 0.0 || rise_speed <= 0.0 {
                    return bad("falling: positive speeds, fall_duration in (0, 1]");
                }
            }
            Motion::Swing { amplitude, frequency } | Motion::Seizure { amplitude, frequency } => {
                if amplitude < 0.0 || frequency <= 0.0 {
                    return bad("amplitude >= 0 and frequency > 0");
                }
            }
            Motion::Restless { amplitude, min_frequency, max_frequency } => {
                if amplitude < 0.0 || min_frequency <= 0.0 || max_frequency < min_frequency {
                    return bad("restless: 0 < min_frequency <= max_frequency");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tone {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl Tone {
    fn velocity(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t + self.phase).sin()
    }

    /// Integral of `velocity` from 0 to t.
    fn displacement(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.frequency;
        self.amplitude / w * (self.phase.cos() - (w * t + self.phase).cos())
    }
}

/// One out-and-back movement of a single scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Twitch {
    start: f64,
    duration: f64,
    peak: f64,
}

impl Twitch {
    fn at(&self, t: f64) -> Option<(f64, f64)> {
        let w = t - self.start;
        if w < 0.0 || w >= self.duration {
            return None;
        }
        let arg = 2.0 * PI * w / self.duration;
        let v = self.peak * arg.sin();
        let d = self.peak * self.duration / (2.0 * PI) * (1.0 - arg.cos());
        Some((d, v))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Plan {
    phases: [f64; BODY_POINTS],
    twitches: [Vec<Twitch>; BODY_POINTS],
    tones: [Vec<Tone>; BODY_POINTS],
    common_tones: Vec<Tone>,
    cycle_offset: f64,
}

/// One simulated person.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    motion: Motion,
    anchor: (f64, f64),
    start: f64,
    stop: f64,
    seed: u64,
    plan: Plan,
}

impl Actor {
    /// Active over `[start, stop)` seconds of scene time.
    pub fn new(motion: Motion, anchor: (f64, f64), start: f64, stop: f64, seed: u64) -> Result<Self, ConfigError> {
        motion.check()?;
        if !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(ConfigError::inconsistent("actor start < stop", format!("[{start}, {stop})")));
        }
        if anchor.0.hypot(anchor.1) <= 0.0 || anchor.1 <= 0.0 {
            return Err(ConfigError::inconsistent("actor in front of the radar", format!("anchor {anchor:?}")));
        }
        let plan = Self::draw_plan(&motion, stop - start, seed);
        Ok(Self { motion, anchor, start, stop, seed, plan })
    }

    pub fn with_defaults(behavior: BehaviorClass, anchor: (f64, f64), start: f64, stop: f64, seed: u64) -> Self {
        Self::new(Motion::default_for(behavior), anchor, start, stop, seed).expect("default motion is valid")
    }

    pub fn behavior(&self) -> BehaviorClass {
        self.motion.behavior()
    }

    pub fn motion(&self) -> &Motion {
        &self.motion
    }

    pub fn anchor(&self) -> (f64, f64) {
        self.anchor
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn active_interval(&self) -> (f64, f64) {
        (self.start, self.stop)
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.stop
    }

    fn draw_plan(motion: &Motion, span: f64, seed: u64) -> Plan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plan = Plan::default();
        for p in plan.phases.iter_mut() {
            *p = rng.random_range(0.0..2.0 * PI);
        }
        let twitch_params = match *motion {
            Motion::Other { mean_gap, peak_speed, diversity } => Some((mean_gap, peak_speed, diversity)),
            Motion::Falling { .. } => Some((1.0, 0.3, 0.5)),
            _ => None,
        };
        if let Some((mean_gap, peak_speed, diversity)) = twitch_params {
            let max_duration = 0.6 + 1.2 * diversity;
            let min_peak = (0.1f64).min(peak_speed);
            for events in plan.twitches.iter_mut() {
                let mut t = -rng.random::<f64>() * mean_gap;
                while t < span {
                    t += -mean_gap * (1.0 - rng.random::<f64>()).ln();
                    let duration = rng.random_range(0.3..max_duration);
                    let magnitude = if peak_speed > min_peak { rng.random_range(min_peak..peak_speed) } else { peak_speed };
                    let peak = if rng.random::<bool>() { magnitude } else { -magnitude };
                    events.push(Twitch { start: t, duration, peak });
                    t += duration;
                }
            }
        }
        if let Motion::Restless { amplitude, min_frequency, max_frequency } = *motion {
            // Half the motion is shared by the whole body so it stays compact.
            let draw = |rng: &mut ChaCha8Rng, total: f64| -> Vec<Tone> {
                let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..1.0)).collect();
                let sum: f64 = weights.iter().sum();
                weights
                    .iter()
                    .map(|w| Tone {
                        amplitude: total * w / sum,
                        frequency: if max_frequency > min_frequency {
                            rng.random_range(min_frequency..max_frequency)
                        } else {
                            min_frequency
                        },
                        phase: rng.random_range(0.0..2.0 * PI),
                    })
                    .collect()
            };
            plan.common_tones = draw(&mut rng, 0.5 * amplitude);
            for tones in plan.tones.iter_mut() {
                *tones = draw(&mut rng, 0.5 * amplitude);
            }
        }
        plan.cycle_offset = match *motion {
            Motion::Walking { speed, leg_length, turn_time, .. } => {
                rng.random_range(0.0..2.0 * (leg_length / speed + turn_time))
            }
            Motion::Falling { stand_time, .. } => rng.random_range(0.0..stand_time.max(1e-9)),
            _ => 0.0,
        };
        plan
    }

    /// Bulk displacement and velocity of the torso along `heading_unit`.
    fn bulk(&self, tau: f64) -> (f64, f64) {
        match self.motion {
            Motion::Walking { speed, leg_length, turn_time, .. } => {
                let leg = leg_length / speed;
                let period = 2.0 * (leg + turn_time);
                let u = (tau + self.plan.cycle_offset).rem_euclid(period);
                let bulge = speed * turn_time / PI;
                if u < leg {
                    (-leg_length / 2.0 + speed * u, speed)
                } else if u < leg + turn_time {
                    let w = (u - leg) / turn_time;
                    (leg_length / 2.0 + bulge * (PI * w).sin(), speed * (PI * w).cos())
                } else if u < 2.0 * leg + turn_time {
                    let w = u - leg - turn_time;
                    (leg_length / 2.0 - speed * w, -speed)
                } else {
                    let w = (u - 2.0 * leg - turn_time) / turn_time;
                    (-leg_length / 2.0 - bulge * (PI * w).sin(), -speed * (PI * w).cos())
                }
            }
            Motion::Falling { .. } => {
                let f = FallCycle::of(&self.motion);
                f.at(tau + self.plan.cycle_offset)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Line-of-sight displacement and velocity of one scatterer relative to
    /// the bulk motion.
    fn local(&self, index: usize, tau: f64) -> (f64, f64) {
        let mut d = 0.0;
        let mut v = 0.0;
        let phase = self.plan.phases[index];
        match self.motion {
            Motion::Walking { limb_amplitude, limb_frequency, .. } => {
                let sign = match index {
                    LEFT_ARM | RIGHT_LEG => 1.0,
                    RIGHT_ARM | LEFT_LEG => -1.0,
                    _ => 0.0,
                };
                let tone = Tone { amplitude: sign * limb_amplitude, frequency: limb_frequency, phase: self.plan.phases[0] };
                d += tone.displacement(tau);
                v += tone.velocity(tau);
            }
            Motion::Swing { amplitude, frequency } if index == RIGHT_ARM => {
                let tone = Tone { amplitude, frequency, phase };
                d += tone.displacement(tau);
                v += tone.velocity(tau);
            }
            Motion::Seizure { amplitude, frequency } => {
                let tone = Tone { amplitude, frequency, phase };
                d += tone.displacement(tau);
                v += tone.velocity(tau);
            }
            Motion::Restless { .. } => {
                for tone in self.plan.common_tones.iter().chain(&self.plan.tones[index]) {
                    d += tone.displacement(tau);
                    v += tone.velocity(tau);
                }
            }
            _ => {}
        }
        // Schedules are sorted and non-overlapping per scatterer.
        let events = &self.plan.twitches[index];
        let i = events.partition_point(|e| e.start + e.duration <= tau);
        if let Some((td, tv)) = events.get(i).and_then(|e| e.at(tau)) {
            d += td;
            v += tv;
        }
        (d, v)
    }

    fn frame_vectors(&self) -> ((f64, f64), (f64, f64), (f64, f64)) {
        let r = self.anchor.0.hypot(self.anchor.1);
        let los = (self.anchor.0 / r, self.anchor.1 / r);
        let lateral = (los.1, -los.0);
        let heading_angle = match self.motion {
            Motion::Walking { heading, .. } => heading,
            // Falls head toward the radar.
            Motion::Falling { heading, .. } => PI + heading,
            _ => 0.0,
        };
        let (s, c) = heading_angle.sin_cos();
        let heading = (c * los.0 + s * lateral.0, c * los.1 + s * lateral.1);
        (los, lateral, heading)
    }

    /// Torso position at scene time `t` (ignores the active interval).
    pub fn torso_position(&self, t: f64) -> (f64, f64) {
        let (_, _, heading) = self.frame_vectors();
        let (s, _) = self.bulk(t - self.start);
        (self.anchor.0 + s * heading.0, self.anchor.1 + s * heading.1)
    }

    /// Times (scene clock) at which falls reach peak speed, within `[t0, t1]`.
    pub fn fall_peaks(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let Motion::Falling { peak_speed, .. } = self.motion else {
            return Vec::new();
        };
        let f = FallCycle::of(&self.motion);
        let first = self.start + f.peak_time() - self.plan.cycle_offset;
        let mut out = Vec::new();
        let mut k = ((t0 - first) / f.period()).floor().max(0.0);
        loop {
            let t = first + k * f.period();
            if t > t1 || t >= self.stop {
                break;
            }
            if t >= t0 && t >= self.start {
                out.push((t, peak_speed));
            }
            k += 1.0;
        }
        out
    }

    /// Behavior shown over `[t0, t1]`: a falling actor only counts as
    /// falling when a fall peak lies inside the window, and otherwise shows
    /// idle standing or lying (`Other`).
    pub fn window_label(&self, t0: f64, t1: f64) -> BehaviorClass {
        match self.behavior() {
            BehaviorClass::Falling if self.fall_peaks(t0, t1).is_empty() => BehaviorClass::Other,
            b => b,
        }
    }
}

/// Time layout of one stand, fall, lie, rise cycle.
struct FallCycle {
    peak_speed: f64,
    fall: f64,
    stand: f64,
    lie: f64,
    rise_speed: f64,
    rise: f64,
    drop: f64,
}

impl FallCycle {
    fn of(motion: &Motion) -> Self {
        let Motion::Falling { peak_speed, fall_duration, stand_time, lie_time, rise_speed, .. } = *motion else {
            unreachable!("fall cycle of a non-falling motion")
        };
        let drop = 2.0 * peak_speed * fall_duration / PI;
        Self {
            peak_speed,
            fall: fall_duration,
            stand: stand_time,
            lie: lie_time,
            rise_speed,
            rise: PI * drop / (2.0 * rise_speed),
            drop,
        }
    }

    fn period(&self) -> f64 {
        self.stand + self.fall + self.lie + self.rise
    }

    fn peak_time(&self) -> f64 {
        self.stand + self.fall / 2.0
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let u = t.rem_euclid(self.period());
        if u < self.stand {
            (0.0, 0.0)
        } else if u < self.stand + self.fall {
            let w = PI * (u - self.stand) / self.fall;
            (self.peak_speed * self.fall / PI * (1.0 - w.cos()), self.peak_speed * w.sin())
        } else if u < self.stand + self.fall + self.lie {
            (self.drop, 0.0)
        } else {
            let w = PI * (u - self.stand - self.fall - self.lie) / self.rise;
            (self.drop - self.rise_speed * self.rise / PI * (1.0 - w.cos()), -self.rise_speed * w.sin())
        }
    }
}

/// The actor's five scatterers at scene time `t`; empty outside the actor's
/// active interval.
///
/// All of a body's scatterers share the torso's line of sight when projecting
/// velocities (the body is small compared with its range).
pub fn scatterer_ensemble(actor: &Actor, t: f64) -> Vec<Scatterer> {
    if !actor.is_active(t) {
        return Vec::new();
    }
    let tau = t - actor.start;
    let (los, lateral, heading) = actor.frame_vectors();
    let (s, sv) = actor.bulk(tau);
    let torso = (actor.anchor.0 + s * heading.0, actor.anchor.1 + s * heading.1);
    let torso_range = torso.0.hypot(torso.1);
    let sight = (torso.0 / torso_range, torso.1 / torso_range);
    let falling = matches!(actor.motion, Motion::Falling { .. });
    (0..BODY_POINTS)
        .map(|i| {
            let gain = if falling { FALL_LIMB_GAIN[i] } else { 1.0 };
            let (d, dv) = actor.local(i, tau);
            let (along, across) = BODY_OFFSETS[i];
            let x = actor.anchor.0 + gain * s * heading.0 + (along + d) * los.0 + across * lateral.0;
            let y = actor.anchor.1 + gain * s * heading.1 + (along + d) * los.1 + across * lateral.1;
            let vx = gain * sv * heading.0 + dv * los.0;
            let vy = gain * sv * heading.1 + dv * los.1;
            Scatterer { x, y, radial_velocity: vx * sight.0 + vy * sight.1, rcs_amplitude: BODY_RCS[i] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn actor(b: BehaviorClass) -> Actor {
        Actor::with_defaults(b, (0.3, 2.5), 0.0, 30.0, 11)
    }

    #[test]
    fn five_scatterers_inside_interval_none_outside() {
        let a = Actor::with_defaults(BehaviorClass::Walking, (0.0, 3.0), 1.0, 5.0, 3);
        assert_eq!(scatterer_ensemble(&a, 2.0).len(), BODY_POINTS);
        assert!(scatterer_ensemble(&a, 0.5).is_empty());
        assert!(scatterer_ensemble(&a, 5.0).is_empty());
    }

    #[test]
    fn other_stays_slow_and_exactly_still_between_twitches() {
        let a = actor(BehaviorClass::Other);
        let mut still = 0;
        for k in 0..600 {
            let t = k as f64 * 0.05;
            for (i, s) in scatterer_ensemble(&a, t).iter().enumerate() {
                assert!(s.radial_velocity.abs() <= 0.3 + 1e-12);
                let twitching = a.plan.twitches[i].iter().any(|e| e.at(t).is_some());
                if !twitching {
                    assert_eq!(s.radial_velocity, 0.0);
                    still += 1;
                }
            }
        }
        assert!(still > 0);
    }

    #[test]
    fn walking_limbs_are_symmetric_about_torso() {
        let a = actor(BehaviorClass::Walking);
        for k in 0..80 {
            let t = k as f64 * 0.05;
            let s = scatterer_ensemble(&a, t);
            let torso = s[TORSO].radial_velocity;
            let arms = s[LEFT_ARM].radial_velocity + s[RIGHT_ARM].radial_velocity;
            let legs = s[LEFT_LEG].radial_velocity + s[RIGHT_LEG].radial_velocity;
            assert!((arms - 2.0 * torso).abs() < 1e-9, "t={t}");
            assert!((legs - 2.0 * torso).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn walking_torso_moves_near_one_metre_per_second() {
        let a = actor(BehaviorClass::Walking);
        let peak = (0..200)
            .map(|k| scatterer_ensemble(&a, k as f64 * 0.05)[TORSO].radial_velocity.abs())
            .fold(0.0, f64::max);
        assert!((0.9..=1.05).contains(&peak), "{peak}");
    }

    #[test]
    fn falling_burst_reaches_three_metres_per_second() {
        let a = actor(BehaviorClass::Falling);
        let peaks = a.fall_peaks(0.0, 30.0);
        assert!(peaks.len() >= 2);
        let (tp, _) = peaks[0];
        let v = scatterer_ensemble(&a, tp)[TORSO].radial_velocity;
        assert!(v <= -3.0, "torso at fall peak {v}");
        // A second after the peak the body is lying nearly still.
        let later = scatterer_ensemble(&a, tp + 1.0);
        assert!(later.iter().all(|s| s.radial_velocity.abs() <= 0.3 + 1e-9));
        assert_eq!(a.window_label(tp - 0.5, tp + 0.5), BehaviorClass::Falling);
        assert_eq!(a.window_label(tp + 0.8, tp + 1.8), BehaviorClass::Other);
    }

    #[test]
    fn swing_moves_one_arm_only() {
        let a = actor(BehaviorClass::Swing);
        let mut peak: f64 = 0.0;
        for k in 0..60 {
            let s = scatterer_ensemble(&a, k as f64 * 0.05);
            for (i, p) in s.iter().enumerate() {
                if i == RIGHT_ARM {
                    peak = peak.max(p.radial_velocity.abs());
                } else {
                    assert_eq!(p.radial_velocity, 0.0);
                }
            }
        }
        assert!(peak > 1.9 && peak <= 2.0 + 1e-9);
    }

    #[test]
    fn restless_velocity_is_bounded() {
        let a = actor(BehaviorClass::RestlessMovement);
        for k in 0..400 {
            for s in scatterer_ensemble(&a, k as f64 * 0.05) {
                assert!(s.radial_velocity.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn trajectories_are_deterministic_per_seed() {
        let a = actor(BehaviorClass::RestlessMovement);
        let b = actor(BehaviorClass::RestlessMovement);
        let c = Actor::with_defaults(BehaviorClass::RestlessMovement, (0.3, 2.5), 0.0, 30.0, 12);
        assert_eq!(scatterer_ensemble(&a, 3.3), scatterer_ensemble(&b, 3.3));
        assert_ne!(scatterer_ensemble(&a, 3.3), scatterer_ensemble(&c, 3.3));
    }
}
