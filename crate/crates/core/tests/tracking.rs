mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{check_against_reachability, random_instance, track_scene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbd_core::dsp::RadarPoint;
use rbd_core::sim::{Actor, Scene, DEFAULT_NOISE_POWER};
use rbd_core::tracking::{associate, dbscan, KalmanParams, KalmanState, Track, TrackStatus, Tracker, TrackerParams};
use rbd_core::{derive_params, BehaviorClass, WaveformConfig};

#[test]
fn dbscan_matches_reachability_oracle() {
    for seed in 0..200 {
        let pts = random_instance(seed);
        let l = dbscan(&pts, 0.5, 5);
        check_against_reachability(&pts, 0.5, 5, &l.labels).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbscan_permutation_invariant(seed in any::<u64>(), shuffle in any::<u64>()) {
        let pts = random_instance(seed);
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<[f64; 3]> = order.iter().map(|&i| pts[i]).collect();
        let l = dbscan(&permuted, 0.5, 5);
        prop_assert!(check_against_reachability(&permuted, 0.5, 5, &l.labels).is_ok());
        prop_assert_eq!(l.clusters, dbscan(&pts, 0.5, 5).clusters);
    }

    #[test]
    fn covariance_stays_positive_definite(seed in any::<u64>()) {
        let params = KalmanParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = KalmanState::at((0.0, 2.0), &params);
        for _ in 0..1000 {
            s.predict(rng.random_range(0.01..0.5), &params);
            if rng.random_bool(0.8) {
                s.update((rng.random_range(-3.0..3.0), rng.random_range(0.5..5.0)), &params);
            }
            prop_assert!((s.p - s.p.transpose()).norm() == 0.0);
            let eig = s.p.symmetric_eigen().eigenvalues;
            prop_assert!(eig.min() > 0.0);
        }
    }
}

fn track_at(id: u64, x: f64, y: f64) -> Track {
    let params = TrackerParams::default();
    let mut tr = Tracker::new(params);
    let blob: Vec<RadarPoint> = (0..6)
        .map(|i| RadarPoint { x: x + 0.01 * i as f64, y, radial_velocity: 0.0, intensity: 1.0, frame_index: 0, track_id: None })
        .collect();
    tr.step(&blob, 0).unwrap();
    let mut t = tr.tracks()[0].clone();
    t.id = id;
    t.state.x[0] = x;
    t.state.x[1] = y;
    t
}

#[test]
fn association_gates_and_pairs() {
    let k = KalmanParams::default();
    let t = track_at(1, 1.0, 1.0);
    let a = associate(std::slice::from_ref(&t), &[(1.05, 1.0)], &k, 9.21);
    assert_eq!(a.matches, vec![(0, 0)]);

    // direct Mahalanobis: innovation covariance is diag(2 r) at birth
    let r = k.measurement_sigma.powi(2);
    let d2 = 25.0 / (2.0 * r);
    assert!(d2 > 9.21);
    assert!((t.state.mahalanobis2((1.0, 6.0), &k) - d2).abs() < 1e-6 * d2);
    let a = associate(std::slice::from_ref(&t), &[(1.0, 6.0)], &k, 9.21);
    assert!(a.matches.is_empty());
    assert_eq!((a.unmatched_tracks.clone(), a.unmatched_clusters.clone()), (vec![0], vec![0]));

    let tracks = vec![track_at(1, 0.0, 2.0), track_at(2, 0.4, 2.0)];
    let cents = [(0.45, 2.0), (0.05, 2.05)];
    let a = associate(&tracks, &cents, &k, 9.21);
    let cost = |p: &[(usize, usize)]| -> f64 { p.iter().map(|&(ti, ci)| tracks[ti].state.mahalanobis2(cents[ci], &k)).sum() };
    let best = [vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]]
        .into_iter()
        .min_by(|x, y| cost(x).total_cmp(&cost(y)))
        .unwrap();
    assert_eq!(a.matches, best);
    assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
}

#[test]
fn two_actors_keep_two_ids() {
    let mut scene = Scene { noise_power: DEFAULT_NOISE_POWER, seed: 4, ..Scene::default() };
    scene.actors.push(Actor::with_defaults(BehaviorClass::Seizure, (-1.5, 2.5), 0.0, 10.0, 1));
    scene.actors.push(Actor::with_defaults(BehaviorClass::Swing, (1.5, 2.5), 0.0, 10.0, 2));
    let outs = track_scene(&scene, 100);
    let last = outs.last().unwrap();
    let confirmed: Vec<_> = last.tracks.iter().filter(|t| t.status.is_established()).collect();
    assert_eq!(confirmed.len(), 2, "{:?}", last.tracks);
    let ids: BTreeSet<u64> = confirmed.iter().map(|t| t.id).collect();
    for out in &outs[5..] {
        for t in out.tracks.iter().filter(|t| t.status.is_established()) {
            assert!(ids.contains(&t.id), "frame {}: id {} appeared", out.frame_index, t.id);
        }
        assert!(out.deleted.iter().all(|d| !ids.contains(d)));
    }
}

#[test]
fn walking_pair_without_id_switch() {
    let mut scene = Scene { noise_power: DEFAULT_NOISE_POWER, seed: 8, ..Scene::default() };
    let a = Actor::with_defaults(BehaviorClass::Walking, (-1.5, 1.5), 0.0, 10.0, 3);
    let b = Actor::with_defaults(BehaviorClass::RestlessMovement, (1.5, 2.5), 0.0, 10.0, 4);
    scene.actors.push(a.clone());
    scene.actors.push(b.clone());
    let d = derive_params(&WaveformConfig::default()).unwrap();
    let outs = track_scene(&scene, 120);
    // each established id must always sit nearest the same actor
    let mut owner: BTreeMap<u64, usize> = BTreeMap::new();
    for out in &outs {
        let t = Scene::time_of(out.frame_index, &d);
        let (pa, pb) = (a.torso_position(t), b.torso_position(t));
        for tr in out.tracks.iter().filter(|t| t.status.is_established()) {
            let da = (tr.position.0 - pa.0).hypot(tr.position.1 - pa.1);
            let db = (tr.position.0 - pb.0).hypot(tr.position.1 - pb.1);
            let who = usize::from(db < da);
            assert_eq!(*owner.entry(tr.id).or_insert(who), who, "id {} switched at frame {}", tr.id, out.frame_index);
        }
    }
    let per_actor: BTreeSet<usize> = owner.values().copied().collect();
    assert_eq!(per_actor.len(), 2);
}

#[test]
fn static_actor_track_error_is_small() {
    let mut scene = Scene { noise_power: DEFAULT_NOISE_POWER, seed: 2, ..Scene::default() };
    let actor = Actor::with_defaults(BehaviorClass::Seizure, (0.4, 2.0), 0.0, 10.0, 6);
    scene.actors.push(actor.clone());
    let d = derive_params(&WaveformConfig::default()).unwrap();
    let outs = track_scene(&scene, 100);
    let mut se = 0.0;
    let mut n = 0;
    for out in &outs[20..] {
        let truth = actor.torso_position(Scene::time_of(out.frame_index, &d));
        for t in out.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed) {
            se += (t.position.0 - truth.0).powi(2) + (t.position.1 - truth.1).powi(2);
            n += 1;
        }
    }
    assert!(n >= 70, "{n}");
    let rmse = (se / n as f64).sqrt();
    assert!(rmse < 0.25, "rmse {rmse}");
}
