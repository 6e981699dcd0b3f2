//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbd_core::dsp::{CfarParams, SignalChain};
use rbd_core::nn::*;
use rbd_core::sim::{synthesize_frame, Scene};
use rbd_core::tracking::{Tracker, TrackerOutput, TrackerParams};
use rbd_core::{derive_params, Scalar, WaveformConfig};

pub fn naive_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| v * Complex::from_polar(1.0, -2.0 * PI * ((k * i) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Core points form components of the eps-graph restricted to cores; borders
/// may take any adjacent core's component.
pub fn check_against_reachability(points: &[[f64; 3]], eps: f64, min_pts: usize, labels: &[Option<usize>]) -> Result<(), String> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let d: f64 = (0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum();
        d <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    // transitive closure by repeated relaxation
    let mut comp: Vec<usize> = (0..n).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if core[i] && core[j] && near(i, j) && comp[j] < comp[i] {
                    comp[i] = comp[j];
                    changed = true;
                }
            }
        }
    }
    let mut mapping: BTreeMap<usize, usize> = BTreeMap::new();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for i in (0..n).filter(|&i| core[i]) {
        let label = labels[i].ok_or(format!("core point {i} labeled noise"))?;
        match mapping.get(&comp[i]) {
            Some(&l) if l != label => return Err(format!("core point {i} split")),
            Some(_) => {}
            None => {
                if !used.insert(label) {
                    return Err(format!("components merged at {i}"));
                }
                mapping.insert(comp[i], label);
            }
        }
    }
    for i in (0..n).filter(|&i| !core[i]) {
        let allowed: BTreeSet<usize> = (0..n).filter(|&j| core[j] && near(i, j)).map(|j| mapping[&comp[j]]).collect();
        match labels[i] {
            None if allowed.is_empty() => {}
            Some(l) if allowed.contains(&l) => {}
            other => return Err(format!("border {i} labeled {other:?}, allowed {allowed:?}")),
        }
    }
    Ok(())
}

pub fn random_instance(seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=50);
    let centres: Vec<[f64; 3]> = (0..3).map(|_| [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(-0.3..0.3)]).collect();
    (0..n)
        .map(|_| {
            let c = centres[rng.random_range(0..3)];
            [c[0] + rng.random_range(-0.6..0.6), c[1] + rng.random_range(-0.6..0.6), c[2] + rng.random_range(-0.1..0.1)]
        })
        .collect()
}

/// Runs sim, signal chain and tracker over the first `frames` frames.
pub fn track_scene(scene: &Scene, frames: u64) -> Vec<TrackerOutput> {
    let cfg = WaveformConfig::default();
    let d = derive_params(&cfg).unwrap();
    let chain = SignalChain::<f32>::new(d.clone(), CfarParams::default()).unwrap();
    let mut tracker = Tracker::new(TrackerParams { frame_period: d.frame_period, ..TrackerParams::default() });
    (0..frames)
        .map(|f| {
            let pts = chain.process(synthesize_frame::<f32>(scene, f, &cfg, &d)).unwrap();
            tracker.step(&pts, f).unwrap()
        })
        .collect()
}

pub fn random<T: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()).unwrap()
}

/// Scalar probe `sum(r * y)` accumulated in f64.
fn project<T: Scalar>(y: &Tensor<T>, r: &[f64]) -> f64 {
    y.data().iter().zip(r).map(|(a, b)| a.as_f64() * b).sum()
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Max relative error between `analytic` and central differences of `f`
/// with respect to every element of `x`.
fn check<T: Scalar, A: Scalar>(x: &Tensor<T>, analytic: &Tensor<A>, h: f64, floor: f64, skip: impl Fn(usize) -> bool, f: impl Fn(&Tensor<T>) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        if skip(i) {
            continue;
        }
        let mut plus = x.clone();
        plus.data_mut()[i] += T::lit(h);
        let mut minus = x.clone();
        minus.data_mut()[i] -= T::lit(h);
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max(rel_err(analytic.data()[i].as_f64(), fd, floor));
    }
    worst
}

fn probe(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn as_f32(shape: &[usize], r: &[f64]) -> Tensor<f32> {
    Tensor::from_vec(shape, r.iter().map(|&v| v as f32).collect()).unwrap()
}

// The f32 layer checks compute analytic gradients in f32 and take the
// differences in f64, so only the f32 backward pass is under test.

pub fn conv_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Tensor<f32> = random(&[2, 6, 6, 2], &mut rng);
    let w: Tensor<f32> = random(&[3, 3, 2, 3], &mut rng);
    let b: Tensor<f32> = random(&[3], &mut rng);
    let r = probe(2 * 36 * 3, &mut rng);
    let (y, cache) = conv2d_forward(&x, &w, &b).unwrap();
    let (dx, dw, db) = conv2d_backward(&cache, &w, &as_f32(y.shape(), &r), true).unwrap();
    let dx = dx.unwrap();
    let (x64, w64, b64) = (x.cast::<f64>(), w.cast::<f64>(), b.cast::<f64>());
    let h = 1e-4;
    let ew = check(&w64, &dw, h, 1e-2, |_| false, |w| project(&conv2d_forward(&x64, w, &b64).unwrap().0, &r));
    let eb = check(&b64, &db, h, 1e-2, |_| false, |b| project(&conv2d_forward(&x64, &w64, b).unwrap().0, &r));
    let ex = check(&x64, &dx, h, 1e-2, |_| false, |x| project(&conv2d_forward(x, &w64, &b64).unwrap().0, &r));
    ew.max(eb).max(ex)
}

pub fn dense_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Tensor<f32> = random(&[4, 10], &mut rng);
    let w: Tensor<f32> = random(&[10, 7], &mut rng);
    let b: Tensor<f32> = random(&[7], &mut rng);
    let r = probe(28, &mut rng);
    let (dx, dw, db) = dense_backward(&x, &w, &as_f32(&[4, 7], &r)).unwrap();
    let (x64, w64, b64) = (x.cast::<f64>(), w.cast::<f64>(), b.cast::<f64>());
    let h = 1e-4;
    let ew = check(&w64, &dw, h, 1e-2, |_| false, |w| project(&dense_forward(&x64, w, &b64).unwrap(), &r));
    let eb = check(&b64, &db, h, 1e-2, |_| false, |b| project(&dense_forward(&x64, &w64, b).unwrap(), &r));
    let ex = check(&x64, &dx, h, 1e-2, |_| false, |x| project(&dense_forward(x, &w64, &b64).unwrap(), &r));
    ew.max(eb).max(ex)
}

pub fn leaky_relu_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Tensor<f32> = random(&[200], &mut rng);
    let r = probe(200, &mut rng);
    let dx = leaky_relu_backward(&x, &as_f32(&[200], &r), 0.01).unwrap();
    // Skip points within h of the kink.
    check(&x, &dx, 1e-4, 1e-2, |i| x.data()[i].abs() < 1e-3, |x| project(&leaky_relu(x, 0.01), &r))
}

pub fn maxpool_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Tensor<f32> = random(&[2, 4, 6, 3], &mut rng);
    let (y, arg) = maxpool2(&x).unwrap();
    let r = probe(y.len(), &mut rng);
    let dx = maxpool2_backward(x.shape(), &arg, &as_f32(y.shape(), &r)).unwrap();
    check(&x, &dx, 1e-4, 1e-2, |_| false, |x| project(&maxpool2(x).unwrap().0, &r))
}

pub fn softmax_xent_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits: Tensor<f32> = random(&[5, 6], &mut rng);
    let labels = [0, 5, 2, 2, 3];
    let (_, _, g) = softmax_xent(&logits, &labels).unwrap();
    check(&logits, &g, 1e-3, 1e-2, |_| false, |l| softmax_xent(l, &labels).unwrap().1)
}

pub fn toy_config() -> ModelConfig {
    ModelConfig { input_height: 16, input_width: 16, conv_depths: vec![3, 4], fc_hidden: 5, num_classes: 6, ..Default::default() }
}

/// Worst relative error over every parameter of a small f64 network, with
/// dropout disabled so the loss is a deterministic function.
pub fn full_network_gradient_error() -> f64 {
    let model = Model::<f64>::new(toy_config(), 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x: Tensor<f64> = random(&[3, 16, 16, 1], &mut rng);
    let labels = [1, 4, 0];
    let mut drng = ChaCha8Rng::seed_from_u64(0);
    let (_, grads) = model.loss_and_grads(&x, &labels, &mut drng, false).unwrap();
    let loss_with = |p: usize, t: &Tensor<f64>| {
        let mut m = model.clone();
        m.params[p] = t.clone();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        m.loss_and_grads(&x, &labels, &mut r, false).unwrap().0
    };
    (0..model.params.len())
        .map(|p| check(&model.params[p], &grads[p], 1e-6, 1e-4, |_| false, |t| loss_with(p, t)))
        .fold(0.0, f64::max)
}
