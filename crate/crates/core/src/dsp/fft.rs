use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;
use crate::sim::DataCube;

/// Zero-padded length of the spatial FFT used for azimuth.
pub const ANGLE_FFT_LEN: usize = 64;

/// Periodic Hann window.
pub fn hann<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Windowed FFT along fast time for every (chirp, channel), in place.
///
/// Works one chirp at a time through a `channels × samples` scratch block so
/// the transpose stays in cache.
pub(crate) fn range_transform<T: Scalar>(cube: &mut DataCube<T>, plan: &Arc<dyn Fft<T>>, window: &[T]) {
    let (_, samples, channels) = cube.dims();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); channels * samples];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
    for chirp in cube.as_mut_slice().chunks_exact_mut(samples * channels) {
        for (n, (cell, &w)) in chirp.chunks_exact(channels).zip(window).enumerate() {
            for (k, v) in cell.iter().enumerate() {
                buf[k * samples + n] = v.scale(w);
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for (n, cell) in chirp.chunks_exact_mut(channels).enumerate() {
            for (k, v) in cell.iter_mut().enumerate() {
                *v = buf[k * samples + n];
            }
        }
    }
}

/// Windowed FFT along slow time, FFT-shifted so the zero-velocity bin sits at
/// `chirps / 2`. Output layout `[doppler][range][channel]`.
pub(crate) fn doppler_transform<T: Scalar>(
    cube: &DataCube<T>,
    plan: &Arc<dyn Fft<T>>,
    window: &[T],
) -> Vec<Complex<T>> {
    let (chirps, samples, channels) = cube.dims();
    let data = cube.as_slice();
    let half = chirps / 2;
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; chirps * samples * channels];
    let mut buf = vec![zero; channels * chirps];
    let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
    let row = samples * channels;
    for n in 0..samples {
        for (c, &w) in window.iter().enumerate() {
            let cell = &data[c * row + n * channels..][..channels];
            for (k, v) in cell.iter().enumerate() {
                buf[k * chirps + c] = v.scale(w);
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for i in 0..chirps {
            let d = (i + half) % chirps;
            let cell = &mut out[d * row + n * channels..][..channels];
            for (k, v) in cell.iter_mut().enumerate() {
                *v = buf[k * chirps + i];
            }
        }
    }
    out
}

/// FFT plans and windows for one cube geometry.
pub(crate) struct Plans<T: Scalar> {
    pub range: Arc<dyn Fft<T>>,
    pub doppler: Arc<dyn Fft<T>>,
    pub angle: Arc<dyn Fft<T>>,
    pub range_window: Vec<T>,
    pub doppler_window: Vec<T>,
}

impl<T: Scalar> Plans<T> {
    pub fn new(samples: usize, chirps: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            range: planner.plan_fft_forward(samples),
            doppler: planner.plan_fft_forward(chirps),
            angle: planner.plan_fft_forward(ANGLE_FFT_LEN),
            range_window: hann(samples),
            doppler_window: hann(chirps),
        }
    }
}

/// Peak bin of the zero-padded spatial spectrum, signed in
/// `[-ANGLE_FFT_LEN/2, ANGLE_FFT_LEN/2)`; ties go to the first bin.
pub(crate) fn angle_peak_bin<T: Scalar>(snapshot: &[Complex<T>], plan: &Arc<dyn Fft<T>>) -> i64 {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); ANGLE_FFT_LEN];
    for (b, s) in buf.iter_mut().zip(snapshot) {
        *b = *s;
    }
    plan.process(&mut buf);
    let mut best = 0;
    let mut best_power = T::neg_infinity();
    for (i, v) in buf.iter().enumerate() {
        let p = v.norm_sqr();
        if p > best_power {
            best_power = p;
            best = i;
        }
    }
    let half = ANGLE_FFT_LEN as i64 / 2;
    let k = best as i64;
    if k >= half {
        k - ANGLE_FFT_LEN as i64
    } else {
        k
    }
}
