//! Radar signal chain: raw cube to point cloud.

mod cfar;
mod fft;

use num_complex::Complex;

pub use cfar::{ca_cfar_1d, cfar_detect, cfar_passes, threshold_factor, CfarHit, CfarParams, Grid, PassHit, PassMasks};
pub use fft::{hann, ANGLE_FFT_LEN};

use crate::error::DspError;
use crate::scalar::Scalar;
use crate::sim::DataCube;
use crate::waveform::DerivedParams;

/// Doppler-processed frame.
#[derive(Debug, Clone)]
pub struct RangeDopplerMap<T> {
    doppler_bins: usize,
    range_bins: usize,
    channels: usize,
    /// `[doppler][range][channel]`
    values: Vec<Complex<T>>,
    /// Channel-summed power, rows are Doppler bins.
    power: Grid<T>,
    pub frame_index: u64,
}

impl<T: Scalar> RangeDopplerMap<T> {
    fn from_values(values: Vec<Complex<T>>, doppler_bins: usize, range_bins: usize, channels: usize, frame_index: u64) -> Self {
        let power = values.chunks_exact(channels).map(|s| s.iter().map(|v| v.norm_sqr()).sum()).collect();
        Self {
            doppler_bins,
            range_bins,
            channels,
            values,
            power: Grid::new(doppler_bins, range_bins, power),
            frame_index,
        }
    }

    /// (doppler_bins, range_bins, channels)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.doppler_bins, self.range_bins, self.channels)
    }

    pub fn snapshot(&self, doppler_bin: usize, range_bin: usize) -> &[Complex<T>] {
        let start = (doppler_bin * self.range_bins + range_bin) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn power(&self) -> &Grid<T> {
        &self.power
    }

    pub fn power_at(&self, doppler_bin: usize, range_bin: usize) -> T {
        self.power.get(doppler_bin, range_bin)
    }
}

/// One CFAR detection with its estimated angle and physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub azimuth: f64,
    pub snr: f64,
    pub range: f64,
    pub radial_velocity: f64,
}

/// Cartesian point in the radar frame; y points along boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub radial_velocity: f64,
    pub intensity: f64,
    pub frame_index: u64,
    pub track_id: Option<u64>,
}

impl RadarPoint {
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Subtracts the slow-time mean from every (range bin, channel).
pub fn mti_filter<T: Scalar>(cube: &mut DataCube<T>) {
    let (chirps, samples, channels) = cube.dims();
    let stride = samples * channels;
    let inv = T::lit(1.0 / chirps as f64);
    let data = cube.as_mut_slice();
    let mut mean = vec![Complex::new(T::zero(), T::zero()); stride];
    for row in data.chunks_exact(stride) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    for m in mean.iter_mut() {
        *m = m.scale(inv);
    }
    for row in data.chunks_exact_mut(stride) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= *m;
        }
    }
}

/// Range, velocity and Cartesian conversion. Points beyond the maximum range
/// are dropped.
pub fn to_point_cloud(detections: &[Detection], derived: &DerivedParams, frame_index: u64) -> Vec<RadarPoint> {
    let center = derived.doppler_center() as f64;
    detections
        .iter()
        .filter_map(|d| {
            let range = d.range_bin as f64 * derived.range_resolution;
            if range > derived.max_range {
                return None;
            }
            let radial_velocity = (d.doppler_bin as f64 - center) * derived.velocity_resolution;
            Some(RadarPoint {
                x: range * d.azimuth.sin(),
                y: range * d.azimuth.cos(),
                radial_velocity,
                intensity: d.snr,
                frame_index,
                track_id: None,
            })
        })
        .collect()
}

/// The full per-frame chain with FFT plans and windows built once.
pub struct SignalChain<T: Scalar> {
    derived: DerivedParams,
    cfar: CfarParams,
    plans: fft::Plans<T>,
}

impl<T: Scalar> SignalChain<T> {
    pub fn new(derived: DerivedParams, cfar: CfarParams) -> Result<Self, DspError> {
        cfar.check()?;
        let plans = fft::Plans::new(derived.range_bins, derived.doppler_bins);
        Ok(Self { derived, cfar, plans })
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn cfar_params(&self) -> &CfarParams {
        &self.cfar
    }

    fn check_cube(&self, cube: &DataCube<T>) -> Result<(), DspError> {
        let want = (self.derived.doppler_bins, self.derived.range_bins, self.derived.virtual_channels);
        if cube.dims() != want {
            return Err(DspError::CubeShape { expected: want, got: cube.dims() });
        }
        Ok(())
    }

    /// Hann-windowed FFT along fast time, in place.
    pub fn range_fft(&self, cube: &mut DataCube<T>) -> Result<(), DspError> {
        self.check_cube(cube)?;
        fft::range_transform(cube, &self.plans.range, &self.plans.range_window);
        Ok(())
    }

    /// Hann-windowed, FFT-shifted transform along slow time.
    pub fn doppler_fft(&self, cube: &DataCube<T>) -> Result<RangeDopplerMap<T>, DspError> {
        self.check_cube(cube)?;
        let (chirps, samples, channels) = cube.dims();
        let values = fft::doppler_transform(cube, &self.plans.doppler, &self.plans.doppler_window);
        Ok(RangeDopplerMap::from_values(values, chirps, samples, channels, cube.frame_index))
    }

    /// Azimuth in radians from an 8-channel snapshot.
    pub fn estimate_azimuth(&self, snapshot: &[Complex<T>]) -> f64 {
        let k = fft::angle_peak_bin(snapshot, &self.plans.angle);
        (2.0 * k as f64 / ANGLE_FFT_LEN as f64).clamp(-1.0, 1.0).asin()
    }

    /// CFAR plus angle estimation, restricted to the configured maximum range.
    pub fn detect(&self, map: &RangeDopplerMap<T>) -> Result<Vec<Detection>, DspError> {
        let center = self.derived.doppler_center() as f64;
        let hits = cfar_detect(map.power(), &self.cfar)?;
        Ok(hits
            .into_iter()
            .filter(|h| h.col <= self.derived.max_range_bin)
            .map(|h| Detection {
                range_bin: h.col,
                doppler_bin: h.row,
                azimuth: self.estimate_azimuth(map.snapshot(h.row, h.col)),
                snr: h.snr,
                range: h.col as f64 * self.derived.range_resolution,
                radial_velocity: (h.row as f64 - center) * self.derived.velocity_resolution,
            })
            .collect())
    }

    /// Range FFT, MTI and Doppler FFT.
    pub fn range_doppler(&self, mut cube: DataCube<T>) -> Result<RangeDopplerMap<T>, DspError> {
        self.range_fft(&mut cube)?;
        mti_filter(&mut cube);
        self.doppler_fft(&cube)
    }

    /// Raw cube to point cloud.
    pub fn process(&self, cube: DataCube<T>) -> Result<Vec<RadarPoint>, DspError> {
        let frame = cube.frame_index;
        let map = self.range_doppler(cube)?;
        let detections = self.detect(&map)?;
        Ok(to_point_cloud(&detections, &self.derived, frame))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scatterer;
    use crate::waveform::{derive_params, WaveformConfig};
    use std::f64::consts::PI;

    fn setup() -> (WaveformConfig, DerivedParams, SignalChain<f64>) {
        let cfg = WaveformConfig::default();
        let d = derive_params(&cfg).unwrap();
        let chain = SignalChain::new(d.clone(), CfarParams::default()).unwrap();
        (cfg, d, chain)
    }

    fn naive_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex::from_polar(1.0, -2.0 * PI * (k * i % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn scatterer(range: f64, v: f64, az: f64) -> Scatterer {
        Scatterer { x: range * az.sin(), y: range * az.cos(), radial_velocity: v, rcs_amplitude: 1.0 }
    }

    #[test]
    fn range_fft_matches_naive_dft() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(1.3, 0.4, 0.2), &cfg, &d);
        let raw = cube.clone();
        chain.range_fft(&mut cube).unwrap();
        let w: Vec<f64> = hann(128);
        for &(c, k) in &[(0usize, 0usize), (17, 5), (127, 7)] {
            let input: Vec<Complex<f64>> = (0..128).map(|n| raw.get(c, n, k) * w[n]).collect();
            let want = naive_dft(&input);
            for n in 0..128 {
                assert!((cube.get(c, n, k) - want[n]).norm() < 1e-9 * want[n].norm().max(1.0));
            }
        }
    }

    #[test]
    fn range_peak_at_bin_twenty_for_one_metre() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        let r = 20.0 * d.range_resolution;
        cube.add_scatterer(&scatterer(r, 0.0, 0.0), &cfg, &d);
        chain.range_fft(&mut cube).unwrap();
        let peak = (0..128).max_by(|&a, &b| cube.get(3, a, 0).norm().total_cmp(&cube.get(3, b, 0).norm())).unwrap();
        assert_eq!(peak, 20);
    }

    #[test]
    fn range_fft_of_zero_is_zero() {
        let (_, d, chain) = setup();
        let mut cube = DataCube::<f32>::for_waveform(&d, 0);
        let chain32 = SignalChain::<f32>::new(chain.derived().clone(), CfarParams::default()).unwrap();
        chain32.range_fft(&mut cube).unwrap();
        assert!(cube.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn cube_shape_is_checked() {
        let (_, _, chain) = setup();
        let mut cube = DataCube::<f64>::zeros(64, 128, 8, 0);
        assert!(matches!(chain.range_fft(&mut cube), Err(DspError::CubeShape { .. })));
    }

    #[test]
    fn mti_zeroes_static_returns() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(1.0, 0.0, 0.1), &cfg, &d);
        chain.range_fft(&mut cube).unwrap();
        mti_filter(&mut cube);
        assert!(cube.as_slice().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn mti_passes_bin_twelve_mover() {
        // An integer number of cycles over the CPI has zero mean.
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(1.0, 12.0 * d.velocity_resolution, 0.0), &cfg, &d);
        chain.range_fft(&mut cube).unwrap();
        let before = cube.clone();
        mti_filter(&mut cube);
        let peak_before = before.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let peak_after = cube.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mean: Complex<f64> = (0..128).map(|c| Complex::from_polar(1.0, 2.0 * PI * 12.0 * c as f64 / 128.0)).sum();
        assert!(mean.norm() < 1e-9);
        assert!((peak_before - peak_after).abs() / peak_before < 0.01);
    }

    #[test]
    fn mti_superposition() {
        let (cfg, d, chain) = setup();
        let mut moving = DataCube::<f64>::for_waveform(&d, 0);
        moving.add_scatterer(&scatterer(1.5, 0.7, -0.3), &cfg, &d);
        let mut both = moving.clone();
        both.add_scatterer(&scatterer(2.0, 0.0, 0.4), &cfg, &d);
        for c in [&mut moving, &mut both] {
            chain.range_fft(c).unwrap();
            mti_filter(c);
        }
        for (a, b) in moving.as_slice().iter().zip(both.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn doppler_peak_at_center_plus_twelve() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        let v = 12.0 * d.velocity_resolution;
        cube.add_scatterer(&scatterer(1.0, v, 0.0), &cfg, &d);
        let map = chain.range_doppler(cube).unwrap();
        let p = map.power();
        let (mut best, mut at) = (0.0, (0, 0));
        for r in 0..p.rows {
            for c in 0..p.cols {
                if p.get(r, c) > best {
                    best = p.get(r, c);
                    at = (r, c);
                }
            }
        }
        assert_eq!(at, (64 + 12, 20));
        assert_eq!((v / d.velocity_resolution).round() as i64, 12);
        // 1 m/s rounds to the same bin
        assert_eq!((1.0 / d.velocity_resolution).round() as i64, 12);
    }

    #[test]
    fn doppler_matches_naive_dft() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(2.2, -1.7, 0.5), &cfg, &d);
        let raw = cube.clone();
        let map = chain.doppler_fft(&cube).unwrap();
        let w: Vec<f64> = hann(128);
        let (n, k) = (90, 3);
        let input: Vec<Complex<f64>> = (0..128).map(|c| raw.get(c, n, k) * w[c]).collect();
        let want = naive_dft(&input);
        for (i, wv) in want.iter().enumerate() {
            let got = map.snapshot((i + 64) % 128, n)[k];
            assert!((got - wv).norm() < 1e-9 * wv.norm().max(1.0));
        }
    }

    #[test]
    fn static_target_suppressed_and_symmetric_movers() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(1.0, 0.0, 0.0), &cfg, &d);
        let map = chain.range_doppler(cube).unwrap();
        assert!(map.power().data.iter().all(|&p| p < 1e-18));

        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        cube.add_scatterer(&scatterer(1.0, 1.0, 0.0), &cfg, &d);
        cube.add_scatterer(&scatterer(1.0, -1.0, 0.0), &cfg, &d);
        let map = chain.range_doppler(cube).unwrap();
        let col: Vec<f64> = (0..128).map(|r| map.power_at(r, 20)).collect();
        let up = (65..128).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        let down = (0..64).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        assert_eq!(up - 64, 64 - down);
        assert!((col[up] - col[down]).abs() / col[up] < 1e-6);
    }

    #[test]
    fn azimuth_boresight_thirty_and_negative() {
        let (_, _, chain) = setup();
        let snap = |az: f64| -> Vec<Complex<f64>> {
            (0..8).map(|k| Complex::from_polar(1.0, 2.0 * PI * 0.5 * az.sin() * k as f64)).collect()
        };
        assert_eq!(chain.estimate_azimuth(&snap(0.0)), 0.0);
        assert!((chain.estimate_azimuth(&snap(30f64.to_radians())).to_degrees() - 30.0).abs() < 1e-9);
        let truth = -14.5f64.to_radians();
        let est = chain.estimate_azimuth(&snap(truth));
        let k = (est.sin() * 32.0).round() as i64;
        assert!((-9..=-7).contains(&k), "{k}");
        assert!((est.sin() - truth.sin()).abs() <= 2.0 / 64.0);
    }

    #[test]
    fn point_cloud_conversion() {
        let (_, d, _) = setup();
        let det = Detection { range_bin: 20, doppler_bin: 76, azimuth: 0.0, snr: 50.0, range: 0.0, radial_velocity: 0.0 };
        let pts = to_point_cloud(&[det], &d, 9);
        assert_eq!(pts.len(), 1);
        let p = pts[0];
        assert!(p.x.abs() < 1e-12);
        assert!((p.y - 0.976).abs() < 1e-3);
        assert!((p.radial_velocity - 0.992).abs() < 1e-3);
        assert_eq!(p.intensity, 50.0);
        assert_eq!(p.frame_index, 9);
        assert_eq!(p.track_id, None);

        let far = Detection { range_bin: 120, ..det };
        assert!(to_point_cloud(&[far], &d, 0).is_empty());
        assert!(to_point_cloud(&[], &d, 0).is_empty());
    }

    #[test]
    fn lone_scatterer_recovered_on_bin_centres() {
        let (cfg, d, chain) = setup();
        let mut cube = DataCube::<f64>::for_waveform(&d, 0);
        let r = 40.0 * d.range_resolution;
        let v = -7.0 * d.velocity_resolution;
        let az = (2.0 * 5.0 / 64.0f64).asin();
        cube.add_scatterer(&scatterer(r, v, az), &cfg, &d);
        let map = chain.range_doppler(cube).unwrap();
        let dets = chain.detect(&map).unwrap();
        let best = dets.iter().max_by(|a, b| a.snr.total_cmp(&b.snr)).unwrap();
        assert_eq!((best.range_bin, best.doppler_bin), (40, 57));
        assert!((best.range - r).abs() < 1e-12);
        assert!((best.radial_velocity - v).abs() < 1e-12);
        assert!((best.azimuth.sin() - az.sin()).abs() <= 2.0 / 64.0);
        assert!(best.snr > threshold_factor(16, 1e-4));
    }
}
