//! FMCW waveform configuration and the quantities derivable from it.
//!
//! The default configuration is the 77 GHz, 3.072 GHz-sweep setup used
//! throughout the crate: 128 complex samples per chirp at 2.5 MHz, 256 chirps
//! per 50 ms frame split over two TDM transmitters, four receivers.

use std::fmt;

use crate::error::ConfigError;
use crate::kv;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformConfig {
    /// Hz
    pub start_frequency: f64,
    /// Hz
    pub bandwidth: f64,
    /// Hz/s
    pub chirp_rate: f64,
    /// complex samples/s
    pub adc_sample_rate: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    /// s
    pub frame_duration: f64,
    pub num_tx: usize,
    pub num_rx: usize,
    /// Detection cutoff, m.
    pub max_range: f64,
    /// Start-to-start time of consecutive chirps (ramp plus idle), s. Fixes
    /// the slow-time sampling rate and therefore the velocity rows.
    pub chirp_cycle_time: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            start_frequency: 77.0e9,
            bandwidth: 3.072e9,
            chirp_rate: 60.0e12,
            adc_sample_rate: 2.5e6,
            samples_per_chirp: 128,
            chirps_per_frame: 256,
            frame_duration: 0.050,
            num_tx: 2,
            num_rx: 4,
            max_range: 5.0,
            chirp_cycle_time: 91.94e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    /// m
    pub wavelength: f64,
    /// m per range bin
    pub range_resolution: f64,
    pub range_bins: usize,
    /// m/s per Doppler bin
    pub velocity_resolution: f64,
    /// m/s
    pub max_radial_velocity: f64,
    /// Per-TX chirps in one coherent processing interval.
    pub doppler_bins: usize,
    pub virtual_channels: usize,
    /// rad, boresight
    pub azimuth_resolution: f64,
    /// Slow-time sampling period seen by one virtual channel, s.
    pub chirp_repetition_per_tx: f64,
    /// Last range bin inside `max_range`.
    pub max_range_bin: usize,
    /// Fast-time sampling period, s.
    pub sample_period: f64,
    /// s
    pub frame_period: f64,
    /// m, copied from the config
    pub max_range: f64,
}

impl DerivedParams {
    /// Index of the zero-velocity bin after FFT shift.
    pub fn doppler_center(&self) -> usize {
        self.doppler_bins / 2
    }
}

impl WaveformConfig {
    pub fn ramp_duration(&self) -> f64 {
        self.samples_per_chirp as f64 / self.adc_sample_rate
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("start_frequency > 0", self.start_frequency),
            ("bandwidth > 0", self.bandwidth),
            ("chirp_rate > 0", self.chirp_rate),
            ("adc_sample_rate > 0", self.adc_sample_rate),
            ("frame_duration > 0", self.frame_duration),
            ("max_range > 0", self.max_range),
            ("chirp_cycle_time > 0", self.chirp_cycle_time),
        ];
        for (relation, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::inconsistent(relation, format!("got {v}")));
            }
        }
        let counts = [
            ("samples_per_chirp > 0", self.samples_per_chirp),
            ("chirps_per_frame > 0", self.chirps_per_frame),
            ("num_tx > 0", self.num_tx),
            ("num_rx > 0", self.num_rx),
        ];
        for (relation, v) in counts {
            if v == 0 {
                return Err(ConfigError::inconsistent(relation, "got 0"));
            }
        }
        let swept = self.chirp_rate * self.ramp_duration();
        if ((swept - self.bandwidth) / self.bandwidth).abs() > 1e-3 {
            return Err(ConfigError::inconsistent(
                "bandwidth = chirp_rate * samples_per_chirp / adc_sample_rate",
                format!("bandwidth {} Hz but the sampled ramp sweeps {swept} Hz", self.bandwidth),
            ));
        }
        if self.chirps_per_frame % self.num_tx != 0 {
            return Err(ConfigError::inconsistent(
                "chirps_per_frame divisible by num_tx",
                format!("{} chirps over {} transmitters", self.chirps_per_frame, self.num_tx),
            ));
        }
        if self.chirp_cycle_time < self.ramp_duration() {
            return Err(ConfigError::inconsistent(
                "chirp_cycle_time >= samples_per_chirp / adc_sample_rate",
                format!("cycle {} s shorter than sampled ramp {} s", self.chirp_cycle_time, self.ramp_duration()),
            ));
        }
        let active = self.chirps_per_frame as f64 * self.chirp_cycle_time;
        if active > self.frame_duration * (1.0 + 1e-9) {
            return Err(ConfigError::inconsistent(
                "chirps_per_frame * chirp_cycle_time <= frame_duration",
                format!("chirps occupy {active} s of a {} s frame", self.frame_duration),
            ));
        }
        // Complex sampling: the whole ADC rate is usable beat bandwidth.
        let max_beat = 2.0 * self.max_range * self.chirp_rate / SPEED_OF_LIGHT;
        if max_beat >= self.adc_sample_rate {
            return Err(ConfigError::inconsistent(
                "2 * max_range * chirp_rate / c < adc_sample_rate",
                format!("beat at max range is {max_beat} Hz"),
            ));
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = WaveformConfig::default();
        for e in kv::parse(text)? {
            cfg.apply(&e)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Sets the field named by one config entry; unknown keys are errors.
    pub fn apply(&mut self, e: &kv::Entry) -> Result<(), ConfigError> {
        match e.key.as_str() {
            "start_frequency" => self.start_frequency = e.f64()?,
            "bandwidth" => self.bandwidth = e.f64()?,
            "chirp_rate" => self.chirp_rate = e.f64()?,
            "adc_sample_rate" => self.adc_sample_rate = e.f64()?,
            "samples_per_chirp" => self.samples_per_chirp = e.usize()?,
            "chirps_per_frame" => self.chirps_per_frame = e.usize()?,
            "frame_duration" => self.frame_duration = e.f64()?,
            "num_tx" => self.num_tx = e.usize()?,
            "num_rx" => self.num_rx = e.usize()?,
            "max_range" => self.max_range = e.f64()?,
            "chirp_cycle_time" => self.chirp_cycle_time = e.f64()?,
            _ => return Err(e.unknown()),
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "start_frequency = {}\nbandwidth = {}\nchirp_rate = {}\nadc_sample_rate = {}\n\
             samples_per_chirp = {}\nchirps_per_frame = {}\nframe_duration = {}\nnum_tx = {}\n\
             num_rx = {}\nmax_range = {}\nchirp_cycle_time = {}\n",
            self.start_frequency,
            self.bandwidth,
            self.chirp_rate,
            self.adc_sample_rate,
            self.samples_per_chirp,
            self.chirps_per_frame,
            self.frame_duration,
            self.num_tx,
            self.num_rx,
            self.max_range,
            self.chirp_cycle_time
        )
    }
}

pub fn derive_params(cfg: &WaveformConfig) -> Result<DerivedParams, ConfigError> {
    cfg.check()?;
    let wavelength = SPEED_OF_LIGHT / cfg.start_frequency;
    let range_resolution = SPEED_OF_LIGHT / (2.0 * cfg.bandwidth);
    let doppler_bins = cfg.chirps_per_frame / cfg.num_tx;
    let virtual_channels = cfg.num_tx * cfg.num_rx;
    let chirp_repetition_per_tx = cfg.num_tx as f64 * cfg.chirp_cycle_time;
    let velocity_resolution = wavelength / (2.0 * doppler_bins as f64 * chirp_repetition_per_tx);
    let max_range_bin = ((cfg.max_range / range_resolution).floor() as usize).min(cfg.samples_per_chirp - 1);
    Ok(DerivedParams {
        wavelength,
        range_resolution,
        range_bins: cfg.samples_per_chirp,
        velocity_resolution,
        max_radial_velocity: velocity_resolution * doppler_bins as f64 / 2.0,
        doppler_bins,
        virtual_channels,
        azimuth_resolution: 2.0 / virtual_channels as f64,
        chirp_repetition_per_tx,
        max_range_bin,
        sample_period: 1.0 / cfg.adc_sample_rate,
        frame_period: cfg.frame_duration,
        max_range: cfg.max_range,
    })
}

/// Quantities a validation claim can be made against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Wavelength,
    RangeResolution,
    RangeBins,
    VelocityResolution,
    MaxRadialVelocity,
    DopplerBins,
    VirtualChannels,
    AzimuthResolutionDeg,
    ChirpRepetitionPerTx,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::Wavelength,
        Quantity::RangeResolution,
        Quantity::RangeBins,
        Quantity::VelocityResolution,
        Quantity::MaxRadialVelocity,
        Quantity::DopplerBins,
        Quantity::VirtualChannels,
        Quantity::AzimuthResolutionDeg,
        Quantity::ChirpRepetitionPerTx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Wavelength => "wavelength [m]",
            Quantity::RangeResolution => "range resolution [m]",
            Quantity::RangeBins => "range bins",
            Quantity::VelocityResolution => "velocity resolution [m/s]",
            Quantity::MaxRadialVelocity => "max radial velocity [m/s]",
            Quantity::DopplerBins => "doppler bins",
            Quantity::VirtualChannels => "virtual channels",
            Quantity::AzimuthResolutionDeg => "azimuth resolution [deg]",
            Quantity::ChirpRepetitionPerTx => "chirp repetition per TX [s]",
        }
    }

    pub fn of(self, d: &DerivedParams) -> f64 {
        match self {
            Quantity::Wavelength => d.wavelength,
            Quantity::RangeResolution => d.range_resolution,
            Quantity::RangeBins => d.range_bins as f64,
            Quantity::VelocityResolution => d.velocity_resolution,
            Quantity::MaxRadialVelocity => d.max_radial_velocity,
            Quantity::DopplerBins => d.doppler_bins as f64,
            Quantity::VirtualChannels => d.virtual_channels as f64,
            Quantity::AzimuthResolutionDeg => d.azimuth_resolution.to_degrees(),
            Quantity::ChirpRepetitionPerTx => d.chirp_repetition_per_tx,
        }
    }
}

pub const DEFAULT_CLAIM_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim {
    pub quantity: Quantity,
    pub value: f64,
    /// Relative tolerance; [`DEFAULT_CLAIM_TOLERANCE`] unless the claim is a
    /// known approximation.
    pub tolerance: f64,
}

impl Claim {
    pub fn new(quantity: Quantity, value: f64) -> Self {
        Self { quantity, value, tolerance: DEFAULT_CLAIM_TOLERANCE }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Published derived rows for the default waveform. The azimuth row is the
/// 2/N-radian beamwidth approximation and only agrees to about 1.2%.
pub fn reference_claims() -> Vec<Claim> {
    vec![
        Claim::new(Quantity::RangeResolution, 0.0488),
        Claim::new(Quantity::VelocityResolution, 0.0827),
        Claim::new(Quantity::MaxRadialVelocity, 5.2936),
        Claim::new(Quantity::AzimuthResolutionDeg, 14.5).with_tolerance(0.015),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub quantity: Quantity,
    pub computed: f64,
    pub claimed: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl ReportRow {
    pub fn relative_error(&self) -> Option<f64> {
        self.claimed.map(|c| ((self.computed - c) / c).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Set when the config itself is inconsistent; no rows are computed then.
    pub config_error: Option<ConfigError>,
    pub rows: Vec<ReportRow>,
}

impl ValidationReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.passed).count() + usize::from(self.config_error.is_some())
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(e) = &self.config_error {
            writeln!(f, "FAIL  configuration: {e}")?;
        }
        for r in &self.rows {
            match r.claimed {
                Some(c) => writeln!(
                    f,
                    "{}  {:<30} {:>14.6e}  claimed {:>12.6e}  rel.err {:.3}% (tol {:.1}%)",
                    if r.passed { "ok  " } else { "FAIL" },
                    r.quantity.name(),
                    r.computed,
                    c,
                    100.0 * r.relative_error().unwrap_or(0.0),
                    100.0 * r.tolerance
                )?,
                None => writeln!(f, "      {:<30} {:>14.6e}", r.quantity.name(), r.computed)?,
            }
        }
        Ok(())
    }
}

/// Computes every derived quantity and checks it against the given claims.
/// Quantities without a claim are reported with their computed value only.
pub fn validate(cfg: &WaveformConfig, claims: &[Claim]) -> ValidationReport {
    let derived = match derive_params(cfg) {
        Ok(d) => d,
        Err(e) => return ValidationReport { config_error: Some(e), rows: Vec::new() },
    };
    let rows = Quantity::ALL
        .iter()
        .map(|&q| {
            let computed = q.of(&derived);
            match claims.iter().find(|c| c.quantity == q) {
                Some(c) => ReportRow {
                    quantity: q,
                    computed,
                    claimed: Some(c.value),
                    tolerance: c.tolerance,
                    passed: ((computed - c.value) / c.value).abs() <= c.tolerance,
                },
                None => ReportRow { quantity: q, computed, claimed: None, tolerance: DEFAULT_CLAIM_TOLERANCE, passed: true },
            }
        })
        .collect();
    ValidationReport { config_error: None, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn default_config_reproduces_derived_rows() {
        let d = derive_params(&WaveformConfig::default()).unwrap();
        assert!(rel(d.range_resolution, 0.0488) < 1e-3, "{}", d.range_resolution);
        assert_eq!(d.virtual_channels, 8);
        assert_eq!(d.doppler_bins, 128);
        assert!(rel(d.velocity_resolution, 0.0827) < 1e-3);
        assert!(rel(d.max_radial_velocity, 5.2936) < 1e-3);
        // 2/8 rad
        assert!((d.azimuth_resolution.to_degrees() - 14.3239).abs() < 1e-3);
        assert!(rel(d.azimuth_resolution.to_degrees(), 14.5) < 0.015);
        assert_eq!(d.max_range_bin, 102);
    }

    #[test]
    fn doppler_bins_follow_from_velocity_rows() {
        // 2 * 5.2936 / 0.0827 from the published rows
        assert_eq!((2.0_f64 * 5.2936 / 0.0827).round() as usize, 128);
        let d = derive_params(&WaveformConfig::default()).unwrap();
        assert_eq!(d.doppler_bins, 128);
    }

    #[test]
    fn doubling_bandwidth_halves_range_resolution() {
        let base = WaveformConfig::default();
        let mut wide = base.clone();
        wide.bandwidth *= 2.0;
        wide.chirp_rate *= 2.0;
        // keep the steeper beat inside the ADC band
        wide.max_range /= 2.0;
        let a = derive_params(&base).unwrap();
        let b = derive_params(&wide).unwrap();
        assert_eq!(a.range_resolution, 2.0 * b.range_resolution);
    }

    #[test]
    fn velocity_resolution_round_trips_through_chirp_repetition() {
        let d = derive_params(&WaveformConfig::default()).unwrap();
        let again = d.wavelength / (2.0 * d.doppler_bins as f64 * d.chirp_repetition_per_tx);
        assert!(rel(again, d.velocity_resolution) < 1e-9);
    }

    #[test]
    fn inconsistent_bandwidth_is_named() {
        let mut cfg = WaveformConfig::default();
        cfg.bandwidth = 1.5e9;
        match derive_params(&cfg) {
            Err(ConfigError::Inconsistent { relation, .. }) => assert!(relation.starts_with("bandwidth")),
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn tdm_divisibility_is_checked() {
        let mut cfg = WaveformConfig::default();
        cfg.num_tx = 3;
        let err = derive_params(&cfg).unwrap_err();
        assert!(err.to_string().contains("divisible by num_tx"));
    }

    #[test]
    fn reference_claims_all_pass() {
        let report = validate(&WaveformConfig::default(), &reference_claims());
        assert!(report.passed(), "{report}");
        assert_eq!(report.rows.iter().filter(|r| r.claimed.is_some()).count(), 4);
    }

    #[test]
    fn halved_bandwidth_fails_range_row() {
        let mut cfg = WaveformConfig::default();
        cfg.bandwidth /= 2.0;
        cfg.chirp_rate /= 2.0;
        let report = validate(&cfg, &reference_claims());
        let row = report.rows.iter().find(|r| r.quantity == Quantity::RangeResolution).unwrap();
        assert!(!row.passed);
        assert!((row.computed - 2.0 * 0.048795).abs() < 1e-5);
    }

    #[test]
    fn empty_claims_report_values_only() {
        let report = validate(&WaveformConfig::default(), &[]);
        assert_eq!(report.failures(), 0);
        assert_eq!(report.rows.len(), Quantity::ALL.len());
        assert!(report.rows.iter().all(|r| r.claimed.is_none()));
    }

    #[test]
    fn kv_round_trip_and_unknown_keys() {
        let cfg = WaveformConfig::default();
        let back = WaveformConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(cfg, back);
        let err = WaveformConfig::from_kv_str("bandwidth = 3.072e9\ncolour = blue\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }));
    }
}
