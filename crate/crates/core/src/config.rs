//! Run configuration: one `key = value` file covering the waveform, signal
//! chain, tracker, signature profile and model architecture.
//!
//! Waveform keys are bare (`bandwidth = 3.072e9`); the others carry a section
//! prefix (`cfar.pfa`, `tracker.eps`, `profile.width`, `model.conv_depths`).
//! `profile = <name>` resets the profile to a named preset, so it should come
//! before any `profile.*` key.

use crate::dsp::CfarParams;
use crate::error::ConfigError;
use crate::kv::{self, Entry};
use crate::nn::ModelConfig;
use crate::signature::SignatureProfile;
use crate::tracking::TrackerParams;
use crate::waveform::{derive_params, DerivedParams, WaveformConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub waveform: WaveformConfig,
    pub cfar: CfarParams,
    pub tracker: TrackerParams,
    pub profile: SignatureProfile,
    /// Architecture; input size is taken from the profile.
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let profile = SignatureProfile::paper_match();
        Self {
            waveform: WaveformConfig::default(),
            cfar: CfarParams::default(),
            tracker: TrackerParams::default(),
            model: ModelConfig::for_profile(&profile),
            profile,
        }
    }
}

impl RunConfig {
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for e in kv::parse(text)? {
            cfg.apply(&e)?;
        }
        cfg.model.input_height = cfg.profile.depth;
        cfg.model.input_width = cfg.profile.width;
        cfg.check()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<(), ConfigError> {
        let key = e.key.as_str();
        if key == "profile" {
            self.profile = e.value.parse().map_err(|err: ConfigError| e.err(err.to_string()))?;
            return Ok(());
        }
        let Some((section, field)) = key.split_once('.') else {
            return self.waveform.apply(e);
        };
        match (section, field) {
            ("cfar", "guard") => self.cfar.guard = e.usize()?,
            ("cfar", "train") => self.cfar.train = e.usize()?,
            ("cfar", "pfa") => self.cfar.pfa = e.f64()?,
            ("tracker", "eps") => self.tracker.eps = e.f64()?,
            ("tracker", "min_pts") => self.tracker.min_pts = e.usize()?,
            ("tracker", "doppler_weight") => self.tracker.doppler_weight = e.f64()?,
            ("tracker", "gate") => self.tracker.gate = e.f64()?,
            ("tracker", "confirm_hits") => self.tracker.confirm_hits = e.u64()? as u32,
            ("tracker", "confirm_window") => self.tracker.confirm_window = e.u64()? as u32,
            ("tracker", "max_misses") => self.tracker.max_misses = e.u64()? as u32,
            ("tracker", "accel_density") => self.tracker.kalman.accel_density = e.f64()?,
            ("tracker", "measurement_sigma") => self.tracker.kalman.measurement_sigma = e.f64()?,
            ("profile", "depth") => self.profile.depth = e.usize()?,
            ("profile", "width") => self.profile.width = e.usize()?,
            ("profile", "fold") => self.profile.fold = e.usize()?,
            ("profile", "stride") => self.profile.stride = e.usize()?,
            ("profile", "range_exponent") => self.profile.range_exponent = e.u64()? as i32,
            ("profile", "reference_range") => self.profile.reference_range = e.f64()?,
            ("model", "conv_depths") => {
                self.model.conv_depths = e
                    .f64_list()?
                    .into_iter()
                    .map(|v| if v >= 1.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(e.err("conv depths are positive integers")) })
                    .collect::<Result<_, _>>()?;
            }
            ("model", "kernel") => self.model.kernel = e.usize()?,
            ("model", "fc_hidden") => self.model.fc_hidden = e.usize()?,
            ("model", "leaky_slope") => self.model.leaky_slope = e.f64()?,
            ("model", "dropout") => self.model.dropout_p = e.f64()?,
            _ => return Err(e.unknown()),
        }
        Ok(())
    }

    /// Validates every section and the profile against the model.
    pub fn check(&self) -> Result<DerivedParams, ConfigError> {
        let derived = derive_params(&self.waveform)?;
        self.cfar.check().map_err(|e| ConfigError::inconsistent("valid CFAR parameters", e.to_string()))?;
        self.profile.check()?;
        self.model.check()?;
        if (self.model.input_height, self.model.input_width) != (self.profile.depth, self.profile.width) {
            return Err(ConfigError::inconsistent(
                "model input equals profile size",
                format!("{}x{} vs {}x{}", self.model.input_height, self.model.input_width, self.profile.depth, self.profile.width),
            ));
        }
        Ok(derived)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_kv_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_are_routed() {
        let c = RunConfig::from_kv_str(
            "bandwidth = 3.072e9\ncfar.pfa = 1e-3\ntracker.eps = 0.6\nprofile = paper-timing\nmodel.conv_depths = 8, 16\n",
        )
        .unwrap();
        assert_eq!(c.cfar.pfa, 1e-3);
        assert_eq!(c.tracker.eps, 0.6);
        assert_eq!(c.profile.width, 20);
        assert_eq!((c.model.input_height, c.model.input_width), (64, 20));
        assert_eq!(c.model.conv_depths, vec![8, 16]);
    }

    #[test]
    fn profile_incompatible_with_pooling_is_rejected() {
        // Three 2x2 poolings need both sides divisible by 8.
        let err = RunConfig::from_kv_str("profile = paper-timing\n").unwrap_err();
        assert!(err.to_string().contains("divisible"), "{err}");
        assert!(RunConfig::from_kv_str("profile.depth = 60\nprofile.fold = 2\n").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        assert_eq!(
            RunConfig::from_kv_str("\ncfar.bogus = 1\n").unwrap_err(),
            ConfigError::UnknownKey { line: 2, key: "cfar.bogus".into() }
        );
        assert!(matches!(RunConfig::from_kv_str("nonsense = 1").unwrap_err(), ConfigError::UnknownKey { .. }));
    }
}
