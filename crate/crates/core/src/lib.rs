//! Multi-person behavior detection with an FMCW mmWave radar.
//!
//! The crate covers the whole chain: a synthetic radar scene simulator
//! ([`sim`]), range/Doppler/MTI/CFAR/angle processing ([`dsp`]), DBSCAN
//! clustering with Kalman tracking ([`tracking`]), per-track Doppler
//! signatures ([`signature`]), a convolutional classifier written from scratch
//! ([`nn`]), synthetic dataset generation ([`dataset`]) and a three-stage
//! streaming runtime ([`pipeline`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the concrete instantiations used in practice.

mod binio;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod kv;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod signature;
pub mod sim;
pub mod tracking;
pub mod waveform;

pub use error::{ConfigError, Error, Result};
pub use scalar::Scalar;
pub use sim::BehaviorClass;
pub use waveform::{derive_params, DerivedParams, WaveformConfig};

pub type DataCube32 = sim::DataCube<f32>;
pub type DataCube64 = sim::DataCube<f64>;
pub type RangeDopplerMap32 = dsp::RangeDopplerMap<f32>;
pub type SignalChain32 = dsp::SignalChain<f32>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Model32 = nn::Model<f32>;
pub type Model64 = nn::Model<f64>;
