//! Blind estimation of the direct-to-reverberant ratio (DRR) from a two-microphone
//! recording, using a beamformer that nulls the talker.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiation.

mod error;
pub mod scalar;

pub mod alignment;
pub mod beamformer;
pub mod estimator;
pub mod eval;
pub mod ground_truth;
pub mod isim;
pub mod mixer;
pub mod noise_psd;
pub mod pipeline;
pub mod signal;

pub use error::{Error, Result};
pub use estimator::{DbClamp, Variant};
pub use mixer::NoiseKind;
pub use pipeline::{DenbeConfig, DrrResult};
pub use scalar::Real;

pub type Audio = signal::MultichannelAudio<f64>;
pub type Spectra = signal::SpectralFrameSeries<f64>;
pub type Air = ground_truth::AcousticImpulseResponse<f64>;
pub type Estimator = pipeline::Denbe<f64>;
pub type Beamformer = beamformer::BeamformerDesign<f64>;
