//! Inter-channel delay estimation (GCC-PHAT) and integer-sample alignment.
//!
//! After alignment the talker appears broadside to the two-microphone pair,
//! which is where the beamformer places its null.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::MultichannelAudio;

/// Confidence below which alignment is reported as unreliable.
pub const LOW_CONFIDENCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdoaEstimate {
    /// Delay of channel 2 relative to channel 1, in samples.
    pub lag: i64,
    /// Peak share of the absolute correlation mass inside the search range.
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct AlignmentResult<T> {
    pub lag: i64,
    pub confidence: f64,
    pub aligned: MultichannelAudio<T>,
}

/// Search range covering 10 ms of propagation.
pub fn default_max_lag(sample_rate: u32) -> usize {
    (f64::from(sample_rate) * 0.01).ceil() as usize
}

pub fn estimate_tdoa_gcc_phat<T: Real>(audio: &MultichannelAudio<T>, max_lag: usize) -> Result<TdoaEstimate> {
    ensure!(
        audio.num_channels() == 2,
        Shape,
        "delay estimation needs exactly 2 channels, got {}",
        audio.num_channels()
    );
    let len = audio.len();
    ensure!(max_lag < len / 2, Domain, "max lag {max_lag} must be below half the signal length {len}");
    for (i, ch) in audio.channels().iter().enumerate() {
        ensure!(ch.iter().any(|&s| s != T::zero()), Degenerate, "channel {} is silent", i + 1);
    }

    let n = (2 * len).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum = |x: &[T]| {
        let mut v = vec![Complex::default(); n];
        for (slot, &s) in v.iter_mut().zip(x) {
            slot.re = s;
        }
        fwd.process(&mut v);
        v
    };
    let x1 = spectrum(audio.channel(0));
    let x2 = spectrum(audio.channel(1));
    let mut cross: Vec<Complex<T>> = x1.iter().zip(&x2).map(|(a, b)| a.conj() * b).collect();
    let max_mag = cross.iter().fold(T::zero(), |m, c| m.max(c.norm()));
    let floor = max_mag * T::lit(1e-12);
    for c in &mut cross {
        let mag = c.norm();
        *c = if mag > floor { *c / mag } else { Complex::default() };
    }
    inv.process(&mut cross);

    let at = |lag: i64| cross[lag.rem_euclid(n as i64) as usize].re;
    let max_lag = max_lag as i64;
    let mut best = (0_i64, T::neg_infinity());
    let mut mass = T::zero();
    for lag in -max_lag..=max_lag {
        let v = at(lag);
        mass += v.abs();
        // strict comparison keeps the smallest-magnitude lag on ties
        if v > best.1 || (v == best.1 && lag.abs() < best.0.abs()) {
            best = (lag, v);
        }
    }
    let confidence =
        if mass > T::zero() && best.1 > T::zero() { (best.1 / mass).as_f64().clamp(0.0, 1.0) } else { 0.0 };
    Ok(TdoaEstimate { lag: best.0, confidence })
}

/// Shifts channel 2 by `-lag` and trims both channels to their overlap.
pub fn align<T: Real>(audio: &MultichannelAudio<T>, lag: i64) -> Result<MultichannelAudio<T>> {
    ensure!(audio.num_channels() == 2, Shape, "alignment needs exactly 2 channels");
    let len = audio.len() as i64;
    ensure!(lag.abs() < len, Domain, "|lag| {lag} must be below length {len}");
    let shift = lag.unsigned_abs() as usize;
    let keep = audio.len() - shift;
    let (c1, c2) = (audio.channel(0), audio.channel(1));
    let (a, b) = if lag >= 0 {
        (c1[..keep].to_vec(), c2[shift..].to_vec())
    } else {
        (c1[shift..].to_vec(), c2[..keep].to_vec())
    };
    MultichannelAudio::new(vec![a, b], audio.sample_rate())
}

/// Estimates the delay and removes it. Low confidence is logged, not fatal.
pub fn align_pair<T: Real>(audio: &MultichannelAudio<T>, max_lag: usize) -> Result<AlignmentResult<T>> {
    let est = estimate_tdoa_gcc_phat(audio, max_lag)?;
    if est.confidence < LOW_CONFIDENCE {
        log::warn!("low alignment confidence {:.3} at lag {}", est.confidence, est.lag);
    }
    Ok(AlignmentResult { lag: est.lag, confidence: est.confidence, aligned: align(audio, est.lag)? })
}
