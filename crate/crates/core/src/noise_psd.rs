//! Blind noise power spectral density tracking.
//!
//! Two trackers are provided. [`MinStatisticsTracker`] follows the minimum of
//! a recursively smoothed periodogram over a sliding window and scales it by
//! the expected bias of that minimum. [`MmseTracker`] updates the noise
//! periodogram with a soft speech-presence decision. Both are per-channel
//! streaming state machines; [`estimate_noise_min_statistics`] and
//! [`estimate_noise_mmse`] run one tracker per channel over a whole series.
//!
//! All thresholds are relative, so scaling the input by `g` scales every
//! estimate by `g²`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::SpectralFrameSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMethod {
    MinStatistics,
    MmsePower,
    None,
}

/// Noise power per bin, laid out like the spectra it annotates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePsdEstimate<T> {
    psd: Vec<T>,
    num_channels: usize,
    num_frames: usize,
    num_bins: usize,
    method: NoiseMethod,
}

impl<T: Real> NoisePsdEstimate<T> {
    /// Identically zero estimate; what variant C uses.
    pub fn zeros<U: Real>(spec: &SpectralFrameSeries<U>) -> Self {
        Self {
            psd: vec![T::zero(); spec.num_channels() * spec.num_frames() * spec.num_bins()],
            num_channels: spec.num_channels(),
            num_frames: spec.num_frames(),
            num_bins: spec.num_bins(),
            method: NoiseMethod::None,
        }
    }

    pub fn method(&self) -> NoiseMethod {
        self.method
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn frame(&self, channel: usize, frame: usize) -> &[T] {
        let o = (channel * self.num_frames + frame) * self.num_bins;
        &self.psd[o..o + self.num_bins]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.psd
    }

    pub fn matches<U: Real>(&self, spec: &SpectralFrameSeries<U>) -> bool {
        self.num_channels == spec.num_channels()
            && self.num_frames == spec.num_frames()
            && self.num_bins == spec.num_bins()
    }

    /// Per-bin mean over the listed frames of one channel.
    pub fn mean_over(&self, channel: usize, frames: &[usize]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.num_bins];
        for &f in frames {
            for (a, &p) in acc.iter_mut().zip(self.frame(channel, f)) {
                *a += p;
            }
        }
        let n = T::from_usize_lossy(frames.len().max(1));
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

fn run<T, K, F>(spec: &SpectralFrameSeries<T>, method: NoiseMethod, mut make: F) -> NoisePsdEstimate<T>
where
    T: Real,
    K: NoiseTracker<T>,
    F: FnMut() -> K,
{
    let nb = spec.num_bins();
    let mut psd = Vec::with_capacity(spec.num_channels() * spec.num_frames() * nb);
    let mut periodogram = vec![T::zero(); nb];
    for ch in 0..spec.num_channels() {
        let mut tracker = make();
        for f in 0..spec.num_frames() {
            for (p, c) in periodogram.iter_mut().zip(spec.frame(ch, f)) {
                *p = c.norm_sqr();
            }
            psd.extend_from_slice(tracker.update(&periodogram));
        }
    }
    NoisePsdEstimate { psd, num_channels: spec.num_channels(), num_frames: spec.num_frames(), num_bins: nb, method }
}

/// Streaming noise tracker fed one periodogram per frame.
pub trait NoiseTracker<T> {
    fn update(&mut self, periodogram: &[T]) -> &[T];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinStatisticsParams {
    /// Length of the minimum search window.
    pub window_secs: f64,
    /// Recursive periodogram smoothing constant.
    pub alpha: f64,
}

impl Default for MinStatisticsParams {
    fn default() -> Self {
        Self { window_secs: 1.5, alpha: 0.85 }
    }
}

// Mean of the minimum of D unit-mean chi-square variates, tabulated against D.
const MIN_MEAN_TABLE: [(f64, f64); 14] = [
    (1.0, 0.0),
    (2.0, 0.26),
    (5.0, 0.48),
    (8.0, 0.58),
    (10.0, 0.61),
    (15.0, 0.668),
    (20.0, 0.705),
    (30.0, 0.762),
    (40.0, 0.8),
    (60.0, 0.841),
    (80.0, 0.865),
    (120.0, 0.89),
    (140.0, 0.9),
    (160.0, 0.91),
];

fn min_mean_factor(d: f64) -> f64 {
    let table = &MIN_MEAN_TABLE;
    if d <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let ((d0, m0), (d1, m1)) = (w[0], w[1]);
        if d <= d1 {
            return m0 + (m1 - m0) * (d - d0) / (d1 - d0);
        }
    }
    table[table.len() - 1].1
}

impl MinStatisticsParams {
    pub fn window_frames(&self, sample_rate: u32, hop: usize) -> usize {
        ((self.window_secs * f64::from(sample_rate) / hop as f64).round() as usize).max(1)
    }

    /// Bias of the windowed minimum of a smoothed periodogram with `window`
    /// frames, from its equivalent degrees of freedom.
    pub fn bias(&self, window: usize) -> f64 {
        let q_eq = 2.0 * (1.0 + self.alpha) / (1.0 - self.alpha);
        let d = window as f64;
        let m = min_mean_factor(d);
        let q_tilde = (q_eq - m) / (1.0 - m);
        1.0 + (d - 1.0) * 2.0 / q_tilde
    }
}

#[derive(Debug, Clone)]
pub struct MinStatisticsTracker<T> {
    alpha: T,
    bias: T,
    window: usize,
    frame: usize,
    smoothed: Vec<T>,
    // monotone deques of (frame, value) per bin
    minima: Vec<VecDeque<(usize, T)>>,
    noise: Vec<T>,
}

impl<T: Real> MinStatisticsTracker<T> {
    pub fn new(params: MinStatisticsParams, num_bins: usize, window: usize) -> Self {
        Self {
            alpha: T::lit(params.alpha),
            bias: T::lit(params.bias(window)),
            window: window.max(1),
            frame: 0,
            smoothed: Vec::new(),
            minima: vec![VecDeque::new(); num_bins],
            noise: vec![T::zero(); num_bins],
        }
    }

    /// Smoothed periodogram after the latest update.
    pub fn smoothed(&self) -> &[T] {
        &self.smoothed
    }
}

impl<T: Real> NoiseTracker<T> for MinStatisticsTracker<T> {
    fn update(&mut self, periodogram: &[T]) -> &[T] {
        if self.smoothed.is_empty() {
            self.smoothed = periodogram.to_vec();
        } else {
            let beta = T::one() - self.alpha;
            for (s, &p) in self.smoothed.iter_mut().zip(periodogram) {
                *s = self.alpha * *s + beta * p;
            }
        }
        let t = self.frame;
        for ((dq, &s), n) in self.minima.iter_mut().zip(&self.smoothed).zip(&mut self.noise) {
            while dq.back().is_some_and(|&(_, v)| v >= s) {
                dq.pop_back();
            }
            dq.push_back((t, s));
            while dq.front().is_some_and(|&(i, _)| i + self.window <= t) {
                dq.pop_front();
            }
            let min = dq.front().map_or(s, |&(_, v)| v);
            // the estimate never exceeds the current smoothed power
            *n = (self.bias * min).min(s);
        }
        self.frame += 1;
        &self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseParams {
    /// A-priori probability of speech presence.
    pub prior_speech: f64,
    /// Fixed a-priori SNR assumed under speech presence, in dB.
    pub speech_snr_db: f64,
    /// Recursive smoothing of the noise power.
    pub alpha: f64,
    /// Smoothing of the presence probability used to detect stagnation.
    pub presence_smoothing: f64,
    /// Cap on the presence probability once the smoothed value saturates.
    pub presence_cap: f64,
    /// Frames averaged to initialize the estimate.
    pub init_frames: usize,
}

impl Default for MmseParams {
    fn default() -> Self {
        Self {
            prior_speech: 0.5,
            speech_snr_db: 15.0,
            alpha: 0.8,
            presence_smoothing: 0.9,
            presence_cap: 0.99,
            init_frames: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmseTracker<T> {
    alpha: T,
    prior_ratio: T,
    xi: T,
    presence_smoothing: T,
    presence_cap: T,
    init_frames: usize,
    seen: usize,
    init_acc: Vec<T>,
    presence: Vec<T>,
    noise: Vec<T>,
}

impl<T: Real> MmseTracker<T> {
    pub fn new(params: MmseParams, num_bins: usize) -> Self {
        Self {
            alpha: T::lit(params.alpha),
            prior_ratio: T::lit((1.0 - params.prior_speech) / params.prior_speech),
            xi: T::lit(10f64.powf(params.speech_snr_db / 10.0)),
            presence_smoothing: T::lit(params.presence_smoothing),
            presence_cap: T::lit(params.presence_cap),
            init_frames: params.init_frames.max(1),
            seen: 0,
            init_acc: vec![T::zero(); num_bins],
            presence: vec![T::zero(); num_bins],
            noise: vec![T::zero(); num_bins],
        }
    }
}

impl<T: Real> NoiseTracker<T> for MmseTracker<T> {
    fn update(&mut self, periodogram: &[T]) -> &[T] {
        if self.seen < self.init_frames {
            self.seen += 1;
            let n = T::from_usize_lossy(self.seen);
            for ((acc, noise), &p) in self.init_acc.iter_mut().zip(&mut self.noise).zip(periodogram) {
                *acc += p;
                *noise = *acc / n;
            }
            return &self.noise;
        }
        let one = T::one();
        let gain = self.xi / (one + self.xi);
        let scale = self.prior_ratio * (one + self.xi);
        for ((noise, presence), &p) in self.noise.iter_mut().zip(&mut self.presence).zip(periodogram) {
            if *noise <= T::zero() {
                *noise = p;
                continue;
            }
            let post = p / *noise;
            let mut spp = one / (one + scale * (-post * gain).exp());
            *presence = self.presence_smoothing * *presence + (one - self.presence_smoothing) * spp;
            if *presence > self.presence_cap {
                spp = spp.min(self.presence_cap);
            }
            let expected = (one - spp) * p + spp * *noise;
            *noise = self.alpha * *noise + (one - self.alpha) * expected;
        }
        &self.noise
    }
}

pub fn estimate_noise_min_statistics_with<T: Real>(
    spec: &SpectralFrameSeries<T>,
    params: MinStatisticsParams,
) -> Result<NoisePsdEstimate<T>> {
    ensure!(spec.num_frames() >= 1, Domain, "noise tracking needs at least one frame");
    let window = params.window_frames(spec.sample_rate(), spec.config().hop());
    Ok(run(spec, NoiseMethod::MinStatistics, || MinStatisticsTracker::new(params, spec.num_bins(), window)))
}

pub fn estimate_noise_min_statistics<T: Real>(spec: &SpectralFrameSeries<T>) -> Result<NoisePsdEstimate<T>> {
    estimate_noise_min_statistics_with(spec, MinStatisticsParams::default())
}

pub fn estimate_noise_mmse_with<T: Real>(
    spec: &SpectralFrameSeries<T>,
    params: MmseParams,
) -> Result<NoisePsdEstimate<T>> {
    ensure!(spec.num_frames() >= 1, Domain, "noise tracking needs at least one frame");
    Ok(run(spec, NoiseMethod::MmsePower, || MmseTracker::new(params, spec.num_bins())))
}

pub fn estimate_noise_mmse<T: Real>(spec: &SpectralFrameSeries<T>) -> Result<NoisePsdEstimate<T>> {
    estimate_noise_mmse_with(spec, MmseParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_grows_with_window() {
        let p = MinStatisticsParams::default();
        assert_eq!(p.bias(1), 1.0);
        assert!(p.bias(10) < p.bias(94));
        assert_eq!(p.window_frames(16000, 256), 94);
        assert!((min_mean_factor(100.0) - 0.8775).abs() < 1e-12);
    }

    #[test]
    fn min_tracker_follows_window_minimum() {
        let params = MinStatisticsParams { window_secs: 0.0, alpha: 0.0 };
        let mut t = MinStatisticsTracker::<f64>::new(params, 1, 3);
        let seq = [5.0, 2.0, 4.0, 6.0, 7.0, 1.0];
        let b = params.bias(3);
        for (t_idx, &v) in seq.iter().enumerate() {
            let got = t.update(&[v])[0];
            let lo = t_idx.saturating_sub(2);
            let window_min = seq[lo..=t_idx].iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((got - (b * window_min).min(v)).abs() < 1e-12, "frame {t_idx}");
        }
    }

    #[test]
    fn mmse_tracker_zero_and_reinit() {
        let mut t = MmseTracker::<f64>::new(MmseParams { init_frames: 1, ..Default::default() }, 2);
        assert_eq!(t.update(&[0.0, 0.0]), &[0.0, 0.0]);
        assert_eq!(t.update(&[0.0, 3.0]), &[0.0, 3.0]);
        let v = t.update(&[0.0, 3.0])[1];
        assert!((v - 3.0).abs() < 1e-12);
    }
}
