use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Sampled time-domain signal with one or more equal-length channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio<T> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
}

impl<T: Real> MultichannelAudio<T> {
    pub fn new(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        ensure!(sample_rate > 0, Config, "sample rate must be positive");
        ensure!(!channels.is_empty(), Shape, "audio needs at least one channel");
        let len = channels[0].len();
        ensure!(channels.iter().all(|c| c.len() == len), Shape, "channels differ in length");
        ensure!(channels.iter().flatten().all(|s| s.is_finite()), Domain, "non-finite sample");
        Ok(Self { channels, sample_rate })
    }

    pub fn mono(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn zeros(num_channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![T::zero(); len]; num_channels.max(1)], sample_rate)
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn channel(&self, idx: usize) -> &[T] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<T>> {
        self.channels
    }

    pub fn peak(&self) -> T {
        self.channels.iter().flatten().fold(T::zero(), |m, &s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            channels: self.channels.iter().map(|c| c.iter().map(|&s| s * gain).collect()).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Keeps samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        ensure!(start <= end && end <= self.len(), Domain, "slice {start}..{end} outside 0..{}", self.len());
        Ok(Self {
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            sample_rate: self.sample_rate,
        })
    }

    /// Selects a subset of channels, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        ensure!(idx.iter().all(|&i| i < self.num_channels()), Shape, "channel index out of range");
        Self::new(idx.iter().map(|&i| self.channels[i].clone()).collect(), self.sample_rate)
    }

    pub fn map_channels<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&[T]) -> Vec<T>,
    {
        let channels: Vec<Vec<T>> = self.channels.iter().map(|c| f(c)).collect();
        debug_assert!(channels.iter().all(|c| c.len() == channels[0].len()));
        Self { channels, sample_rate: self.sample_rate }
    }

    pub fn convert<U: Real>(&self) -> MultichannelAudio<U> {
        MultichannelAudio {
            channels: self.channels.iter().map(|c| c.iter().map(|&s| U::lit(s.as_f64())).collect()).collect(),
            sample_rate: self.sample_rate,
        }
    }
}
