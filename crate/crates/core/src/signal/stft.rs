//! Windowed short-time Fourier transform with overlap-add resynthesis.
//!
//! Padding convention: the signal is preceded by `frame_length - hop` zeros
//! and its tail is zero-padded to a whole number of hops, so that every input
//! sample is covered by the full set of overlapping frames. The inverse
//! transform drops the lead-in and truncates to the original length.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::scalar::Real;
use crate::signal::MultichannelAudio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    Hann,
    SqrtHann,
}

impl Window {
    /// Periodic analysis window of length `n`.
    pub fn analysis<T: Real>(self, n: usize) -> Vec<T> {
        let two_pi = T::PI() + T::PI();
        let len = T::from_usize_lossy(n);
        (0..n)
            .map(|i| {
                let hann = T::lit(0.5) * (T::one() - (two_pi * T::from_usize_lossy(i) / len).cos());
                match self {
                    Window::Rectangular => T::one(),
                    Window::Hann => hann,
                    Window::SqrtHann => hann.max(T::zero()).sqrt(),
                }
            })
            .collect()
    }

    /// Synthesis window paired with this analysis window.
    pub fn synthesis<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Window::SqrtHann => self.analysis(n),
            Window::Hann | Window::Rectangular => vec![T::one(); n],
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            "sqrt-hann" | "sqrthann" => Ok(Window::SqrtHann),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    frame_length: usize,
    hop: usize,
    window: Window,
    fft_size: usize,
}

impl StftConfig {
    pub fn new(frame_length: usize, hop: usize, window: Window, fft_size: usize) -> Result<Self> {
        ensure!(frame_length > 0 && hop > 0, Config, "frame and hop must be positive");
        ensure!(hop <= frame_length, Config, "hop {hop} exceeds frame length {frame_length}");
        ensure!(fft_size >= frame_length, Config, "fft size {fft_size} shorter than frame {frame_length}");
        let cfg = Self { frame_length, hop, window, fft_size };
        ensure!(
            cfg.cola_constant().is_some(),
            Config,
            "{window:?} window with frame {frame_length} and hop {hop} violates constant overlap-add"
        );
        Ok(cfg)
    }

    /// Frame and hop given in milliseconds; FFT size is the next power of two.
    pub fn from_millis(sample_rate: u32, frame_ms: f64, hop_ms: f64, window: Window) -> Result<Self> {
        ensure!(frame_ms > 0.0 && hop_ms > 0.0, Config, "frame and hop durations must be positive");
        let frame = (f64::from(sample_rate) * frame_ms / 1000.0).round() as usize;
        let hop = (f64::from(sample_rate) * hop_ms / 1000.0).round() as usize;
        Self::new(frame, hop, window, frame.max(1).next_power_of_two())
    }

    /// 32 ms square-root-Hann frames with 50 % overlap.
    pub fn speech_default(sample_rate: u32) -> Self {
        let frame = ((f64::from(sample_rate) * 0.032).round() as usize / 2).max(1) * 2;
        Self::new(frame, frame / 2, Window::SqrtHann, frame.next_power_of_two())
            .expect("default STFT configuration is COLA")
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_frequency(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * f64::from(sample_rate) / self.fft_size as f64
    }

    /// Zeros prepended before the first frame.
    pub fn lead_in(&self) -> usize {
        self.frame_length - self.hop
    }

    pub fn num_frames(&self, signal_len: usize) -> usize {
        (self.lead_in() + signal_len).div_ceil(self.hop)
    }

    /// Constant value of the summed analysis×synthesis product, if it exists.
    pub fn cola_constant(&self) -> Option<f64> {
        let a = self.window.analysis::<f64>(self.frame_length);
        let s = self.window.synthesis::<f64>(self.frame_length);
        overlap_sum(&a, &s, self.hop)
    }

    /// Constant value of the summed squared analysis window, if it exists.
    pub fn analysis_power_constant(&self) -> Option<f64> {
        let a = self.window.analysis::<f64>(self.frame_length);
        overlap_sum(&a, &a, self.hop)
    }
}

fn overlap_sum(a: &[f64], b: &[f64], hop: usize) -> Option<f64> {
    let sums: Vec<f64> = (0..hop).map(|n| (n..a.len()).step_by(hop).map(|i| a[i] * b[i]).sum()).collect();
    let first = sums[0];
    let ok = first > 0.0 && sums.iter().all(|s| (s - first).abs() <= 1e-9 * first);
    ok.then_some(first)
}

/// Complex spectra laid out channel-major as `[channel][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrameSeries<T> {
    data: Vec<Complex<T>>,
    num_channels: usize,
    num_frames: usize,
    config: StftConfig,
    sample_rate: u32,
    signal_len: usize,
}

impl<T: Real> SpectralFrameSeries<T> {
    pub fn from_parts(
        data: Vec<Complex<T>>,
        num_channels: usize,
        num_frames: usize,
        config: StftConfig,
        sample_rate: u32,
        signal_len: usize,
    ) -> Result<Self> {
        ensure!(
            data.len() == num_channels * num_frames * config.num_bins(),
            Shape,
            "{} values do not fill {num_channels}×{num_frames}×{}",
            data.len(),
            config.num_bins()
        );
        ensure!(
            num_frames == config.num_frames(signal_len),
            Shape,
            "{num_frames} frames inconsistent with signal length {signal_len}"
        );
        Ok(Self { data, num_channels, num_frames, config, sample_rate, signal_len })
    }

    pub fn zeros_like(&self, num_channels: usize) -> Self {
        Self {
            data: vec![Complex::default(); num_channels * self.num_frames * self.num_bins()],
            num_channels,
            ..self.clone()
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        self.config.bin_frequency(bin, self.sample_rate)
    }

    fn offset(&self, channel: usize, frame: usize) -> usize {
        (channel * self.num_frames + frame) * self.num_bins()
    }

    pub fn frame(&self, channel: usize, frame: usize) -> &[Complex<T>] {
        let o = self.offset(channel, frame);
        &self.data[o..o + self.num_bins()]
    }

    pub fn frame_mut(&mut self, channel: usize, frame: usize) -> &mut [Complex<T>] {
        let o = self.offset(channel, frame);
        let nb = self.num_bins();
        &mut self.data[o..o + nb]
    }

    /// All frames of one channel, contiguous.
    pub fn channel(&self, channel: usize) -> &[Complex<T>] {
        let n = self.num_frames * self.num_bins();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Single channel copy.
    pub fn select(&self, channel: usize) -> Self {
        Self { data: self.channel(channel).to_vec(), num_channels: 1, ..self.clone() }
    }

    /// Time-domain energy implied by the spectra, compensated for the analysis
    /// window overlap. Only exact when the squared analysis window is COLA.
    pub fn energy(&self) -> Option<T> {
        let comp = T::lit(self.config.analysis_power_constant()?);
        let nfft = self.config.fft_size;
        let nb = self.num_bins();
        let mut total = T::zero();
        for (i, c) in self.data.iter().enumerate() {
            let bin = i % nb;
            let w = if bin == 0 || (nfft.is_multiple_of(2) && bin == nb - 1) { T::one() } else { T::lit(2.0) };
            total += w * c.norm_sqr();
        }
        Some(total / (T::from_usize_lossy(nfft) * comp))
    }
}

/// Reusable transform with planned FFTs and cached windows.
pub struct Stft<T: Real> {
    config: StftConfig,
    analysis: Vec<T>,
    synthesis: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    norm: T,
}

impl<T: Real> Stft<T> {
    pub fn new(config: StftConfig) -> Self {
        let mut planner = FftPlanner::new();
        let n = config.fft_size;
        let cola = config.cola_constant().expect("StftConfig is validated on construction");
        Self {
            config,
            analysis: config.window.analysis(config.frame_length),
            synthesis: config.window.synthesis(config.frame_length),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            // ifft is unnormalized; fold the 1/N and COLA gain together
            norm: T::one() / (T::from_usize_lossy(n) * T::lit(cola)),
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn forward(&self, audio: &MultichannelAudio<T>) -> Result<SpectralFrameSeries<T>> {
        ensure!(!audio.is_empty(), Domain, "cannot transform empty audio");
        let cfg = &self.config;
        let len = audio.len();
        let frames = cfg.num_frames(len);
        let nb = cfg.num_bins();
        let lead = cfg.lead_in();
        let mut data = Vec::with_capacity(audio.num_channels() * frames * nb);
        let mut buf = vec![Complex::default(); cfg.fft_size];
        let mut scratch = vec![Complex::default(); self.forward.get_inplace_scratch_len()];
        for ch in audio.channels() {
            for f in 0..frames {
                buf.fill(Complex::default());
                let start = f * cfg.hop;
                for (j, slot) in buf.iter_mut().take(cfg.frame_length).enumerate() {
                    let pos = start + j;
                    if pos >= lead && pos - lead < len {
                        slot.re = ch[pos - lead] * self.analysis[j];
                    }
                }
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                data.extend_from_slice(&buf[..nb]);
            }
        }
        SpectralFrameSeries::from_parts(data, audio.num_channels(), frames, *cfg, audio.sample_rate(), len)
    }

    pub fn inverse(&self, spec: &SpectralFrameSeries<T>) -> Result<MultichannelAudio<T>> {
        ensure!(spec.config == self.config, Config, "spectra were produced with a different configuration");
        let cfg = &self.config;
        let n = cfg.fft_size;
        let nb = cfg.num_bins();
        let lead = cfg.lead_in();
        let len = spec.signal_len;
        let mut buf = vec![Complex::default(); n];
        let mut scratch = vec![Complex::default(); self.inverse.get_inplace_scratch_len()];
        let mut out = Vec::with_capacity(spec.num_channels);
        for ch in 0..spec.num_channels {
            let mut acc = vec![T::zero(); lead + spec.num_frames * cfg.hop + cfg.frame_length];
            for f in 0..spec.num_frames {
                let bins = spec.frame(ch, f);
                buf[..nb].copy_from_slice(bins);
                for k in nb..n {
                    buf[k] = bins[n - k].conj();
                }
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                let start = f * cfg.hop;
                for j in 0..cfg.frame_length {
                    acc[start + j] += buf[j].re * self.synthesis[j];
                }
            }
            out.push(acc[lead..lead + len].iter().map(|&v| v * self.norm).collect());
        }
        MultichannelAudio::new(out, spec.sample_rate)
    }
}

pub fn stft_forward<T: Real>(audio: &MultichannelAudio<T>, cfg: &StftConfig) -> Result<SpectralFrameSeries<T>> {
    Stft::new(*cfg).forward(audio)
}

pub fn stft_inverse<T: Real>(spec: &SpectralFrameSeries<T>) -> Result<MultichannelAudio<T>> {
    Stft::new(spec.config).inverse(spec)
}
