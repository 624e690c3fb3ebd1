//! The complete estimator: alignment, STFT, null beamformer, noise tracking,
//! time averaging, bin DRR and the fullband or per-band read-out for each
//! variant.

use serde::{Deserialize, Serialize};

use crate::alignment::{align_pair, default_max_lag};
use crate::beamformer::{apply_beamformer, BeamformerDesign, DEFAULT_GAIN_FLOOR, SPEED_OF_SOUND};
use crate::error::{ensure, Result};
use crate::estimator::{
    build_subband_weights, estimate_bin_drr, integrate_fullband, subband_ratios, BinDrrSeries, BinPowers, DbClamp,
    FrequencyAxis, Variant,
};
use crate::ground_truth::BAND_FILTER_ORDER;
use crate::noise_psd::{
    estimate_noise_min_statistics_with, estimate_noise_mmse_with, MinStatisticsParams, MmseParams, NoisePsdEstimate,
};
use crate::scalar::Real;
use crate::signal::{
    iso_third_octave_grid, IsoBandGrid, MultichannelAudio, SosFilter, SpectralFrameSeries, Stft, StftConfig, Window,
};

pub const DEFAULT_MIC_SPACING: f64 = 0.03;
pub const DEFAULT_RANGE_HZ: (f64, f64) = (200.0, 6300.0);
/// Frames quieter than this fraction of the loudest frame are excluded from
/// the time averages.
pub const DEFAULT_ACTIVITY_GATE: f64 = 1e-6;
pub const DEFAULT_MIN_BAND_CENTER: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenbeConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub window: Window,
    pub mic_spacing: f64,
    pub sound_speed: f64,
    pub gain_floor: f64,
    pub clamp: DbClamp,
    pub range_hz: (f64, f64),
    pub activity_gate: f64,
    /// Remove the inter-channel delay before beamforming.
    pub align: bool,
    /// Alignment search range in samples; 10 ms when unset.
    pub max_lag: Option<usize>,
    pub band_order: usize,
    pub min_band_center: f64,
    pub min_statistics: MinStatisticsParams,
    pub mmse: MmseParams,
}

impl Default for DenbeConfig {
    fn default() -> Self {
        Self {
            frame_ms: 32.0,
            hop_ms: 16.0,
            window: Window::SqrtHann,
            mic_spacing: DEFAULT_MIC_SPACING,
            sound_speed: SPEED_OF_SOUND,
            gain_floor: DEFAULT_GAIN_FLOOR,
            clamp: DbClamp::default(),
            range_hz: DEFAULT_RANGE_HZ,
            activity_gate: DEFAULT_ACTIVITY_GATE,
            align: true,
            max_lag: None,
            band_order: BAND_FILTER_ORDER,
            min_band_center: DEFAULT_MIN_BAND_CENTER,
            min_statistics: MinStatisticsParams::default(),
            mmse: MmseParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrrResult {
    pub variant: Variant,
    /// Clamped fullband DRR; equals the floor when nothing could be estimated.
    pub fullband_db: f64,
    pub usable_bins: usize,
    /// Per-band DRR for F and G, aligned with `band_centers`.
    pub per_band_db: Option<Vec<f64>>,
    pub band_valid: Vec<bool>,
    pub band_centers: Vec<f64>,
    pub lag: i64,
    pub lag_confidence: f64,
    pub active_frames: usize,
}

/// Spectra of the aligned input and of the beamformer output.
#[derive(Debug, Clone)]
pub struct Analysis<T> {
    pub aligned: MultichannelAudio<T>,
    pub spectra: SpectralFrameSeries<T>,
    pub beam: SpectralFrameSeries<T>,
    /// Beamformer with its diffuse gain corrected for the alignment shift.
    pub design: BeamformerDesign<T>,
    pub lag: i64,
    pub lag_confidence: f64,
}

/// Estimator bound to one sample rate and configuration.
pub struct Denbe<T: Real> {
    config: DenbeConfig,
    sample_rate: u32,
    stft: Stft<T>,
    design: BeamformerDesign<T>,
    grid: IsoBandGrid,
}

impl<T: Real> Denbe<T> {
    pub fn new(config: DenbeConfig, sample_rate: u32) -> Result<Self> {
        let stft_cfg = StftConfig::from_millis(sample_rate, config.frame_ms, config.hop_ms, config.window)?;
        // validates the range against Nyquist
        FrequencyAxis::from_stft(&stft_cfg, sample_rate, config.range_hz)?;
        DbClamp::new(config.clamp.floor_db, config.clamp.ceil_db)?;
        ensure!(config.activity_gate >= 0.0 && config.activity_gate < 1.0, Config, "activity gate must lie in [0, 1)");
        ensure!(
            config.band_order >= 2 && config.band_order.is_multiple_of(2),
            Config,
            "band filter order must be even and at least 2"
        );
        let design =
            BeamformerDesign::new(config.mic_spacing, config.sound_speed, config.gain_floor, sample_rate, &stft_cfg)?;
        let grid = iso_third_octave_grid(sample_rate, config.min_band_center);
        Ok(Self { stft: Stft::new(stft_cfg), design, grid, sample_rate, config })
    }

    pub fn config(&self) -> &DenbeConfig {
        &self.config
    }

    pub fn stft_config(&self) -> &StftConfig {
        self.stft.config()
    }

    pub fn design(&self) -> &BeamformerDesign<T> {
        &self.design
    }

    pub fn grid(&self) -> &IsoBandGrid {
        &self.grid
    }

    fn check_input(&self, audio: &MultichannelAudio<T>) -> Result<()> {
        ensure!(audio.num_channels() == 2, Shape, "estimator needs 2 channels, got {}", audio.num_channels());
        ensure!(
            audio.sample_rate() == self.sample_rate,
            Config,
            "input is {} Hz, estimator configured for {} Hz",
            audio.sample_rate(),
            self.sample_rate
        );
        Ok(())
    }

    /// Aligns the channels and computes both spectra.
    pub fn analyze(&self, audio: &MultichannelAudio<T>) -> Result<Analysis<T>> {
        self.check_input(audio)?;
        let (aligned, lag, lag_confidence) = if self.config.align {
            let max_lag = self
                .config
                .max_lag
                .unwrap_or_else(|| default_max_lag(self.sample_rate))
                .min(audio.len().saturating_sub(1) / 2);
            let r = align_pair(audio, max_lag)?;
            (r.aligned, r.lag, r.confidence)
        } else {
            (audio.clone(), 0, 1.0)
        };
        self.analyze_aligned(aligned, lag, lag_confidence)
    }

    fn analyze_aligned(&self, aligned: MultichannelAudio<T>, lag: i64, lag_confidence: f64) -> Result<Analysis<T>> {
        let spectra = self.stft.forward(&aligned)?;
        let design = self.design.steered(lag as f64);
        let beam = apply_beamformer(&spectra, &design)?.z;
        Ok(Analysis { aligned, spectra, beam, design, lag, lag_confidence })
    }

    fn noise(&self, spec: &SpectralFrameSeries<T>, variant: Variant) -> Result<NoisePsdEstimate<T>> {
        match variant {
            Variant::C => Ok(NoisePsdEstimate::zeros(spec)),
            Variant::D => estimate_noise_min_statistics_with(spec, self.config.min_statistics),
            Variant::E | Variant::F | Variant::G => estimate_noise_mmse_with(spec, self.config.mmse),
        }
    }

    /// Frames of the reference channel above the activity gate.
    pub fn active_frames(&self, spectra: &SpectralFrameSeries<T>) -> Vec<usize> {
        let energies: Vec<f64> = (0..spectra.num_frames())
            .map(|f| spectra.frame(0, f).iter().map(|c| c.norm_sqr().as_f64()).sum())
            .collect();
        let peak = energies.iter().cloned().fold(0.0, f64::max);
        (0..energies.len()).filter(|&f| peak > 0.0 && energies[f] > self.config.activity_gate * peak).collect()
    }

    /// Bin DRR from an analysis and explicit noise estimates for the
    /// reference channel and the beamformer output.
    pub fn bin_drr_with_noise(
        &self,
        analysis: &Analysis<T>,
        noise_y: &NoisePsdEstimate<T>,
        noise_z: &NoisePsdEstimate<T>,
        range: (f64, f64),
    ) -> Result<(BinDrrSeries<T>, usize)> {
        ensure!(
            noise_y.matches(&analysis.spectra.select(0)) || noise_y.matches(&analysis.spectra),
            Shape,
            "reference noise estimate does not match the spectra"
        );
        ensure!(noise_z.matches(&analysis.beam), Shape, "beam noise estimate does not match the beam spectra");
        let frames = self.active_frames(&analysis.spectra);
        let mean_power = |spec: &SpectralFrameSeries<T>| {
            let mut acc = vec![T::zero(); spec.num_bins()];
            for &f in &frames {
                for (a, c) in acc.iter_mut().zip(spec.frame(0, f)) {
                    *a += c.norm_sqr();
                }
            }
            let n = T::from_usize_lossy(frames.len().max(1));
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        };
        let powers = BinPowers {
            total: mean_power(&analysis.spectra),
            noise: noise_y.mean_over(0, &frames),
            beam_total: mean_power(&analysis.beam),
            beam_noise: noise_z.mean_over(0, &frames),
        };
        let axis = FrequencyAxis::from_stft(self.stft.config(), self.sample_rate, range)?;
        let usable = analysis.design.usable_bins();
        let bins = estimate_bin_drr(&powers, analysis.design.diffuse_gain_sq(), &usable, axis)?;
        Ok((bins, frames.len()))
    }

    /// Bin DRR with the noise tracker of `variant`.
    pub fn bin_drr(
        &self,
        analysis: &Analysis<T>,
        variant: Variant,
        range: (f64, f64),
    ) -> Result<(BinDrrSeries<T>, usize)> {
        let reference = analysis.spectra.select(0);
        let noise_y = self.noise(&reference, variant)?;
        let noise_z = self.noise(&analysis.beam, variant)?;
        self.bin_drr_with_noise(analysis, &noise_y, &noise_z, range)
    }

    pub fn estimate(&self, audio: &MultichannelAudio<T>, variant: Variant) -> Result<DrrResult> {
        let analysis = self.analyze(audio)?;
        self.estimate_from(&analysis, variant)
    }

    /// Runs `variant` on an existing analysis.
    pub fn estimate_from(&self, analysis: &Analysis<T>, variant: Variant) -> Result<DrrResult> {
        let clamp = self.config.clamp;
        let (bins, active) = self.bin_drr(analysis, variant, self.config.range_hz)?;
        let full = integrate_fullband(&bins, &clamp);
        let mut result = DrrResult {
            variant,
            fullband_db: full.db,
            usable_bins: full.usable_bins,
            per_band_db: None,
            band_valid: Vec::new(),
            band_centers: Vec::new(),
            lag: analysis.lag,
            lag_confidence: analysis.lag_confidence,
            active_frames: active,
        };
        let per_band: Vec<Option<f64>> = match variant {
            Variant::C | Variant::D | Variant::E => return Ok(result),
            Variant::F => {
                let w = build_subband_weights(&self.grid, self.stft.config(), self.sample_rate)?;
                subband_ratios(&bins, &w)?
            }
            Variant::G => self.filtered_bands(analysis)?,
        };
        result.band_centers = self.grid.nominal_centers();
        result.band_valid = per_band.iter().map(Option::is_some).collect();
        result.per_band_db =
            Some(per_band.iter().map(|r| r.map_or(clamp.floor_db, |v| clamp.ratio_to_db(v))).collect());
        Ok(result)
    }

    /// Reruns the MMSE pipeline on the aligned input band-passed to each
    /// band, integrating over the bins inside the band edges.
    fn filtered_bands(&self, analysis: &Analysis<T>) -> Result<Vec<Option<f64>>> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        self.grid
            .bands()
            .iter()
            .map(|band| {
                let filter =
                    SosFilter::<T>::bandpass(band.lower, band.upper, self.config.band_order, self.sample_rate)?;
                let filtered = analysis.aligned.map_channels(|c| filter.process(c));
                let sub = self.analyze_aligned(filtered, analysis.lag, analysis.lag_confidence)?;
                let (bins, _) = self.bin_drr(&sub, Variant::E, (band.lower, band.upper.min(nyquist)))?;
                let full = integrate_fullband(&bins, &self.config.clamp);
                Ok((full.usable_bins > 0).then_some(full.mean_ratio))
            })
            .collect()
    }
}
