//! Two-microphone null-steered beamformer.
//!
//! After alignment the direct path arrives broadside, so the fixed
//! delay-and-subtract weights `[1/2, -1/2]` cancel it exactly. What remains is
//! the reverberant field scaled by the beamformer's diffuse-field power gain
//! `G²(f)`, which for weights `w` and spacing `d` is
//! `|w₁|² + |w₂|² + 2·Re(w₁·w₂*)·sinc(2πfd/c)`.

use num_complex::Complex;

use crate::error::{ensure, Result};
use crate::scalar::{sinc, Real};
use crate::signal::{SpectralFrameSeries, StftConfig};

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Bins whose diffuse gain falls below this are excluded from estimation.
pub const DEFAULT_GAIN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinGain<T> {
    Usable(T),
    /// Gain is below the floor; the value is reported but should not be used.
    BelowFloor(T),
}

impl<T: Copy> BinGain<T> {
    pub fn value(self) -> T {
        match self {
            BinGain::Usable(g) | BinGain::BelowFloor(g) => g,
        }
    }

    pub fn is_usable(self) -> bool {
        matches!(self, BinGain::Usable(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerDesign<T> {
    mic_spacing: f64,
    sound_speed: f64,
    gain_floor: f64,
    sample_rate: u32,
    config: StftConfig,
    steering_lag: f64,
    weights: Vec<[Complex<T>; 2]>,
    diffuse_gain_sq: Vec<T>,
    // gain without steering; decides usability
    nominal_gain_sq: Vec<T>,
}

pub fn design_null_beamformer<T: Real>(
    mic_spacing: f64,
    sample_rate: u32,
    cfg: &StftConfig,
) -> Result<BeamformerDesign<T>> {
    BeamformerDesign::new(mic_spacing, SPEED_OF_SOUND, DEFAULT_GAIN_FLOOR, sample_rate, cfg)
}

impl<T: Real> BeamformerDesign<T> {
    pub fn new(
        mic_spacing: f64,
        sound_speed: f64,
        gain_floor: f64,
        sample_rate: u32,
        cfg: &StftConfig,
    ) -> Result<Self> {
        ensure!(
            mic_spacing > 0.0 && mic_spacing.is_finite(),
            Domain,
            "microphone spacing must be positive, got {mic_spacing}"
        );
        ensure!(sound_speed > 0.0, Domain, "sound speed must be positive");
        ensure!(gain_floor >= 0.0, Domain, "gain floor must be non-negative");
        let half = T::lit(0.5);
        let w = [Complex::new(half, T::zero()), Complex::new(-half, T::zero())];
        let mut design = Self {
            mic_spacing,
            sound_speed,
            gain_floor,
            sample_rate,
            config: *cfg,
            steering_lag: 0.0,
            weights: vec![w; cfg.num_bins()],
            diffuse_gain_sq: Vec::new(),
            nominal_gain_sq: Vec::new(),
        };
        design.update_gain();
        design.nominal_gain_sq = design.diffuse_gain_sq.clone();
        Ok(design)
    }

    /// Same weights applied after channel 2 has been advanced by `lag`
    /// samples relative to channel 1. The shift also moves the diffuse field,
    /// so the gain becomes `½(1 − sinc(kd)·cos(ωτ))`. Which bins are usable
    /// does not change: the extra residual comes from the time shift, not
    /// from spatial resolution, so the floor stays a property of the array.
    pub fn steered(&self, lag: f64) -> Self {
        let mut design = Self { steering_lag: lag, ..self.clone() };
        design.update_gain();
        design
    }

    pub fn steering_lag(&self) -> f64 {
        self.steering_lag
    }

    /// Weights referred to the unshifted microphone signals.
    fn effective_weights(&self, bin: usize) -> [Complex<T>; 2] {
        let omega =
            2.0 * std::f64::consts::PI * self.config.bin_frequency(bin, self.sample_rate) / f64::from(self.sample_rate);
        let shift = Complex::from_polar(T::one(), T::lit(omega * self.steering_lag));
        let w = self.weights[bin];
        [w[0], w[1] * shift]
    }

    fn update_gain(&mut self) {
        self.diffuse_gain_sq = (0..self.weights.len())
            .map(|bin| {
                let f = self.config.bin_frequency(bin, self.sample_rate);
                let k = 2.0 * std::f64::consts::PI * f / self.sound_speed;
                let coh = T::lit(sinc(k * self.mic_spacing));
                let w = self.effective_weights(bin);
                let cross = (w[0] * w[1].conj()).re;
                (w[0].norm_sqr() + w[1].norm_sqr() + T::lit(2.0) * cross * coh).max(T::zero())
            })
            .collect();
    }

    pub fn mic_spacing(&self) -> f64 {
        self.mic_spacing
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn gain_floor(&self) -> f64 {
        self.gain_floor
    }

    pub fn num_bins(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, bin: usize) -> [Complex<T>; 2] {
        self.weights[bin]
    }

    pub fn diffuse_gain_sq(&self) -> &[T] {
        &self.diffuse_gain_sq
    }

    pub fn diffuse_gain(&self, bin: usize) -> Result<BinGain<T>> {
        ensure!(bin < self.num_bins(), Shape, "bin {bin} out of range 0..{}", self.num_bins());
        let g = self.diffuse_gain_sq[bin];
        Ok(if self.nominal_gain_sq[bin].as_f64() < self.gain_floor {
            BinGain::BelowFloor(g)
        } else {
            BinGain::Usable(g)
        })
    }

    pub fn usable_bins(&self) -> Vec<bool> {
        self.nominal_gain_sq.iter().map(|g| g.as_f64() >= self.gain_floor).collect()
    }

    /// Lowest bin frequency whose gain clears the floor.
    pub fn floor_frequency(&self) -> Option<f64> {
        self.usable_bins().iter().position(|&u| u).map(|b| self.config.bin_frequency(b, self.sample_rate))
    }

    /// Response of the weights to a far-field plane wave arriving at
    /// `cos_angle` relative to the microphone axis.
    pub fn plane_wave_response(&self, bin: usize, cos_angle: f64) -> Complex<T> {
        let f = self.config.bin_frequency(bin, self.sample_rate);
        let phase = 2.0 * std::f64::consts::PI * f * self.mic_spacing * cos_angle / self.sound_speed;
        let steer = Complex::from_polar(T::one(), T::lit(-phase));
        let w = self.effective_weights(bin);
        w[0] + w[1] * steer
    }
}

#[derive(Debug, Clone)]
pub struct BeamformerOutput<T> {
    pub z: SpectralFrameSeries<T>,
    pub design: BeamformerDesign<T>,
}

/// `Z = w₁·Y₁ + w₂·Y₂` for every frame and bin.
pub fn apply_beamformer<T: Real>(
    spec: &SpectralFrameSeries<T>,
    design: &BeamformerDesign<T>,
) -> Result<BeamformerOutput<T>> {
    ensure!(spec.num_channels() == 2, Shape, "beamformer needs 2 channels, got {}", spec.num_channels());
    ensure!(
        spec.num_bins() == design.num_bins(),
        Shape,
        "spectra have {} bins, design has {}",
        spec.num_bins(),
        design.num_bins()
    );
    let mut z = spec.zeros_like(1);
    for f in 0..spec.num_frames() {
        let (y1, y2) = (spec.frame(0, f), spec.frame(1, f));
        for (bin, out) in z.frame_mut(0, f).iter_mut().enumerate() {
            let w = design.weights[bin];
            *out = w[0] * y1[bin] + w[1] * y2[bin];
        }
    }
    Ok(BeamformerOutput { z, design: design.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{stft_forward, MultichannelAudio};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn design() -> BeamformerDesign<f64> {
        design_null_beamformer(0.05, 16000, &StftConfig::speech_default(16000)).unwrap()
    }

    /// Average of |w·d|² over uniformly distributed far-field directions.
    fn monte_carlo_gain(d: &BeamformerDesign<f64>, bin: usize, draws: usize) -> f64 {
        let mut rng = StdRng::seed_from_u64(11);
        (0..draws)
            .map(|_| {
                let cos_angle: f64 = rng.random_range(-1.0..=1.0);
                d.plane_wave_response(bin, cos_angle).norm_sqr()
            })
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn gain_matches_monte_carlo() {
        let d = design();
        // 4000 Hz is bin 128 at 16 kHz / 512
        for bin in [10, 64, 128, 200] {
            let mc = monte_carlo_gain(&d, bin, 200_000);
            assert!((mc - d.diffuse_gain_sq()[bin]).abs() < 3e-3, "bin {bin}");
        }
    }

    #[test]
    fn dc_is_below_floor_and_high_end_tends_to_half() {
        let d = design();
        assert!(!d.diffuse_gain(0).unwrap().is_usable());
        assert_eq!(d.diffuse_gain(0).unwrap().value(), 0.0);
        let g = d.diffuse_gain_sq();
        assert!((g[256] - 0.5).abs() < 0.1);
        assert!(g.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(d.diffuse_gain(257).is_err());
        let floor = d.floor_frequency().unwrap();
        assert!(floor > 100.0 && floor < 130.0, "{floor}");
    }

    #[test]
    fn half_wavelength_point() {
        // kd = π  ⇒  G² = ½(1 − sinc π) = ½
        let cfg = StftConfig::new(512, 256, crate::signal::Window::SqrtHann, 512).unwrap();
        let bin = 110;
        let spacing = 343.0 / (2.0 * 31.25 * bin as f64);
        let d = BeamformerDesign::<f64>::new(spacing, 343.0, 1e-3, 16000, &cfg).unwrap();
        assert!((d.diffuse_gain_sq()[bin] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn broadside_is_nulled() {
        let d = design();
        for bin in 0..d.num_bins() {
            assert!(d.plane_wave_response(bin, 0.0).norm() == 0.0);
        }
    }

    #[test]
    fn apply_identical_and_opposite_channels() {
        let mut rng = StdRng::seed_from_u64(1);
        let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let cfg = StftConfig::speech_default(16000);
        let d = design();
        let same = stft_forward(&MultichannelAudio::new(vec![x.clone(), x.clone()], 16000).unwrap(), &cfg).unwrap();
        let out = apply_beamformer(&same, &d).unwrap();
        assert!(out.z.as_slice().iter().all(|c| c.norm() == 0.0));
        let opposite = stft_forward(&MultichannelAudio::new(vec![x.clone(), neg], 16000).unwrap(), &cfg).unwrap();
        let out = apply_beamformer(&opposite, &d).unwrap();
        let a = stft_forward(&MultichannelAudio::mono(x, 16000).unwrap(), &cfg).unwrap();
        for (z, y) in out.z.as_slice().iter().zip(a.as_slice()) {
            assert!((z - y).norm() < 1e-12);
        }
        assert!(apply_beamformer(&a, &d).is_err());
    }

    #[test]
    fn steered_gain_matches_monte_carlo() {
        let d = design().steered(1.0);
        for bin in [10, 64, 128, 200] {
            let mc = monte_carlo_gain(&d, bin, 200_000);
            assert!((mc - d.diffuse_gain_sq()[bin]).abs() < 3e-3, "bin {bin}");
        }
        // a plane wave whose inter-mic delay equals the lag is nulled
        let cos_angle = 343.0 / (16000.0 * 0.05);
        for bin in 0..d.num_bins() {
            assert!(d.plane_wave_response(bin, cos_angle).norm() < 1e-12);
        }
        assert_eq!(design().steered(0.0), design());
        assert_eq!(design().steered(3.0).usable_bins(), design().usable_bins());
    }

    #[test]
    fn rejects_bad_spacing() {
        let cfg = StftConfig::speech_default(16000);
        assert!(design_null_beamformer::<f64>(0.0, 16000, &cfg).is_err());
        assert!(design_null_beamformer::<f64>(-1.0, 16000, &cfg).is_err());
    }
}
