//! Intrusive reference values computed from a known impulse response.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::{power_db, Real};
use crate::signal::{fft_convolve, IsoBandGrid, MultichannelAudio, SosFilter};

/// Half-width of the direct-sound window around the main peak.
pub const DIRECT_WINDOW_SECS: f64 = 0.0025;
/// Order of the band filters used for per-band reference values.
pub const BAND_FILTER_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticImpulseResponse<T> {
    taps: Vec<T>,
    sample_rate: u32,
    direct_peak: usize,
    direct_window: usize,
}

impl<T: Real> AcousticImpulseResponse<T> {
    /// Locates the direct path at the largest-magnitude tap and uses a
    /// ±2.5 ms window around it.
    pub fn new(taps: Vec<T>, sample_rate: u32) -> Result<Self> {
        ensure!(sample_rate > 0, Config, "sample rate must be positive");
        ensure!(taps.iter().all(|t| t.is_finite()), Domain, "non-finite tap");
        let (peak, max) =
            taps.iter().enumerate().fold(
                (0, T::zero()),
                |(bi, bv), (i, &t)| {
                    if t.abs() > bv {
                        (i, t.abs())
                    } else {
                        (bi, bv)
                    }
                },
            );
        ensure!(max > T::zero(), Degenerate, "impulse response has no non-zero tap");
        let window = ((DIRECT_WINDOW_SECS * f64::from(sample_rate)).round() as usize).max(1);
        Ok(Self { taps, sample_rate, direct_peak: peak, direct_window: window })
    }

    pub fn with_direct_window(mut self, samples: usize) -> Result<Self> {
        ensure!(samples > 0, Config, "direct window must be positive");
        self.direct_window = samples;
        Ok(self)
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn direct_peak(&self) -> usize {
        self.direct_peak
    }

    pub fn direct_window(&self) -> usize {
        self.direct_window
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    fn direct_range(&self) -> std::ops::RangeInclusive<usize> {
        let lo = self.direct_peak.saturating_sub(self.direct_window);
        let hi = (self.direct_peak + self.direct_window).min(self.taps.len() - 1);
        lo..=hi
    }
}

/// Splits taps into the direct window and everything else. The two parts sum
/// back to the original exactly since each tap lands in one of them.
pub fn split_air<T: Real>(air: &AcousticImpulseResponse<T>) -> (Vec<T>, Vec<T>) {
    let range = air.direct_range();
    let mut direct = vec![T::zero(); air.len()];
    let mut reverb = air.taps.clone();
    for i in range {
        direct[i] = air.taps[i];
        reverb[i] = T::zero();
    }
    (direct, reverb)
}

fn energy<T: Real>(x: &[T]) -> f64 {
    x.iter().map(|&v| v.as_f64() * v.as_f64()).sum()
}

/// Direct-to-reverberant energy ratio in dB; `+inf` for an anechoic response.
pub fn compute_drr<T: Real>(air: &AcousticImpulseResponse<T>) -> f64 {
    let (d, r) = split_air(air);
    let er = energy(&r);
    if er == 0.0 {
        return f64::INFINITY;
    }
    power_db(energy(&d) / er)
}

/// Ratio of direct-path to reverberant-path energy after convolving a source
/// signal with each part, in dB.
pub fn compute_srr<T: Real>(air: &AcousticImpulseResponse<T>, speech: &MultichannelAudio<T>) -> Result<f64> {
    ensure!(speech.num_channels() == 1, Shape, "source signal must be mono");
    ensure!(speech.channel(0).iter().any(|&s| s != T::zero()), Degenerate, "source signal is silent");
    let (d, r) = split_air(air);
    let ed = energy(&fft_convolve(speech.channel(0), &d));
    let er = energy(&fft_convolve(speech.channel(0), &r));
    if er == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(power_db(ed / er))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandTruth {
    pub centers: Vec<f64>,
    pub db: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Per-band DRR after band-passing both parts with the same 8th-order
/// Butterworth filter. The parts are zero-padded by one second so the filter
/// tails are counted.
pub fn compute_subband_drr<T: Real>(air: &AcousticImpulseResponse<T>, grid: &IsoBandGrid) -> Result<SubbandTruth> {
    let (mut d, mut r) = split_air(air);
    let pad = air.sample_rate as usize;
    d.resize(d.len() + pad, T::zero());
    r.resize(r.len() + pad, T::zero());
    let total = energy(air.taps());
    let mut db = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for band in grid.bands() {
        let filter = SosFilter::<T>::bandpass(band.lower, band.upper, BAND_FILTER_ORDER, air.sample_rate)?;
        let ed = energy(&filter.process(&d));
        let er = energy(&filter.process(&r));
        let negligible = 1e-12 * total;
        let value = if er > 0.0 { power_db(ed / er) } else { f64::INFINITY };
        let ok = (ed > negligible || er > negligible) && value.is_finite();
        db.push(value);
        valid.push(ok);
    }
    Ok(SubbandTruth { centers: grid.centers(), db, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::iso_third_octave_grid;

    #[test]
    fn single_impulse_is_all_direct() {
        let mut taps = vec![0.0_f64; 100];
        taps[10] = 0.7;
        let air = AcousticImpulseResponse::new(taps.clone(), 16000).unwrap();
        let (d, r) = split_air(&air);
        assert_eq!(d, taps);
        assert!(r.iter().all(|&v| v == 0.0));
        assert_eq!(compute_drr(&air), f64::INFINITY);
    }

    #[test]
    fn split_sums_exactly() {
        let taps: Vec<f64> = (0..500).map(|i| ((i * 37) % 17) as f64 / 7.0 - 1.1).collect();
        let air = AcousticImpulseResponse::new(taps.clone(), 16000).unwrap();
        let (d, r) = split_air(&air);
        for i in 0..taps.len() {
            assert_eq!(d[i] + r[i], taps[i]);
        }
    }

    #[test]
    fn energy_ratios() {
        let mut taps = vec![0.0_f64; 400];
        taps[5] = 1.0;
        taps[200] = 1.0;
        let air = AcousticImpulseResponse::new(taps.clone(), 16000).unwrap();
        assert!(compute_drr(&air).abs() < 1e-12);
        taps[5] = 10f64.sqrt();
        let air = AcousticImpulseResponse::new(taps, 16000).unwrap();
        assert!((compute_drr(&air) - 10.0).abs() < 1e-12);
        let scaled = AcousticImpulseResponse::new(air.taps().iter().map(|v| v * 123.0).collect(), 16000).unwrap();
        assert!((compute_drr(&scaled) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn window_edges_and_peak_at_start() {
        let mut taps = vec![0.0_f64; 200];
        taps[0] = 1.0;
        taps[40] = 0.5; // inside ±40 at 16 kHz
        taps[41] = 0.5;
        let air = AcousticImpulseResponse::new(taps, 16000).unwrap();
        assert_eq!(air.direct_window(), 40);
        let (d, r) = split_air(&air);
        assert_eq!(d[40], 0.5);
        assert_eq!(r[41], 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(AcousticImpulseResponse::new(vec![0.0_f64; 10], 16000).is_err());
        assert!(AcousticImpulseResponse::new(vec![1.0_f64], 16000).unwrap().with_direct_window(0).is_err());
        let air = AcousticImpulseResponse::new(vec![1.0_f64, 0.0, 0.5], 16000).unwrap();
        let silent = MultichannelAudio::mono(vec![0.0; 100], 16000).unwrap();
        assert!(compute_srr(&air, &silent).is_err());
    }

    #[test]
    fn tone_srr_follows_transfer_functions() {
        let fs = 16000;
        let mut taps = vec![0.0_f64; 300];
        taps[0] = 1.0;
        taps[100] = 0.3;
        taps[250] = -0.2;
        let air = AcousticImpulseResponse::new(taps, fs).unwrap();
        let f = 1000.0;
        let x: Vec<f64> =
            (0..160_000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / f64::from(fs)).sin()).collect();
        let srr = compute_srr(&air, &MultichannelAudio::mono(x, fs).unwrap()).unwrap();
        let w = 2.0 * std::f64::consts::PI * f / f64::from(fs);
        let hr = num_complex::Complex::from_polar(0.3, -100.0 * w) + num_complex::Complex::from_polar(-0.2, -250.0 * w);
        let expected = 10.0 * (1.0 / hr.norm_sqr()).log10();
        assert!((srr - expected).abs() < 0.01, "{srr} vs {expected}");
    }

    #[test]
    fn flat_halves_give_zero_db_bands() {
        // direct and reverberant parts are the same impulse, shifted
        let mut taps = vec![0.0_f64; 2000];
        taps[0] = 1.0;
        taps[1000] = -1.0;
        let air = AcousticImpulseResponse::new(taps, 16000).unwrap();
        let grid = iso_third_octave_grid(16000, 100.0);
        let t = compute_subband_drr(&air, &grid).unwrap();
        assert!(t.valid.iter().all(|&v| v));
        for db in &t.db {
            assert!(db.abs() < 1e-6, "{db}");
        }
    }
}
