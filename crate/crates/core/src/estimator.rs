//! Bin-level DRR from total and beamformer-residual power, fullband
//! integration, and the ISO-band weight matrix.
//!
//! Per bin, with expectations taken as time averages,
//!
//! ```text
//! η(f) = (E|Y|² − E|V|²) / ((1/G²)·(E|Z_y|² − E|Z_ν|²)) − 1
//! ```
//!
//! where `Y`/`V` are the microphone signal and its noise, `Z_y`/`Z_ν` the
//! beamformer output and its noise, and `G²` the beamformer's diffuse gain.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::{power_db, Real};
use crate::signal::{IsoBandGrid, StftConfig};

pub const DEFAULT_FLOOR_DB: f64 = -20.0;
pub const DEFAULT_CEIL_DB: f64 = 30.0;

/// Reporting range; values outside are clamped and the floor doubles as the
/// "could not estimate" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbClamp {
    pub floor_db: f64,
    pub ceil_db: f64,
}

impl Default for DbClamp {
    fn default() -> Self {
        Self { floor_db: DEFAULT_FLOOR_DB, ceil_db: DEFAULT_CEIL_DB }
    }
}

impl DbClamp {
    pub fn new(floor_db: f64, ceil_db: f64) -> Result<Self> {
        ensure!(
            floor_db.is_finite() && ceil_db.is_finite() && floor_db < ceil_db,
            Config,
            "floor {floor_db} dB must be below ceiling {ceil_db} dB"
        );
        Ok(Self { floor_db, ceil_db })
    }

    /// Converts a linear power ratio to clamped dB.
    pub fn ratio_to_db(&self, ratio: f64) -> f64 {
        let db = power_db(ratio);
        if db.is_nan() {
            self.floor_db
        } else {
            db.clamp(self.floor_db, self.ceil_db)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// No noise reduction, fullband.
    C,
    /// Minimum-statistics noise reduction, fullband.
    D,
    /// MMSE noise reduction, fullband.
    E,
    /// E, with bin estimates mapped onto ISO bands by a weight matrix.
    F,
    /// E, rerun on the input band-passed to each ISO band.
    G,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::C, Variant::D, Variant::E, Variant::F, Variant::G];

    pub fn is_subband(self) -> bool {
        matches!(self, Variant::F | Variant::G)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(Variant::C),
            "D" => Ok(Variant::D),
            "E" => Ok(Variant::E),
            "F" => Ok(Variant::F),
            "G" => Ok(Variant::G),
            other => Err(crate::Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

/// Frequencies of each bin plus the integration range, in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAxis {
    pub freqs: Vec<f64>,
    pub range: (f64, f64),
}

impl FrequencyAxis {
    pub fn from_stft(cfg: &StftConfig, sample_rate: u32, range: (f64, f64)) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        ensure!(
            range.0 < range.1 && range.1 <= nyquist,
            Config,
            "integration range {:?} Hz must be increasing and within Nyquist {nyquist}",
            range
        );
        Ok(Self { freqs: (0..cfg.num_bins()).map(|b| cfg.bin_frequency(b, sample_rate)).collect(), range })
    }

    pub fn in_range(&self, bin: usize) -> bool {
        let f = self.freqs[bin];
        f >= self.range.0 && f <= self.range.1
    }
}

/// Per-bin linear DRR with usability flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BinDrrSeries<T> {
    pub eta: Vec<T>,
    pub usable: Vec<bool>,
    pub axis: FrequencyAxis,
}

impl<T: Real> BinDrrSeries<T> {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn usable_in_range(&self) -> usize {
        (0..self.len()).filter(|&b| self.usable[b] && self.axis.in_range(b)).count()
    }

    /// Same bins, different integration range.
    pub fn with_range(&self, range: (f64, f64)) -> Self {
        Self { axis: FrequencyAxis { freqs: self.axis.freqs.clone(), range }, ..self.clone() }
    }
}

/// Time-averaged powers feeding the bin estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPowers<T> {
    pub total: Vec<T>,
    pub noise: Vec<T>,
    pub beam_total: Vec<T>,
    pub beam_noise: Vec<T>,
}

/// Evaluates η per bin. Bins are unusable when `usable` says so, when the
/// noise-corrected numerator or denominator is not positive, or when the
/// result is not finite.
pub fn estimate_bin_drr<T: Real>(
    powers: &BinPowers<T>,
    gain_sq: &[T],
    usable: &[bool],
    axis: FrequencyAxis,
) -> Result<BinDrrSeries<T>> {
    let n = powers.total.len();
    ensure!(
        powers.noise.len() == n
            && powers.beam_total.len() == n
            && powers.beam_noise.len() == n
            && gain_sq.len() == n
            && usable.len() == n
            && axis.freqs.len() == n,
        Shape,
        "bin vectors differ in length"
    );
    let mut eta = Vec::with_capacity(n);
    let mut ok = Vec::with_capacity(n);
    for b in 0..n {
        let num = powers.total[b] - powers.noise[b];
        let resid = powers.beam_total[b] - powers.beam_noise[b];
        let g = gain_sq[b];
        let value = num / ((T::one() / g) * resid) - T::one();
        let good = usable[b] && g > T::zero() && num > T::zero() && resid > T::zero() && value.is_finite();
        eta.push(if value.is_finite() { value } else { T::nan() });
        ok.push(good);
    }
    Ok(BinDrrSeries { eta, usable: ok, axis })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullbandEstimate {
    pub db: f64,
    pub mean_ratio: f64,
    pub usable_bins: usize,
}

/// Mean of η over usable bins inside the integration range, in clamped dB.
/// With no usable bins the floor sentinel is returned.
pub fn integrate_fullband<T: Real>(bins: &BinDrrSeries<T>, clamp: &DbClamp) -> FullbandEstimate {
    let mut sum = 0.0;
    let mut count = 0usize;
    for b in 0..bins.len() {
        if bins.usable[b] && bins.axis.in_range(b) {
            sum += bins.eta[b].as_f64();
            count += 1;
        }
    }
    if count == 0 {
        log::debug!("no usable bins in {:?} Hz, reporting floor", bins.axis.range);
        return FullbandEstimate { db: clamp.floor_db, mean_ratio: f64::NAN, usable_bins: 0 };
    }
    let mean = sum / count as f64;
    FullbandEstimate { db: clamp.ratio_to_db(mean), mean_ratio: mean, usable_bins: count }
}

/// Band × bin assignment matrix with rows normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandWeightMatrix {
    weights: Vec<Vec<f64>>,
    empty: Vec<bool>,
}

impl SubbandWeightMatrix {
    pub fn num_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.weights[band]
    }

    pub fn is_empty_row(&self, band: usize) -> bool {
        self.empty[band]
    }

    /// Band a bin was assigned to, if any.
    pub fn band_of(&self, bin: usize) -> Option<usize> {
        self.weights.iter().position(|r| r[bin] > 0.0)
    }
}

/// Assigns each bin to the band whose `[lower, upper)` interval holds its
/// center frequency.
pub fn build_subband_weights(grid: &IsoBandGrid, cfg: &StftConfig, sample_rate: u32) -> Result<SubbandWeightMatrix> {
    let nyquist = f64::from(sample_rate) / 2.0;
    ensure!(grid.bands().iter().all(|b| b.upper <= nyquist), Domain, "band grid extends past Nyquist {nyquist} Hz");
    let nb = cfg.num_bins();
    let mut weights = vec![vec![0.0; nb]; grid.len()];
    for bin in 0..nb {
        let f = cfg.bin_frequency(bin, sample_rate);
        if let Some(row) = grid.bands().iter().position(|b| b.contains(f)).map(|i| &mut weights[i]) {
            row[bin] = 1.0;
        }
    }
    let mut empty = Vec::with_capacity(grid.len());
    for row in &mut weights {
        let s: f64 = row.iter().sum();
        empty.push(s == 0.0);
        if s > 0.0 {
            row.iter_mut().for_each(|w| *w /= s);
        }
    }
    Ok(SubbandWeightMatrix { weights, empty })
}

/// Per-band linear DRR from bin estimates, renormalizing each row over its
/// usable bins. Returns `None` for bands with no usable bin.
pub fn subband_ratios<T: Real>(bins: &BinDrrSeries<T>, w: &SubbandWeightMatrix) -> Result<Vec<Option<f64>>> {
    ensure!(
        w.weights.first().is_none_or(|r| r.len() == bins.len()),
        Shape,
        "weight matrix width does not match bin count"
    );
    Ok(w.weights
        .iter()
        .map(|row| {
            let (mut num, mut den) = (0.0, 0.0);
            for (b, &wt) in row.iter().enumerate() {
                if wt > 0.0 && bins.usable[b] {
                    num += wt * bins.eta[b].as_f64();
                    den += wt;
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{iso_third_octave_grid, Window};

    fn axis(n: usize) -> FrequencyAxis {
        FrequencyAxis { freqs: (0..n).map(|b| 1000.0 + b as f64).collect(), range: (0.0, 1e9) }
    }

    fn powers(y: f64, v: f64, zy: f64, zv: f64) -> BinPowers<f64> {
        BinPowers { total: vec![y], noise: vec![v], beam_total: vec![zy], beam_noise: vec![zv] }
    }

    #[test]
    fn direct_substitution() {
        let s = estimate_bin_drr(&powers(2.0, 0.0, 1.0, 0.0), &[1.0], &[true], axis(1)).unwrap();
        assert_eq!(s.eta[0], 1.0);
        assert!(s.usable[0]);
        let fb = integrate_fullband(&s, &DbClamp::default());
        assert!(fb.db.abs() < 1e-12);
    }

    #[test]
    fn pure_noise_is_flagged() {
        let s = estimate_bin_drr(&powers(2.0, 2.0, 1.0, 0.5), &[0.5], &[true], axis(1)).unwrap();
        assert_eq!(s.eta[0], -1.0);
        assert!(!s.usable[0]);
        assert_eq!(integrate_fullband(&s, &DbClamp::default()).db, -20.0);
        let s = estimate_bin_drr(&powers(2.0, 0.0, 1.0, 1.5), &[0.5], &[true], axis(1)).unwrap();
        assert!(!s.usable[0]);
    }

    #[test]
    fn integration_is_linear_mean() {
        let bins = BinDrrSeries { eta: vec![1.0_f64, 3.0, 100.0], usable: vec![true, true, false], axis: axis(3) };
        let fb = integrate_fullband(&bins, &DbClamp::default());
        assert!((fb.db - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert_eq!(fb.usable_bins, 2);
        let c = BinDrrSeries { eta: vec![0.25_f64; 4], usable: vec![true; 4], axis: axis(4) };
        assert!((integrate_fullband(&c, &DbClamp::default()).db - 10.0 * 0.25f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn clamp_contract() {
        let clamp = DbClamp::default();
        assert_eq!(clamp.ratio_to_db(1e9), 30.0);
        assert_eq!(clamp.ratio_to_db(-0.5), -20.0);
        assert_eq!(clamp.ratio_to_db(0.0), -20.0);
        assert_eq!(clamp.ratio_to_db(f64::NAN), -20.0);
        assert!(DbClamp::new(10.0, -10.0).is_err());
    }

    #[test]
    fn range_excludes_bins() {
        let bins = BinDrrSeries {
            eta: vec![1.0_f64, 3.0],
            usable: vec![true, true],
            axis: FrequencyAxis { freqs: vec![100.0, 1000.0], range: (200.0, 6300.0) },
        };
        assert_eq!(integrate_fullband(&bins, &DbClamp::default()).usable_bins, 1);
        let none = bins.with_range((2000.0, 3000.0));
        let fb = integrate_fullband(&none, &DbClamp::default());
        assert_eq!((fb.db, fb.usable_bins), (-20.0, 0));
    }

    #[test]
    fn weight_matrix_rows() {
        let cfg = StftConfig::new(1024, 512, Window::SqrtHann, 1024).unwrap();
        let grid = iso_third_octave_grid(16000, 100.0);
        let w = build_subband_weights(&grid, &cfg, 16000).unwrap();
        let k1000 = grid.bands().iter().position(|b| b.nominal() == 1000.0).unwrap();
        assert_eq!(w.band_of(64), Some(k1000));
        for band in 0..w.num_bands() {
            if !w.is_empty_row(band) {
                assert!((w.row(band).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.row(band).iter().all(|&x| x >= 0.0));
            }
        }
        for bin in 0..cfg.num_bins() {
            let hits = (0..w.num_bands()).filter(|&b| w.row(b)[bin] > 0.0).count();
            assert!(hits <= 1);
        }
    }

    #[test]
    fn sparse_low_bands_can_be_empty() {
        // 62.5 Hz bins leave the 100 and 125 Hz bands without a bin center
        let cfg = StftConfig::new(256, 128, Window::SqrtHann, 256).unwrap();
        let grid = iso_third_octave_grid(16000, 100.0);
        let w = build_subband_weights(&grid, &cfg, 16000).unwrap();
        assert!(w.is_empty_row(0));
        let bins = BinDrrSeries { eta: vec![2.0_f64; 129], usable: vec![true; 129], axis: axis(129) };
        let r = subband_ratios(&bins, &w).unwrap();
        assert_eq!(r[0], None);
        assert!(r.iter().flatten().all(|&v| (v - 2.0).abs() < 1e-12));
    }
}
