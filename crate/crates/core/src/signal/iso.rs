//! One-third-octave band grid on exact base-2 centers `1000·2^(k/3)`.

use serde::{Deserialize, Serialize};

const NOMINAL_MANTISSA: [f64; 10] = [1.0, 1.25, 1.6, 2.0, 2.5, 3.15, 4.0, 5.0, 6.3, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoBand {
    /// Band index relative to 1 kHz.
    pub index: i32,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IsoBand {
    pub fn from_index(index: i32) -> Self {
        let center = 1000.0 * 2f64.powf(f64::from(index) / 3.0);
        Self { index, center, lower: center * 2f64.powf(-1.0 / 6.0), upper: center * 2f64.powf(1.0 / 6.0) }
    }

    /// Preferred-frequency label (…, 100, 125, 160, 200, …), display only.
    pub fn nominal(&self) -> f64 {
        let decade = self.index.div_euclid(10);
        let m = NOMINAL_MANTISSA[self.index.rem_euclid(10) as usize];
        (m * 10f64.powi(3 + decade) * 100.0).round() / 100.0
    }

    pub fn contains(&self, freq: f64) -> bool {
        freq >= self.lower && freq < self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoBandGrid {
    bands: Vec<IsoBand>,
}

impl IsoBandGrid {
    pub fn bands(&self) -> &[IsoBand] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.center).collect()
    }

    pub fn nominal_centers(&self) -> Vec<f64> {
        self.bands.iter().map(IsoBand::nominal).collect()
    }

    /// Grid restricted to bands whose nominal label lies in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        Self { bands: self.bands.iter().filter(|b| b.nominal() >= lo && b.nominal() <= hi).copied().collect() }
    }
}

/// Every band whose nominal label is at least `min_center` and whose upper
/// edge is below Nyquist.
pub fn iso_third_octave_grid(sample_rate: u32, min_center: f64) -> IsoBandGrid {
    let nyquist = f64::from(sample_rate) / 2.0;
    let mut bands = Vec::new();
    if nyquist <= 0.0 || !min_center.is_finite() {
        return IsoBandGrid { bands };
    }
    // 10 Hz nominal is index -20
    for index in -20..=30 {
        let band = IsoBand::from_index(index);
        if band.upper >= nyquist {
            break;
        }
        if band.nominal() >= min_center {
            bands.push(band);
        }
    }
    IsoBandGrid { bands }
}
