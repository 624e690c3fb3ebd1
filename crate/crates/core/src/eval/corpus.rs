//! Synthetic evaluation corpus: simulated rooms, synthetic talkers and
//! generated noise, written as WAV files plus a manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::ground_truth::compute_drr;
use crate::isim::{render_with, simulate_air, RoomSpec, TapPlacement};
use crate::mixer::{generate_noise, mix_at_snr, synthetic_speech, NoiseKind};
use crate::signal::{write_wav, MultichannelAudio, WavFormat};

use super::manifest::{ManifestEntry, Truth};

/// Shoebox room with uniform absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomPreset {
    pub dimensions: [f64; 3],
    pub absorption: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub sample_rate: u32,
    pub duration_secs: f64,
    pub mic_spacing: f64,
    pub rooms: Vec<RoomPreset>,
    /// Source distances from the array center; one position per entry.
    pub distances: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub noises: Vec<NoiseKind>,
    /// Tilt of the microphone axis above the horizontal, in radians.
    pub axis_elevation: f64,
    /// Inter-microphone delay of the direct path in whole samples.
    pub direct_lag: i64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        let room = |dimensions, absorption| RoomPreset { dimensions, absorption };
        Self {
            sample_rate: 16000,
            duration_secs: 8.0,
            mic_spacing: crate::pipeline::DEFAULT_MIC_SPACING,
            rooms: vec![
                room([4.0, 3.5, 2.7], 0.5),
                room([6.0, 5.0, 3.0], 0.35),
                room([8.0, 6.0, 3.2], 0.25),
                room([10.0, 7.0, 3.5], 0.2),
                room([12.0, 9.0, 4.0], 0.15),
            ],
            distances: vec![1.0, 2.0],
            snrs_db: vec![18.0, 12.0, -1.0],
            noises: vec![NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble],
            axis_elevation: 0.6,
            direct_lag: 1,
            seed: 1,
        }
    }
}

impl CorpusSpec {
    pub fn num_trials(&self) -> usize {
        self.rooms.len() * self.distances.len() * self.snrs_db.len() * self.noises.len()
    }

    /// Source-array geometry for room `r`, position `p`, with band-limited
    /// tap placement.
    pub fn room_spec(&self, r: usize, p: usize) -> Result<RoomSpec> {
        let preset = self.rooms.get(r).ok_or_else(|| Error::Config(format!("no room {r}")))?;
        let dist = *self.distances.get(p).ok_or_else(|| Error::Config(format!("no position {p}")))?;
        let dims = preset.dimensions;
        let center = [dims[0] * 0.45, dims[1] * 0.4, 1.4_f64.min(dims[2] / 2.0)];
        let heading = 0.3 + 0.2 * r as f64 + 0.9 * p as f64;
        let el = self.axis_elevation;
        let axis = [el.cos() * heading.cos(), el.cos() * heading.sin(), el.sin()];
        let half = self.mic_spacing / 2.0;
        let mics = vec![
            [center[0] - half * axis[0], center[1] - half * axis[1], center[2]],
            [center[0] + half * axis[0], center[1] + half * axis[1], center[2]],
        ];
        let height = (center[2] + 0.3).min(dims[2] - 0.2);
        let path_diff = self.direct_lag as f64 * crate::beamformer::SPEED_OF_SOUND / f64::from(self.sample_rate);
        // pull the talker closer until it fits inside the room with a margin
        let mut d = dist;
        let source = loop {
            let s = source_with_path_difference(&mics, heading, d, height, path_diff)?;
            if (0..2).all(|i| s[i] > 0.3 && s[i] < dims[i] - 0.3) {
                break s;
            }
            d *= 0.9;
            ensure!(d > 0.2, Domain, "room {r} is too small for position {p}");
        };
        let mut room = RoomSpec::new(dims, preset.absorption, source, mics, self.sample_rate)?;
        room.placement = TapPlacement::Bandlimited { half_width: 16 };
        room.highpass_hz = Some(100.0);
        Ok(room)
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Point at horizontal distance `dist` from the array center and the given
/// height whose path to mic 2 exceeds the path to mic 1 by `path_diff`.
/// Solved by bisection on the angle from broadside.
pub fn source_with_path_difference(
    mics: &[[f64; 3]],
    heading: f64,
    dist: f64,
    height: f64,
    path_diff: f64,
) -> Result<[f64; 3]> {
    ensure!(mics.len() == 2, Shape, "geometry needs two microphones");
    let center = [(mics[0][0] + mics[1][0]) / 2.0, (mics[0][1] + mics[1][1]) / 2.0];
    ensure!((mics[0][0] - mics[1][0]).hypot(mics[0][1] - mics[1][1]) > 0.0, Domain, "array axis must not be vertical");
    let at = |angle: f64| {
        // angle 0 is broadside, positive angles move towards mic 1
        let dir = heading + std::f64::consts::FRAC_PI_2 + angle;
        [center[0] + dist * dir.cos(), center[1] + dist * dir.sin(), height]
    };
    let excess = |angle: f64| {
        let s = at(angle);
        distance(&s, &mics[1]) - distance(&s, &mics[0]) - path_diff
    };
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    ensure!(
        excess(lo) < 0.0 && excess(hi) > 0.0,
        Domain,
        "path difference {path_diff} m is not reachable with this array"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// Writes the corpus under `dir` and returns its manifest entries. Each
/// position gets a mixture WAV per (SNR, noise) and one AIR WAV holding the
/// impulse response of mic 1.
pub fn generate_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(dir)?;
    let fs = spec.sample_rate;
    let len = (spec.duration_secs * f64::from(fs)).round() as usize;
    ensure!(len > 0, Config, "corpus duration must be positive");
    let mut entries = Vec::with_capacity(spec.num_trials());
    for r in 0..spec.rooms.len() {
        for p in 0..spec.distances.len() {
            let room = spec.room_spec(r, p)?;
            let airs = simulate_air::<f64>(&room)?;
            let id = format!("r{r}p{p}");
            let air_path = PathBuf::from(format!("{id}_air.wav"));
            let air_audio = MultichannelAudio::mono(airs[0].taps().to_vec(), fs)?;
            write_wav(dir.join(&air_path), &air_audio, WavFormat::Float32)?;
            let seed = spec.seed.wrapping_mul(1000).wrapping_add((r * 10 + p) as u64);
            let dry = MultichannelAudio::mono(synthetic_speech(len, fs, seed), fs)?;
            let wet = render_with(&airs, &dry)?.slice(0, len)?;
            log::info!("{id}: T60 {:.2} s, DRR {:.2} dB", room.sabine_t60(), compute_drr(&airs[0]));
            for (k, &kind) in spec.noises.iter().enumerate() {
                let noise: MultichannelAudio<f64> = generate_noise(kind, Some(&room), 2, len, fs, seed * 7 + k as u64)?;
                for &snr in &spec.snrs_db {
                    let mixed = mix_at_snr(&wet, &noise, snr)?;
                    // keep headroom for integer formats downstream
                    let peak = mixed.peak();
                    let mixed = if peak > 0.0 { mixed.scaled(0.5 / peak) } else { mixed };
                    let input = PathBuf::from(format!("{id}_{kind}_{snr}dB.wav"));
                    write_wav(dir.join(&input), &mixed, WavFormat::Float32)?;
                    entries.push(ManifestEntry {
                        input,
                        truth: Truth::Air(air_path.clone()),
                        noise: Some(kind),
                        snr_db: Some(snr),
                    });
                }
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_has_requested_path_difference() {
        let spec = CorpusSpec::default();
        for r in 0..spec.rooms.len() {
            for p in 0..spec.distances.len() {
                let room = spec.room_spec(r, p).unwrap();
                let m = &room.microphones;
                let diff = distance(&room.source, &m[1]) - distance(&room.source, &m[0]);
                assert!((diff - 343.0 / 16000.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unreachable_path_difference() {
        let mics = [[1.0, 1.0, 1.0], [1.03, 1.0, 1.0]];
        assert!(source_with_path_difference(&mics, 0.0, 1.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn default_corpus_size() {
        assert_eq!(CorpusSpec::default().num_trials(), 90);
    }
}
