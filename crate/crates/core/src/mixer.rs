//! Additive noise at a controlled signal-to-noise ratio, and the synthetic
//! sources used to build test corpora.

use std::str::FromStr;

use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::isim::{simulate_air, RoomSpec};
use crate::scalar::{energy, Real};
use crate::signal::{fft_convolve, MultichannelAudio};

/// Frames whose energy is below this fraction of the loudest frame are
/// treated as speech pauses.
pub const ACTIVITY_GATE: f64 = 1e-4;
/// Gate frame length.
pub const GATE_FRAME_SECS: f64 = 0.02;
/// Number of independent talkers in the babble surrogate.
pub const BABBLE_TALKERS: usize = 6;

/// Mean power of `x` over the frames passing the activity gate.
pub fn active_power<T: Real>(x: &[T], sample_rate: u32) -> f64 {
    let frame = ((GATE_FRAME_SECS * f64::from(sample_rate)).round() as usize).max(1);
    let energies: Vec<f64> = x.chunks(frame).map(|c| energy(c).as_f64()).collect();
    let peak = energies.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0.0;
    }
    let (mut e, mut n) = (0.0, 0usize);
    for (chunk, &ce) in x.chunks(frame).zip(&energies) {
        if ce > ACTIVITY_GATE * peak {
            e += ce;
            n += chunk.len();
        }
    }
    e / n as f64
}

fn mean_power<T: Real>(x: &[T]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        energy(x).as_f64() / x.len() as f64
    }
}

fn check_pair<T: Real>(speech: &MultichannelAudio<T>, noise: &MultichannelAudio<T>) -> Result<()> {
    ensure!(
        speech.num_channels() == noise.num_channels(),
        Shape,
        "speech has {} channels, noise {}",
        speech.num_channels(),
        noise.num_channels()
    );
    ensure!(speech.sample_rate() == noise.sample_rate(), Config, "speech and noise sample rates differ");
    ensure!(
        noise.len() >= speech.len(),
        Shape,
        "noise ({} samples) shorter than speech ({})",
        noise.len(),
        speech.len()
    );
    Ok(())
}

/// Gain applied to `noise` so that channel 0 reaches `snr_db`. Infinite SNR
/// gives zero.
pub fn noise_gain<T: Real>(speech: &MultichannelAudio<T>, noise: &MultichannelAudio<T>, snr_db: f64) -> Result<f64> {
    check_pair(speech, noise)?;
    ensure!(!snr_db.is_nan() && snr_db != f64::NEG_INFINITY, Config, "invalid SNR {snr_db}");
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let ps = active_power(speech.channel(0), speech.sample_rate());
    let pn = mean_power(&noise.channel(0)[..speech.len()]);
    ensure!(ps > 0.0, Degenerate, "speech is silent");
    ensure!(pn > 0.0, Degenerate, "noise is silent");
    Ok((ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `speech + g·noise` over the speech length, with one gain for every channel.
pub fn mix_at_snr<T: Real>(
    speech: &MultichannelAudio<T>,
    noise: &MultichannelAudio<T>,
    snr_db: f64,
) -> Result<MultichannelAudio<T>> {
    let g = T::lit(noise_gain(speech, noise, snr_db)?);
    let channels = speech
        .channels()
        .iter()
        .zip(noise.channels())
        .map(|(s, n)| s.iter().zip(n).map(|(&a, &b)| a + g * b).collect())
        .collect();
    MultichannelAudio::new(channels, speech.sample_rate())
}

/// SNR of channel 0 measured exactly as [`mix_at_snr`] sets it.
pub fn measure_snr<T: Real>(speech: &MultichannelAudio<T>, noise: &MultichannelAudio<T>) -> Result<f64> {
    check_pair(speech, noise)?;
    let ps = active_power(speech.channel(0), speech.sample_rate());
    let pn = mean_power(&noise.channel(0)[..speech.len()]);
    ensure!(ps > 0.0, Degenerate, "speech is silent");
    Ok(10.0 * (ps / pn).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Babble,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Babble => "babble",
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "babble" | "babble_surrogate" => Ok(NoiseKind::Babble),
            other => Err(Error::Config(format!("unknown noise kind '{other}'"))),
        }
    }
}

fn gaussian(rng: &mut StdRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Filters `x` by a zero-phase magnitude response given as a function of
/// frequency in Hz. The filter is circular over the padded length.
fn shape_spectrum(x: &[f64], sample_rate: u32, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len().next_power_of_two().max(2);
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    let df = f64::from(sample_rate) / n as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        *c *= gain(bin as f64 * df);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf[..x.len()].iter().map(|c| c.re / n as f64).collect()
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

/// Magnitude of the long-term speech spectrum model: second-order high-pass
/// at 150 Hz, flat to 500 Hz, then −6 dB per octave.
pub fn speech_spectrum_magnitude(freq: f64) -> f64 {
    let hp = {
        let r = (freq / 150.0).powi(2);
        r / (1.0 + r * r).sqrt()
    };
    let lp = 1.0 / (1.0 + (freq / 500.0).powi(2)).sqrt();
    hp * lp
}

/// Stationary noise with a speech-like long-term spectrum, unit RMS.
pub fn speech_shaped_noise(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let white = gaussian(&mut rng, len);
    normalize(shape_spectrum(&white, sample_rate, speech_spectrum_magnitude))
}

/// Two-resonance emphasis (first and second formant) on a log-frequency axis.
fn formant_gain(freq: f64, f1: f64, f2: f64) -> f64 {
    let bump = |fc: f64| {
        let octaves = (freq.max(1.0) / fc).log2();
        (-0.5 * (octaves / 0.2).powi(2)).exp()
    };
    1.0 + 3.0 * bump(f1) + 2.0 * bump(f2)
}

/// Sequence of voiced syllables with random pitch and formants, grouped into
/// talk spurts separated by pauses. A stand-in for dry speech that is sparse
/// in time and frequency.
pub fn synthetic_speech(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    let mut pos = (rng.random_range(0.0..0.2) * fs) as usize;
    while pos < len {
        let syllables = rng.random_range(3..9);
        for _ in 0..syllables {
            let dur = (rng.random_range(0.12..0.3) * fs) as usize;
            if pos + dur > len {
                break;
            }
            let f0 = rng.random_range(90.0..230.0);
            let glide = rng.random_range(-0.3..0.3);
            let f1 = rng.random_range(300.0..900.0);
            let f2 = rng.random_range(900.0..2600.0);
            let level = rng.random_range(0.3..1.0);
            let mut phase = 0.0;
            let excitation: Vec<f64> = (0..dur)
                .map(|i| {
                    let t = i as f64 / dur as f64;
                    phase += f0 * (1.0 + glide * (t - 0.5)) / fs;
                    let pulse = if phase >= 1.0 {
                        phase -= 1.0;
                        (fs / f0).sqrt()
                    } else {
                        0.0
                    };
                    pulse + 0.3 * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            let shaped =
                shape_spectrum(&excitation, sample_rate, |f| speech_spectrum_magnitude(f) * formant_gain(f, f1, f2));
            let rms = (shaped.iter().map(|v| v * v).sum::<f64>() / dur as f64).sqrt().max(1e-300);
            for (i, v) in shaped.iter().enumerate() {
                let env = (std::f64::consts::PI * i as f64 / dur as f64).sin().powi(2);
                out[pos + i] += level * env * v / rms;
            }
            pos += dur + (rng.random_range(0.0..0.06) * fs) as usize;
        }
        pos += (rng.random_range(0.15..0.6) * fs) as usize;
    }
    normalize(out)
}

/// Noise of the requested kind. White and pink are independent per channel;
/// babble is a sum of talkers rendered through `room`, whose microphones
/// define the channels.
pub fn generate_noise<T: Real>(
    kind: NoiseKind,
    room: Option<&RoomSpec>,
    num_channels: usize,
    len: usize,
    sample_rate: u32,
    seed: u64,
) -> Result<MultichannelAudio<T>> {
    ensure!(len > 0, Domain, "noise length must be positive");
    let mut rng = StdRng::seed_from_u64(seed);
    let channels: Vec<Vec<f64>> = match kind {
        NoiseKind::White => (0..num_channels).map(|_| gaussian(&mut rng, len)).collect(),
        NoiseKind::Pink => (0..num_channels)
            .map(|_| {
                let w = gaussian(&mut rng, len);
                normalize(shape_spectrum(&w, sample_rate, |f| if f > 0.0 { f.powf(-0.5) } else { 0.0 }))
            })
            .collect(),
        NoiseKind::Babble => {
            let room = room.ok_or_else(|| Error::Config("babble noise needs a room".into()))?;
            ensure!(
                room.microphones.len() == num_channels,
                Shape,
                "room has {} microphones, {num_channels} channels requested",
                room.microphones.len()
            );
            ensure!(room.sample_rate == sample_rate, Config, "room sample rate differs from requested rate");
            babble(room, len, &mut rng)?
        }
    };
    MultichannelAudio::new(channels.into_iter().map(|c| c.into_iter().map(T::lit).collect()).collect(), sample_rate)
}

fn babble(room: &RoomSpec, len: usize, rng: &mut StdRng) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![vec![0.0; len]; room.microphones.len()];
    for _ in 0..BABBLE_TALKERS {
        let source = talker_position(room, rng)?;
        let talker = room.with_source(source)?;
        let dry = synthetic_speech(len, room.sample_rate, rng.random());
        for (acc, air) in out.iter_mut().zip(simulate_air::<f64>(&talker)?) {
            let wet = fft_convolve(&dry, air.taps());
            acc.iter_mut().zip(&wet).for_each(|(a, w)| *a += w);
        }
    }
    Ok(out)
}

/// Random position at least 0.3 m from every wall (or the room center for
/// small rooms) and 0.5 m from every microphone.
fn talker_position(room: &RoomSpec, rng: &mut StdRng) -> Result<[f64; 3]> {
    let margin = |d: f64| (0.3f64).min(d / 4.0);
    for _ in 0..1000 {
        let p: [f64; 3] = std::array::from_fn(|i| {
            let m = margin(room.dimensions[i]);
            rng.random_range(m..room.dimensions[i] - m)
        });
        let clear = room.microphones.iter().all(|m| {
            let d2: f64 = (0..3).map(|i| (p[i] - m[i]).powi(2)).sum();
            d2 > 0.25
        });
        if clear {
            return Ok(p);
        }
    }
    Err(Error::Domain("room too small to place babble talkers".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speech() -> MultichannelAudio<f64> {
        let s = synthetic_speech(32000, 16000, 1);
        MultichannelAudio::new(vec![s.clone(), s.iter().map(|v| 0.5 * v).collect()], 16000).unwrap()
    }

    #[test]
    fn equal_power_at_zero_db_is_unit_gain() {
        let x = MultichannelAudio::mono(vec![1.0, -1.0, 1.0, -1.0], 16000).unwrap();
        let n = MultichannelAudio::mono(vec![-1.0, 1.0, 1.0, -1.0, 0.5], 16000).unwrap();
        assert!((noise_gain(&x, &n, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_snr_leaves_speech() {
        let s = speech();
        let n = MultichannelAudio::zeros(2, s.len(), 16000).unwrap();
        assert_eq!(mix_at_snr(&s, &n, f64::INFINITY).unwrap(), s);
    }

    #[test]
    fn mixing_is_linear_and_hits_target() {
        let s = speech();
        let n: MultichannelAudio<f64> = generate_noise(NoiseKind::White, None, 2, 40000, 16000, 3).unwrap();
        for snr in [-1.0, 12.0, 18.0] {
            let g = noise_gain(&s, &n, snr).unwrap();
            let m = mix_at_snr(&s, &n, snr).unwrap();
            let added = m.map_channels(|c| c.to_vec());
            for ch in 0..2 {
                for i in 0..s.len() {
                    let expect = g * n.channel(ch)[i];
                    assert!((added.channel(ch)[i] - s.channel(ch)[i] - expect).abs() < 1e-12);
                }
            }
            let scaled = n.slice(0, s.len()).unwrap().scaled(g);
            assert!((measure_snr(&s, &scaled).unwrap() - snr).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let s = speech();
        let short: MultichannelAudio<f64> = generate_noise(NoiseKind::White, None, 2, 100, 16000, 0).unwrap();
        assert!(mix_at_snr(&s, &short, 0.0).is_err());
        let silent = MultichannelAudio::zeros(2, s.len(), 16000).unwrap();
        assert!(matches!(mix_at_snr(&s, &silent, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(mix_at_snr(&silent, &s, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(generate_noise::<f64>(NoiseKind::Babble, None, 2, 100, 16000, 0), Err(Error::Config(_))));
        assert!("hum".parse::<NoiseKind>().is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a: MultichannelAudio<f64> = generate_noise(NoiseKind::Pink, None, 1, 1000, 16000, 9).unwrap();
        let b: MultichannelAudio<f64> = generate_noise(NoiseKind::Pink, None, 1, 1000, 16000, 9).unwrap();
        let c: MultichannelAudio<f64> = generate_noise(NoiseKind::Pink, None, 1, 1000, 16000, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_speech_has_pauses() {
        let s = synthetic_speech(16000 * 5, 16000, 4);
        let frames: Vec<f64> = s.chunks(320).map(energy).collect();
        let peak = frames.iter().cloned().fold(0.0, f64::max);
        assert!(frames.iter().any(|&e| e < 1e-6 * peak));
        assert!(frames.iter().filter(|&&e| e > 1e-2 * peak).count() > frames.len() / 2);
    }

    #[test]
    fn anechoic_single_talker_babble_is_delayed_speech() {
        let room = RoomSpec::new([6.0, 5.0, 3.0], 1.0, [1.0, 1.0, 1.0], vec![[3.0, 2.5, 1.5]], 16000).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let out = babble(&room, 4000, &mut rng).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].iter().all(|v| v.is_finite()));
        assert!(energy(&out[0]) > 0.0);
    }
}
