//! Image-source simulation of a shoebox room.
//!
//! Each image contributes `gain / distance` at its propagation delay, where
//! `gain` is the product of wall reflection coefficients `sqrt(1 - absorption)`
//! along its path. Delays are rounded to the nearest sample by default; the
//! band-limited placement spreads each image over a Hann-windowed sinc kernel
//! instead, which keeps sub-sample inter-microphone delays intact.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::ground_truth::AcousticImpulseResponse;
use crate::scalar::Real;
use crate::signal::{fft_convolve, MultichannelAudio, SosFilter};

pub const MAX_ORDER_CAP: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapPlacement {
    #[default]
    Nearest,
    /// Windowed sinc with this many taps on each side of the delay.
    Bandlimited { half_width: usize },
}

impl std::str::FromStr for TapPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nearest" => Ok(TapPlacement::Nearest),
            "sinc" | "bandlimited" => Ok(TapPlacement::Bandlimited { half_width: 16 }),
            other => Err(Error::Config(format!("unknown tap placement '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room size along x, y, z in meters.
    pub dimensions: [f64; 3],
    /// Absorption of the walls at x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
    pub absorption: [f64; 6],
    pub source: [f64; 3],
    pub microphones: Vec<[f64; 3]>,
    pub sound_speed: f64,
    pub max_order: usize,
    pub sample_rate: u32,
    #[serde(default)]
    pub placement: TapPlacement,
    /// Cutoff of a 4th-order Butterworth high-pass applied to every response,
    /// removing the low-frequency excess that image summation produces.
    #[serde(default)]
    pub highpass_hz: Option<f64>,
}

impl RoomSpec {
    /// Uniform absorption and a reflection order derived from the Sabine
    /// reverberation time.
    pub fn new(
        dimensions: [f64; 3],
        absorption: f64,
        source: [f64; 3],
        microphones: Vec<[f64; 3]>,
        sample_rate: u32,
    ) -> Result<Self> {
        let mut room = Self {
            dimensions,
            absorption: [absorption; 6],
            source,
            microphones,
            sound_speed: crate::beamformer::SPEED_OF_SOUND,
            max_order: 0,
            sample_rate,
            placement: TapPlacement::Nearest,
            highpass_hz: None,
        };
        room.validate()?;
        room.max_order = room.default_max_order();
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.dimensions.iter().all(|&d| d > 0.0 && d.is_finite()), Domain, "room dimensions must be positive");
        ensure!(
            self.absorption.iter().all(|&a| a > 0.0 && a <= 1.0),
            Domain,
            "absorption coefficients must lie in (0, 1]"
        );
        ensure!(self.sound_speed > 0.0, Domain, "sound speed must be positive");
        ensure!(self.sample_rate > 0, Domain, "sample rate must be positive");
        ensure!(!self.microphones.is_empty(), Domain, "room has no microphones");
        if let Some(hz) = self.highpass_hz {
            ensure!(
                hz > 0.0 && hz < f64::from(self.sample_rate) / 2.0,
                Domain,
                "high-pass cutoff {hz} Hz must lie below Nyquist"
            );
        }
        let inside = |p: &[f64; 3]| (0..3).all(|i| p[i] > 0.0 && p[i] < self.dimensions[i]);
        ensure!(inside(&self.source), Domain, "source {:?} is not inside the room", self.source);
        for m in &self.microphones {
            ensure!(inside(m), Domain, "microphone {m:?} is not inside the room");
            ensure!(distance(m, &self.source) > 1e-9, Domain, "source coincides with microphone {m:?}");
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    /// Sabine reverberation time, `0.161·V / Σ Sᵢαᵢ`.
    pub fn sabine_t60(&self) -> f64 {
        let [lx, ly, lz] = self.dimensions;
        let areas = [ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly];
        let absorbing: f64 = areas.iter().zip(&self.absorption).map(|(s, a)| s * a).sum();
        0.161 * self.volume() / absorbing
    }

    /// Order at which images along the shortest room axis have travelled
    /// `c·T60`, capped at [`MAX_ORDER_CAP`].
    pub fn default_max_order(&self) -> usize {
        let min_dim = self.dimensions.iter().cloned().fold(f64::INFINITY, f64::min);
        let order = (self.sound_speed * self.sabine_t60() / min_dim).ceil() as usize;
        order.clamp(1, MAX_ORDER_CAP)
    }

    pub fn with_source(&self, source: [f64; 3]) -> Result<Self> {
        let room = Self { source, ..self.clone() };
        room.validate()?;
        Ok(room)
    }

    /// Parses `key = value` lines. Vectors are comma separated; `mic` may
    /// repeat. Unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut absorption = None;
        let mut source = None;
        let mut mics = Vec::new();
        let mut sound_speed = crate::beamformer::SPEED_OF_SOUND;
        let mut max_order = None;
        let mut sample_rate = 16000;
        let mut placement = TapPlacement::Nearest;
        let mut highpass_hz = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Manifest { line: n + 1, msg };
            let (key, value) =
                line.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            if key.trim() == "placement" {
                placement = value.parse().map_err(|e: Error| err(e.to_string()))?;
                continue;
            }
            let nums: Vec<f64> = value
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("bad number in '{value}': {e}")))?;
            let vec3 = |v: &[f64]| -> Result<[f64; 3]> {
                <[f64; 3]>::try_from(v).map_err(|_| err(format!("{} needs 3 values", key.trim())))
            };
            match key.trim() {
                "dimensions" => dims = Some(vec3(&nums)?),
                "absorption" => {
                    absorption = Some(match nums.len() {
                        1 => [nums[0]; 6],
                        6 => <[f64; 6]>::try_from(nums.as_slice()).expect("length checked"),
                        _ => return Err(err("absorption needs 1 or 6 values".into())),
                    })
                }
                "source" => source = Some(vec3(&nums)?),
                "mic" | "microphone" => mics.push(vec3(&nums)?),
                "sound_speed" => sound_speed = nums[0],
                "max_order" => max_order = Some(nums[0] as usize),
                "sample_rate" => sample_rate = nums[0] as u32,
                "highpass" => highpass_hz = Some(nums[0]),
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        let missing = |what: &str| Error::Config(format!("room config is missing '{what}'"));
        let mut room = Self {
            dimensions: dims.ok_or_else(|| missing("dimensions"))?,
            absorption: absorption.ok_or_else(|| missing("absorption"))?,
            source: source.ok_or_else(|| missing("source"))?,
            microphones: mics,
            sound_speed,
            max_order: 0,
            sample_rate,
            placement,
            highpass_hz,
        };
        room.validate()?;
        room.max_order = max_order.unwrap_or_else(|| room.default_max_order());
        Ok(room)
    }

    pub fn to_config_string(&self) -> String {
        let v = |p: &[f64]| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = format!(
            "dimensions = {}\nabsorption = {}\nsource = {}\n",
            v(&self.dimensions),
            v(&self.absorption),
            v(&self.source)
        );
        for m in &self.microphones {
            s += &format!("mic = {}\n", v(m));
        }
        s += &format!(
            "sound_speed = {}\nmax_order = {}\nsample_rate = {}\n",
            self.sound_speed, self.max_order, self.sample_rate
        );
        if let TapPlacement::Bandlimited { .. } = self.placement {
            s += "placement = sinc\n";
        }
        if let Some(hz) = self.highpass_hz {
            s += &format!("highpass = {hz}\n");
        }
        s
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    pub gain: f64,
    pub order: usize,
}

/// Mirror-image positions along one axis: `(coordinate, reflections, gain)`.
fn axis_images(len: f64, src: f64, beta_lo: f64, beta_hi: f64, max_order: usize) -> Vec<(f64, usize, f64)> {
    let n_max = max_order as i64;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for u in 0..=1_i64 {
            let lo = (n - u).unsigned_abs() as usize;
            let hi = n.unsigned_abs() as usize;
            let order = lo + hi;
            if order > max_order {
                continue;
            }
            let coord = (1 - 2 * u) as f64 * src + 2.0 * n as f64 * len;
            // 0^0 = 1 keeps the direct path for fully absorbing walls
            let gain = beta_lo.powi(lo as i32) * beta_hi.powi(hi as i32);
            out.push((coord, order, gain));
        }
    }
    out
}

/// All images up to `room.max_order` total reflections.
pub fn image_sources(room: &RoomSpec) -> Vec<ImageSource> {
    let beta: Vec<f64> = room.absorption.iter().map(|a| (1.0 - a).max(0.0).sqrt()).collect();
    let axes: Vec<Vec<(f64, usize, f64)>> = (0..3)
        .map(|i| axis_images(room.dimensions[i], room.source[i], beta[2 * i], beta[2 * i + 1], room.max_order))
        .collect();
    let mut images = Vec::new();
    for &(x, ox, gx) in &axes[0] {
        for &(y, oy, gy) in &axes[1] {
            if ox + oy > room.max_order {
                continue;
            }
            for &(z, oz, gz) in &axes[2] {
                let order = ox + oy + oz;
                if order > room.max_order {
                    continue;
                }
                let gain = gx * gy * gz;
                if gain == 0.0 {
                    continue;
                }
                images.push(ImageSource { position: [x, y, z], gain, order });
            }
        }
    }
    images
}

/// One impulse response per microphone, all padded to the same length.
pub fn simulate_air<T: Real>(room: &RoomSpec) -> Result<Vec<AcousticImpulseResponse<T>>> {
    room.validate()?;
    let images = image_sources(room);
    let fs = f64::from(room.sample_rate);
    let mut responses: Vec<Vec<f64>> = Vec::with_capacity(room.microphones.len());
    for mic in &room.microphones {
        let mut taps: Vec<f64> = Vec::new();
        for img in &images {
            let dist = distance(&img.position, mic);
            let delay = dist * fs / room.sound_speed;
            let amp = img.gain / dist;
            match room.placement {
                TapPlacement::Nearest => {
                    let n = delay.round() as usize;
                    if n >= taps.len() {
                        taps.resize(n + 1, 0.0);
                    }
                    taps[n] += amp;
                }
                TapPlacement::Bandlimited { half_width } => add_sinc(&mut taps, delay, amp, half_width.max(1)),
            }
        }
        responses.push(taps);
    }
    let len = responses.iter().map(Vec::len).max().unwrap_or(0);
    let highpass = room.highpass_hz.map(|hz| SosFilter::<f64>::highpass(hz, 4, room.sample_rate)).transpose()?;
    responses
        .into_iter()
        .map(|mut taps| {
            taps.resize(len, 0.0);
            if let Some(f) = &highpass {
                taps = f.process(&taps);
            }
            AcousticImpulseResponse::new(taps.into_iter().map(T::lit).collect(), room.sample_rate)
        })
        .collect()
}

/// Adds `amp·w(n − t)·sinc(n − t)` around the fractional delay `t`, with a
/// Hann window `w` spanning `half_width` samples on each side.
fn add_sinc(taps: &mut Vec<f64>, t: f64, amp: f64, half_width: usize) {
    let hw = half_width as f64;
    let first = (t - hw).ceil().max(0.0) as usize;
    let last = (t + hw).floor() as usize;
    if last >= taps.len() {
        taps.resize(last + 1, 0.0);
    }
    for (n, tap) in taps.iter_mut().enumerate().take(last + 1).skip(first) {
        let x = n as f64 - t;
        let window = 0.5 * (1.0 + (std::f64::consts::PI * x / hw).cos());
        let pix = std::f64::consts::PI * x;
        let sinc = if pix.abs() < 1e-12 { 1.0 } else { pix.sin() / pix };
        *tap += amp * window * sinc;
    }
}

/// Convolves a mono source with each microphone's impulse response.
pub fn render_reverberant<T: Real>(room: &RoomSpec, speech: &MultichannelAudio<T>) -> Result<MultichannelAudio<T>> {
    let airs = simulate_air::<T>(room)?;
    render_with(&airs, speech)
}

/// Convolves a mono source with precomputed impulse responses.
pub fn render_with<T: Real>(
    airs: &[AcousticImpulseResponse<T>],
    speech: &MultichannelAudio<T>,
) -> Result<MultichannelAudio<T>> {
    ensure!(speech.num_channels() == 1, Shape, "source signal must be mono");
    ensure!(!airs.is_empty(), Shape, "no impulse responses");
    ensure!(
        airs.iter().all(|a| a.sample_rate() == speech.sample_rate()),
        Config,
        "impulse response and source sample rates differ"
    );
    let channels = airs.iter().map(|a| fft_convolve(speech.channel(0), a.taps())).collect();
    MultichannelAudio::new(channels, speech.sample_rate())
}
