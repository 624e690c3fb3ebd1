//! WAV reading and writing. Integer PCM is normalized to `[-1, 1]`.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{ensure, Error, Result};
use crate::scalar::Real;
use crate::signal::MultichannelAudio;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Int24,
    Int32,
    Float32,
}

impl WavFormat {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavFormat::Int16 => (16, SampleFormat::Int),
            WavFormat::Int24 => (24, SampleFormat::Int),
            WavFormat::Int32 => (32, SampleFormat::Int),
            WavFormat::Float32 => (32, SampleFormat::Float),
        };
        WavSpec { channels, sample_rate, bits_per_sample, sample_format }
    }
}

pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<MultichannelAudio<T>> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let nch = usize::from(spec.channels);
    ensure!(nch > 0, Shape, "wav file has no channels");
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?
        }
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader.samples::<i32>().map(|s| s.map(|v| f64::from(v) * scale)).collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => return Err(Error::Config(format!("unsupported wav sample format {fmt:?}/{bits}"))),
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / nch); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (c, &s) in channels.iter_mut().zip(frame) {
            c.push(T::lit(s));
        }
    }
    MultichannelAudio::new(channels, spec.sample_rate)
}

/// Writes `audio`; integer formats clip to full scale.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, audio: &MultichannelAudio<T>, format: WavFormat) -> Result<()> {
    let nch = u16::try_from(audio.num_channels()).map_err(|_| Error::Shape("too many channels for wav".into()))?;
    let mut writer = WavWriter::create(path.as_ref(), format.spec(nch, audio.sample_rate()))?;
    for n in 0..audio.len() {
        for ch in audio.channels() {
            let v = ch[n].as_f64();
            match format {
                WavFormat::Float32 => writer.write_sample(v as f32)?,
                WavFormat::Int16 => writer.write_sample(quantize(v, 16) as i16)?,
                WavFormat::Int24 => writer.write_sample(quantize(v, 24))?,
                WavFormat::Int32 => writer.write_sample(quantize(v, 32))?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

fn quantize(v: f64, bits: u32) -> i32 {
    let full = f64::from(1u32 << (bits - 1));
    (v * full).round().clamp(-full, full - 1.0) as i32
}
