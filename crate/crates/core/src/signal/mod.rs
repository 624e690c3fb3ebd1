//! Time/frequency plumbing: audio buffers, STFT, band filters and the ISO
//! band grid.

mod audio;
mod butterworth;
mod conv;
mod iso;
mod stft;
mod wav;

pub use audio::MultichannelAudio;
pub use butterworth::{butterworth_bandpass, Biquad, SosFilter};
pub use conv::fft_convolve;
pub use iso::{iso_third_octave_grid, IsoBand, IsoBandGrid};
pub use stft::{stft_forward, stft_inverse, SpectralFrameSeries, Stft, StftConfig, Window};
pub use wav::{read_wav, write_wav, WavFormat};
