//! Butterworth band-pass and high-pass filters as cascaded second-order
//! sections.
//!
//! For band-passes `order` is the order of the band-pass filter itself, so an
//! 8th-order band has a 4th-order low-pass prototype and four biquads.

use num_complex::Complex;

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::MultichannelAudio;

/// Normalized biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Real> Biquad<T> {
    fn process_in_place(&self, x: &mut [T]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut s1, mut s2) = (T::zero(), T::zero());
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + s1;
            s1 = b1 * input - a1 * y + s2;
            s2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    fn response(&self, omega: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let f = |v: T| v.as_f64();
        (f(self.b[0]) + z1 * f(self.b[1]) + z2 * f(self.b[2])) / (1.0 + z1 * f(self.a[0]) + z2 * f(self.a[1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter<T> {
    sections: Vec<Biquad<T>>,
}

impl<T: Real> SosFilter<T> {
    pub fn bandpass(low: f64, high: f64, order: usize, sample_rate: u32) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        ensure!(
            low > 0.0 && low < high && high < nyquist,
            Domain,
            "band edges {low}..{high} Hz must satisfy 0 < low < high < {nyquist}"
        );
        ensure!(
            order >= 2 && order.is_multiple_of(2),
            Domain,
            "band-pass order must be even and at least 2, got {order}"
        );
        let fs = f64::from(sample_rate);
        let n = order / 2;
        let wl = (std::f64::consts::PI * low / fs).tan();
        let wh = (std::f64::consts::PI * high / fs).tan();
        let w0_sq = wl * wh;
        let bw = wh - wl;

        let mut sections = Vec::with_capacity(n);
        for k in 0..n {
            let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let proto = Complex::from_polar(1.0, theta);
            let pb = proto * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (1.0 + s) / (1.0 - s);
                // each conjugate pair shows up once with positive imaginary part
                if z.im > 0.0 {
                    sections.push(Biquad {
                        b: [T::one(), T::zero(), -T::one()],
                        a: [T::lit(-2.0 * z.re), T::lit(z.norm_sqr())],
                    });
                }
            }
        }
        ensure!(sections.len() == n, Domain, "band {low}..{high} Hz too narrow to realize at {sample_rate} Hz");

        let center = 2.0 * w0_sq.sqrt().atan();
        let g = sections.iter().map(|s| s.response(center)).fold(Complex::new(1.0, 0.0), |acc, h| acc * h).norm();
        let per_section = T::lit(g.powf(-1.0 / n as f64));
        for s in &mut sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(Self { sections })
    }

    /// Even-order high-pass with unity gain at Nyquist.
    pub fn highpass(cutoff: f64, order: usize, sample_rate: u32) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        ensure!(cutoff > 0.0 && cutoff < nyquist, Domain, "cutoff {cutoff} Hz must lie in (0, {nyquist})");
        ensure!(
            order >= 2 && order.is_multiple_of(2),
            Domain,
            "high-pass order must be even and at least 2, got {order}"
        );
        let wc = (std::f64::consts::PI * cutoff / f64::from(sample_rate)).tan();
        let mut sections: Vec<Biquad<T>> = (0..order / 2)
            .map(|k| {
                let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
                let s = wc / Complex::from_polar(1.0, theta);
                let z = (1.0 + s) / (1.0 - s);
                Biquad { b: [T::one(), T::lit(-2.0), T::one()], a: [T::lit(-2.0 * z.re), T::lit(z.norm_sqr())] }
            })
            .collect();
        for s in &mut sections {
            let g = s.response(std::f64::consts::PI).norm();
            for b in &mut s.b {
                *b /= T::lit(g);
            }
        }
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad<T>] {
        &self.sections
    }

    /// Zero-state filtering.
    pub fn process(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.process_in_place(&mut y);
        }
        y
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64, sample_rate: u32) -> Complex<f64> {
        let omega = 2.0 * std::f64::consts::PI * freq / f64::from(sample_rate);
        self.sections.iter().fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }
}

/// Band-pass filters every channel with a zero-state Butterworth cascade.
pub fn butterworth_bandpass<T: Real>(
    audio: &MultichannelAudio<T>,
    low: f64,
    high: f64,
    order: usize,
) -> Result<MultichannelAudio<T>> {
    let filter = SosFilter::bandpass(low, high, order, audio.sample_rate())?;
    Ok(audio.map_channels(|c| filter.process(c)))
}
