use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

/// Full linear convolution via zero-padded FFT; output length `a + b - 1`.
pub fn fft_convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        return direct_convolve(a, b);
    }
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[T]| {
        let mut v = vec![Complex::default(); n];
        for (slot, &s) in v.iter_mut().zip(x) {
            slot.re = s;
        }
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let norm = T::one() / T::from_usize_lossy(n);
    fa[..out_len].iter().map(|c| c.re * norm).collect()
}

pub(crate) fn direct_convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let b: Vec<f64> = (0..77).map(|i| ((i * 104729) % 13) as f64 / 6.0 - 1.0).collect();
        let fast = fft_convolve(&a, &b);
        let slow = direct_convolve(&a, &b);
        assert_eq!(fast.len(), 376);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(fft_convolve::<f64>(&[], &b).is_empty());
    }
}
