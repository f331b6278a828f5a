//! Unitary FFT helpers (1/sqrt(N) in both directions) over a per-thread
//! planner cache.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn scale(buf: &mut [Complex64]) {
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// In-place unitary forward DFT.
pub fn fft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
    scale(buf);
}

/// In-place unitary inverse DFT.
pub fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    scale(buf);
}

/// Signed frequency of FFT bin `k` for a transform of size `n`.
pub fn bin_frequency(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT bin holding signed frequency `f`.
pub fn frequency_bin(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_round_trip() {
        let mut x: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new(i as f64, -(i as f64) / 3.0))
            .collect();
        let orig = x.clone();
        let e0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        fft(&mut x);
        let e1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-9 * e0);
        ifft(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bin_indexing() {
        assert_eq!(bin_frequency(3, 8), 3);
        assert_eq!(bin_frequency(4, 8), -4);
        assert_eq!(bin_frequency(7, 8), -1);
        assert_eq!(frequency_bin(-1, 8), 7);
        assert_eq!(frequency_bin(2, 8), 2);
    }
}
