use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Unnormalized in-place transform.
pub(crate) fn fft_inplace(buf: &mut [Complex64], forward: bool) {
    plan(buf.len(), forward).process(buf);
}

pub(crate) fn scale(buf: &mut [Complex64], k: f64) {
    for v in buf {
        *v *= k;
    }
}

pub(crate) fn energy(buf: &[Complex64]) -> f64 {
    buf.iter().map(|v| v.norm_sqr()).sum()
}

/// Linear convolution through one zero-padded transform pair.
pub(crate) fn fft_convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let n = fast_len(out_len);
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut b = a.clone();
    a[..x.len()].copy_from_slice(x);
    b[..h.len()].copy_from_slice(h);
    fft_inplace(&mut a, true);
    fft_inplace(&mut b, true);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    fft_inplace(&mut a, false);
    a.truncate(out_len);
    scale(&mut a, 1.0 / n as f64);
    a
}

/// Next length of the form 2^a 3^b at or above `n`.
pub(crate) fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut v = p3;
        while v < n {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

pub(crate) fn db10(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(-300.0)
    } else {
        -300.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_len_is_smooth_and_not_smaller() {
        for n in [1usize, 5, 100, 1000, 4097, 12289] {
            let f = fast_len(n);
            assert!(f >= n);
            let mut v = f;
            while v % 2 == 0 {
                v /= 2;
            }
            while v % 3 == 0 {
                v /= 3;
            }
            assert_eq!(v, 1);
        }
        assert_eq!(fast_len(4097), 4374);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let x: Vec<Complex64> = (0..37).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let h: Vec<Complex64> = (0..11).map(|i| Complex64::new(1.0 / (i + 1) as f64, -0.1 * i as f64)).collect();
        let a = fft_convolve(&x, &h);
        let b = crate::fcfb::linear_convolve(&x, &h);
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
