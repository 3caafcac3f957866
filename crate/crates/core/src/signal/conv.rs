//! Full linear convolution, direct and FFT based.
//!
//! Output index `k` of the full convolution of an `N`-sample signal with
//! `L` taps is `sum_j x[k - j] * h[j]` for `k` in `0..N + L - 1`. A
//! zero-delay echo compressed with a matched filter therefore peaks at
//! `N - 1`; every peak index in the crate follows this convention.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Brute-force `O(N*L)` convolution. Exact zeros stay exact.
pub fn convolve_direct(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            y[i + j] += xi * hj;
        }
    }
    y
}

/// FFT convolution. Short inputs use one transform of the padded pair;
/// long signals are processed with overlap-add blocks sized to the taps.
pub fn convolve_fft(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let single = out_len.next_power_of_two();
    let block_fft = (4 * h.len()).next_power_of_two();
    if x.len() <= 2 * block_fft || single <= block_fft {
        return fft_block(x, h, single, out_len);
    }

    let block = block_fft - h.len() + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(block_fft);
    let inv = planner.plan_fft_inverse(block_fft);

    let mut hspec = vec![Complex64::new(0.0, 0.0); block_fft];
    hspec[..h.len()].copy_from_slice(h);
    fwd.process(&mut hspec);

    let scale = 1.0 / block_fft as f64;
    let mut y = vec![Complex64::new(0.0, 0.0); out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); block_fft];
    for (b, chunk) in x.chunks(block).enumerate() {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        buf[..chunk.len()].copy_from_slice(chunk);
        fwd.process(&mut buf);
        buf.iter_mut().zip(&hspec).for_each(|(a, &s)| *a *= s);
        inv.process(&mut buf);
        let start = b * block;
        let valid = (chunk.len() + h.len() - 1).min(out_len - start);
        for (dst, &v) in y[start..start + valid].iter_mut().zip(&buf[..valid]) {
            *dst += v * scale;
        }
    }
    y
}

fn fft_block(x: &[Complex64], h: &[Complex64], n: usize, out_len: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut a = vec![Complex64::new(0.0, 0.0); n];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    b[..h.len()].copy_from_slice(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, &q)| *p *= q);
    inv.process(&mut a);

    let scale = 1.0 / n as f64;
    a.truncate(out_len);
    a.iter_mut().for_each(|v| *v *= scale);
    a
}
