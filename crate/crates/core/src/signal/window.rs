//! Amplitude tapers applied across a pulse.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Amplitude taper applied across a generated pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    /// Taylor taper with `nbar` nearly-equal sidelobes at `sll_db` below
    /// the peak (sign of `sll_db` is ignored).
    Taylor {
        nbar: usize,
        sll_db: f64,
    },
}

impl Window {
    pub fn weights(&self, len: usize) -> Vec<f64> {
        match *self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => hann(len),
            Window::Taylor { nbar, sll_db } => taylor(len, nbar, sll_db.abs()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Window::Taylor { nbar, sll_db } => {
                if nbar < 1 {
                    return Err("taylor nbar must be >= 1".into());
                }
                if !sll_db.is_finite() || sll_db == 0.0 {
                    return Err("taylor sll_db must be finite and nonzero".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Taylor weights, normalized so the largest weight is 1.
fn taylor(len: usize, nbar: usize, sll_db: f64) -> Vec<f64> {
    let a = (10f64.powf(sll_db / 20.0)).acosh() / PI;
    let nb = nbar as f64;
    let sigma2 = nb * nb / (a * a + (nb - 0.5).powi(2));

    let coeffs: Vec<f64> = (1..nbar)
        .map(|m| {
            let mf = m as f64;
            let num: f64 = (1..nbar)
                .map(|i| 1.0 - mf * mf / sigma2 / (a * a + (i as f64 - 0.5).powi(2)))
                .product();
            let den: f64 = (1..nbar)
                .filter(|&i| i != m)
                .map(|i| 1.0 - mf * mf / (i * i) as f64)
                .product();
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sign * num / (2.0 * den)
        })
        .collect();

    let n = len as f64;
    let mut w: Vec<f64> = (0..len)
        .map(|k| {
            let x = (k as f64 - (n - 1.0) / 2.0) / n;
            1.0 + 2.0
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, f)| f * (2.0 * PI * (m + 1) as f64 * x).cos())
                    .sum::<f64>()
        })
        .collect();
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    if peak > 0.0 {
        w.iter_mut().for_each(|v| *v /= peak);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_endpoints_and_symmetry() {
        let w = Window::Hann.weights(9);
        assert!(w[0].abs() < 1e-15 && w[8].abs() < 1e-15);
        assert!((w[4] - 1.0).abs() < 1e-15);
        for k in 0..9 {
            assert!((w[k] - w[8 - k]).abs() < 1e-15);
        }
        assert_eq!(Window::Hann.weights(1), vec![1.0]);
    }

    #[test]
    fn taylor_is_symmetric_peaked_and_positive() {
        let w = Window::Taylor { nbar: 4, sll_db: 35.0 }.weights(64);
        for k in 0..64 {
            assert!((w[k] - w[63 - k]).abs() < 1e-12);
            assert!(w[k] > 0.0 && w[k] <= 1.0 + 1e-12);
        }
        // edges sit well below the centre for a 35 dB taper
        assert!(w[0] < 0.5);
    }

    #[test]
    fn taylor_nbar_one_is_flat() {
        let w = Window::Taylor { nbar: 1, sll_db: 30.0 }.weights(16);
        assert!(w.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
