use super::{DesignKind, FilterTaps, DEFAULT_TAP_BUDGET};
use crate::error::{Error, Result};
use crate::signal::IqSignal;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Relative ridge added to the normal equations, scaled by the average
/// diagonal of the unweighted Gram matrix (the waveform energy).
const RIDGE: f64 = 1e-10;
/// Largest accepted condition estimate of the regularized system.
const MAX_CONDITION: f64 = 1e12;

/// Time-reversed conjugate of the waveform, scaled to unit energy.
pub fn matched_filter(waveform: &IqSignal) -> Result<FilterTaps> {
    matched_filter_with_budget(waveform, DEFAULT_TAP_BUDGET)
}

pub fn matched_filter_with_budget(waveform: &IqSignal, tap_budget: usize) -> Result<FilterTaps> {
    let n = waveform.len();
    if n == 0 {
        return Err(Error::EmptySignal("matched filter waveform".into()));
    }
    if n > tap_budget {
        return Err(Error::BudgetExceeded {
            length: n,
            budget: tap_budget,
        });
    }
    let energy = waveform.energy();
    if energy == 0.0 {
        return Err(Error::InvalidArgument("waveform has zero energy".into()));
    }
    let scale = 1.0 / energy.sqrt();
    let taps = waveform.samples().iter().rev().map(|s| s.conj() * scale).collect();
    FilterTaps::new(taps, DesignKind::Matched, "", n - 1, tap_budget)
}

/// Parameters of a least-squares mismatched filter design.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchedDesign {
    pub filter_length: usize,
    /// Lags within `reference_lag ± mainlobe_halfwidth` are left free.
    pub mainlobe_halfwidth: usize,
    /// Optional per-lag weights over the full `N + L - 1` output; entries
    /// inside the mainlobe window are ignored. Defaults to all ones.
    pub sidelobe_weights: Option<Vec<f64>>,
    pub tap_budget: usize,
}

impl MismatchedDesign {
    pub fn new(filter_length: usize, mainlobe_halfwidth: usize) -> Self {
        Self {
            filter_length,
            mainlobe_halfwidth,
            sidelobe_weights: None,
            tap_budget: DEFAULT_TAP_BUDGET,
        }
    }

    /// Default mainlobe halfwidth for a chirp of bandwidth `bandwidth_hz`
    /// sampled at `sample_rate_hz`: one Rayleigh cell, `ceil(fs / B)` samples.
    pub fn default_halfwidth(sample_rate_hz: f64, bandwidth_hz: f64) -> usize {
        if bandwidth_hz <= 0.0 {
            return 0;
        }
        (sample_rate_hz / bandwidth_hz).ceil() as usize
    }

    /// Output lag constrained to unit response for a waveform of `waveform_len` samples.
    pub fn reference_lag(&self, waveform_len: usize) -> usize {
        waveform_len - 1 + (self.filter_length - waveform_len) / 2
    }
}

/// Minimizes the weighted sidelobe energy of `waveform ⊛ h` subject to a
/// unit response at the reference lag.
///
/// With `A` the `(N+L-1) x L` convolution matrix, `W` the lag weights (zero
/// inside the mainlobe window) and `c` the conjugated reference row of `A`,
/// the optimum is `h = Q⁻¹c / (cᴴQ⁻¹c)` where `Q = AᴴWA`. `Q` is assembled
/// from the Toeplitz autocorrelation minus the rows whose weight differs
/// from one, then solved by Cholesky.
pub fn design_mismatched_filter(waveform: &IqSignal, design: &MismatchedDesign) -> Result<FilterTaps> {
    let s = waveform.samples();
    let n = s.len();
    let l = design.filter_length;
    if n == 0 {
        return Err(Error::EmptySignal("mismatched filter waveform".into()));
    }
    if l > design.tap_budget {
        return Err(Error::BudgetExceeded {
            length: l,
            budget: design.tap_budget,
        });
    }
    if l < n {
        return Err(Error::LengthTooShort {
            filter_length: l,
            waveform_length: n,
        });
    }
    let weights = lag_weights(design, n)?;
    let k0 = design.reference_lag(n);

    let zero = Complex64::new(0.0, 0.0);
    let energy: f64 = waveform.energy();
    if energy == 0.0 {
        return Err(Error::InvalidArgument("waveform has zero energy".into()));
    }

    // r[d] = sum_m conj(s[m]) s[m + d], d >= 0
    let autocorr: Vec<Complex64> = (0..n)
        .map(|d| (0..n - d).map(|i| s[i].conj() * s[i + d]).sum())
        .collect();

    // Q[i][j] = r[i - j] for the unweighted Gram matrix
    let mut q = DMatrix::<Complex64>::from_fn(l, l, |i, j| {
        let d = i.abs_diff(j);
        if d >= n {
            zero
        } else if i >= j {
            autocorr[d]
        } else {
            autocorr[d].conj()
        }
    });

    // Q -= (1 - w_k) conj(a_k)ᵀ a_k for every lag whose weight is not one.
    // Row k of A holds s[k - j] for j in max(0, k-n+1)..=min(k, l-1).
    for (k, &w) in weights.iter().enumerate() {
        let deficit = 1.0 - w;
        if deficit == 0.0 {
            continue;
        }
        let j_lo = k.saturating_sub(n - 1);
        let j_hi = k.min(l - 1);
        for i in j_lo..=j_hi {
            let ai = s[k - i].conj() * deficit;
            for j in j_lo..=j_hi {
                q[(i, j)] -= ai * s[k - j];
            }
        }
    }

    let ridge = RIDGE * energy;
    for i in 0..l {
        q[(i, i)] += Complex64::new(ridge, 0.0);
    }

    let chol = q.cholesky().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag
        .iter()
        .map(|d| d.re)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let condition = (dmax / dmin).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }

    // c_j = conj(A[k0][j]) = conj(s[k0 - j])
    let c =
        nalgebra::DVector::<Complex64>::from_fn(l, |j, _| if k0 >= j && k0 - j < n { s[k0 - j].conj() } else { zero });
    let x = chol.solve(&c);
    let denom: Complex64 = c.iter().zip(x.iter()).map(|(ci, xi)| ci.conj() * xi).sum();
    if denom.norm() == 0.0 || !denom.re.is_finite() {
        return Err(Error::SingularSystem { condition });
    }
    let taps: Vec<Complex64> = x.iter().map(|&v| v / denom).collect();
    FilterTaps::new(taps, DesignKind::Mismatched, "", k0, design.tap_budget)
}

fn lag_weights(design: &MismatchedDesign, n: usize) -> Result<Vec<f64>> {
    let m = n + design.filter_length - 1;
    let k0 = design.reference_lag(n);
    let mut w = match &design.sidelobe_weights {
        None => vec![1.0; m],
        Some(v) => {
            if v.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "sidelobe weights need {m} entries (N + L - 1), got {}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidArgument(
                    "sidelobe weights must be finite and nonnegative".into(),
                ));
            }
            v.clone()
        }
    };
    let lo = k0.saturating_sub(design.mainlobe_halfwidth);
    let hi = (k0 + design.mainlobe_halfwidth).min(m - 1);
    w[lo..=hi].iter_mut().for_each(|x| *x = 0.0);
    Ok(w)
}
