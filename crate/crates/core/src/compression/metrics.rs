use super::FilterTaps;
use crate::error::{Error, Result};
use crate::fmt_db;
use crate::signal::{convolve_direct, IqSignal};
use serde::Serialize;

/// Sidelobe and SNR figures of a waveform/compressor pair.
///
/// `psl_db` and `isl_db` are `-inf` when the response has no sidelobe energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionMetrics {
    pub psl_db: f64,
    pub isl_db: f64,
    pub mainlobe_width_samples: f64,
    pub mainlobe_width_m: f64,
    pub mismatch_loss_db: f64,
    pub processing_gain_db: f64,
}

impl CompressionMetrics {
    pub const CSV_HEADER: [&'static str; 6] = [
        "psl_db",
        "isl_db",
        "mainlobe_width_samples",
        "mainlobe_width_m",
        "mismatch_loss_db",
        "processing_gain_db",
    ];

    pub fn csv_record(&self) -> [String; 6] {
        [
            fmt_db(self.psl_db),
            fmt_db(self.isl_db),
            self.mainlobe_width_samples.to_string(),
            self.mainlobe_width_m.to_string(),
            self.mismatch_loss_db.to_string(),
            self.processing_gain_db.to_string(),
        ]
    }
}

/// Metrics of the full (direct) convolution of `waveform` with `taps`.
///
/// The mainlobe used to split sidelobe from mainlobe energy runs from the
/// global peak outward while the magnitude keeps falling, i.e. to the first
/// null on each side. `mainlobe_width_samples` is the separate -3 dB width,
/// found by linear interpolation of power between samples.
///
/// Mismatch loss is the white-noise output SNR penalty relative to the
/// matched filter: `|y_peak|² / (‖h‖² ‖s‖²)`, which Cauchy–Schwarz bounds by 1.
/// Processing gain is `10 log10(N)` minus that loss.
pub fn compression_metrics(
    waveform: &IqSignal,
    taps: &FilterTaps,
    range_m_per_sample: f64,
) -> Result<CompressionMetrics> {
    if waveform.is_empty() {
        return Err(Error::EmptySignal("metrics waveform".into()));
    }
    if !(range_m_per_sample > 0.0 && range_m_per_sample.is_finite()) {
        return Err(Error::InvalidArgument("range per sample must be positive".into()));
    }
    let y = convolve_direct(waveform.samples(), taps.taps());
    let power: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
    let (peak_idx, peak) =
        power
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, p)| if p > best.1 { (k, p) } else { best });
    if peak <= 0.0 {
        return Err(Error::InvalidArgument("compressed response is identically zero".into()));
    }

    let (lo, hi) = mainlobe_span(&power, peak_idx);
    let main_energy: f64 = power[lo..=hi].iter().sum();
    let side_energy: f64 = power[..lo].iter().chain(&power[hi + 1..]).sum();
    let side_peak = power[..lo].iter().chain(&power[hi + 1..]).copied().fold(0.0, f64::max);

    let (psl_db, isl_db) = if side_energy == 0.0 {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    } else {
        (
            10.0 * (side_peak / peak).log10(),
            10.0 * (side_energy / main_energy).log10(),
        )
    };

    let width = half_power_width(&power, peak_idx);

    let snr_ratio = peak / (taps.energy() * waveform.energy());
    let mut mismatch_loss_db = -10.0 * snr_ratio.log10();
    // equality case of Cauchy-Schwarz up to round-off
    if mismatch_loss_db.abs() < 1e-12 {
        mismatch_loss_db = 0.0;
    }

    Ok(CompressionMetrics {
        psl_db,
        isl_db,
        mainlobe_width_samples: width,
        mainlobe_width_m: width * range_m_per_sample,
        mismatch_loss_db,
        processing_gain_db: 10.0 * (waveform.len() as f64).log10() - mismatch_loss_db,
    })
}

/// Indices `lo..=hi` of the peak and the monotonically falling samples on
/// each side of it.
pub(crate) fn mainlobe_span(power: &[f64], peak_idx: usize) -> (usize, usize) {
    let mut lo = peak_idx;
    while lo > 0 && power[lo - 1] < power[lo] {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < power.len() && power[hi + 1] < power[hi] {
        hi += 1;
    }
    (lo, hi)
}

/// -3 dB width in samples, interpolating power linearly between samples.
/// Samples beyond either end of the record count as zero.
fn half_power_width(power: &[f64], peak_idx: usize) -> f64 {
    let half = power[peak_idx] / 2.0;
    let at = |k: isize| -> f64 {
        if k < 0 || k as usize >= power.len() {
            0.0
        } else {
            power[k as usize]
        }
    };
    let p = peak_idx as isize;
    let mut k = p + 1;
    while at(k) > half {
        k += 1;
    }
    let (a, b) = (at(k - 1), at(k));
    let right = (k - 1) as f64 + (a - half) / (a - b);
    let mut k = p - 1;
    while at(k) > half {
        k -= 1;
    }
    let (a, b) = (at(k + 1), at(k));
    let left = (k + 1) as f64 - (a - half) / (a - b);
    right - left
}
