//! Multi-pulse PRT layout, blind-range coverage and calibration masking.
//!
//! A PRT holds the transmit pulses first (a short unmodulated pulse and a
//! longer chirp), then a receive window that opens one guard interval after
//! the last transmit ends. Calibration traffic (a noise-injection gate and
//! loop-back copies of both transmit pulses) sits inside the receive window.

use crate::assets::AssetRegistry;
use crate::error::{Error, Result};
use crate::signal::{convolve_direct, convolve_fft, gaussian_samples};
use crate::{fmt_db, range_per_sample, SPEED_OF_LIGHT};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_GUARD_S: f64 = 1e-6;
/// Margin above the limiting floor for an echo to count as detectable.
pub const DETECTION_MARGIN_DB: f64 = 10.0;

/// Blind range `c·τ/2` of a pulse lasting `pulse_duration_s`.
pub fn blind_range(pulse_duration_s: f64) -> f64 {
    SPEED_OF_LIGHT * pulse_duration_s / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    TransmitShort,
    TransmitMedium,
    NoiseInjection,
    CalShort,
    CalMedium,
}

impl PulseKind {
    pub fn is_transmit(&self) -> bool {
        matches!(self, PulseKind::TransmitShort | PulseKind::TransmitMedium)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PulseKind::TransmitShort => "transmit_short",
            PulseKind::TransmitMedium => "transmit_medium",
            PulseKind::NoiseInjection => "noise_injection",
            PulseKind::CalShort => "cal_short",
            PulseKind::CalMedium => "cal_medium",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEvent {
    pub kind: PulseKind,
    pub start_s: f64,
    pub duration_s: f64,
    /// Empty for a noise-injection gate.
    #[serde(default)]
    pub waveform_id: String,
    #[serde(default)]
    pub filter_id: String,
    /// Injected level for calibration events.
    #[serde(default)]
    pub level_dbm: Option<f64>,
}

impl PulseEvent {
    pub fn new(kind: PulseKind, start_s: f64, duration_s: f64) -> Self {
        Self {
            kind,
            start_s,
            duration_s,
            waveform_id: String::new(),
            filter_id: String::new(),
            level_dbm: None,
        }
    }

    pub fn with_assets(mut self, waveform_id: &str, filter_id: &str) -> Self {
        self.waveform_id = waveform_id.into();
        self.filter_id = filter_id.into();
        self
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    fn overlaps(&self, other: &PulseEvent) -> bool {
        self.start_s < other.end_s() && other.start_s < self.end_s()
    }

    fn label(&self) -> String {
        format!("{} at {} s", self.kind.as_str(), self.start_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSchedule {
    pub prt_s: f64,
    /// Sorted by start time.
    pub events: Vec<PulseEvent>,
    pub receive_window: (f64, f64),
    pub max_range_m: f64,
}

impl TimingSchedule {
    pub fn transmit_events(&self) -> impl Iterator<Item = &PulseEvent> {
        self.events.iter().filter(|e| e.kind.is_transmit())
    }

    pub fn first(&self, kind: PulseKind) -> Option<&PulseEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }
}

pub fn build_schedule(prt_s: f64, events: Vec<PulseEvent>, max_range_m: f64) -> Result<TimingSchedule> {
    build_schedule_with_guard(prt_s, events, max_range_m, DEFAULT_GUARD_S)
}

/// Validates an event list and derives the receive window, which runs from
/// the last transmit end plus `guard_s` to the end of the PRT (the whole PRT
/// when nothing transmits). The accept/reject decision does not depend on
/// the order of `events`.
pub fn build_schedule_with_guard(
    prt_s: f64,
    mut events: Vec<PulseEvent>,
    max_range_m: f64,
    guard_s: f64,
) -> Result<TimingSchedule> {
    if !(prt_s > 0.0 && prt_s.is_finite()) {
        return Err(Error::InvalidArgument("PRT must be positive".into()));
    }
    if !(guard_s >= 0.0) {
        return Err(Error::InvalidArgument("guard time must be >= 0".into()));
    }
    if !(max_range_m > 0.0 && max_range_m.is_finite()) {
        return Err(Error::RangeError("max range must be positive".into()));
    }
    events.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.kind.cmp(&b.kind))
            .then(a.duration_s.total_cmp(&b.duration_s))
    });

    for e in &events {
        if !(e.start_s >= 0.0 && e.duration_s > 0.0 && e.end_s().is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: start must be >= 0 and duration > 0",
                e.label()
            )));
        }
        if e.end_s() > prt_s {
            return Err(Error::WindowError(format!("{} ends after the PRT", e.label())));
        }
    }

    let (tx, inj): (Vec<&PulseEvent>, Vec<&PulseEvent>) = events.iter().partition(|e| e.kind.is_transmit());
    check_pairwise(&tx)?;
    check_pairwise(&inj)?;

    let window_start = tx
        .iter()
        .map(|e| e.end_s() + guard_s)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0);
    if window_start >= prt_s {
        return Err(Error::WindowError(format!(
            "receive window would open at {window_start} s, after the {prt_s} s PRT"
        )));
    }
    for e in &inj {
        if e.start_s < window_start {
            return Err(Error::WindowError(format!(
                "{} precedes the receive window opening at {window_start} s",
                e.label()
            )));
        }
    }

    let reach = SPEED_OF_LIGHT * (prt_s - window_start) / 2.0;
    if max_range_m > reach {
        return Err(Error::RangeError(format!(
            "max range {max_range_m} m exceeds the {reach} m the receive window can hear"
        )));
    }

    Ok(TimingSchedule {
        prt_s,
        events,
        receive_window: (window_start, prt_s),
        max_range_m,
    })
}

fn check_pairwise(group: &[&PulseEvent]) -> Result<()> {
    // group is sorted by start; any overlap shows up between neighbours
    // once we track the furthest end seen so far
    let mut furthest: Option<&PulseEvent> = None;
    for &e in group {
        if let Some(prev) = furthest {
            if prev.overlaps(e) {
                return Err(Error::OverlapError(format!("{} and {}", prev.label(), e.label())));
            }
        }
        if furthest.is_none_or(|p| e.end_s() > p.end_s()) {
            furthest = Some(e);
        }
    }
    Ok(())
}

/// The default layout: 1 µs short pulse, 20 µs chirp right after it, then a
/// noise gate and loop-back copies of both pulses late in a 1 ms PRT.
pub fn default_events() -> Vec<PulseEvent> {
    vec![
        PulseEvent::new(PulseKind::TransmitShort, 0.0, 1e-6).with_assets("short", "short_matched"),
        PulseEvent::new(PulseKind::TransmitMedium, 1e-6, 20e-6).with_assets("medium", "medium_mismatched"),
        PulseEvent::new(PulseKind::NoiseInjection, 900e-6, 20e-6),
        PulseEvent {
            level_dbm: Some(-30.0),
            ..PulseEvent::new(PulseKind::CalShort, 930e-6, 1e-6).with_assets("short", "short_matched")
        },
        PulseEvent {
            level_dbm: Some(-30.0),
            ..PulseEvent::new(PulseKind::CalMedium, 940e-6, 20e-6).with_assets("medium", "medium_mismatched")
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub pass: bool,
    /// Stitching boundary: blind range of the medium pulse.
    pub boundary_m: f64,
    pub short_blind_m: f64,
    /// Interval the short pulse fills in below the boundary.
    pub covered: Option<(f64, f64)>,
    pub uncovered: Option<(f64, f64)>,
}

/// Checks that the short pulse hears every range the medium pulse is blind to.
pub fn coverage_check(
    schedule: &TimingSchedule,
    short_waveform_duration_s: f64,
    medium_waveform_duration_s: f64,
) -> CoverageReport {
    let boundary = blind_range(medium_waveform_duration_s);
    let short_blind = blind_range(short_waveform_duration_s);
    if medium_waveform_duration_s <= short_waveform_duration_s {
        return CoverageReport {
            pass: true,
            boundary_m: boundary,
            short_blind_m: short_blind,
            covered: None,
            uncovered: None,
        };
    }
    let Some(short) = schedule.first(PulseKind::TransmitShort) else {
        return CoverageReport {
            pass: false,
            boundary_m: boundary,
            short_blind_m: short_blind,
            covered: None,
            uncovered: Some((0.0, boundary)),
        };
    };
    let short_reach = SPEED_OF_LIGHT * (schedule.prt_s - short.start_s) / 2.0;
    if short_reach >= boundary {
        CoverageReport {
            pass: true,
            boundary_m: boundary,
            short_blind_m: short_blind,
            covered: Some((short_blind, boundary)),
            uncovered: None,
        }
    } else {
        CoverageReport {
            pass: false,
            boundary_m: boundary,
            short_blind_m: short_blind,
            covered: Some((short_blind, short_reach)),
            uncovered: Some((short_reach, boundary)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Noise,
    Sidelobe,
}

impl Limit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Limit::Noise => "noise",
            Limit::Sidelobe => "sidelobe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalMaskingRequest {
    /// `-inf` switches the injection off.
    pub injection_dbm: f64,
    /// Receiver noise, mean-square sample units.
    pub noise_power: f64,
    pub seed: u64,
    /// Signed range offsets from the compressed cal pulse peak.
    pub offsets_m: Vec<f64>,
    /// Power (dBm) of a unit mean-square sample.
    pub full_scale_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskingRow {
    pub offset_m: f64,
    pub limit: Limit,
    pub min_detectable_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskingReport {
    pub rows: Vec<MaskingRow>,
    pub noise_floor_dbm: f64,
    /// Gates where the compressed cal pulse is nonzero.
    pub response_support_gates: usize,
    /// Gates where the compressed cal pulse exceeds the noise floor.
    pub sidelobe_limited_gates: usize,
    pub range_per_gate_m: f64,
}

/// Injects the medium calibration pulse into an otherwise empty receive
/// window, compresses it with its registered filter and reports, per range
/// offset, the weakest echo that clears `max(noise floor, cal response)`
/// by [`DETECTION_MARGIN_DB`].
///
/// The cal response is compressed on its own with the direct convolution,
/// so gates outside its support are exactly zero. The noise floor is the
/// mean compressed power of a seeded noise record of the same length.
pub fn simulate_cal_window(
    schedule: &TimingSchedule,
    assets: &AssetRegistry,
    req: &CalMaskingRequest,
) -> Result<MaskingReport> {
    let ev = schedule.first(PulseKind::CalMedium).ok_or(Error::MissingCalEvent)?;
    let wf = assets.waveform(&ev.waveform_id)?;
    let filt = assets.filter(&ev.filter_id)?;
    if !(req.noise_power >= 0.0 && req.noise_power.is_finite()) {
        return Err(Error::InvalidArgument("noise power must be nonnegative".into()));
    }
    if req.injection_dbm.is_nan() || req.injection_dbm == f64::INFINITY {
        return Err(Error::InvalidArgument("injection level must be finite or -inf".into()));
    }
    let fs = wf.sample_rate_hz();
    let gate_m = range_per_sample(fs);
    let (w0, w1) = schedule.receive_window;
    let window_len = ((w1 - w0) * fs).round() as usize;
    let pos = ((ev.start_s - w0) * fs).round() as usize;

    let ref_lag = filt.reference_lag();
    let peak_gain = convolve_direct(wf.samples(), filt.taps())
        .get(ref_lag)
        .map(|v| v.norm_sqr())
        .unwrap_or(0.0);
    if peak_gain == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "filter `{}` has no response at its reference lag for waveform `{}`",
            ev.filter_id, ev.waveform_id
        )));
    }

    let amplitude = 10f64.powf((req.injection_dbm - req.full_scale_dbm) / 20.0);
    let mut record = vec![Complex64::new(0.0, 0.0); window_len.max(1)];
    for (k, &s) in wf.samples().iter().enumerate() {
        if let Some(slot) = record.get_mut(pos + k) {
            *slot = s * amplitude;
        }
    }
    let cal_power: Vec<f64> = convolve_direct(&record, filt.taps())
        .iter()
        .map(|v| v.norm_sqr() / peak_gain)
        .collect();

    let noise_mean = if req.noise_power == 0.0 {
        0.0
    } else {
        let noise = gaussian_samples(record.len(), req.noise_power, req.seed);
        let y = convolve_fft(&noise, filt.taps());
        // steady-state part only: every output sample sees all taps
        let steady = &y[filt.len() - 1..record.len()];
        if steady.is_empty() {
            y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64 / peak_gain
        } else {
            steady.iter().map(|v| v.norm_sqr()).sum::<f64>() / steady.len() as f64 / peak_gain
        }
    };
    let to_dbm = |p: f64| {
        if p == 0.0 {
            f64::NEG_INFINITY
        } else {
            10.0 * p.log10() + req.full_scale_dbm
        }
    };
    let noise_floor_dbm = to_dbm(noise_mean);

    let peak_index = (pos + ref_lag) as i64;
    let rows = req
        .offsets_m
        .iter()
        .map(|&offset_m| {
            let k = peak_index + (offset_m / gate_m).round() as i64;
            let side = usize::try_from(k)
                .ok()
                .and_then(|k| cal_power.get(k))
                .copied()
                .unwrap_or(0.0);
            let (limit, floor) = if side > noise_mean {
                (Limit::Sidelobe, side)
            } else {
                (Limit::Noise, noise_mean)
            };
            MaskingRow {
                offset_m,
                limit,
                min_detectable_dbm: to_dbm(floor) + DETECTION_MARGIN_DB,
            }
        })
        .collect();

    Ok(MaskingReport {
        rows,
        noise_floor_dbm,
        response_support_gates: cal_power.iter().filter(|&&p| p > 0.0).count(),
        sidelobe_limited_gates: cal_power.iter().filter(|&&p| p > noise_mean).count(),
        range_per_gate_m: gate_m,
    })
}

pub const MASKING_CSV_HEADER: [&str; 3] = ["offset_m", "limit", "min_detectable_dbm"];

pub fn write_masking_csv<W: Write>(report: &MaskingReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MASKING_CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.offset_m.to_string(),
            r.limit.as_str().to_string(),
            fmt_db(r.min_detectable_dbm),
        ])?;
    }
    w.flush()?;
    Ok(())
}
