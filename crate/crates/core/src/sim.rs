//! Point-target scenarios run through the transmit schedule, with
//! short/medium profile stitching and peak detection.

use crate::assets::AssetRegistry;
use crate::error::{Error, Result};
use crate::iqfile::{self, write_atomic, OutputFormat};
use crate::signal::{convolve_direct, derive_seed, gaussian_samples, nco_mix, IqSignal};
use crate::timing::{blind_range, PulseKind, TimingSchedule};
use crate::{fmt_db, range_per_sample, SPEED_OF_LIGHT};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointTarget {
    pub range_m: f64,
    /// Echo power at the receiver input.
    pub echo_power_dbm: f64,
    #[serde(default)]
    pub doppler_hz: f64,
}

impl PointTarget {
    pub fn new(range_m: f64, echo_power_dbm: f64) -> Self {
        Self {
            range_m,
            echo_power_dbm,
            doppler_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub targets: Vec<PointTarget>,
    /// Mean-square noise per complex sample.
    pub noise_power: f64,
    pub seed: u64,
    pub schedule_ref: String,
    pub sample_rate_hz: f64,
    /// Power (dBm) of a unit mean-square sample.
    pub full_scale_dbm: f64,
    pub detection_threshold_db: f64,
}

impl Scenario {
    pub fn new(sample_rate_hz: f64) -> Self {
        Self {
            targets: Vec::new(),
            noise_power: 0.0,
            seed: 0,
            schedule_ref: "default".into(),
            sample_rate_hz,
            full_scale_dbm: 0.0,
            detection_threshold_db: 10.0,
        }
    }

    pub fn validate(&self, max_range_m: f64) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidArgument("noise power must be nonnegative".into()));
        }
        if !(self.detection_threshold_db > 0.0) {
            return Err(Error::InvalidArgument("detection threshold must be positive".into()));
        }
        for t in &self.targets {
            if !(t.range_m > 0.0 && t.range_m <= max_range_m) {
                return Err(Error::RangeError(format!(
                    "target range {} m outside (0, {max_range_m}] m",
                    t.range_m
                )));
            }
            if t.echo_power_dbm.is_nan() || t.echo_power_dbm == f64::INFINITY || !t.doppler_hz.is_finite() {
                return Err(Error::InvalidArgument("target power/doppler must be finite".into()));
            }
            if t.doppler_hz.abs() >= self.sample_rate_hz / 2.0 {
                return Err(Error::NyquistViolation(format!(
                    "doppler {} Hz at sample rate {} Hz",
                    t.doppler_hz, self.sample_rate_hz
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileGate {
    pub range_m: f64,
    pub power_db: f64,
    pub pulse_kind: PulseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub range_m: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub range_profile: Vec<ProfileGate>,
    pub detections: Vec<Detection>,
    pub per_pulse_profiles: BTreeMap<PulseKind, Vec<ProfileGate>>,
    /// Compressed first-look record per transmit pulse, gate 0 first.
    pub compressed: BTreeMap<PulseKind, IqSignal>,
    pub stitch_boundary_m: f64,
}

/// Simulates every transmit event of `schedule` against the scenario targets.
///
/// Each target sits at an integer gate, `round(2r/c·fs)`. With several
/// targets the record is synthesised once per target (looks), target `i`
/// carrying phase `exp(j2π·i·p/P)` in look `p`, and the profile is the mean
/// power over looks. Cross terms cancel exactly, so targets add in power as
/// independent scatterers do.
///
/// Power is referenced to the zero-delay compressed peak: a noiseless target
/// reads back its `echo_power_dbm` at its own gate.
///
/// Detection runs on each stitched segment separately, since the short and
/// medium pulses see different compressed noise levels.
pub fn run_scenario(
    scenario: &Scenario,
    schedule: &TimingSchedule,
    assets: &AssetRegistry,
) -> Result<SimulationResult> {
    scenario.validate(schedule.max_range_m)?;
    let fs = scenario.sample_rate_hz;
    let gate_m = range_per_sample(fs);
    let n_gates = (schedule.max_range_m / gate_m).floor() as usize + 1;
    let looks = scenario.targets.len().max(1);

    let mut per_pulse = BTreeMap::new();
    let mut compressed = BTreeMap::new();
    let mut durations = BTreeMap::new();
    for (event_idx, ev) in schedule.events.iter().enumerate().filter(|(_, e)| e.kind.is_transmit()) {
        let wf = assets.waveform(&ev.waveform_id)?;
        let filt = assets.filter(&ev.filter_id)?;
        if wf.sample_rate_hz() != fs {
            return Err(Error::InconsistentRates(format!(
                "waveform `{}` at {} Hz, scenario at {fs} Hz",
                ev.waveform_id,
                wf.sample_rate_hz()
            )));
        }
        let peak_gain = convolve_direct(wf.samples(), filt.taps())
            .get(filt.reference_lag())
            .map(|v| v.norm_sqr())
            .unwrap_or(0.0);
        if peak_gain == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "filter `{}` has no response at its reference lag",
                ev.filter_id
            )));
        }

        let echoes = scenario
            .targets
            .iter()
            .map(|t| {
                let shifted = if t.doppler_hz == 0.0 {
                    wf.clone()
                } else {
                    nco_mix(wf, t.doppler_hz)?
                };
                let amp = 10f64.powf((t.echo_power_dbm - scenario.full_scale_dbm) / 20.0);
                let delay = (2.0 * t.range_m / SPEED_OF_LIGHT * fs).round() as usize;
                Ok((delay, amp, shifted))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = wf.len();
        let record_len = n_gates + n;
        let mut power = vec![0.0; n_gates];
        let mut first_look = Vec::new();
        for look in 0..looks {
            let mut record = vec![Complex64::new(0.0, 0.0); record_len];
            for (i, (delay, amp, echo)) in echoes.iter().enumerate() {
                let phase = Complex64::from_polar(*amp, 2.0 * PI * (i * look) as f64 / looks as f64);
                for (k, &s) in echo.samples().iter().enumerate() {
                    if let Some(slot) = record.get_mut(delay + k) {
                        *slot += s * phase;
                    }
                }
            }
            if scenario.noise_power > 0.0 {
                let seed = derive_seed(scenario.seed, (event_idx * looks + look) as u64);
                for (slot, v) in record
                    .iter_mut()
                    .zip(gaussian_samples(record_len, scenario.noise_power, seed))
                {
                    *slot += v;
                }
            }
            // receiver is off while this pulse transmits
            for slot in record.iter_mut().take(n) {
                *slot = Complex64::new(0.0, 0.0);
            }
            let y = convolve_direct(&record, filt.taps());
            let gates = &y[filt.reference_lag()..filt.reference_lag() + n_gates];
            for (acc, v) in power.iter_mut().zip(gates) {
                *acc += v.norm_sqr();
            }
            if look == 0 {
                first_look = gates.to_vec();
            }
        }
        let profile: Vec<ProfileGate> = power
            .iter()
            .enumerate()
            .map(|(g, &p)| {
                let p = p / looks as f64 / peak_gain;
                ProfileGate {
                    range_m: g as f64 * gate_m,
                    power_db: if p == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        10.0 * p.log10() + scenario.full_scale_dbm
                    },
                    pulse_kind: ev.kind,
                }
            })
            .collect();
        per_pulse.insert(ev.kind, profile);
        compressed.insert(ev.kind, IqSignal::new(first_look, fs)?);
        durations.insert(ev.kind, wf.duration_s());
    }

    let (range_profile, boundary) = stitch(&per_pulse, &durations)?;
    // each stitched segment has its own noise gain, so its own floor
    let mut detections = Vec::new();
    let mut start = 0;
    while start < range_profile.len() {
        let kind = range_profile[start].pulse_kind;
        let end = range_profile[start..]
            .iter()
            .position(|g| g.pulse_kind != kind)
            .map_or(range_profile.len(), |k| start + k);
        let values: Vec<f64> = range_profile[start..end].iter().map(|g| g.power_db).collect();
        detections.extend(
            detect_peaks(&values, scenario.detection_threshold_db)
                .into_iter()
                .map(|i| Detection {
                    range_m: range_profile[start + i].range_m,
                    power_dbm: range_profile[start + i].power_db,
                }),
        );
        start = end;
    }

    Ok(SimulationResult {
        range_profile,
        detections,
        per_pulse_profiles: per_pulse,
        compressed,
        stitch_boundary_m: boundary,
    })
}

fn stitch(
    per_pulse: &BTreeMap<PulseKind, Vec<ProfileGate>>,
    durations: &BTreeMap<PulseKind, f64>,
) -> Result<(Vec<ProfileGate>, f64)> {
    let short = per_pulse.get(&PulseKind::TransmitShort);
    let medium = per_pulse.get(&PulseKind::TransmitMedium);
    match (short, medium) {
        (Some(s), Some(m)) => {
            let boundary = blind_range(durations[&PulseKind::TransmitMedium]);
            let out = s
                .iter()
                .zip(m)
                .map(|(a, b)| if a.range_m < boundary { *a } else { *b })
                .collect();
            Ok((out, boundary))
        }
        (Some(only), None) | (None, Some(only)) => Ok((only.clone(), 0.0)),
        (None, None) => Err(Error::InvalidArgument("schedule has no transmit events".into())),
    }
}

/// Gate indices of local maxima at least `threshold_db_above_floor` above
/// the median of `profile`.
///
/// A gate is a local maximum when no neighbour exceeds it. Runs of adjacent
/// candidates collapse to their largest member, the earliest on ties.
pub fn detect_peaks(profile: &[f64], threshold_db_above_floor: f64) -> Vec<usize> {
    if profile.is_empty() {
        return Vec::new();
    }
    let mut sorted = profile.to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[(sorted.len() - 1) / 2];

    let candidates = (0..profile.len()).filter(|&i| {
        let v = profile[i];
        let left = i.checked_sub(1).map_or(f64::NEG_INFINITY, |j| profile[j]);
        let right = profile.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
        v.is_finite() && v >= left && v >= right && v - floor >= threshold_db_above_floor
    });

    let mut out: Vec<usize> = Vec::new();
    let mut last: Option<usize> = None;
    for i in candidates {
        match (last, out.last_mut()) {
            (Some(prev), Some(best)) if i == prev + 1 => {
                if profile[i] > profile[*best] {
                    *best = i;
                }
            }
            _ => out.push(i),
        }
        last = Some(i);
    }
    out
}

/// Writes the stitched profile to `out` as CSV, or, for [`OutputFormat::Raw`],
/// each pulse's compressed first look to `<stem>_<pulse_kind>.iq` beside
/// `out`. Returns the paths written.
pub fn write_simulation(result: &SimulationResult, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_profile_csv(&result.range_profile, &mut buf)?;
            write_atomic(out, &buf)?;
            Ok(vec![out.to_path_buf()])
        }
        OutputFormat::Raw => {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "simulate".into());
            let mut written = Vec::new();
            for (kind, sig) in &result.compressed {
                let path = out.with_file_name(format!("{stem}_{}.iq", kind.as_str()));
                iqfile::write_iq(
                    &path,
                    sig,
                    &[
                        ("pulse_kind", kind.as_str().to_string()),
                        ("range_per_gate_m", range_per_sample(sig.sample_rate_hz()).to_string()),
                    ],
                )?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

pub const PROFILE_CSV_HEADER: [&str; 3] = ["range_m", "power_db", "pulse_kind"];

pub fn write_profile_csv<W: Write>(profile: &[ProfileGate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILE_CSV_HEADER)?;
    for g in profile {
        w.write_record([
            g.range_m.to_string(),
            fmt_db(g.power_db),
            g.pulse_kind.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{design_mismatched_filter, matched_filter, MismatchedDesign};
    use crate::signal::{generate_cw_pulse, generate_lfm_chirp, ChirpSpec};
    use crate::timing::{build_schedule, PulseEvent};

    const FS: f64 = 10e6;

    fn setup(max_range: f64) -> (TimingSchedule, AssetRegistry) {
        let mut assets = AssetRegistry::new();
        let short = generate_cw_pulse(1e-6, 0.0, 1.0, FS).unwrap();
        let medium = generate_lfm_chirp(&ChirpSpec::new(5e6, 20e-6), FS).unwrap();
        assets.insert_filter("short_matched", matched_filter(&short).unwrap());
        let design = MismatchedDesign::new(480, MismatchedDesign::default_halfwidth(FS, 5e6));
        assets.insert_filter("medium_mm", design_mismatched_filter(&medium, &design).unwrap());
        assets.insert_waveform("short", short);
        assets.insert_waveform("medium", medium);
        let events = vec![
            PulseEvent::new(PulseKind::TransmitShort, 0.0, 1e-6).with_assets("short", "short_matched"),
            PulseEvent::new(PulseKind::TransmitMedium, 1e-6, 20e-6).with_assets("medium", "medium_mm"),
        ];
        (build_schedule(1e-3, events, max_range).unwrap(), assets)
    }

    #[test]
    fn empty_noiseless_scenario_is_silent() {
        let (sched, assets) = setup(15e3);
        let r = run_scenario(&Scenario::new(FS), &sched, &assets).unwrap();
        assert!(r.range_profile.iter().all(|g| g.power_db == f64::NEG_INFINITY));
        assert!(r.detections.is_empty());
    }

    #[test]
    fn single_target_lands_on_its_gate() {
        let (sched, assets) = setup(15e3);
        let mut sc = Scenario::new(FS);
        sc.noise_power = 1e-3;
        sc.seed = 3;
        sc.targets.push(PointTarget::new(10e3, 0.0));
        let r = run_scenario(&sc, &sched, &assets).unwrap();
        let best = r
            .detections
            .iter()
            .max_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm))
            .unwrap();
        assert!((best.range_m - 10e3).abs() <= range_per_sample(FS));
        assert!(best.power_dbm.abs() < 0.5);
    }

    #[test]
    fn stitching_switches_at_medium_blind_range() {
        let (sched, assets) = setup(5e3);
        let r = run_scenario(&Scenario::new(FS), &sched, &assets).unwrap();
        assert!((r.stitch_boundary_m - blind_range(20e-6)).abs() < 1e-9);
        for g in &r.range_profile {
            let want = if g.range_m < r.stitch_boundary_m {
                PulseKind::TransmitShort
            } else {
                PulseKind::TransmitMedium
            };
            assert_eq!(g.pulse_kind, want);
        }
    }

    #[test]
    fn mismatched_rate_rejected() {
        let (sched, assets) = setup(5e3);
        let sc = Scenario::new(20e6);
        assert!(matches!(
            run_scenario(&sc, &sched, &assets),
            Err(Error::InconsistentRates(_))
        ));
    }

    #[test]
    fn peak_detection_examples() {
        assert!(detect_peaks(&[-50.0; 32], 10.0).is_empty());

        let mut p = vec![-50.0; 32];
        p[12] = -30.0;
        assert_eq!(detect_peaks(&p, 10.0), vec![12]);

        p[13] = -32.0;
        assert_eq!(detect_peaks(&p, 10.0), vec![12]);

        // equal plateau collapses to the earlier gate
        p[13] = -30.0;
        assert_eq!(detect_peaks(&p, 10.0), vec![12]);
    }
}
