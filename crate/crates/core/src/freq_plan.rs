//! Mixer spur enumeration and IF filter planning.
//!
//! A mixer is described behaviourally by its conversion loss, LO-to-IF
//! isolation, LO drive and a table of `(m, n)` product suppressions relative
//! to the desired output. Spurs fall at `|m·f_rf ± n·f_lo|`; a piecewise-linear
//! filter mask in dB then decides which ones survive to the ADC.

use crate::error::{Error, Result};
use crate::fmt_db;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// In-band classification and plan-consistency tolerance.
pub const FREQ_TOLERANCE_HZ: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixerSpec {
    pub conversion_loss_db: f64,
    pub lo_to_if_isolation_db: f64,
    pub lo_drive_dbm: f64,
    /// Suppression below the desired output, keyed by `(m, n)`.
    #[serde(with = "spur_table_serde")]
    pub spur_table: BTreeMap<(u32, u32), f64>,
    /// Used for `(m, n)` pairs without a table entry.
    #[serde(default)]
    pub default_suppression_dbc: Option<f64>,
    pub max_order: u32,
}

impl MixerSpec {
    /// A high-LO-drive double-balanced IF mixer: ~6 dB conversion loss, 30 dB LO-to-IF
    /// isolation, +17 dBm LO drive, 60 dBc on 2nd and 3rd order products,
    /// 80 dBc on everything else.
    pub fn double_balanced_if_mixer(max_order: u32) -> Self {
        let mut spur_table = BTreeMap::new();
        for m in 0..=max_order {
            for n in 0..=max_order - m {
                if (2..=3).contains(&(m + n)) {
                    spur_table.insert((m, n), 60.0);
                }
            }
        }
        spur_table.insert((1, 1), 0.0);
        Self {
            conversion_loss_db: 6.0,
            lo_to_if_isolation_db: 30.0,
            lo_drive_dbm: 17.0,
            spur_table,
            default_suppression_dbc: Some(80.0),
            max_order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_order < 1 {
            return Err(Error::InvalidArgument("mixer max_order must be >= 1".into()));
        }
        if !(self.conversion_loss_db > 0.0) || !(self.lo_to_if_isolation_db > 0.0) {
            return Err(Error::InvalidArgument(
                "conversion loss and LO isolation must be positive".into(),
            ));
        }
        if !self.lo_drive_dbm.is_finite() {
            return Err(Error::InvalidArgument("LO drive must be finite".into()));
        }
        if let Some(v) = self.spur_table.get(&(1, 1)) {
            if *v != 0.0 {
                return Err(Error::InvalidArgument(
                    "spur table entry (1,1) is the reference and must be 0 dBc".into(),
                ));
            }
        }
        for (&(m, n), &v) in &self.spur_table {
            if (m, n) == (0, 0) {
                return Err(Error::InvalidArgument("spur table cannot contain (0,0)".into()));
            }
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "suppression for ({m},{n}) must be >= 0 dBc, got {v}"
                )));
            }
        }
        if let Some(d) = self.default_suppression_dbc {
            if !(d >= 0.0) {
                return Err(Error::InvalidArgument("default suppression must be >= 0 dBc".into()));
            }
        }
        Ok(())
    }

    /// Suppression of product `(m, n)`; `(1, 1)` is always the 0 dBc reference.
    pub fn suppression_dbc(&self, m: u32, n: u32) -> Result<f64> {
        if (m, n) == (1, 1) {
            return Ok(0.0);
        }
        self.spur_table
            .get(&(m, n))
            .copied()
            .or(self.default_suppression_dbc)
            .ok_or(Error::MissingSpurEntry { m, n })
    }

    pub fn lo_feedthrough_dbm(&self) -> f64 {
        self.lo_drive_dbm - self.lo_to_if_isolation_db
    }
}

mod spur_table_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Entry {
        m: u32,
        n: u32,
        suppression_dbc: f64,
    }

    pub fn serialize<S: Serializer>(t: &BTreeMap<(u32, u32), f64>, s: S) -> Result<S::Ok, S::Error> {
        t.iter()
            .map(|(&(m, n), &suppression_dbc)| Entry { m, n, suppression_dbc })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, u32), f64>, D::Error> {
        let v = Vec::<Entry>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for e in v {
            if out.insert((e.m, e.n), e.suppression_dbc).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate spur table entry ({},{})",
                    e.m, e.n
                )));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sideband {
    #[default]
    Difference,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyPlan {
    pub rf_hz: f64,
    pub lo_hz: f64,
    pub if_center_hz: f64,
    pub analog_bandwidth_hz: f64,
    #[serde(default)]
    pub sideband: Sideband,
}

impl FrequencyPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rf_hz", self.rf_hz),
            ("lo_hz", self.lo_hz),
            ("if_center_hz", self.if_center_hz),
            ("analog_bandwidth_hz", self.analog_bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let produced = match self.sideband {
            Sideband::Difference => (self.rf_hz - self.lo_hz).abs(),
            Sideband::Sum => self.rf_hz + self.lo_hz,
        };
        if (produced - self.if_center_hz).abs() > FREQ_TOLERANCE_HZ {
            return Err(Error::InvalidArgument(format!(
                "{:?} product {produced} Hz does not match IF {} Hz",
                self.sideband, self.if_center_hz
            )));
        }
        Ok(())
    }

    pub fn in_band(&self, f_hz: f64) -> bool {
        (f_hz - self.if_center_hz).abs() <= self.analog_bandwidth_hz / 2.0 + FREQ_TOLERANCE_HZ
    }

    fn desired_sign(&self) -> SpurSign {
        match self.sideband {
            Sideband::Difference => SpurSign::Minus,
            Sideband::Sum => SpurSign::Plus,
        }
    }
}

/// Which combination produced the frequency. Products with `m == 0` or
/// `n == 0` have a single frequency and are recorded as `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SpurSign {
    Plus,
    Minus,
}

impl SpurSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpurSign::Plus => "+",
            SpurSign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpurProduct {
    pub m: u32,
    pub n: u32,
    pub sign: SpurSign,
    pub frequency_hz: f64,
    pub level_dbm: f64,
    pub in_band: bool,
    pub post_filter_level_dbm: Option<f64>,
    /// The wanted IF product itself.
    pub desired: bool,
}

impl SpurProduct {
    pub fn is_lo_feedthrough(&self) -> bool {
        self.m == 0 && self.n == 1
    }

    /// Post-filter level when a mask has been applied, the raw level otherwise.
    pub fn effective_level_dbm(&self) -> f64 {
        self.post_filter_level_dbm.unwrap_or(self.level_dbm)
    }
}

/// Piecewise-linear attenuation (dB) versus frequency, flat beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterMask {
    pub breakpoints: Vec<(f64, f64)>,
}

impl FilterMask {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self { breakpoints };
        m.validate()?;
        Ok(m)
    }

    pub fn flat(attenuation_db: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, attenuation_db)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(Error::InvalidArgument("filter mask has no breakpoints".into()));
        }
        for w in self.breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(
                    "filter mask frequencies must be strictly increasing".into(),
                ));
            }
        }
        if self
            .breakpoints
            .iter()
            .any(|&(f, a)| !f.is_finite() || !(a >= 0.0) || a.is_nan())
        {
            return Err(Error::InvalidArgument(
                "filter mask attenuations must be >= 0 dB at finite frequencies".into(),
            ));
        }
        Ok(())
    }

    pub fn attenuation_db(&self, f_hz: f64) -> f64 {
        let bp = &self.breakpoints;
        if f_hz <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if f_hz >= last.0 {
            return last.1;
        }
        let i = bp.partition_point(|&(f, _)| f <= f_hz);
        let (f0, a0) = bp[i - 1];
        let (f1, a1) = bp[i];
        if a0 == a1 {
            return a0;
        }
        a0 + (a1 - a0) * (f_hz - f0) / (f1 - f0)
    }
}

/// Every mixer product with `1 <= m + n <= max_order`.
///
/// Levels: the desired product is `rf_input_dbm - conversion_loss`; other
/// products sit `suppression(m, n)` below it, except LO feedthrough `(0, 1)`
/// which is `lo_drive - isolation`.
pub fn enumerate_spurs(plan: &FrequencyPlan, mixer: &MixerSpec, rf_input_dbm: f64) -> Result<Vec<SpurProduct>> {
    if mixer.max_order < 1 {
        return Err(Error::InvalidArgument("mixer max_order must be >= 1".into()));
    }
    let desired_level = rf_input_dbm - mixer.conversion_loss_db;
    let desired_sign = plan.desired_sign();
    let mut out = Vec::new();
    for m in 0..=mixer.max_order {
        for n in 0..=mixer.max_order - m {
            if m == 0 && n == 0 {
                continue;
            }
            let level = if (m, n) == (0, 1) {
                mixer.lo_feedthrough_dbm()
            } else {
                desired_level - mixer.suppression_dbc(m, n)?
            };
            let mf = m as f64 * plan.rf_hz;
            let nf = n as f64 * plan.lo_hz;
            let signs: &[SpurSign] = if m == 0 || n == 0 {
                &[SpurSign::Plus]
            } else {
                &[SpurSign::Plus, SpurSign::Minus]
            };
            for &sign in signs {
                let f = match sign {
                    SpurSign::Plus => mf + nf,
                    SpurSign::Minus => (mf - nf).abs(),
                };
                out.push(SpurProduct {
                    m,
                    n,
                    sign,
                    frequency_hz: f,
                    level_dbm: level,
                    in_band: plan.in_band(f),
                    post_filter_level_dbm: None,
                    desired: (m, n) == (1, 1) && sign == desired_sign,
                });
            }
        }
    }
    Ok(out)
}

/// Sets `post_filter_level_dbm` from the mask attenuation at each frequency.
pub fn apply_filter_mask(spurs: &[SpurProduct], mask: &FilterMask) -> Vec<SpurProduct> {
    spurs
        .iter()
        .map(|s| SpurProduct {
            post_filter_level_dbm: Some(s.level_dbm - mask.attenuation_db(s.frequency_hz)),
            ..s.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub spurs: Vec<SpurProduct>,
    /// Largest in-band non-desired post-filter product.
    pub worst_in_band: Option<SpurProduct>,
    /// `threshold - worst level`; `+inf` when nothing non-desired is in band.
    pub worst_margin_db: f64,
    pub lo_feedthrough_post_filter_dbm: f64,
    pub lo_feedthrough_margin_db: f64,
    pub spur_threshold_dbm: f64,
    pub pass: bool,
}

/// Pass iff every in-band, non-desired product is at or below the threshold
/// after filtering.
pub fn evaluate_plan(
    plan: &FrequencyPlan,
    mixer: &MixerSpec,
    mask: &FilterMask,
    rf_input_dbm: f64,
    spur_threshold_dbm: f64,
) -> Result<PlanReport> {
    mask.validate()?;
    let spurs = apply_filter_mask(&enumerate_spurs(plan, mixer, rf_input_dbm)?, mask);
    Ok(summarize(spurs, spur_threshold_dbm))
}

fn summarize(spurs: Vec<SpurProduct>, threshold: f64) -> PlanReport {
    let worst = spurs
        .iter()
        .filter(|s| s.in_band && !s.desired)
        .max_by(|a, b| {
            a.effective_level_dbm()
                .total_cmp(&b.effective_level_dbm())
                .then_with(|| (b.m, b.n, b.sign).cmp(&(a.m, a.n, a.sign)))
        })
        .cloned();
    let worst_margin_db = match &worst {
        Some(s) => threshold - s.effective_level_dbm(),
        None => f64::INFINITY,
    };
    let lo = spurs
        .iter()
        .find(|s| s.is_lo_feedthrough())
        .map(|s| s.effective_level_dbm())
        .unwrap_or(f64::NEG_INFINITY);
    PlanReport {
        pass: worst_margin_db >= 0.0,
        worst_in_band: worst,
        worst_margin_db,
        lo_feedthrough_post_filter_dbm: lo,
        lo_feedthrough_margin_db: threshold - lo,
        spur_threshold_dbm: threshold,
        spurs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSweep {
    pub reports: Vec<(f64, PlanReport)>,
    pub widest_passing_hz: Option<f64>,
}

/// Evaluates `template` at each candidate analog bandwidth.
pub fn sweep_analog_bandwidth(
    template: &FrequencyPlan,
    mixer: &MixerSpec,
    mask: &FilterMask,
    rf_input_dbm: f64,
    spur_threshold_dbm: f64,
    candidates: &[f64],
) -> Result<BandwidthSweep> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if candidates.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidArgument("bandwidth candidates must be positive".into()));
    }
    if candidates.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "bandwidth candidates must be strictly increasing".into(),
        ));
    }
    mask.validate()?;
    // the spur set does not depend on bandwidth; only the in-band flags do
    let base = apply_filter_mask(&enumerate_spurs(template, mixer, rf_input_dbm)?, mask);
    let reports: Vec<(f64, PlanReport)> = candidates
        .iter()
        .map(|&bw| {
            let plan = FrequencyPlan {
                analog_bandwidth_hz: bw,
                ..*template
            };
            let spurs = base
                .iter()
                .map(|s| SpurProduct {
                    in_band: plan.in_band(s.frequency_hz),
                    ..s.clone()
                })
                .collect();
            (bw, summarize(spurs, spur_threshold_dbm))
        })
        .collect();
    let widest_passing_hz = reports.iter().rev().find(|(_, r)| r.pass).map(|(b, _)| *b);
    Ok(BandwidthSweep {
        reports,
        widest_passing_hz,
    })
}

pub const SPUR_CSV_HEADER: [&str; 8] = [
    "m",
    "n",
    "sign",
    "frequency_hz",
    "level_dbm",
    "post_filter_level_dbm",
    "in_band",
    "margin_db",
];

/// Spur report CSV, one row per product; `margin_db` is threshold minus the
/// post-filter (or raw) level.
pub fn write_spur_csv<W: Write>(report: &PlanReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPUR_CSV_HEADER)?;
    for s in &report.spurs {
        let post = s.post_filter_level_dbm.map(fmt_db).unwrap_or_default();
        w.write_record([
            s.m.to_string(),
            s.n.to_string(),
            s.sign.as_str().to_string(),
            s.frequency_hz.to_string(),
            fmt_db(s.level_dbm),
            post,
            s.in_band.to_string(),
            fmt_db(report.spur_threshold_dbm - s.effective_level_dbm()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_CSV_HEADER: [&str; 4] = [
    "analog_bandwidth_hz",
    "pass",
    "worst_margin_db",
    "lo_feedthrough_margin_db",
];

/// One row per candidate bandwidth.
pub fn write_sweep_csv<W: Write>(sweep: &BandwidthSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for (bw, r) in &sweep.reports {
        w.write_record([
            bw.to_string(),
            r.pass.to_string(),
            fmt_db(r.worst_margin_db),
            fmt_db(r.lo_feedthrough_margin_db),
        ])?;
    }
    w.flush()?;
    Ok(())
}
