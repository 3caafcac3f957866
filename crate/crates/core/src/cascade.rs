//! Receive-chain dynamic range: Friis noise figure, third-order intercept
//! cascade, compression ladder, two-tone SFDR, ADC quantization floor and
//! gain tuning to put thermal noise at the ADC LSB.

use crate::error::{Error, Result};
use crate::fmt_db;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Thermal noise density at 290 K, dBm/Hz (rounded reference).
pub const THERMAL_FLOOR_DBM_HZ: f64 = -174.0;

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeStage {
    pub name: String,
    pub gain_db: f64,
    pub nf_db: f64,
    /// `None` (or +inf) for passive/ideal parts.
    #[serde(default)]
    pub oip3_dbm: Option<f64>,
    #[serde(default)]
    pub p1db_out_dbm: Option<f64>,
    #[serde(default)]
    pub power_consumption_w: Option<f64>,
}

impl CascadeStage {
    pub fn new(name: impl Into<String>, gain_db: f64, nf_db: f64, oip3_dbm: Option<f64>) -> Self {
        Self {
            name: name.into(),
            gain_db,
            nf_db,
            oip3_dbm,
            p1db_out_dbm: None,
            power_consumption_w: None,
        }
    }

    /// Passive loss with NF equal to the loss and no intermodulation.
    pub fn passive(name: impl Into<String>, loss_db: f64) -> Self {
        Self::new(name, -loss_db, loss_db, None)
    }

    pub fn with_p1db(mut self, p1db_out_dbm: f64) -> Self {
        self.p1db_out_dbm = Some(p1db_out_dbm);
        self
    }

    pub fn oip3(&self) -> f64 {
        self.oip3_dbm.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "stage `{}`: gain must be finite",
                self.name
            )));
        }
        if !(self.nf_db >= 0.0 && self.nf_db.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stage `{}`: noise figure must be >= 0 dB",
                self.name
            )));
        }
        if self.oip3_dbm.is_some_and(|v| v.is_nan() || v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(format!("stage `{}`: bad OIP3", self.name)));
        }
        if self.power_consumption_w.is_some_and(|p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "stage `{}`: power consumption must be >= 0",
                self.name
            )));
        }
        Ok(())
    }

    /// Passive stages are expected to have NF at least equal to their loss.
    pub fn passive_nf_warning(&self) -> Option<String> {
        if self.gain_db <= 0.0 && self.nf_db < -self.gain_db {
            Some(format!(
                "stage `{}`: passive with {} dB loss but only {} dB NF",
                self.name, -self.gain_db, self.nf_db
            ))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageLevel {
    pub name: String,
    pub level_out_dbm: f64,
    pub compressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub total_gain_db: f64,
    pub total_nf_db: f64,
    pub total_iip3_dbm: f64,
    pub total_oip3_dbm: f64,
    pub noise_bandwidth_hz: f64,
    pub mds_dbm: f64,
    pub sfdr_db: f64,
    pub stage_levels: Vec<StageLevel>,
    pub warnings: Vec<String>,
}

/// Cascades `stages` in order for a signal at `input_dbm`.
///
/// NF by Friis, IIP3 by the coherent reciprocal sum
/// `1/IIP3 = Σ G_before(i) / IIP3(i)` in mW. A stage is flagged compressed
/// when its output level exceeds `P1dB_out - 1 dB`.
pub fn analyze_cascade(stages: &[CascadeStage], input_dbm: f64, noise_bandwidth_hz: f64) -> Result<CascadeReport> {
    if stages.is_empty() {
        return Err(Error::EmptyCascade);
    }
    if !(noise_bandwidth_hz > 0.0 && noise_bandwidth_hz.is_finite()) {
        return Err(Error::InvalidArgument("noise bandwidth must be positive".into()));
    }
    for s in stages {
        s.validate()?;
    }

    let mut gain_before = 1.0;
    let mut factor = 0.0;
    let mut inv_iip3_mw = 0.0;
    let mut level = input_dbm;
    let mut total_gain_db = 0.0;
    let mut stage_levels = Vec::with_capacity(stages.len());
    let mut warnings = Vec::new();

    for (i, s) in stages.iter().enumerate() {
        let f = db_to_lin(s.nf_db);
        if i == 0 {
            factor = f;
        } else {
            factor += (f - 1.0) / gain_before;
        }
        let oip3 = s.oip3();
        if oip3.is_finite() {
            let iip3_mw = db_to_lin(oip3 - s.gain_db);
            inv_iip3_mw += gain_before / iip3_mw;
        }
        gain_before *= db_to_lin(s.gain_db);
        total_gain_db += s.gain_db;
        level += s.gain_db;
        stage_levels.push(StageLevel {
            name: s.name.clone(),
            level_out_dbm: level,
            compressed: s.p1db_out_dbm.is_some_and(|p| level > p - 1.0),
        });
        if let Some(w) = s.passive_nf_warning() {
            warnings.push(w);
        }
    }

    let total_nf_db = lin_to_db(factor);
    let total_iip3_dbm = if inv_iip3_mw == 0.0 {
        f64::INFINITY
    } else {
        -lin_to_db(inv_iip3_mw)
    };
    let mut report = CascadeReport {
        total_gain_db,
        total_nf_db,
        total_iip3_dbm,
        total_oip3_dbm: total_iip3_dbm + total_gain_db,
        noise_bandwidth_hz,
        mds_dbm: noise_floor_dbm(total_nf_db, noise_bandwidth_hz),
        sfdr_db: 0.0,
        stage_levels,
        warnings,
    };
    report.sfdr_db = sfdr(&report, noise_bandwidth_hz);
    Ok(report)
}

/// Input-referred thermal floor: `-174 + NF + 10 log10(B)`.
pub fn noise_floor_dbm(nf_db: f64, bandwidth_hz: f64) -> f64 {
    THERMAL_FLOOR_DBM_HZ + nf_db + 10.0 * bandwidth_hz.log10()
}

/// Two-tone SFDR, `(2/3)(IIP3 - floor)`; `+inf` for an IIP3-free chain.
pub fn sfdr(report: &CascadeReport, noise_bandwidth_hz: f64) -> f64 {
    if report.total_iip3_dbm == f64::INFINITY {
        return f64::INFINITY;
    }
    2.0 / 3.0 * (report.total_iip3_dbm - noise_floor_dbm(report.total_nf_db, noise_bandwidth_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSpec {
    pub bits: u32,
    pub sample_rate_hz: f64,
    pub full_scale_vpp: f64,
    pub input_impedance_ohm: f64,
}

impl Default for AdcSpec {
    /// 16-bit, 200 MS/s converter, 2 Vpp into 50 Ω.
    fn default() -> Self {
        Self {
            bits: 16,
            sample_rate_hz: 200e6,
            full_scale_vpp: 2.0,
            input_impedance_ohm: 50.0,
        }
    }
}

impl AdcSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bits < 1 || self.bits > 64 {
            return Err(Error::InvalidArgument("ADC bits must be in 1..=64".into()));
        }
        for (name, v) in [
            ("sample_rate_hz", self.sample_rate_hz),
            ("full_scale_vpp", self.full_scale_vpp),
            ("input_impedance_ohm", self.input_impedance_ohm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("ADC {name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn lsb_v(&self) -> f64 {
        self.full_scale_vpp / 2f64.powi(self.bits as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdcFloor {
    /// Full-scale sine SNR, `6.02·bits + 1.76`.
    pub snr_db: f64,
    /// Quantization noise spread uniformly over `fs/2`.
    pub noise_floor_dbfs_per_hz: f64,
    pub lsb_v: f64,
}

pub fn adc_floor(adc: &AdcSpec) -> AdcFloor {
    let snr_db = 6.02 * adc.bits as f64 + 1.76;
    AdcFloor {
        snr_db,
        noise_floor_dbfs_per_hz: -snr_db - 10.0 * (adc.sample_rate_hz / 2.0).log10(),
        lsb_v: adc.lsb_v(),
    }
}

/// RMS voltage across `impedance_ohm` for a power in dBm.
pub fn dbm_to_vrms(dbm: f64, impedance_ohm: f64) -> f64 {
    (db_to_lin(dbm) * 1e-3 * impedance_ohm).sqrt()
}

/// Output thermal noise of the chain in dBm over `noise_bandwidth_hz`.
pub fn output_noise_dbm(report: &CascadeReport) -> f64 {
    report.mds_dbm + report.total_gain_db
}

/// Extra gain (dB) that makes the chain's output thermal-noise RMS voltage
/// equal `alpha` LSBs at the ADC input. Negative when already over-gained.
pub fn lsb_gain_tuning(stages: &[CascadeStage], adc: &AdcSpec, noise_bandwidth_hz: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    adc.validate()?;
    let report = analyze_cascade(stages, 0.0, noise_bandwidth_hz)?;
    let vrms = dbm_to_vrms(output_noise_dbm(&report), adc.input_impedance_ohm);
    Ok(20.0 * (alpha * adc.lsb_v() / vrms).log10())
}

/// Temperature rise of a component dissipating `power_w` through
/// `via_count` parallel thermal vias of `theta_c_per_w` each.
pub fn thermal_rise(power_w: f64, theta_c_per_w: f64, via_count: u32) -> Result<f64> {
    if via_count < 1 {
        return Err(Error::InvalidArgument("via_count must be >= 1".into()));
    }
    if !(power_w >= 0.0) || !(theta_c_per_w > 0.0) {
        return Err(Error::InvalidArgument(
            "power must be >= 0 and thermal resistance > 0".into(),
        ));
    }
    Ok(power_w * theta_c_per_w / via_count as f64)
}

pub const CASCADE_CSV_HEADER: [&str; 6] = [
    "stage",
    "gain_db",
    "nf_db",
    "oip3_dbm",
    "level_out_dbm",
    "compressed_flag",
];

pub const CASCADE_SUMMARY_HEADER: [&str; 5] = ["total_gain_db", "total_nf_db", "total_iip3_dbm", "mds_dbm", "sfdr_db"];

/// Per-stage table, a blank line, then the one-row summary block.
pub fn write_cascade_csv<W: Write>(stages: &[CascadeStage], report: &CascadeReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(CASCADE_CSV_HEADER)?;
    for (s, l) in stages.iter().zip(&report.stage_levels) {
        w.write_record([
            s.name.clone(),
            s.gain_db.to_string(),
            s.nf_db.to_string(),
            fmt_db(s.oip3()),
            l.level_out_dbm.to_string(),
            l.compressed.to_string(),
        ])?;
    }
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.write_all(b"\n")?;
    let mut w = csv::Writer::from_writer(inner);
    w.write_record(CASCADE_SUMMARY_HEADER)?;
    w.write_record([
        report.total_gain_db.to_string(),
        report.total_nf_db.to_string(),
        fmt_db(report.total_iip3_dbm),
        report.mds_dbm.to_string(),
        fmt_db(report.sfdr_db),
    ])?;
    w.flush()?;
    Ok(())
}

/// An illustrative IF receive lineup:
/// band-pass filter, pad, low-noise gain block, low-pass filter, mixer,
/// second gain stage sized to protect the ADC. Values are representative,
/// not measured.
pub fn example_if_receiver() -> Vec<CascadeStage> {
    vec![
        CascadeStage::passive("bpf", 1.5),
        CascadeStage::passive("pad", 3.0),
        CascadeStage {
            power_consumption_w: Some(0.35),
            ..CascadeStage::new("lna", 20.0, 1.8, Some(38.0)).with_p1db(20.0)
        },
        CascadeStage::passive("lpf", 1.0),
        CascadeStage::new("mixer", -6.0, 6.5, Some(30.0)),
        CascadeStage::new("if_amp", 18.0, 3.5, Some(40.0)).with_p1db(10.0),
    ]
}
