//! TOML configuration for the whole toolkit.
//!
//! Every table is optional and falls back to a working default, so an empty
//! file is a valid configuration. Unknown keys are rejected. Loading resolves
//! all waveform/filter references, generates the waveforms, designs the
//! filters and validates the schedule, so a [`LoadedConfig`] is ready to run.
//!
//! ```toml
//! [signal]
//! sample_rate_hz = 10e6
//!
//! [waveforms.medium]
//! kind = "chirp"
//! bandwidth_hz = 5e6
//! duration_s = 20e-6
//!
//! [filters.medium_mismatched]
//! waveform = "medium"
//! design = "mismatched"
//! length = 480
//!
//! [[schedule.events]]
//! kind = "transmit_medium"
//! start_s = 1e-6
//! duration_s = 20e-6
//! waveform_id = "medium"
//! filter_id = "medium_mismatched"
//! ```

use crate::assets::AssetRegistry;
use crate::cascade::{example_if_receiver, AdcSpec, CascadeStage};
use crate::compression::{design_mismatched_filter, matched_filter_with_budget, MismatchedDesign, DEFAULT_TAP_BUDGET};
use crate::error::{Error, Result};
use crate::freq_plan::{FilterMask, FrequencyPlan, MixerSpec, Sideband};
use crate::signal::{generate_cw_pulse, generate_lfm_chirp, ChirpSpec};
use crate::sim::{PointTarget, Scenario};
use crate::timing::{
    build_schedule_with_guard, default_events, PulseEvent, PulseKind, TimingSchedule, DEFAULT_GUARD_S,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub signal: SignalSection,
    pub waveforms: BTreeMap<String, WaveformDef>,
    pub filters: BTreeMap<String, FilterDef>,
    pub mixer: MixerSpec,
    pub plan: PlanSection,
    pub mask: FilterMask,
    pub cascade: CascadeSection,
    pub adc: AdcSpec,
    pub schedule: ScheduleSection,
    pub scenario: ScenarioSection,
    pub calibration: CalibrationSection,
}

impl Default for Config {
    fn default() -> Self {
        let mut waveforms = BTreeMap::new();
        waveforms.insert(
            "short".into(),
            WaveformDef::Cw {
                duration_s: 1e-6,
                offset_hz: 0.0,
                amplitude: 1.0,
            },
        );
        waveforms.insert("medium".into(), WaveformDef::Chirp(ChirpSpec::new(5e6, 20e-6)));
        let mut filters = BTreeMap::new();
        filters.insert(
            "short_matched".into(),
            FilterDef {
                waveform: "short".into(),
                design: DesignChoice::Matched,
                length: None,
                mainlobe_halfwidth: None,
                tap_budget: DEFAULT_TAP_BUDGET,
            },
        );
        filters.insert(
            "medium_mismatched".into(),
            FilterDef {
                waveform: "medium".into(),
                design: DesignChoice::Mismatched,
                length: Some(480),
                mainlobe_halfwidth: None,
                tap_budget: DEFAULT_TAP_BUDGET,
            },
        );
        Self {
            signal: SignalSection::default(),
            waveforms,
            filters,
            mixer: MixerSpec::double_balanced_if_mixer(5),
            plan: PlanSection::default(),
            mask: default_mask(),
            cascade: CascadeSection::default(),
            adc: AdcSpec::default(),
            schedule: ScheduleSection::default(),
            scenario: ScenarioSection::default(),
            calibration: CalibrationSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSection {
    pub sample_rate_hz: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self { sample_rate_hz: 10e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveformDef {
    Chirp(ChirpSpec),
    #[serde(rename = "cw")]
    Cw {
        duration_s: f64,
        #[serde(default)]
        offset_hz: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignChoice {
    Matched,
    Mismatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDef {
    pub waveform: String,
    pub design: DesignChoice,
    /// Mismatched only; defaults to the tap budget.
    #[serde(default)]
    pub length: Option<usize>,
    /// Mismatched only; defaults to `ceil(fs/B)` for chirps, 1 otherwise.
    #[serde(default)]
    pub mainlobe_halfwidth: Option<usize>,
    #[serde(default = "default_budget")]
    pub tap_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_TAP_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub rf_hz: f64,
    pub lo_hz: f64,
    pub if_center_hz: f64,
    pub analog_bandwidth_hz: f64,
    pub sideband: Sideband,
    pub rf_input_dbm: f64,
    pub spur_threshold_dbm: f64,
    pub bandwidth_candidates_hz: Vec<f64>,
}

impl Default for PlanSection {
    /// Down-conversion of a 1.25 GHz first IF to 60 MHz.
    fn default() -> Self {
        Self {
            rf_hz: 1.25e9,
            lo_hz: 1.19e9,
            if_center_hz: 60e6,
            analog_bandwidth_hz: 20e6,
            sideband: Sideband::Difference,
            rf_input_dbm: -10.0,
            spur_threshold_dbm: -80.0,
            bandwidth_candidates_hz: vec![10e6, 20e6, 40e6, 80e6],
        }
    }
}

impl PlanSection {
    pub fn frequency_plan(&self) -> FrequencyPlan {
        FrequencyPlan {
            rf_hz: self.rf_hz,
            lo_hz: self.lo_hz,
            if_center_hz: self.if_center_hz,
            analog_bandwidth_hz: self.analog_bandwidth_hz,
            sideband: self.sideband,
        }
    }
}

/// Band-pass around the default 60 MHz IF.
fn default_mask() -> FilterMask {
    FilterMask {
        breakpoints: vec![(20e6, 60.0), (45e6, 0.0), (75e6, 0.0), (100e6, 60.0)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeSection {
    pub stages: Vec<CascadeStage>,
    pub input_dbm: f64,
    pub noise_bandwidth_hz: f64,
    /// Target output noise RMS in ADC LSBs.
    pub lsb_alpha: f64,
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self {
            stages: example_if_receiver(),
            input_dbm: -60.0,
            noise_bandwidth_hz: 20e6,
            lsb_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub prt_s: f64,
    pub guard_s: f64,
    pub max_range_m: f64,
    pub events: Vec<PulseEvent>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            prt_s: 1e-3,
            guard_s: DEFAULT_GUARD_S,
            max_range_m: 40e3,
            events: default_events(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub targets: Vec<PointTarget>,
    pub noise_power: f64,
    pub seed: u64,
    pub full_scale_dbm: f64,
    pub detection_threshold_db: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            targets: vec![PointTarget::new(10e3, -40.0), PointTarget::new(25e3, -50.0)],
            noise_power: 2e-6,
            seed: 1,
            full_scale_dbm: 0.0,
            detection_threshold_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    /// Overrides the `level_dbm` of the cal_medium event when set.
    pub injection_dbm: Option<f64>,
    pub noise_power: f64,
    pub seed: u64,
    pub offsets_m: Vec<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            injection_dbm: None,
            noise_power: 1e-9,
            seed: 7,
            offsets_m: vec![
                -3000.0, -1500.0, -300.0, -60.0, 60.0, 300.0, 1500.0, 3000.0, 6000.0, 12000.0,
            ],
        }
    }
}

/// A validated configuration with every waveform generated and every filter designed.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub assets: AssetRegistry,
    pub schedule: TimingSchedule,
    pub scenario: Scenario,
}

impl LoadedConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.scenario.seed = seed;
        self.scenario.seed = seed;
        self
    }

    pub fn cal_injection_dbm(&self) -> f64 {
        self.config
            .calibration
            .injection_dbm
            .or_else(|| self.schedule.first(PulseKind::CalMedium).and_then(|e| e.level_dbm))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let config: Config = toml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") || msg.contains("unknown variant") {
            Error::UnknownKey(msg)
        } else {
            Error::ParseError(msg)
        }
    })?;
    resolve(config)
}

fn invariant(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |e| Error::InvariantError {
        path,
        source: Box::new(e),
    }
}

/// Cross-checks and materialises a parsed configuration.
pub fn resolve(config: Config) -> Result<LoadedConfig> {
    let fs = config.signal.sample_rate_hz;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(invariant("signal.sample_rate_hz")(Error::InvalidArgument(
            "sample rate must be positive".into(),
        )));
    }

    let mut assets = AssetRegistry::new();
    for (id, def) in &config.waveforms {
        let sig = match def {
            WaveformDef::Chirp(spec) => generate_lfm_chirp(spec, fs),
            WaveformDef::Cw {
                duration_s,
                offset_hz,
                amplitude,
            } => generate_cw_pulse(*duration_s, *offset_hz, *amplitude, fs),
        }
        .map_err(invariant(format!("waveforms.{id}")))?;
        assets.insert_waveform(id.clone(), sig);
    }

    for (id, def) in &config.filters {
        let wf = assets.waveform(&def.waveform).map_err(|_| {
            Error::CrossRefError(format!("filters.{id} references unknown waveform `{}`", def.waveform))
        })?;
        let taps = match def.design {
            DesignChoice::Matched => matched_filter_with_budget(wf, def.tap_budget),
            DesignChoice::Mismatched => {
                let halfwidth = def
                    .mainlobe_halfwidth
                    .unwrap_or(match &config.waveforms[&def.waveform] {
                        WaveformDef::Chirp(c) if c.bandwidth_hz > 0.0 => {
                            MismatchedDesign::default_halfwidth(fs, c.bandwidth_hz)
                        }
                        _ => 1,
                    });
                let design = MismatchedDesign {
                    tap_budget: def.tap_budget,
                    ..MismatchedDesign::new(def.length.unwrap_or(def.tap_budget), halfwidth)
                };
                design_mismatched_filter(wf, &design)
            }
        }
        .map_err(invariant(format!("filters.{id}")))?;
        assets.insert_filter(id.clone(), taps.with_source_id(def.waveform.clone()));
    }

    config.mixer.validate().map_err(invariant("mixer"))?;
    config.plan.frequency_plan().validate().map_err(invariant("plan"))?;
    config.mask.validate().map_err(invariant("mask"))?;
    for (i, s) in config.cascade.stages.iter().enumerate() {
        s.validate().map_err(invariant(format!("cascade.stages[{i}]")))?;
    }
    config.adc.validate().map_err(invariant("adc"))?;

    for (i, ev) in config.schedule.events.iter().enumerate() {
        if ev.kind == PulseKind::NoiseInjection && ev.waveform_id.is_empty() && ev.filter_id.is_empty() {
            continue;
        }
        if assets.waveform(&ev.waveform_id).is_err() {
            return Err(Error::CrossRefError(format!(
                "schedule.events[{i}] references unknown waveform `{}`",
                ev.waveform_id
            )));
        }
        if assets.filter(&ev.filter_id).is_err() {
            return Err(Error::CrossRefError(format!(
                "schedule.events[{i}] references unknown filter `{}`",
                ev.filter_id
            )));
        }
    }
    let sched = &config.schedule;
    let schedule = build_schedule_with_guard(sched.prt_s, sched.events.clone(), sched.max_range_m, sched.guard_s)
        .map_err(invariant("schedule"))?;

    let sc = &config.scenario;
    let scenario = Scenario {
        targets: sc.targets.clone(),
        noise_power: sc.noise_power,
        seed: sc.seed,
        schedule_ref: "schedule".into(),
        sample_rate_hz: fs,
        full_scale_dbm: sc.full_scale_dbm,
        detection_threshold_db: sc.detection_threshold_db,
    };
    scenario.validate(schedule.max_range_m).map_err(invariant("scenario"))?;

    Ok(LoadedConfig {
        config,
        assets,
        schedule,
        scenario,
    })
}

/// The configuration with all defaults filled in, as TOML.
pub fn dump_effective_config(config: &Config) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::Format(e.to_string()))
}
