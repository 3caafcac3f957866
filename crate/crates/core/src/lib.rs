//! Design and simulation toolkit for a dual-band weather radar IF and
//! digital receiver chain.
//!
//! * [`signal`]: chirps, CW pulses, NCO mixing, FIR filtering, decimation,
//!   integer delay and seeded noise on complex baseband [`IqSignal`]s.
//! * [`compression`]: matched and least-squares mismatched compressors
//!   under a tap budget, with PSL/ISL/mismatch-loss metrics.
//! * [`freq_plan`]: mixer intermodulation enumeration, filter masks and
//!   analog bandwidth selection.
//! * [`cascade`]: receive-chain gain/NF/IP3 cascade, SFDR, ADC floor and
//!   LSB gain tuning.
//! * [`timing`]: multi-pulse PRT schedules, blind range coverage and
//!   calibration-injection masking.
//! * [`sim`]: point-target scenario simulation and peak detection.
//! * [`config`]: the TOML configuration that ties the above together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod cascade;
pub mod compression;
pub mod config;
pub mod error;
pub mod freq_plan;
pub mod iqfile;
pub mod signal;
pub mod sim;
pub mod timing;

pub use compression::{CompressionMetrics, DesignKind, FilterTaps};
pub use error::{Error, Result};
pub use signal::{ChirpSpec, IqSignal, NoiseSpec, Window};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Range spanned by one sample at `sample_rate_hz`, two-way.
pub fn range_per_sample(sample_rate_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * sample_rate_hz)
}

/// Formats a dB value, writing the infinite sentinels as `inf` / `-inf`.
pub fn fmt_db(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        v.to_string()
    }
}
