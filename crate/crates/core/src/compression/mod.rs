//! Pulse compression: matched and least-squares mismatched filters,
//! sidelobe metrics, and compression of received data.

mod design;
mod metrics;

pub use design::{design_mismatched_filter, matched_filter, matched_filter_with_budget, MismatchedDesign};
pub use metrics::{compression_metrics, CompressionMetrics};

use crate::error::{Error, Result};
use crate::signal::{fir_filter, ConvolutionMode, IqSignal};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default compressor length limit, the MAC count of the receiver FPGA datapath.
pub const DEFAULT_TAP_BUDGET: usize = 480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Matched,
    Mismatched,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Matched => "matched",
            DesignKind::Mismatched => "mismatched",
        }
    }
}

/// Compressor coefficients.
///
/// `reference_lag` is the index of the full-convolution output at which a
/// zero-delay copy of the source waveform peaks: `N - 1` for a matched
/// filter, the constrained lag for a mismatched one.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    taps: Vec<Complex64>,
    design_kind: DesignKind,
    source_waveform_id: String,
    reference_lag: usize,
}

impl FilterTaps {
    pub fn new(
        taps: Vec<Complex64>,
        design_kind: DesignKind,
        source_waveform_id: impl Into<String>,
        reference_lag: usize,
        tap_budget: usize,
    ) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyTaps);
        }
        if taps.len() > tap_budget {
            return Err(Error::BudgetExceeded {
                length: taps.len(),
                budget: tap_budget,
            });
        }
        if taps.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
            return Err(Error::InvalidArgument("filter taps must be finite".into()));
        }
        if taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::InvalidArgument("filter taps are all zero".into()));
        }
        Ok(Self {
            taps,
            design_kind,
            source_waveform_id: source_waveform_id.into(),
            reference_lag,
        })
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn design_kind(&self) -> DesignKind {
        self.design_kind
    }

    pub fn source_waveform_id(&self) -> &str {
        &self.source_waveform_id
    }

    pub fn reference_lag(&self) -> usize {
        self.reference_lag
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_waveform_id = id.into();
        self
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// Taps as a signal at `sample_rate_hz`, for export.
    pub fn to_signal(&self, sample_rate_hz: f64) -> Result<IqSignal> {
        IqSignal::new(self.taps.clone(), sample_rate_hz)
    }
}

/// Runs the compressor over `signal` (full convolution, FFT path).
pub fn compress(signal: &IqSignal, taps: &FilterTaps) -> Result<IqSignal> {
    fir_filter(signal, &taps.taps, ConvolutionMode::Fast)
}
