//! Named waveforms and compression filters shared by the schedule and the simulator.

use crate::compression::FilterTaps;
use crate::error::{Error, Result};
use crate::signal::IqSignal;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct AssetRegistry {
    waveforms: BTreeMap<String, IqSignal>,
    filters: BTreeMap<String, FilterTaps>,
}

impl AssetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_waveform(&mut self, id: impl Into<String>, signal: IqSignal) {
        self.waveforms.insert(id.into(), signal);
    }

    pub fn insert_filter(&mut self, id: impl Into<String>, taps: FilterTaps) {
        self.filters.insert(id.into(), taps);
    }

    pub fn waveform(&self, id: &str) -> Result<&IqSignal> {
        self.waveforms
            .get(id)
            .ok_or_else(|| Error::UnregisteredAsset(format!("waveform {id}")))
    }

    pub fn filter(&self, id: &str) -> Result<&FilterTaps> {
        self.filters
            .get(id)
            .ok_or_else(|| Error::UnregisteredAsset(format!("filter {id}")))
    }

    pub fn waveforms(&self) -> impl Iterator<Item = (&str, &IqSignal)> {
        self.waveforms.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn filters(&self) -> impl Iterator<Item = (&str, &FilterTaps)> {
        self.filters.iter().map(|(k, v)| (k.as_str(), v))
    }
}
