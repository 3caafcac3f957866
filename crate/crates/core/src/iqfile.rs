//! Header-less interleaved I/Q files (`f32le_iq`) with a text sidecar.
//!
//! The binary file holds `I0 Q0 I1 Q1 ...` as little-endian `f32`. The
//! sidecar lives next to it as `<path>.meta` and holds `key=value` lines;
//! `sample_rate_hz`, `num_samples` and `format=f32le_iq` are always present.

use crate::error::{Error, Result};
use crate::signal::IqSignal;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const FORMAT_TAG: &str = "f32le_iq";

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Serializes samples as interleaved little-endian `f32`.
pub fn encode_f32le(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_f32le(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of f32 I/Q pairs",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let i = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let q = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(i as f64, q as f64)
        })
        .collect())
}

/// Renders the sidecar text. `extra` keys are appended after the fixed ones.
pub fn sidecar_text(sample_rate_hz: f64, num_samples: usize, extra: &[(&str, String)]) -> String {
    let mut s = format!("sample_rate_hz={sample_rate_hz}\nnum_samples={num_samples}\nformat={FORMAT_TAG}\n");
    for (k, v) in extra {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

/// On-disk form of a tool's primary output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    /// Interleaved little-endian `f32` I/Q with a `.meta` sidecar.
    Raw,
}

/// Writes `path` and `path.meta`. Each file is written to a temporary
/// sibling first and renamed into place.
pub fn write_iq(path: &Path, signal: &IqSignal, extra: &[(&str, String)]) -> Result<()> {
    write_atomic(path, &encode_f32le(signal.samples()))?;
    let meta = sidecar_text(signal.sample_rate_hz(), signal.len(), extra);
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

/// Reads a file written by [`write_iq`], returning the signal and all sidecar keys.
pub fn read_iq(path: &Path) -> Result<(IqSignal, BTreeMap<String, String>)> {
    let meta_text = fs::read_to_string(sidecar_path(path))?;
    let meta = parse_sidecar(&meta_text)?;
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| Error::Format(format!("sidecar is missing `{k}`")))
    };
    if get("format")? != FORMAT_TAG {
        return Err(Error::Format(format!("unsupported format `{}`", get("format")?)));
    }
    let fs_hz: f64 = get("sample_rate_hz")?
        .parse()
        .map_err(|_| Error::Format("sample_rate_hz is not a number".into()))?;
    let n: usize = get("num_samples")?
        .parse()
        .map_err(|_| Error::Format("num_samples is not an integer".into()))?;
    let samples = decode_f32le(&fs::read(path)?)?;
    if samples.len() != n {
        return Err(Error::Format(format!(
            "sidecar says {n} samples, file holds {}",
            samples.len()
        )));
    }
    Ok((IqSignal::new(samples, fs_hz)?, meta))
}

pub fn parse_sidecar(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("sidecar line {}: expected key=value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
