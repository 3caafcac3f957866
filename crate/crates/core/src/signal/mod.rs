//! Complex baseband signals and the DSP primitives that act on them.

mod conv;
mod noise;
mod window;

pub use conv::{convolve_direct, convolve_fft};
pub use noise::{derive_seed, gaussian_samples, NoiseSpec};
pub use window::Window;

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniformly sampled complex baseband samples, 1.0 = analog full scale.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl IqSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(k) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidArgument(format!("sample {k} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn scaled(&self, factor: Complex64) -> IqSignal {
        IqSignal {
            samples: self.samples.iter().map(|&s| s * factor).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    fn ensure_nonempty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptySignal(what.to_string()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

/// Linear FM pulse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSpec {
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub center_offset_hz: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub sweep_direction: SweepDirection,
    #[serde(default)]
    pub window: Window,
}

fn unit() -> f64 {
    1.0
}

impl ChirpSpec {
    pub fn new(bandwidth_hz: f64, duration_s: f64) -> Self {
        Self {
            bandwidth_hz,
            duration_s,
            center_offset_hz: 0.0,
            amplitude: 1.0,
            sweep_direction: SweepDirection::Up,
            window: Window::Rectangular,
        }
    }

    /// Checks the parameters that do not depend on the sample rate.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidArgument("chirp duration must be positive".into()));
        }
        if !(self.bandwidth_hz >= 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::InvalidArgument("chirp bandwidth must be nonnegative".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument("chirp amplitude must be positive".into()));
        }
        if !self.center_offset_hz.is_finite() {
            return Err(Error::InvalidArgument("chirp center offset must be finite".into()));
        }
        self.window.validate().map_err(Error::InvalidArgument)
    }
}

fn sample_count(duration_s: f64, sample_rate_hz: f64) -> Result<usize> {
    let n = (duration_s * sample_rate_hz).round();
    if n < 1.0 {
        return Err(Error::EmptySignal(format!(
            "{duration_s} s at {sample_rate_hz} Hz yields no samples"
        )));
    }
    Ok(n as usize)
}

fn check_rate(sample_rate_hz: f64) -> Result<()> {
    if sample_rate_hz > 0.0 && sample_rate_hz.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )))
    }
}

/// Linear FM pulse. Time starts at the first sample; the instantaneous
/// frequency sweeps `center - B/2 -> center + B/2` (reversed for a down
/// sweep), so a zero-bandwidth chirp is exactly the CW pulse at the offset.
pub fn generate_lfm_chirp(spec: &ChirpSpec, sample_rate_hz: f64) -> Result<IqSignal> {
    check_rate(sample_rate_hz)?;
    spec.validate()?;
    let occupied = spec.bandwidth_hz + 2.0 * spec.center_offset_hz.abs();
    if occupied > sample_rate_hz {
        return Err(Error::NyquistViolation(format!(
            "bandwidth {} Hz + 2*|offset {} Hz| exceeds sample rate {} Hz",
            spec.bandwidth_hz, spec.center_offset_hz, sample_rate_hz
        )));
    }
    let n = sample_count(spec.duration_s, sample_rate_hz)?;
    let weights = spec.window.weights(n);
    let b = spec.bandwidth_hz;
    let t_len = spec.duration_s;
    let dir = match spec.sweep_direction {
        SweepDirection::Up => 1.0,
        SweepDirection::Down => -1.0,
    };
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate_hz;
            let cycles = spec.center_offset_hz * t + dir * (-b / 2.0 * t + b * t * t / (2.0 * t_len));
            Complex64::from_polar(spec.amplitude * weights[k], 2.0 * PI * cycles)
        })
        .collect();
    IqSignal::new(samples, sample_rate_hz)
}

/// Unmodulated constant-envelope pulse at `offset_hz`.
pub fn generate_cw_pulse(duration_s: f64, offset_hz: f64, amplitude: f64, sample_rate_hz: f64) -> Result<IqSignal> {
    check_rate(sample_rate_hz)?;
    if !(offset_hz.abs() < sample_rate_hz / 2.0) {
        return Err(Error::NyquistViolation(format!(
            "CW offset {offset_hz} Hz not below half the sample rate {sample_rate_hz} Hz"
        )));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidArgument("CW amplitude must be positive".into()));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidArgument("CW duration must be positive".into()));
    }
    let n = sample_count(duration_s, sample_rate_hz)?;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate_hz;
            Complex64::from_polar(amplitude, 2.0 * PI * (offset_hz * t))
        })
        .collect();
    IqSignal::new(samples, sample_rate_hz)
}

/// Multiplies sample `n` by `exp(j*2*pi*offset_hz*n/fs)`.
pub fn nco_mix(signal: &IqSignal, offset_hz: f64) -> Result<IqSignal> {
    signal.ensure_nonempty("nco_mix input")?;
    let fs = signal.sample_rate_hz;
    let samples = signal
        .samples
        .iter()
        .enumerate()
        .map(|(n, &s)| s * Complex64::from_polar(1.0, 2.0 * PI * offset_hz * n as f64 / fs))
        .collect();
    IqSignal::new(samples, fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMode {
    Direct,
    #[default]
    Fast,
}

/// Full linear convolution (`N + L - 1` output samples).
pub fn fir_filter(signal: &IqSignal, taps: &[Complex64], mode: ConvolutionMode) -> Result<IqSignal> {
    if taps.is_empty() {
        return Err(Error::EmptyTaps);
    }
    signal.ensure_nonempty("fir_filter input")?;
    let out = match mode {
        ConvolutionMode::Direct => convolve_direct(&signal.samples, taps),
        ConvolutionMode::Fast => convolve_fft(&signal.samples, taps),
    };
    IqSignal::new(out, signal.sample_rate_hz)
}

/// Anti-alias filter, then keep every `factor`-th sample from index 0.
pub fn decimate(signal: &IqSignal, factor: usize, anti_alias_taps: &[Complex64]) -> Result<IqSignal> {
    if factor == 0 {
        return Err(Error::InvalidArgument("decimation factor must be >= 1".into()));
    }
    let filtered = fir_filter(signal, anti_alias_taps, ConvolutionMode::Fast)?;
    let kept = filtered.samples.into_iter().step_by(factor).collect();
    IqSignal::new(kept, signal.sample_rate_hz / factor as f64)
}

/// Prepends `delay_samples` zeros.
pub fn apply_delay(signal: &IqSignal, delay_samples: usize) -> IqSignal {
    let mut samples = vec![Complex64::new(0.0, 0.0); delay_samples];
    samples.extend_from_slice(&signal.samples);
    IqSignal {
        samples,
        sample_rate_hz: signal.sample_rate_hz,
    }
}

/// Adds seeded complex white Gaussian noise; see [`gaussian_samples`].
pub fn add_awgn(signal: &IqSignal, noise: &NoiseSpec) -> Result<IqSignal> {
    if !(noise.power >= 0.0 && noise.power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise power must be nonnegative, got {}",
            noise.power
        )));
    }
    if noise.power == 0.0 {
        return Ok(signal.clone());
    }
    let n = gaussian_samples(signal.len(), noise.power, noise.seed);
    let samples = signal.samples.iter().zip(n).map(|(&s, w)| s + w).collect();
    IqSignal::new(samples, signal.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn signal_rejects_bad_rate_and_nan() {
        assert!(IqSignal::new(vec![], 0.0).is_err());
        assert!(IqSignal::new(vec![c(f64::NAN, 0.0)], 1.0).is_err());
        assert!(IqSignal::new(vec![], 1.0).unwrap().is_empty());
    }

    #[test]
    fn zero_bandwidth_chirp_is_dc() {
        let s = generate_lfm_chirp(&ChirpSpec::new(0.0, 1e-6), 10e6).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.samples().iter().all(|&v| v == c(1.0, 0.0)));
    }

    #[test]
    fn chirp_length_and_energy() {
        let s = generate_lfm_chirp(&ChirpSpec::new(5e6, 20e-6), 10e6).unwrap();
        assert_eq!(s.len(), 200);
        assert!((s.energy() - 200.0).abs() < 1e-10);
    }

    #[test]
    fn chirp_sweeps_across_the_band() {
        // instantaneous frequency from the phase difference of adjacent samples
        let fs = 10e6;
        let spec = ChirpSpec::new(5e6, 20e-6);
        let s = generate_lfm_chirp(&spec, fs).unwrap();
        let f = |k: usize| (s.samples()[k + 1] * s.samples()[k].conj()).arg() * fs / (2.0 * PI);
        assert!((f(0) + 2.5e6).abs() < 0.05e6, "{}", f(0));
        assert!(f(99).abs() < 0.05e6, "{}", f(99));
        assert!((f(198) - 2.5e6).abs() < 0.05e6, "{}", f(198));

        let down = generate_lfm_chirp(
            &ChirpSpec {
                sweep_direction: SweepDirection::Down,
                ..spec
            },
            fs,
        )
        .unwrap();
        let g = |k: usize| (down.samples()[k + 1] * down.samples()[k].conj()).arg() * fs / (2.0 * PI);
        assert!((g(0) - 2.5e6).abs() < 0.05e6);
        assert!((g(198) + 2.5e6).abs() < 0.05e6);
    }

    #[test]
    fn chirp_errors() {
        let mut spec = ChirpSpec::new(8e6, 20e-6);
        spec.center_offset_hz = 2e6;
        assert!(matches!(
            generate_lfm_chirp(&spec, 10e6),
            Err(Error::NyquistViolation(_))
        ));
        assert!(matches!(
            generate_lfm_chirp(&ChirpSpec::new(1e3, 1e-9), 10e6),
            Err(Error::EmptySignal(_))
        ));
    }

    #[test]
    fn windowed_chirp_uses_weights() {
        let spec = ChirpSpec {
            window: Window::Hann,
            ..ChirpSpec::new(5e6, 20e-6)
        };
        let s = generate_lfm_chirp(&spec, 10e6).unwrap();
        assert!(s.samples()[0].norm() < 1e-12);
        assert!(s.energy() < 200.0 * 0.5);
    }

    #[test]
    fn cw_examples() {
        let s = generate_cw_pulse(1e-6, 0.0, 1.0, 4e6).unwrap();
        assert_eq!(s.samples(), &[c(1.0, 0.0); 4]);

        let q = generate_cw_pulse(1e-6, 1e6, 1.0, 4e6).unwrap();
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (a, b) in q.samples().iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }

        assert!(matches!(
            generate_cw_pulse(1e-6, 2e6, 1.0, 4e6),
            Err(Error::NyquistViolation(_))
        ));
        assert!(matches!(
            generate_cw_pulse(1e-9, 0.0, 1.0, 4e6),
            Err(Error::EmptySignal(_))
        ));
    }

    #[test]
    fn cw_equals_zero_bandwidth_chirp() {
        for &off in &[0.0, 1.3e6, -2.2e6] {
            let cw = generate_cw_pulse(3e-6, off, 0.7, 10e6).unwrap();
            let spec = ChirpSpec {
                center_offset_hz: off,
                amplitude: 0.7,
                ..ChirpSpec::new(0.0, 3e-6)
            };
            let ch = generate_lfm_chirp(&spec, 10e6).unwrap();
            assert_eq!(cw, ch);
        }
    }

    #[test]
    fn nco_examples() {
        let s = generate_lfm_chirp(&ChirpSpec::new(5e6, 20e-6), 10e6).unwrap();
        assert_eq!(nco_mix(&s, 0.0).unwrap(), s);

        let back = nco_mix(&nco_mix(&s, 1.234e6).unwrap(), -1.234e6).unwrap();
        for (a, b) in back.samples().iter().zip(s.samples()) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }

        let tone = generate_cw_pulse(5e-6, 1.7e6, 1.0, 10e6).unwrap();
        let dc = nco_mix(&tone, -1.7e6).unwrap();
        for v in dc.samples() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }

        let empty = IqSignal::new(vec![], 1.0).unwrap();
        assert!(matches!(nco_mix(&empty, 1.0), Err(Error::EmptySignal(_))));
    }

    #[test]
    fn fir_identity_and_impulse() {
        let s = generate_lfm_chirp(&ChirpSpec::new(5e6, 2e-6), 10e6).unwrap();
        for mode in [ConvolutionMode::Direct, ConvolutionMode::Fast] {
            let y = fir_filter(&s, &[c(1.0, 0.0)], mode).unwrap();
            for (a, b) in y.samples().iter().zip(s.samples()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        let taps = vec![c(0.5, 0.1), c(-1.0, 2.0), c(0.0, -0.3)];
        let imp = IqSignal::new(vec![c(1.0, 0.0)], 1.0).unwrap();
        let y = fir_filter(&imp, &taps, ConvolutionMode::Direct).unwrap();
        assert_eq!(y.samples(), taps.as_slice());
        assert!(matches!(
            fir_filter(&imp, &[], ConvolutionMode::Fast),
            Err(Error::EmptyTaps)
        ));
        let empty = IqSignal::new(vec![], 1.0).unwrap();
        assert!(matches!(
            fir_filter(&empty, &taps, ConvolutionMode::Fast),
            Err(Error::EmptySignal(_))
        ));
    }

    #[test]
    fn decimate_identity_and_length() {
        let s = generate_lfm_chirp(&ChirpSpec::new(5e6, 20e-6), 10e6).unwrap();
        let d = decimate(&s, 1, &[c(1.0, 0.0)]).unwrap();
        for (a, b) in d.samples().iter().zip(s.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let x = IqSignal::new(vec![c(1.0, 0.0); 1000], 4e6).unwrap();
        let d = decimate(&x, 4, &[c(1.0 / 33.0, 0.0); 33]).unwrap();
        assert_eq!(d.len(), 258);
        assert_eq!(d.sample_rate_hz(), 1e6);
        assert!(decimate(&x, 0, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn delay_examples() {
        let s = IqSignal::new(vec![c(1.0, 1.0); 3], 1.0).unwrap();
        assert_eq!(apply_delay(&s, 0), s);
        let d = apply_delay(&s, 5);
        assert_eq!(d.len(), 8);
        assert!(d.samples()[..5].iter().all(|&v| v == c(0.0, 0.0)));
        assert_eq!(&d.samples()[5..], s.samples());
    }

    #[test]
    fn awgn_identity_and_determinism() {
        let s = generate_lfm_chirp(&ChirpSpec::new(5e6, 20e-6), 10e6).unwrap();
        assert_eq!(add_awgn(&s, &NoiseSpec::new(0.0, 9)).unwrap(), s);
        let a = add_awgn(&s, &NoiseSpec::new(0.5, 9)).unwrap();
        let b = add_awgn(&s, &NoiseSpec::new(0.5, 9)).unwrap();
        assert_eq!(a, b);
        let c2 = add_awgn(&s, &NoiseSpec::new(0.5, 10)).unwrap();
        assert_ne!(a, c2);
        assert!(add_awgn(&s, &NoiseSpec::new(-1.0, 9)).is_err());
    }
}
