use clap::{Parser, Subcommand, ValueEnum};
use ifkit_core::cascade::{adc_floor, analyze_cascade, lsb_gain_tuning, write_cascade_csv};
use ifkit_core::compression::compression_metrics;
use ifkit_core::config::{dump_effective_config, load_config, parse_config, LoadedConfig};
use ifkit_core::freq_plan::{evaluate_plan, sweep_analog_bandwidth, write_spur_csv, write_sweep_csv};
use ifkit_core::iqfile::{self, write_atomic, OutputFormat};
use ifkit_core::sim::{run_scenario, write_simulation};
use ifkit_core::timing::{coverage_check, simulate_cal_window, write_masking_csv, CalMaskingRequest, PulseKind};
use ifkit_core::{range_per_sample, CompressionMetrics, Error, IqSignal};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ifkit", version, about = "Radar IF chain design and simulation toolkit")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted (CSV only).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides the scenario and calibration noise seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the configuration with all defaults filled in, then exit.
    #[arg(long, global = true)]
    dump_effective_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Raw,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Raw => OutputFormat::Raw,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a configured waveform (`n,i,q` CSV or raw I/Q).
    Chirp {
        #[arg(long, default_value = "medium")]
        waveform: String,
    },
    /// Write a configured compression filter's taps (`k,re,im` CSV or raw I/Q).
    PcDesign {
        #[arg(long, default_value = "medium_mismatched")]
        filter: String,
    },
    /// Compression metrics of a filter against its source waveform.
    PcEval {
        #[arg(long, default_value = "medium_mismatched")]
        filter: String,
    },
    /// Mixer spur table for the configured plan and mask.
    Spurs {
        /// Evaluate every configured bandwidth candidate instead.
        #[arg(long)]
        sweep: bool,
    },
    /// Receive-chain cascade table and summary.
    Cascade,
    /// Coverage check and calibration masking report for the schedule.
    Timing,
    /// Run the configured point-target scenario.
    Simulate,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ifkit: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut loaded = match &cli.config {
        Some(path) => load_config(path)?,
        None => parse_config("")?,
    };
    if let Some(seed) = cli.seed {
        loaded = loaded.with_seed(seed);
        loaded.config.calibration.seed = seed;
    }
    if cli.dump_effective_config {
        return emit(cli.out.as_deref(), dump_effective_config(&loaded.config)?.as_bytes());
    }
    let Some(command) = &cli.command else {
        return Err(Error::InvalidArgument("no subcommand given (see --help)".into()));
    };
    let format = OutputFormat::from(cli.format);
    let out = cli.out.as_deref();
    match command {
        Command::Chirp { waveform } => {
            let sig = loaded.assets.waveform(waveform)?;
            emit_signal(out, format, sig, &[("waveform_id", waveform.clone())], "n,i,q")
        }
        Command::PcDesign { filter } => {
            let taps = loaded.assets.filter(filter)?;
            let fs = loaded.config.signal.sample_rate_hz;
            let extra = [
                ("filter_id", filter.clone()),
                ("design_kind", taps.design_kind().as_str().to_string()),
                ("source_waveform_id", taps.source_waveform_id().to_string()),
                ("reference_lag", taps.reference_lag().to_string()),
            ];
            emit_signal(out, format, &taps.to_signal(fs)?, &extra, "k,re,im")
        }
        Command::PcEval { filter } => {
            require_csv(format)?;
            let taps = loaded.assets.filter(filter)?;
            let wf = loaded.assets.waveform(taps.source_waveform_id())?;
            let m = compression_metrics(wf, taps, range_per_sample(wf.sample_rate_hz()))?;
            let mut buf = Vec::new();
            write_row(&mut buf, &CompressionMetrics::CSV_HEADER)?;
            write_row(&mut buf, &m.csv_record())?;
            emit(out, &buf)
        }
        Command::Spurs { sweep } => {
            require_csv(format)?;
            let c = &loaded.config;
            let mut buf = Vec::new();
            if *sweep {
                let s = sweep_analog_bandwidth(
                    &c.plan.frequency_plan(),
                    &c.mixer,
                    &c.mask,
                    c.plan.rf_input_dbm,
                    c.plan.spur_threshold_dbm,
                    &c.plan.bandwidth_candidates_hz,
                )?;
                write_sweep_csv(&s, &mut buf)?;
                match s.widest_passing_hz {
                    Some(b) => eprintln!("widest passing analog bandwidth: {b} Hz"),
                    None => eprintln!("no candidate bandwidth passes"),
                }
            } else {
                let r = evaluate_plan(
                    &c.plan.frequency_plan(),
                    &c.mixer,
                    &c.mask,
                    c.plan.rf_input_dbm,
                    c.plan.spur_threshold_dbm,
                )?;
                write_spur_csv(&r, &mut buf)?;
                eprintln!(
                    "plan {}: worst in-band margin {} dB, LO feedthrough {} dBm after filtering",
                    if r.pass { "passes" } else { "fails" },
                    r.worst_margin_db,
                    r.lo_feedthrough_post_filter_dbm
                );
            }
            emit(out, &buf)
        }
        Command::Cascade => {
            require_csv(format)?;
            let c = &loaded.config.cascade;
            let report = analyze_cascade(&c.stages, c.input_dbm, c.noise_bandwidth_hz)?;
            let mut buf = Vec::new();
            write_cascade_csv(&c.stages, &report, &mut buf)?;
            let adc = &loaded.config.adc;
            let floor = adc_floor(adc);
            let trim = lsb_gain_tuning(&c.stages, adc, c.noise_bandwidth_hz, c.lsb_alpha)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "ADC SNR {:.2} dB, LSB {:.3} uV; {trim:+.2} dB of gain puts noise at {} LSB rms",
                floor.snr_db,
                floor.lsb_v * 1e6,
                c.lsb_alpha
            );
            emit(out, &buf)
        }
        Command::Timing => {
            require_csv(format)?;
            timing(&loaded, out)
        }
        Command::Simulate => {
            let res = run_scenario(&loaded.scenario, &loaded.schedule, &loaded.assets)?;
            eprintln!("{} detections", res.detections.len());
            match (out, format) {
                (Some(path), f) => {
                    write_simulation(&res, path, f)?;
                    Ok(())
                }
                (None, OutputFormat::Csv) => {
                    let mut buf = Vec::new();
                    ifkit_core::sim::write_profile_csv(&res.range_profile, &mut buf)?;
                    emit(None, &buf)
                }
                (None, OutputFormat::Raw) => Err(Error::InvalidArgument("--format raw needs --out".into())),
            }
        }
    }
}

fn timing(loaded: &LoadedConfig, out: Option<&Path>) -> Result<(), Error> {
    let duration = |kind: PulseKind| -> Result<f64, Error> {
        match loaded.schedule.first(kind) {
            Some(ev) => Ok(loaded.assets.waveform(&ev.waveform_id)?.duration_s()),
            None => Ok(0.0),
        }
    };
    let cov = coverage_check(
        &loaded.schedule,
        duration(PulseKind::TransmitShort)?,
        duration(PulseKind::TransmitMedium)?,
    );
    match (cov.pass, cov.covered, cov.uncovered) {
        (true, Some((a, b)), _) => eprintln!("coverage: pass, short pulse covers {a:.1} m to {b:.1} m"),
        (true, _, _) => eprintln!("coverage: pass, no blind-range gap"),
        (false, _, Some((a, b))) => eprintln!("coverage: FAIL, uncovered {a:.1} m to {b:.1} m"),
        (false, _, None) => eprintln!("coverage: FAIL"),
    }
    let cal = &loaded.config.calibration;
    let report = simulate_cal_window(
        &loaded.schedule,
        &loaded.assets,
        &CalMaskingRequest {
            injection_dbm: loaded.cal_injection_dbm(),
            noise_power: cal.noise_power,
            seed: cal.seed,
            offsets_m: cal.offsets_m.clone(),
            full_scale_dbm: loaded.config.scenario.full_scale_dbm,
        },
    )?;
    let mut buf = Vec::new();
    write_masking_csv(&report, &mut buf)?;
    emit(out, &buf)
}

fn require_csv(format: OutputFormat) -> Result<(), Error> {
    match format {
        OutputFormat::Csv => Ok(()),
        OutputFormat::Raw => Err(Error::InvalidArgument("this subcommand only writes CSV".into())),
    }
}

fn write_row<S: AsRef<str>>(buf: &mut Vec<u8>, fields: &[S]) -> Result<(), Error> {
    let line: Vec<&str> = fields.iter().map(|s| s.as_ref()).collect();
    writeln!(buf, "{}", line.join(","))?;
    Ok(())
}

fn emit_signal(
    out: Option<&Path>,
    format: OutputFormat,
    sig: &IqSignal,
    extra: &[(&str, String)],
    header: &str,
) -> Result<(), Error> {
    match format {
        OutputFormat::Raw => {
            let path = out.ok_or_else(|| Error::InvalidArgument("--format raw needs --out".into()))?;
            iqfile::write_iq(path, sig, extra)
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            writeln!(buf, "{header}")?;
            for (k, v) in sig.samples().iter().enumerate() {
                writeln!(buf, "{k},{},{}", v.re, v.im)?;
            }
            emit(out, &buf)
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
