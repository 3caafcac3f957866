use ifkit_core::assets::AssetRegistry;
use ifkit_core::cascade::{analyze_cascade, CascadeStage};
use ifkit_core::compression::{compression_metrics, design_mismatched_filter, matched_filter, MismatchedDesign};
use ifkit_core::freq_plan::{
    enumerate_spurs, evaluate_plan, sweep_analog_bandwidth, FilterMask, FrequencyPlan, MixerSpec, Sideband,
};
use ifkit_core::signal::{
    add_awgn, convolve_direct, fir_filter, generate_cw_pulse, generate_lfm_chirp, nco_mix, ChirpSpec, ConvolutionMode,
    NoiseSpec,
};
use ifkit_core::sim::{run_scenario, PointTarget, Scenario};
use ifkit_core::timing::{
    blind_range, build_schedule, default_events, simulate_cal_window, CalMaskingRequest, PulseEvent, PulseKind,
};
use ifkit_core::{range_per_sample, IqSignal};
use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::BTreeSet;

const FS: f64 = 10e6;

fn complex_vec(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im)),
        len,
    )
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Sidelobe energy outside `peak ± hw` relative to the peak power.
fn isl_outside(y: &[Complex64], peak: usize, hw: usize) -> f64 {
    let side: f64 = y
        .iter()
        .enumerate()
        .filter(|(k, _)| k.abs_diff(peak) > hw)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    side / y[peak].norm_sqr()
}

fn chirp(b: f64, t: f64) -> IqSignal {
    generate_lfm_chirp(&ChirpSpec::new(b, t), FS).unwrap()
}

/// Sidelobe energy of the unit-peak response outside `k0 ± halfwidth`.
fn sidelobe_objective(s: &IqSignal, taps: &[Complex64], k0: usize, halfwidth: usize) -> f64 {
    let y = convolve_direct(s.samples(), taps);
    let peak = y[k0].norm_sqr();
    y.iter()
        .enumerate()
        .filter(|(k, _)| k.abs_diff(k0) > halfwidth)
        .map(|(_, v)| v.norm_sqr() / peak)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fir_is_linear(x in complex_vec(1..400), y in complex_vec(1..400), h in complex_vec(1..64),
                     a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let mix: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p * a + q * b).collect();
        let f = |v: &[Complex64]| fir_filter(&IqSignal::new(v.to_vec(), FS).unwrap(), &h, ConvolutionMode::Fast).unwrap();
        let lhs = f(&mix);
        let rhs: Vec<Complex64> = f(x).samples().iter().zip(f(y).samples()).map(|(p, q)| p * a + q * b).collect();
        prop_assert!(rel_err(lhs.samples(), &rhs) <= 1e-10);
    }

    #[test]
    fn fast_matches_direct(x in complex_vec(1..3000), h in complex_vec(1..=480)) {
        let s = IqSignal::new(x, FS).unwrap();
        let fast = fir_filter(&s, &h, ConvolutionMode::Fast).unwrap();
        let direct = fir_filter(&s, &h, ConvolutionMode::Direct).unwrap();
        prop_assert!(rel_err(fast.samples(), direct.samples()) <= 1e-9);
    }

    #[test]
    fn rectangular_chirp_energy(b in 0.0f64..9e6, n in 1usize..2000, amp in 0.1f64..4.0) {
        let mut spec = ChirpSpec::new(b, n as f64 / FS);
        spec.amplitude = amp;
        let s = generate_lfm_chirp(&spec, FS).unwrap();
        let want = amp * amp * s.len() as f64;
        prop_assert!((s.energy() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn nco_preserves_magnitude(x in complex_vec(1..500), f in -4.9e6f64..4.9e6) {
        let s = IqSignal::new(x, FS).unwrap();
        let m = nco_mix(&s, f).unwrap();
        for (a, b) in s.samples().iter().zip(m.samples()) {
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn awgn_is_reproducible(x in complex_vec(1..300), power in 0.0f64..10.0, seed in any::<u64>()) {
        let s = IqSignal::new(x, FS).unwrap();
        let a = add_awgn(&s, &NoiseSpec::new(power, seed)).unwrap();
        let b = add_awgn(&s, &NoiseSpec::new(power, seed)).unwrap();
        let bits = |v: &IqSignal| v.samples().iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn blind_range_is_linear(a in 0.0f64..1e-3, b in 0.0f64..1e-3, k in 0.0f64..10.0) {
        let lhs = blind_range(k * a + b);
        let rhs = k * blind_range(a) + blind_range(b);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mismatched_isl_not_worse_than_matched(b in 1e6f64..5e6, n in 40usize..200, extra in 0usize..3) {
        let s = chirp(b, n as f64 / FS);
        let len = (s.len() * (extra + 1)).min(480);
        let hw = MismatchedDesign::default_halfwidth(FS, b);
        let design = MismatchedDesign::new(len, hw);
        let mm = design_mismatched_filter(&s, &design).unwrap();
        let mf = matched_filter(&s).unwrap();
        let mm_isl = isl_outside(&convolve_direct(s.samples(), mm.taps()), design.reference_lag(s.len()), hw);
        let mf_isl = isl_outside(&convolve_direct(s.samples(), mf.taps()), s.len() - 1, hw);
        prop_assert!(mm_isl <= mf_isl * (1.0 + 1e-6) + 1e-15, "{} vs {}", mm_isl, mf_isl);
        let gate = range_per_sample(FS);
        prop_assert!(compression_metrics(&s, &mm, gate).unwrap().mismatch_loss_db >= 0.0);
    }

    #[test]
    fn metrics_are_scale_invariant(b in 1e6f64..5e6, n in 20usize..200, c in 0.01f64..100.0) {
        let s = chirp(b, n as f64 / FS);
        let taps = design_mismatched_filter(&s, &MismatchedDesign::new((2 * s.len()).min(480), 2)).unwrap();
        let gate = range_per_sample(FS);
        let m1 = compression_metrics(&s, &taps, gate).unwrap();
        let m2 = compression_metrics(&s.scaled(Complex64::new(c, 0.0)), &taps, gate).unwrap();
        for (x, y) in [
            (m1.psl_db, m2.psl_db),
            (m1.isl_db, m2.isl_db),
            (m1.mainlobe_width_samples, m2.mainlobe_width_samples),
            (m1.mismatch_loss_db, m2.mismatch_loss_db),
        ] {
            prop_assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn longer_filters_never_worse(b in 1e6f64..5e6, n in 40usize..160) {
        let s = chirp(b, n as f64 / FS);
        let hw = MismatchedDesign::default_halfwidth(FS, b);
        let mut prev = f64::INFINITY;
        for len in [s.len(), 2 * s.len(), 3 * s.len(), 480] {
            if len > 480 {
                continue;
            }
            let design = MismatchedDesign::new(len, hw);
            let taps = design_mismatched_filter(&s, &design).unwrap();
            let obj = sidelobe_objective(&s, taps.taps(), design.reference_lag(s.len()), hw);
            prop_assert!(obj <= prev * (1.0 + 1e-6) + 1e-12, "length {len}: {obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn matched_loss_is_zero(b in 0.0f64..5e6, n in 1usize..300, c in 0.1f64..10.0) {
        let s = chirp(b, n as f64 / FS);
        let mf = matched_filter(&s).unwrap();
        let scaled = ifkit_core::FilterTaps::new(
            mf.taps().iter().map(|t| t * c).collect(),
            mf.design_kind(),
            "",
            mf.reference_lag(),
            480,
        ).unwrap();
        let m = compression_metrics(&s, &scaled, range_per_sample(FS)).unwrap();
        prop_assert!(m.mismatch_loss_db.abs() <= 1e-9);
    }
}

fn random_mixer() -> impl Strategy<Value = MixerSpec> {
    (
        1.0f64..10.0,
        10.0f64..50.0,
        5.0f64..20.0,
        proptest::collection::vec(20.0f64..90.0, 20),
        50.0f64..100.0,
    )
        .prop_map(|(loss, iso, drive, levels, default)| {
            let mut m = MixerSpec::double_balanced_if_mixer(5);
            m.conversion_loss_db = loss;
            m.lo_to_if_isolation_db = iso;
            m.lo_drive_dbm = drive;
            let keys: Vec<(u32, u32)> = m.spur_table.keys().copied().filter(|&k| k != (1, 1)).collect();
            for (k, v) in keys.into_iter().zip(levels) {
                m.spur_table.insert(k, v);
            }
            m.default_suppression_dbc = Some(default);
            m
        })
}

fn plan(rf: f64, lo: f64, bw: f64) -> FrequencyPlan {
    FrequencyPlan {
        rf_hz: rf,
        lo_hz: lo,
        if_center_hz: (rf - lo).abs(),
        analog_bandwidth_hz: bw,
        sideband: Sideband::Difference,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn swapping_rf_and_lo_transposes_products(rf in 0.5e9f64..2e9, lo in 0.5e9f64..2e9) {
        prop_assume!((rf - lo).abs() > 1e6);
        let mixer = MixerSpec::double_balanced_if_mixer(5);
        let key = |p: &FrequencyPlan, swap: bool| -> BTreeSet<(u32, u32, String, u64)> {
            enumerate_spurs(p, &mixer, -10.0).unwrap().iter().map(|s| {
                let (m, n) = if swap { (s.n, s.m) } else { (s.m, s.n) };
                (m, n, s.sign.as_str().to_string(), s.frequency_hz.round() as u64)
            }).collect()
        };
        prop_assert_eq!(key(&plan(rf, lo, 20e6), false), key(&plan(lo, rf, 20e6), true));
    }

    #[test]
    fn mask_never_raises_levels(att in proptest::collection::vec((0.0f64..3e9, 0.0f64..90.0), 1..6)) {
        let mut bp = att;
        bp.sort_by(|a, b| a.0.total_cmp(&b.0));
        bp.dedup_by(|a, b| a.0 == b.0);
        let mask = FilterMask::new(bp).unwrap();
        let rep = evaluate_plan(&plan(1.25e9, 1.19e9, 20e6), &MixerSpec::double_balanced_if_mixer(5), &mask, -10.0, -80.0).unwrap();
        for s in &rep.spurs {
            prop_assert!(s.effective_level_dbm() <= s.level_dbm);
        }
    }

    #[test]
    fn widening_never_rescues_a_failing_plan(mixer in random_mixer(), rf in 1.0e9f64..1.5e9, if_hz in 20e6f64..200e6,
                                             threshold in -120.0f64..-40.0) {
        let template = plan(rf, rf - if_hz, 1e6);
        let mask = FilterMask::new(vec![(if_hz * 0.5, 40.0), (if_hz, 0.0), (if_hz * 1.5, 40.0)]).unwrap();
        let candidates = [1e6, 5e6, 10e6, 20e6, 40e6, 80e6];
        let sweep = sweep_analog_bandwidth(&template, &mixer, &mask, -10.0, threshold, &candidates).unwrap();
        let mut failed = false;
        for (_, rep) in &sweep.reports {
            prop_assert!(!(failed && rep.pass));
            failed |= !rep.pass;
        }
    }

    #[test]
    fn plan_verdict_ignores_spur_order(mixer in random_mixer(), seed in any::<u64>()) {
        let p = plan(1.25e9, 1.19e9, 40e6);
        let mask = FilterMask::flat(0.0);
        let rep = evaluate_plan(&p, &mixer, &mask, -10.0, -70.0).unwrap();
        let worst = |spurs: &[ifkit_core::freq_plan::SpurProduct]| {
            spurs.iter().filter(|s| s.in_band && !s.desired).map(|s| s.effective_level_dbm()).fold(f64::NEG_INFINITY, f64::max)
        };
        let mut shuffled = rep.spurs.clone();
        let k = (seed as usize) % shuffled.len().max(1);
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(worst(&shuffled) <= -70.0, rep.pass);
    }
}

fn amp_stage() -> impl Strategy<Value = CascadeStage> {
    (0.5f64..30.0, 0.0f64..12.0, proptest::option::of(-5.0f64..45.0))
        .prop_map(|(g, nf, oip3)| CascadeStage::new("amp", g, nf, oip3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn best_stage_first_never_hurts(mut stages in proptest::collection::vec(amp_stage(), 2..7), pick in any::<prop::sample::Index>()) {
        let i = pick.index(stages.len());
        // make stage i the lowest-NF, highest-gain stage
        let nf = stages.iter().map(|s| s.nf_db).fold(f64::INFINITY, f64::min);
        let g = stages.iter().map(|s| s.gain_db).fold(f64::NEG_INFINITY, f64::max);
        stages[i].nf_db = nf;
        stages[i].gain_db = g;
        let before = analyze_cascade(&stages, -80.0, 1e6).unwrap().total_nf_db;
        let best = stages.remove(i);
        stages.insert(0, best);
        let after = analyze_cascade(&stages, -80.0, 1e6).unwrap().total_nf_db;
        prop_assert!(after <= before + 1e-12, "{after} > {before}");
    }

    #[test]
    fn nf_bounds_and_identities(stages in proptest::collection::vec(amp_stage(), 1..7)) {
        let r = analyze_cascade(&stages, -80.0, 1e6).unwrap();
        prop_assert!(r.total_nf_db >= stages[0].nf_db - 1e-12);
        prop_assert!(r.total_nf_db >= 0.0);
        prop_assert_eq!(r.total_oip3_dbm, r.total_iip3_dbm + r.total_gain_db);
    }

    #[test]
    fn appended_stage_never_raises_iip3(stages in proptest::collection::vec(amp_stage(), 1..6), extra in amp_stage()) {
        let a = analyze_cascade(&stages, -80.0, 1e6).unwrap();
        let mut longer = stages.clone();
        longer.push(extra);
        let b = analyze_cascade(&longer, -80.0, 1e6).unwrap();
        let mw = |dbm: f64| 10f64.powf(dbm / 10.0);
        prop_assert!(mw(b.total_iip3_dbm) <= mw(a.total_iip3_dbm) * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_verdict_ignores_event_order(
        raw in proptest::collection::vec((0usize..5, 0.0f64..1e-3, 1e-7f64..5e-5), 0..6),
        rot in 0usize..6,
    ) {
        let kinds = [PulseKind::TransmitShort, PulseKind::TransmitMedium, PulseKind::NoiseInjection,
                     PulseKind::CalShort, PulseKind::CalMedium];
        let events: Vec<PulseEvent> = raw.iter().map(|&(k, s, d)| PulseEvent::new(kinds[k], s, d)).collect();
        let mut permuted = events.clone();
        permuted.reverse();
        if !permuted.is_empty() {
            let k = rot % permuted.len();
            permuted.rotate_left(k);
        }
        let a = build_schedule(1e-3, events, 10e3);
        let b = build_schedule(1e-3, permuted, 10e3);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a, b);
        }
    }
}

fn masking_setup() -> (ifkit_core::timing::TimingSchedule, AssetRegistry) {
    let medium = chirp(5e6, 20e-6);
    let mut assets = AssetRegistry::new();
    assets.insert_filter(
        "mm",
        design_mismatched_filter(&medium, &MismatchedDesign::new(480, 2)).unwrap(),
    );
    assets.insert_waveform("medium", medium);
    let events = vec![
        PulseEvent::new(PulseKind::TransmitMedium, 0.0, 20e-6).with_assets("medium", "mm"),
        PulseEvent::new(PulseKind::CalMedium, 100e-6, 20e-6).with_assets("medium", "mm"),
    ];
    (build_schedule(300e-6, events, 10e3).unwrap(), assets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn masking_monotone_and_bounded(lo in -90.0f64..0.0, step in 0.0f64..30.0, noise in 0.0f64..1e-6) {
        let (sched, assets) = masking_setup();
        let offsets: Vec<f64> = (-120..=120).map(|k| k as f64 * 30.0).collect();
        let run = |dbm: f64| simulate_cal_window(&sched, &assets, &CalMaskingRequest {
            injection_dbm: dbm, noise_power: noise, seed: 1, offsets_m: offsets.clone(), full_scale_dbm: 0.0,
        }).unwrap();
        let a = run(lo);
        let b = run(lo + step);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert!(y.min_detectable_dbm >= x.min_detectable_dbm);
        }
        // waveform length + filter length - 1
        prop_assert!(b.sidelobe_limited_gates < 200 + 480);
        prop_assert!(b.sidelobe_limited_gates <= b.response_support_gates);
    }
}

fn sim_setup() -> (ifkit_core::timing::TimingSchedule, AssetRegistry) {
    let short = generate_cw_pulse(1e-6, 0.0, 1.0, FS).unwrap();
    let medium = chirp(5e6, 20e-6);
    let mut assets = AssetRegistry::new();
    assets.insert_filter("sm", matched_filter(&short).unwrap());
    assets.insert_filter(
        "mm",
        design_mismatched_filter(&medium, &MismatchedDesign::new(480, 2)).unwrap(),
    );
    assets.insert_waveform("short", short);
    assets.insert_waveform("medium", medium);
    let events = vec![
        PulseEvent::new(PulseKind::TransmitShort, 0.0, 1e-6).with_assets("short", "sm"),
        PulseEvent::new(PulseKind::TransmitMedium, 1e-6, 20e-6).with_assets("medium", "mm"),
    ];
    (build_schedule(1e-3, events, 6e3).unwrap(), assets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn targets_add_in_power(ra in 100.0f64..5900.0, rb in 100.0f64..5900.0, pa in -60.0f64..0.0, pb in -60.0f64..0.0,
                            doppler in -1e5f64..1e5) {
        let (sched, assets) = sim_setup();
        let run = |targets: Vec<PointTarget>| {
            let mut sc = Scenario::new(FS);
            sc.targets = targets;
            run_scenario(&sc, &sched, &assets).unwrap()
        };
        let a = PointTarget { doppler_hz: doppler, ..PointTarget::new(ra, pa) };
        let b = PointTarget::new(rb, pb);
        let both = run(vec![a.clone(), b.clone()]);
        let only_a = run(vec![a]);
        let only_b = run(vec![b]);
        let lin = |db: f64| if db == f64::NEG_INFINITY { 0.0 } else { 10f64.powf(db / 10.0) };
        for ((g, ga), gb) in both.range_profile.iter().zip(&only_a.range_profile).zip(&only_b.range_profile) {
            let want = lin(ga.power_db) + lin(gb.power_db);
            let got = lin(g.power_db);
            prop_assert!((got - want).abs() <= 1e-9 * want.max(f64::MIN_POSITIVE), "at {} m: {got} vs {want}", g.range_m);
        }
    }
}

#[test]
fn stitched_profile_covers_every_gate() {
    let (sched, assets) = sim_setup();
    let res = run_scenario(&Scenario::new(FS), &sched, &assets).unwrap();
    let gate = range_per_sample(FS);
    assert_eq!(res.range_profile.len(), (6e3 / gate).floor() as usize + 1);
    for (k, g) in res.range_profile.iter().enumerate() {
        assert_eq!(g.range_m, k as f64 * gate);
    }
    assert_eq!(res.stitch_boundary_m, blind_range(20e-6));
    assert!(build_schedule(1e-3, default_events(), 40e3).is_ok());
}
