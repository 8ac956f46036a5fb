//! Transient solver against frequency-domain and coupled-mode oracles.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use mtwpa::cascade::{forward_gain_spectrum, maximize, FilterModel, MtwpaConfig};
use mtwpa::circuit::Netlist;
use mtwpa::coupled_mode::{cme_coefficients, nonlinear_phase, power_gain, PumpDrive};
use mtwpa::device::{characteristic_impedance, dispersion_k, FluxBias, StageGeometry};
use mtwpa::exec::Exec;
use mtwpa::rf::FrequencyGrid;
use mtwpa::sweeps::{calibrate_pump, DEFAULT_THETA_BOUND};
use mtwpa::timedomain::spectrum::tone_phasor;
use mtwpa::timedomain::{
    build_device, build_ladder, extract_sparams, inject_noise_and_measure_input, measure_gain_and_saturation,
    measure_spm_phase, signal_gain_db, transient, CellParams, DriveSpec, LadderNetwork, NoiseSpec, RunSettings, Tone,
};
use mtwpa::units::{db_from_power_ratio, hz_from_omega, omega_from_hz, watts_from_dbm};
use num_complex::Complex64;

fn lossless(n: usize) -> StageGeometry {
    StageGeometry { n_cells: n, tan_delta: 0.0, ..StageGeometry::paper() }
}

/// Linear line with both ports matched to its impedance at `match_hz`.
fn matched_line(geom: &StageGeometry, flux: FluxBias, match_hz: f64) -> LadderNetwork {
    let w = omega_from_hz(match_hz);
    let z = characteristic_impedance(w, geom, flux).unwrap();
    build_ladder(geom, flux, (z, z), w).unwrap()
}

/// Independent ABCD cascade of the same linear ladder: per cell a series
/// `jωL ∥ 1/(jωC_J)` then a shunt `jωC_gnd + G`.
fn abcd_transfer(cell: &CellParams, n: usize, rs: f64, rl: f64, omega: f64) -> Complex64 {
    let j = Complex64::new(0.0, 1.0);
    let z = 1.0 / (1.0 / (j * omega * cell.l) + j * omega * cell.c_j);
    let y = j * omega * cell.c_gnd + cell.g;
    let one = Complex64::new(1.0, 0.0);
    let (mut a, mut b, mut c, mut d) = (one, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), one);
    for _ in 0..n {
        // [a b; c d]·[1 z; 0 1]·[1 0; y 1]
        let (a1, b1, c1, d1) = (a, a * z + b, c, c * z + d);
        (a, b, c, d) = (a1 + b1 * y, b1, c1 + d1 * y, d1);
    }
    // V_out/V_s for a source rs and load rl
    rl / (a * rl + b + c * rs * rl + d * rs)
}

fn one_node(rs: f64, rl: f64) -> LadderNetwork {
    let mut netlist = Netlist::new();
    let n = netlist.add_node();
    LadderNetwork { netlist, input: n, output: n, source_resistance: rs, load_resistance: rl, probes: vec![] }
}

#[test]
fn build_paper_cell_values() {
    let g = StageGeometry::paper();
    let net = build_ladder(&g, FluxBias::new(0.0), (50.0, 50.0), omega_from_hz(5e9)).unwrap();
    let cell = CellParams::new(&g, FluxBias::new(0.0), omega_from_hz(5e9)).unwrap();
    assert_eq!(net.netlist.n_nodes, 351);
    assert_relative_eq!(cell.l, 54.85e-12, max_relative = 1e-3);
    assert_relative_eq!(cell.c_j, 225e-15, max_relative = 1e-12);
    assert_relative_eq!(cell.c_gnd, 110e-15, max_relative = 1e-12);
    let again = build_ladder(&g, FluxBias::new(0.0), (50.0, 50.0), omega_from_hz(5e9)).unwrap();
    assert_eq!(net, again);
}

#[test]
fn zero_gamma_build_is_linear() {
    let net = matched_line(&lossless(10), FluxBias::new(0.0), 5e9);
    assert_eq!(net.linearized(), net.linearized().linearized());
    let lin = net.linearized();
    assert!(lin.netlist.elements.iter().all(|e| !matches!(e, mtwpa::circuit::Element::Kerr { .. })));
}

#[test]
fn matched_resistive_thru() {
    let net = one_node(50.0, 50.0);
    let d = DriveSpec::resolved(vec![Tone { freq_hz: 5e9, amplitude_v: 1e-3, phase_rad: 0.4 }], 10e-9, 64);
    let out = transient(&net, &d).unwrap();
    let (s11, s21) = extract_sparams(&out, &net, 5e9).unwrap();
    assert!((s21 - 1.0).norm() < 1e-3, "{s21}");
    assert!(s11.norm() < 1e-3);
}

#[test]
fn open_load_reflects_fully() {
    let net = one_node(50.0, 1e12);
    let d = DriveSpec::resolved(vec![Tone { freq_hz: 5e9, amplitude_v: 1e-3, phase_rad: 0.0 }], 10e-9, 64);
    let out = transient(&net, &d).unwrap();
    let (s11, _) = extract_sparams(&out, &net, 5e9).unwrap();
    assert!((s11.norm() - 1.0).abs() < 1e-3, "{s11}");
}

#[test]
fn off_grid_tone_is_leakage() {
    let net = one_node(50.0, 50.0);
    let d = DriveSpec::resolved(vec![Tone { freq_hz: 5.05e9, amplitude_v: 1e-3, phase_rad: 0.0 }], 10e-9, 64);
    let out = transient(&net, &d).unwrap();
    assert!(matches!(extract_sparams(&out, &net, 5.05e9), Err(mtwpa::error::Error::Leakage { .. })));
}

#[test]
fn linear_ladder_matches_abcd_cascade() {
    let g = StageGeometry { n_cells: 50, ..StageGeometry::paper() };
    let flux = FluxBias::new(0.41);
    let net = matched_line(&g, flux, 6e9).linearized();
    let cell = CellParams::new(&g, flux, omega_from_hz(6e9)).unwrap();
    let tones: Vec<f64> = vec![3e9, 6e9, 9e9];
    for f in tones {
        let d = DriveSpec::resolved(vec![Tone { freq_hz: f, amplitude_v: 1e-6, phase_rad: 0.0 }], 10e-9, 128)
            .with_settle(20e-9);
        let out = transient(&net, &d).unwrap();
        let (_, s21) = extract_sparams(&out, &net, f).unwrap();
        let h = abcd_transfer(&cell, 50, net.source_resistance, net.load_resistance, omega_from_hz(f));
        let oracle = 2.0 * h;
        assert!(((s21 - oracle) / oracle).norm() < 5e-3, "{f}: {s21} vs {oracle}");
        // passivity with the pump off
        assert!(s21.norm() <= 1.0);
    }
}

#[test]
fn small_signal_dispersion_follows_the_continuum_law() {
    let g = StageGeometry::paper();
    let flux = FluxBias::new(0.0);
    let (f, w) = (5e9, omega_from_hz(5e9));
    let k = dispersion_k(w, &g, flux).unwrap();
    assert!(k < 0.3, "k·a = {k}");
    let net = matched_line(&g, flux, f);
    let d = DriveSpec::resolved(vec![Tone { freq_hz: f, amplitude_v: 1e-6, phase_rad: 0.0 }], 10e-9, 64);
    let out = transient(&net, &d).unwrap();
    let (_, s21) = extract_sparams(&out, &net, f).unwrap();
    // whole turns come from the nodal solution, accumulated cell by cell
    let v = net.phasors(w).unwrap();
    let unwrapped: f64 = v.windows(2).map(|p| (p[1] / p[0]).arg()).sum::<f64>() + v[0].arg();
    let turns = ((unwrapped - s21.arg()) / (2.0 * PI)).round();
    let phase = s21.arg() + 2.0 * PI * turns;
    let expected = -k * g.n_cells as f64;
    assert!(((phase - expected) / expected).abs() < 0.01, "{phase} vs {expected}");
    // and the time-domain phasor agrees with the nodal one in magnitude and phase
    let (_, nodal) = net.small_signal(w).unwrap();
    assert!((s21.norm() / nodal.norm() - 1.0).abs() < 0.01);
    let nodal_phase = nodal.arg() + 2.0 * PI * ((unwrapped - nodal.arg()) / (2.0 * PI)).round();
    assert!(((phase - nodal_phase) / nodal_phase).abs() < 0.01, "{phase} vs {nodal_phase}");
}

#[test]
fn linear_run_has_no_intermodulation() {
    let net = matched_line(&lossless(20), FluxBias::new(0.0), 5e9).linearized();
    let tones = vec![
        Tone { freq_hz: 5e9, amplitude_v: 1e-3, phase_rad: 0.0 },
        Tone { freq_hz: 5.3e9, amplitude_v: 1e-3, phase_rad: 0.0 },
    ];
    let out = transient(&net, &DriveSpec::resolved(tones, 10e-9, 64)).unwrap();
    // rectangular DFT: a periodic steady state leaks nothing into other bins
    let x = out.probe("output").unwrap();
    let n = out.window_samples;
    let at = |f: f64| {
        let k = (f * n as f64 * out.dt).round() as usize;
        x[..n]
            .iter()
            .enumerate()
            .map(|(i, v)| Complex64::from_polar(*v, -2.0 * PI * (k * i % n) as f64 / n as f64))
            .sum::<Complex64>()
            .norm()
    };
    let carrier = at(5e9);
    for f in [4.7e9, 5.6e9] {
        let dbc = db_from_power_ratio((at(f) / carrier).powi(2));
        assert!(dbc < -120.0, "{f}: {dbc} dBc");
    }
}

#[test]
fn energy_balances_on_a_lossless_linear_line() {
    let net = matched_line(&lossless(30), FluxBias::new(0.0), 5e9).linearized();
    let d = DriveSpec::resolved(vec![Tone { freq_hz: 5e9, amplitude_v: 1e-3, phase_rad: 0.0 }], 10e-9, 64);
    let a = transient(&net, &d).unwrap().audit;
    let gap = (a.source_work - a.dissipated - a.stored).abs() / a.source_work;
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn trapezoidal_error_is_second_order() {
    let net = matched_line(&lossless(20), FluxBias::new(0.0), 5e9).linearized();
    let w = omega_from_hz(5e9);
    let (_, exact) = net.small_signal(w).unwrap();
    let err = |ppp: usize| {
        let d = DriveSpec::resolved(vec![Tone { freq_hz: 5e9, amplitude_v: 1e-3, phase_rad: 0.0 }], 10e-9, ppp)
            .with_settle(30e-9);
        let out = transient(&net, &d).unwrap();
        (extract_sparams(&out, &net, 5e9).unwrap().1 - exact).norm()
    };
    let ratio = err(24) / err(48);
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn spm_phase_follows_the_self_phase_coefficient() {
    let g = lossless(100);
    let wp = omega_from_hz(7.4e9);
    let powers: Vec<f64> = [-110.0, -100.0, -95.0].iter().map(|&d| watts_from_dbm(d)).collect();
    let mut signs = vec![];
    // stage-one loop flux at applied 0.48
    for phi in [0.0, 0.41] {
        let flux = FluxBias::new(phi);
        let net = matched_line(&g, flux, 7.4e9);
        let curve = measure_spm_phase(&net, 7.4e9, &powers, &RunSettings::default(), Exec::Parallel).unwrap();
        assert!(curve.truncated.is_none());
        for (p, th) in curve.power_w.iter().zip(&curve.theta_rad) {
            let pump = PumpDrive::for_stage(&g, flux, wp, *p).unwrap();
            let off = PumpDrive::off(wp);
            let oracle = nonlinear_phase((&g, flux, &pump), (&g, flux, &off), 100.0, 0.0).unwrap();
            assert!(th.abs() < 1.0);
            assert!(((th - oracle) / oracle).abs() < 0.05, "Φ {phi}: {th} vs {oracle}");
        }
        // θ vanishes linearly with the pump power: 15 dB apart is a factor 10^1.5
        assert_relative_eq!(curve.theta_rad[0] / curve.theta_rad[2], 10f64.powf(-1.5), max_relative = 0.02);
        signs.push(curve.theta_rad[2].signum());
    }
    assert_eq!(signs, vec![1.0, -1.0]);
}

/// Pump power giving a 20 dB single-line coupled-mode peak and the peak frequency.
fn calibrate_line(g: &StageGeometry, flux: FluxBias, wp: f64) -> (f64, f64) {
    let peak = |p: f64| {
        let pd = PumpDrive::for_stage(g, flux, wp, p).unwrap();
        maximize(omega_from_hz(3e9), omega_from_hz(7.2e9), Exec::Sequential, |w| {
            Ok(db_from_power_ratio(power_gain(&cme_coefficients(g, flux, &pd, w)?, g.n_cells as f64)))
        })
        .unwrap()
    };
    let (mut lo, mut hi) = (-110.0, -60.0);
    while hi - lo > 1e-6 {
        let m = 0.5 * (lo + hi);
        if peak(watts_from_dbm(m)).1 >= 20.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    (watts_from_dbm(hi), peak(watts_from_dbm(hi)).0)
}

#[test]
fn phase_matched_gain_on_a_700_cell_line() {
    let g = lossless(700);
    let flux = FluxBias::new(0.41);
    let (fp, wp) = (7.4e9, omega_from_hz(7.4e9));
    let (p, w_peak) = calibrate_line(&g, flux, wp);
    let fs = (hz_from_omega(w_peak) / 1e8).round() * 1e8;
    let pd = PumpDrive::for_stage(&g, flux, wp, p).unwrap();
    let cm = db_from_power_ratio(power_gain(&cme_coefficients(&g, flux, &pd, omega_from_hz(fs)).unwrap(), 700.0));
    let net = matched_line(&g, flux, fp);
    let z = net.source_resistance;
    let st = RunSettings { window: 10e-9, points_per_period: 128, settle: Some(10e-9) };
    let sig = Tone::from_power(fs, watts_from_dbm(-140.0), z);
    let on = signal_gain_db(&net, Some(Tone::from_power(fp, p, z)), sig, &st).unwrap();
    let off = signal_gain_db(&net, None, sig, &st).unwrap();
    assert!(cm > 19.0);
    assert!((on - off - cm).abs() < 2.0, "time domain {} dB vs coupled-mode {cm} dB", on - off);
}

/// Paper device with the circuit filter; the stage-three pump sees the
/// filter's own loss.
fn circuit_device() -> (MtwpaConfig, f64, f64) {
    let cfg = MtwpaConfig { filter: FilterModel::paper_lumped(), ..MtwpaConfig::paper() }
        .with_filter_pump_derate()
        .unwrap();
    let cal = calibrate_pump(&cfg, 20.0, DEFAULT_THETA_BOUND, Exec::Parallel).unwrap();
    let fs = (cal.peak_hz / 1e8).round() * 1e8;
    (cfg, cal.power_w, fs)
}

#[test]
fn device_gain_and_compression() {
    let (cfg, p, fs) = circuit_device();
    let net = build_device(&cfg, cfg.omega_p()).unwrap();
    let st = RunSettings { window: 10e-9, points_per_period: 64, settle: Some(20e-9) };
    let pump = Tone::from_power(cfg.pump_frequency_hz, p, cfg.port_impedance);
    let dbm: Vec<f64> = (0..=16).map(|i| -130.0 + 2.0 * i as f64).collect();
    let curve = measure_gain_and_saturation(&net, pump, fs, &dbm, &st, Exec::Parallel).unwrap();

    // small-signal flatness across the lowest 10 dB
    let flat = curve.gain_db[..6].iter().fold(0.0f64, |m, g| m.max((g - curve.small_signal_db).abs()));
    assert!(flat < 0.1, "{flat}");

    let p1db = curve.p1db_dbm.expect("compression reached");
    let beyond: Vec<f64> = curve.signal_dbm.iter().zip(&curve.gain_db).filter(|(s, _)| **s >= p1db).map(|(_, g)| *g).collect();
    assert!(beyond.windows(2).all(|w| w[1] <= w[0]));

    let grid = FrequencyGrid::from_hz(&[fs]).unwrap();
    let cascade = forward_gain_spectrum(&cfg.with_pump_power(p), &grid, Exec::Sequential).unwrap().s21_db[0];
    let td = curve.small_signal_db;
    let mut failures = vec![];
    if (td - cascade).abs() >= 2.0 {
        failures.push(format!("small-signal gain {td:.2} dB vs cascade {cascade:.2} dB"));
    }
    if !(-105.0..=-95.0).contains(&p1db) {
        failures.push(format!("P1dB {p1db:.2} dBm outside −105…−95 dBm"));
    }
    assert!(failures.is_empty(), "{}", failures.join("; "));
}

#[test]
fn unpumped_matched_line_sits_at_the_quantum_floor() {
    let net = matched_line(&lossless(50), FluxBias::new(0.41), 5e9);
    let spec = NoiseSpec { band_hz: (4.5e9, 5.5e9), temperature_k: 0.01, bandwidth_hz: 50e9, seed: 1, segments: 8 };
    let m = inject_noise_and_measure_input(&net, None, &spec, &RunSettings::default()).unwrap();
    assert!((m.photons - 0.5).abs() < 0.01, "{}", m.photons);
    let again = inject_noise_and_measure_input(&net, None, &spec, &RunSettings::default()).unwrap();
    assert_eq!(m, again);
}

fn device_input_noise(l1: usize) -> f64 {
    let (base, _, _) = circuit_device();
    let cfg = MtwpaConfig { stage1: StageGeometry { n_cells: l1, ..base.stage1 }, ..base };
    let cal = calibrate_pump(&cfg, 20.0, 10.0, Exec::Parallel).unwrap();
    let net = build_device(&cfg, cfg.omega_p()).unwrap();
    let fc = (cal.peak_hz / 1e8).round() * 1e8;
    let spec = NoiseSpec { band_hz: (fc - 0.2e9, fc + 0.2e9), temperature_k: 0.01, bandwidth_hz: 50e9, seed: 1, segments: 8 };
    let st = RunSettings { window: 10e-9, points_per_period: 64, settle: Some(20e-9) };
    let pump = Tone::from_power(cfg.pump_frequency_hz, cal.power_w, cfg.port_impedance);
    inject_noise_and_measure_input(&net, Some(pump), &spec, &st).unwrap().photons
}

#[test]
fn pumped_device_input_noise_short_first_stage() {
    let n = device_input_noise(150);
    assert!((n - 0.59).abs() < 0.1, "{n}");
}

#[test]
fn pumped_device_input_noise_full_first_stage() {
    let n = device_input_noise(350);
    assert!((n - 0.8).abs() < 0.1, "{n}");
}

#[test]
fn tone_phasor_reads_source_amplitude() {
    let d = DriveSpec::resolved(vec![Tone::from_power(5e9, 1e-12, 50.0)], 10e-9, 64);
    let net = one_node(50.0, 50.0);
    let out = transient(&net, &d).unwrap();
    let e = tone_phasor(&out.source, out.window_samples, out.dt, 5e9).unwrap();
    // available power e²/(8R)
    assert_relative_eq!(e.norm().powi(2) / (8.0 * 50.0), 1e-12, max_relative = 1e-6);
}
