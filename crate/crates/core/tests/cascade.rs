//! Three-stage cascade, design sweeps and Y-factor ingest, end to end.

use mtwpa::cascade::{
    evaluate_point, extinction_ratio, forward_gain_spectrum, gain_distribution,
    gain_summary, return_loss_spectrum, reverse_isolation_spectrum, FilterModel, MtwpaConfig,
};
use mtwpa::device::StageGeometry;
use mtwpa::exec::Exec;
use mtwpa::noise::{fit_y_factor, YFactorDataset};
use mtwpa::rf::{BehavioralHighpass, FrequencyGrid};
use mtwpa::sweeps::{
    calibrate_pump, find_phase_matching, optimal_filter_impedance, sweep_filter_impedance, sweep_stage_length,
    LengthPolicy, SweepSpec, SweepVariable, DEFAULT_THETA_BOUND,
};
use mtwpa::units::{db_from_power_ratio, omega_from_hz, watts_from_dbm};
use mtwpa::Error;
use proptest::prelude::*;

fn calibrated(cfg: &MtwpaConfig) -> MtwpaConfig {
    calibrated_within(cfg, DEFAULT_THETA_BOUND)
}

fn calibrated_within(cfg: &MtwpaConfig, theta_bound: f64) -> MtwpaConfig {
    cfg.with_pump_power(calibrate_pump(cfg, 20.0, theta_bound, Exec::Parallel).unwrap().power_w)
}

fn with_lengths(cfg: &MtwpaConfig, l1: usize, l3: usize) -> MtwpaConfig {
    MtwpaConfig {
        stage1: StageGeometry { n_cells: l1, ..cfg.stage1 },
        stage3: StageGeometry { n_cells: l3, ..cfg.stage3 },
        ..cfg.clone()
    }
}

fn with_floor(cfg: &MtwpaConfig, floor_db: f64) -> MtwpaConfig {
    MtwpaConfig {
        filter: FilterModel::Behavioral(BehavioralHighpass { stopband_floor_db: floor_db, ..BehavioralHighpass::default() }),
        ..cfg.clone()
    }
}

fn grid() -> FrequencyGrid {
    FrequencyGrid::linspace_hz(3e9, 12e9, 181).unwrap()
}

#[test]
fn paper_point_spectrum() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let s = gain_summary(&cfg, Exec::Parallel).unwrap();
    assert!((s.lower_peak_db - 20.0).abs() < 0.1);
    assert!((s.lower_peak_hz - 5.2e9).abs() <= 0.3e9, "{}", s.lower_peak_hz);
    assert!((s.upper_peak_hz - 9.5e9).abs() <= 0.4e9, "{}", s.upper_peak_hz);
    assert!((s.lower_bandwidth_hz - 1.6e9).abs() <= 0.4e9, "{}", s.lower_bandwidth_hz);
    let sp = forward_gain_spectrum(&cfg, &grid(), Exec::Parallel).unwrap();
    let n = sp.freq_hz.len();
    for col in [&sp.s21_db, &sp.s12_db, &sp.s11_db, &sp.stage1_db, &sp.idler_db, &sp.stage3_db] {
        assert_eq!(col.len(), n);
    }
}

#[test]
fn higher_pump_frequency_moves_lobes_up() {
    // the second tuning runs 1 dB above the 7.4 GHz calibrated pump
    let base = calibrated(&MtwpaConfig::paper());
    let alt = MtwpaConfig { pump_frequency_hz: 7.9e9, pump_power_w: base.pump_power_w * 10f64.powf(0.1), ..base.clone() };
    let (a, b) = (gain_summary(&base, Exec::Parallel).unwrap(), gain_summary(&alt, Exec::Parallel).unwrap());
    assert!(b.lower_peak_hz > a.lower_peak_hz, "{} vs {}", b.lower_peak_hz, a.lower_peak_hz);
    assert!(b.upper_peak_hz > a.upper_peak_hz, "{} vs {}", b.upper_peak_hz, a.upper_peak_hz);
}

#[test]
fn kappa_roots_straddle_the_pump() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let roots = find_phase_matching(&cfg, Exec::Parallel).unwrap();
    let wp = cfg.omega_p();
    assert!(roots.iter().any(|&w| w < wp) && roots.iter().any(|&w| w > wp), "{roots:?}");
}

#[test]
fn isolation_offset_subtracts_exactly() {
    let cfg = MtwpaConfig::paper();
    let g = grid();
    let base = reverse_isolation_spectrum(&cfg, &g, Exec::Parallel).unwrap();
    let off = reverse_isolation_spectrum(&MtwpaConfig { isolation_offset_db: 20.0, ..cfg }, &g, Exec::Parallel).unwrap();
    for (a, b) in base.iter().zip(&off) {
        assert!((a - b - 20.0).abs() < 1e-9);
    }
}

#[test]
fn low_impedance_line_meets_the_measured_return_loss_bound() {
    // Φ = 0 gives a 22 Ω stage one; the port step alone is |Γ| = 28/72
    let cfg = MtwpaConfig { applied_flux: 0.0, ..MtwpaConfig::paper() };
    let port_only = -20.0 * (28.0f64 / 72.0).log10();
    assert!((port_only - 8.20).abs() < 0.01);
    let g = FrequencyGrid::linspace_hz(4e9, 6.5e9, 26).unwrap();
    for rl in return_loss_spectrum(&cfg, &g, Exec::Parallel).unwrap() {
        assert!(rl > 4.0, "{rl}");
        assert!(rl < port_only + 0.1, "{rl}");
    }
}

#[test]
fn pump_worsens_return_loss_by_a_few_db() {
    let off = MtwpaConfig::paper();
    let on = calibrated(&off);
    let w = omega_from_hz(gain_summary(&on, Exec::Parallel).unwrap().lower_peak_hz);
    let rl = |c: &MtwpaConfig| -db_from_power_ratio(evaluate_point(c, &c.resolve().unwrap(), w).unwrap().s11);
    let worsening = rl(&off) - rl(&on);
    assert!((5.0..=6.0).contains(&worsening), "{worsening}");
}

#[test]
fn incoherent_sum_bounds_below_coherent() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let coh = MtwpaConfig { coherent_reflections: true, ..cfg.clone() };
    let a = return_loss_spectrum(&cfg, &grid(), Exec::Parallel).unwrap();
    let b = return_loss_spectrum(&coh, &grid(), Exec::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(y <= &(x + 1e-9));
    }
}

#[test]
fn extinction_tracks_the_floor_additively() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let e52 = extinction_ratio(&with_floor(&cfg, 52.0), Exec::Parallel).unwrap();
    let e57 = extinction_ratio(&with_floor(&cfg, 57.0), Exec::Parallel).unwrap();
    // the signal path through the filter floor moves the peak by parts per million
    assert!((e57 - e52 - 5.0).abs() < 1e-3, "{e52} {e57}");
    assert!((e52 - 72.0).abs() <= 0.5, "{e52}");
    assert!(extinction_ratio(&MtwpaConfig::paper(), Exec::Parallel).unwrap().abs() < 1e-9);
}

#[test]
fn stop_band_gain_ignores_the_floor() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let g = FrequencyGrid::linspace_hz(4.5e9, 6.0e9, 31).unwrap();
    let lo = forward_gain_spectrum(&with_floor(&cfg, 50.0), &g, Exec::Parallel).unwrap().s21_db;
    let hi = forward_gain_spectrum(&with_floor(&cfg, 70.0), &g, Exec::Parallel).unwrap().s21_db;
    for (a, b) in lo.iter().zip(&hi) {
        assert!((a - b).abs() < 0.1, "{a} {b}");
    }
}

#[test]
fn symmetric_device_splits_gain_evenly() {
    let d = gain_distribution(&calibrated(&MtwpaConfig::paper()), Exec::Parallel).unwrap();
    assert!((d.total_db - 20.0).abs() < 0.1);
    assert!((d.stage1_db - 10.0).abs() <= 2.0, "stage one {:.2} dB of {:.2}", d.stage1_db, d.total_db);
}

#[test]
fn short_first_stage_acts_as_a_buffer() {
    // this split needs |θ_NL| slightly above the default bound
    let cfg = calibrated_within(&with_lengths(&MtwpaConfig::paper(), 150, 550), 5.0);
    let d = gain_distribution(&cfg, Exec::Parallel).unwrap();
    assert!(d.stage1_db < 2.0, "{}", d.stage1_db);
    assert!((d.total_db - 20.0).abs() < 0.1);
}

#[test]
fn single_cell_first_stage_has_no_gain_and_zero_cells_is_rejected() {
    let cfg = with_lengths(&MtwpaConfig::paper(), 1, 350).with_pump_power(watts_from_dbm(-75.0));
    let d = gain_distribution(&cfg, Exec::Parallel).unwrap();
    assert!(d.stage1_db.abs() < 0.01, "{}", d.stage1_db);
    assert!(d.idler_at_filter_db < -40.0, "{}", d.idler_at_filter_db);
    assert!(matches!(with_lengths(&cfg, 0, 350).validate(), Err(Error::Domain(_))));
}

#[test]
fn return_loss_worsens_with_first_stage_length_at_fixed_total() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let spec = SweepSpec::new(SweepVariable::Stage1Length, 50.0, 350.0, 25.0)
        .with_policy(LengthPolicy::FixedTotalLength { total_cells: 700 });
    let rows = sweep_stage_length(&cfg, &spec, Exec::Parallel).unwrap().rows;
    assert!(rows.iter().all(|r| r.flag.is_none()));
    for w in rows.windows(2) {
        assert!(w[1].return_loss_db < w[0].return_loss_db, "{} {}", w[0].value, w[1].value);
        assert!(w[1].input_noise_photons > w[0].input_noise_photons);
    }
}

#[test]
fn full_first_stage_input_noise() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let spec = SweepSpec::new(SweepVariable::Stage1Length, 350.0, 350.0, 1.0)
        .with_policy(LengthPolicy::FixedTotalLength { total_cells: 700 });
    let n = sweep_stage_length(&cfg, &spec, Exec::Parallel).unwrap().rows[0].input_noise_photons;
    assert!((n - 0.8).abs() <= 0.1, "{n}");
}

#[test]
fn recalibrating_policy_holds_gain() {
    let cfg = MtwpaConfig::paper();
    let spec = SweepSpec::new(SweepVariable::Stage1Length, 300.0, 400.0, 50.0)
        .with_policy(LengthPolicy::RecalibratePump { target_gain_db: 20.0 });
    for r in sweep_stage_length(&cfg, &spec, Exec::Parallel).unwrap().rows {
        assert!(r.flag.is_none(), "{:?}", r.flag);
        let c = MtwpaConfig { stage1: StageGeometry { n_cells: r.value as usize, ..cfg.stage1 }, ..cfg.clone() };
        let p = calibrate_pump(&c, 20.0, DEFAULT_THETA_BOUND, Exec::Parallel).unwrap();
        assert!((p.gain_db - 20.0).abs() < 0.1);
    }
}

#[test]
fn unreachable_points_are_flagged_not_fatal() {
    let cfg = MtwpaConfig::paper();
    let spec = SweepSpec::new(SweepVariable::Stage1Length, 10.0, 10.0, 1.0)
        .with_policy(LengthPolicy::RecalibratePump { target_gain_db: 20.0 });
    let r = &sweep_stage_length(&cfg, &spec, Exec::Parallel).unwrap().rows[0];
    assert!(r.flag.is_some() && r.input_noise_photons.is_nan());
}

#[test]
fn filter_impedance_curve_is_convex_at_its_minimum() {
    let cfg = calibrated_within(&with_lengths(&MtwpaConfig::paper(), 150, 550), 5.0);
    let spec = SweepSpec::new(SweepVariable::FilterImpedance, 30.0, 60.0, 0.5);
    let rows = sweep_filter_impedance(&cfg, &spec, Exec::Parallel).unwrap().rows;
    let i = (0..rows.len()).min_by(|&a, &b| rows[a].input_noise_photons.total_cmp(&rows[b].input_noise_photons)).unwrap();
    assert!(i > 0 && i + 1 < rows.len());
    let n = |k: usize| rows[k].input_noise_photons;
    assert!(n(i - 1) + n(i + 1) - 2.0 * n(i) > 0.0);
    let best_rl = rows.iter().map(|r| r.return_loss_db).fold(f64::NEG_INFINITY, f64::max);
    assert!((rows[i].return_loss_db - best_rl).abs() < 0.5);
    let (z, noise) = optimal_filter_impedance(&cfg, 30.0, 60.0, Exec::Parallel).unwrap();
    assert!((z - rows[i].value).abs() <= 0.5);
    assert!((noise - 0.53).abs() <= 0.05, "{noise}");
}

#[test]
fn matched_interface_leaves_the_vacuum_floor() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let w = omega_from_hz(gain_summary(&cfg, Exec::Parallel).unwrap().lower_peak_hz);
    let r = cfg.resolve().unwrap();
    let z1 = evaluate_point(&cfg, &r, w).unwrap().z1;
    let perfect = MtwpaConfig {
        interface_z_f: z1,
        filter: FilterModel::Behavioral(BehavioralHighpass { return_loss_db: 300.0, ..BehavioralHighpass::default() }),
        ..cfg
    };
    let p = evaluate_point(&perfect, &r, w).unwrap();
    assert!((p.input_noise - 0.5).abs() < 1e-9, "{}", p.input_noise);
}

#[test]
fn yfactor_csv_round_trip_and_errors() {
    let d = YFactorDataset::synthetic(&[0.15, 0.5, 1.0, 2.0, 4.0], &[omega_from_hz(5e9), omega_from_hz(6e9)], 2.5, 1e6, 1e6, None);
    let back = YFactorDataset::from_csv(&d.to_csv(), 1e6).unwrap();
    let fit = fit_y_factor(&back, Exec::Sequential).unwrap();
    for p in &fit.points {
        assert!((p.t_hemt - 2.5).abs() / 2.5 < 1e-6);
    }
    let csv = fit.to_csv();
    assert!(csv.starts_with("freq_hz,t_hemt_k,n_hemt_photons,gain_db,residual_rms,n_points\n"));
    assert_eq!(csv.lines().count(), 3);

    let bad = "temperature_k,freq_hz,power_w\n0.1,5e9,1e-12\n# note\n0.2,five,1e-12\n";
    match YFactorDataset::from_csv(bad, 1e6) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 4);
            assert!(message.contains("freq_hz"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(YFactorDataset::from_csv("a,b\n", 1e6), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(
        YFactorDataset::from_csv("temperature_k,freq_hz,power_w\n1,2\n", 1e6),
        Err(Error::Parse { line: 2, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pump_off_is_reciprocal(flux in 0.0f64..0.48, derate in 0.0f64..6.0, floor in 40.0f64..70.0) {
        let cfg = MtwpaConfig { applied_flux: flux, stage3_pump_derate_db: derate, ..with_floor(&MtwpaConfig::paper(), floor) };
        let s = forward_gain_spectrum(&cfg, &grid(), Exec::Sequential).unwrap();
        for (a, b) in s.s21_db.iter().zip(&s.s12_db) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn return_loss_is_positive(p_dbm in -90.0f64..-77.0, zf in 30.0f64..70.0) {
        let cfg = MtwpaConfig { interface_z_f: zf, ..MtwpaConfig::paper() }.with_pump_power(watts_from_dbm(p_dbm));
        for rl in return_loss_spectrum(&cfg, &grid(), Exec::Sequential).unwrap() {
            prop_assert!(rl > 0.0);
        }
    }

    #[test]
    fn stage_flux_follows_the_coupling_ratio(applied in 0.0f64..0.38) {
        let (s1, s3) = StageGeometry::paper_pair();
        let (f1, f3) = (s1.stage_flux(applied), s3.stage_flux(applied));
        prop_assert!((f3.phi_over_phi0 - 1.26 * f1.phi_over_phi0).abs() < 1e-12);
    }
}

#[test]
fn parallel_and_sequential_spectra_agree() {
    let cfg = calibrated(&MtwpaConfig::paper());
    let a = forward_gain_spectrum(&cfg, &grid(), Exec::Parallel).unwrap();
    let b = forward_gain_spectrum(&cfg, &grid(), Exec::Sequential).unwrap();
    assert_eq!(a, b);
}
