//! `mtwpa`: runs one analysis from a JSON configuration and writes its
//! tables, plot scripts and a reproducibility manifest to an output
//! directory.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure,
//! 1 for anything else (such as an unwritable output directory).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtwpa::cascade::{
    forward_gain_spectrum, gain_summary, return_loss_spectrum, reverse_isolation_spectrum, CascadeSpectra,
    MtwpaConfig,
};
use mtwpa::config::{RunConfig, TdExperiment, TdNetwork, TimeDomainSpec};
use mtwpa::device::{characteristic_impedance, dispersion_k, linear_params, FluxBias};
use mtwpa::io::{csv_columns, csv_string, gnuplot_script, Manifest};
use mtwpa::noise::{fit_y_factor, YFactorDataset};
use mtwpa::rf::{touchstone, FrequencyGrid, TwoPortResponse};
use mtwpa::sweeps::{calibrate_pump, find_phase_matching, optimal_filter_impedance, sweep, SweepVariable};
use mtwpa::timedomain::spectrum::amplitude_spectrum;
use mtwpa::timedomain::{
    build_device, build_ladder, extract_sparams, inject_noise_and_measure_input, measure_gain_and_saturation,
    measure_spm_phase, transient, LadderNetwork, Tone,
};
use mtwpa::units::{db_from_power_ratio, hz_from_omega, omega_from_hz, watts_from_dbm};
use mtwpa::Error;
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "mtwpa", version, about = "Three-stage traveling-wave parametric amplifier simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Wavenumber and impedance versus frequency; inductance and Kerr
    /// constant versus flux.
    Dispersion(Common),
    /// Forward gain spectrum of the three-stage device.
    Gain(Common),
    /// Reverse isolation spectrum.
    Isolation(Common),
    /// Input return-loss spectrum.
    Returnloss(Common),
    /// Transient simulation of the circuit model.
    Timedomain(Common),
    /// Design sweep over one variable.
    Sweep(Common),
    /// Y-factor fit of a CSV dataset.
    Noisefit(Common),
    /// Touchstone files for the device and its filter.
    ExportTouchstone(Common),
}

#[derive(Debug)]
enum CliError {
    /// Configuration or input rejected before computing.
    Input(String),
    Model(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(e) if e.is_numerical() => 3,
            CliError::Model(Error::Io(_)) => 1,
            CliError::Model(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(s) => f.write_str(s),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A parsed configuration together with the bytes it came from.
struct Loaded {
    cfg: RunConfig,
    bytes: Vec<u8>,
    path: PathBuf,
    out: PathBuf,
}

fn load(common: &Common) -> CliResult<Loaded> {
    let bytes = std::fs::read(&common.config)
        .map_err(|e| CliError::Input(format!("{}: {e}", common.config.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Input(format!("{}: not UTF-8: {e}", common.config.display())))?;
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        CliError::Input(format!("{}: line {}, column {}: {e}", common.config.display(), e.line(), e.column()))
    })?;
    cfg.validate()?;
    let out = match (&common.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => PathBuf::from("mtwpa-out"),
    };
    Ok(Loaded { cfg, bytes, path: common.config.clone(), out })
}

/// Device at the requested operating point: pump forced off, calibrated to
/// a target gain, or as configured.
fn operating_point(cfg: &RunConfig) -> CliResult<MtwpaConfig> {
    if cfg.pump_off {
        return Ok(cfg.device.pump_off());
    }
    match cfg.calibrate {
        Some(c) => {
            let cal = calibrate_pump(&cfg.device, c.target_gain_db, c.theta_bound, cfg.exec)?;
            println!(
                "calibrated pump: {:.3} dBm for {:.2} dB peak at {:.4} GHz, θ_NL = {:.3} rad",
                cal.power_dbm,
                cal.gain_db,
                cal.peak_hz / 1e9,
                cal.nonlinear_phase_rad
            );
            Ok(cfg.device.with_pump_power(cal.power_w))
        }
        None => Ok(cfg.device.clone()),
    }
}

struct Run {
    manifest: Manifest,
    out: PathBuf,
}

impl Run {
    fn new(command: &str, l: &Loaded, seed: Option<u64>) -> Self {
        Self { manifest: Manifest::new(command, &l.bytes, seed), out: l.out.clone() }
    }

    fn emit(&mut self, name: &str, text: &str) -> CliResult<()> {
        Ok(self.manifest.emit(&self.out, name, text)?)
    }

    fn finish(self) -> CliResult<()> {
        self.manifest.write(&self.out)?;
        println!("wrote {} file(s) and manifest.txt to {}", self.manifest.outputs.len(), self.out.display());
        Ok(())
    }
}

fn nan_on_err(r: mtwpa::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn cmd_dispersion(l: &Loaded) -> CliResult<()> {
    let cfg = &l.cfg;
    let grid = cfg.grid.grid()?;
    let r = cfg.device.resolve()?;
    let mut rows = Vec::with_capacity(grid.len());
    for &w in grid.points() {
        rows.push(vec![
            hz_from_omega(w),
            nan_on_err(dispersion_k(w, &r.stage1, r.flux1)),
            nan_on_err(characteristic_impedance(w, &r.stage1, r.flux1)),
            nan_on_err(dispersion_k(w, &r.stage3, r.flux3)),
            nan_on_err(characteristic_impedance(w, &r.stage3, r.flux3)),
        ]);
    }
    let fs = &cfg.flux_sweep;
    let mut flux_rows = Vec::with_capacity(fs.points);
    for i in 0..fs.points {
        let phi = if fs.points == 1 { fs.start } else { fs.start + (fs.stop - fs.start) * i as f64 / (fs.points - 1) as f64 };
        let flux = FluxBias::new(phi);
        let (l_cell, gamma) = match linear_params(&cfg.device.stage1, flux) {
            Ok(p) => (p.l_cell, p.gamma),
            Err(_) => (f64::NAN, f64::NAN),
        };
        flux_rows.push(vec![phi, l_cell, gamma, nan_on_err(characteristic_impedance(0.0, &cfg.device.stage1, flux))]);
    }
    let mut run = Run::new("dispersion", l, None);
    run.emit(
        "dispersion.csv",
        &csv_string(&["freq_hz", "k1_rad_per_cell", "z1_ohm", "k3_rad_per_cell", "z3_ohm"], &rows),
    )?;
    run.emit("flux.csv", &csv_string(&["phi_over_phi0", "l_cell_h", "gamma_a_per_wb3", "z0_low_freq_ohm"], &flux_rows))?;
    run.emit(
        "dispersion.gp",
        &gnuplot_script("dispersion.csv", "Linear dispersion", "frequency (Hz)", "k (rad/cell)", &[(2, "stage 1"), (4, "stage 3")]),
    )?;
    run.emit(
        "flux.gp",
        &gnuplot_script("flux.csv", "Low-frequency impedance", "flux (Φ/Φ0)", "Z0 (Ω)", &[(4, "stage 1")]),
    )?;
    run.finish()
}

fn spectra_csv(s: &CascadeSpectra) -> String {
    csv_columns(
        &["freq_hz", "s21_db", "s12_db", "s11_db", "stage1_db", "idler_db", "stage3_db"],
        &[&s.freq_hz, &s.s21_db, &s.s12_db, &s.s11_db, &s.stage1_db, &s.idler_db, &s.stage3_db],
    )
}

/// Magnitude-only two-port from the cascade spectra; the cascade model
/// carries no phase and no output reflection, so those are written as zero.
fn spectra_touchstone(s: &CascadeSpectra, grid: &FrequencyGrid) -> String {
    let amp = |db: f64| Complex64::new(10f64.powf(db / 20.0), 0.0);
    let rows = (0..s.freq_hz.len())
        .map(|i| [amp(s.s11_db[i]), amp(s.s12_db[i]), amp(s.s21_db[i]), Complex64::new(0.0, 0.0)])
        .collect();
    touchstone::to_string(
        &TwoPortResponse::from_rows(grid, rows),
        &["mtwpa cascade model", "magnitudes only: phases and s22 are not modeled"],
    )
}

fn print_summary(dev: &MtwpaConfig, cfg: &RunConfig) -> CliResult<()> {
    if dev.pump_power_w == 0.0 {
        println!("pump off: passive filter and line response");
        return Ok(());
    }
    let s = gain_summary(dev, cfg.exec)?;
    println!("peak gain {:.2} dB at {:.4} GHz", s.lower_peak_db, s.lower_peak_hz / 1e9);
    println!("upper lobe {:.2} dB at {:.4} GHz", s.upper_peak_db, s.upper_peak_hz / 1e9);
    println!("bandwidth within 3 dB of peak: {:.4} GHz", s.lower_bandwidth_hz / 1e9);
    let roots: Vec<String> =
        find_phase_matching(dev, cfg.exec)?.iter().map(|&w| format!("{:.4}", hz_from_omega(w) / 1e9)).collect();
    println!("phase-matching roots (GHz): {}", roots.join(", "));
    Ok(())
}

fn cmd_gain(l: &Loaded) -> CliResult<()> {
    let dev = operating_point(&l.cfg)?;
    let grid = l.cfg.grid.grid()?;
    let s = forward_gain_spectrum(&dev, &grid, l.cfg.exec)?;
    print_summary(&dev, &l.cfg)?;
    let mut run = Run::new("gain", l, None);
    run.emit("gain.csv", &spectra_csv(&s))?;
    run.emit("gain.s2p", &spectra_touchstone(&s, &grid))?;
    run.emit(
        "gain.gp",
        &gnuplot_script("gain.csv", "Forward transmission", "frequency (Hz)", "dB", &[(2, "S21"), (3, "S12"), (4, "S11")]),
    )?;
    run.finish()
}

fn cmd_isolation(l: &Loaded) -> CliResult<()> {
    let grid = l.cfg.grid.grid()?;
    let iso = reverse_isolation_spectrum(&l.cfg.device, &grid, l.cfg.exec)?;
    if l.cfg.device.isolation_offset_db != 0.0 {
        println!("includes a {} dB empirical pump-on offset; this is not a model prediction", l.cfg.device.isolation_offset_db);
    }
    let mut run = Run::new("isolation", l, None);
    run.emit("isolation.csv", &csv_columns(&["freq_hz", "isolation_db"], &[&grid.hz(), &iso]))?;
    run.emit("isolation.gp", &gnuplot_script("isolation.csv", "Reverse isolation", "frequency (Hz)", "dB", &[(2, "isolation")]))?;
    run.finish()
}

fn cmd_returnloss(l: &Loaded) -> CliResult<()> {
    let dev = operating_point(&l.cfg)?;
    let grid = l.cfg.grid.grid()?;
    let rl = return_loss_spectrum(&dev, &grid, l.cfg.exec)?;
    let mut run = Run::new("returnloss", l, None);
    run.emit("returnloss.csv", &csv_columns(&["freq_hz", "return_loss_db"], &[&grid.hz(), &rl]))?;
    run.emit("returnloss.gp", &gnuplot_script("returnloss.csv", "Return loss", "frequency (Hz)", "dB", &[(2, "return loss")]))?;
    run.finish()
}

fn cmd_export_touchstone(l: &Loaded) -> CliResult<()> {
    let dev = operating_point(&l.cfg)?;
    let grid = l.cfg.grid.grid()?;
    let s = forward_gain_spectrum(&dev, &grid, l.cfg.exec)?;
    let filter = dev.filter.response(&grid)?;
    let mut run = Run::new("export-touchstone", l, None);
    run.emit("device.s2p", &spectra_touchstone(&s, &grid))?;
    run.emit("filter.s2p", &touchstone::to_string(&filter, &["mtwpa filter model"]))?;
    run.finish()
}

fn td_network(dev: &MtwpaConfig, spec: &TimeDomainSpec) -> CliResult<LadderNetwork> {
    let wp = dev.omega_p();
    let net = match spec.network {
        TdNetwork::Stage1 { cells, match_hz } => {
            let r = dev.resolve()?;
            let g = mtwpa::device::StageGeometry { n_cells: cells, ..r.stage1 };
            let z = characteristic_impedance(omega_from_hz(match_hz), &g, r.flux1)?;
            build_ladder(&g, r.flux1, (z, z), wp)?
        }
        TdNetwork::Device => build_device(dev, wp)?,
    };
    Ok(if spec.linear { net.linearized() } else { net })
}

/// Rejects a step too coarse for the highest frequency before any run.
fn preflight(spec: &TimeDomainSpec, f_max: f64) -> CliResult<()> {
    spec.settings.drive(vec![Tone { freq_hz: f_max, amplitude_v: 0.0, phase_rad: 0.0 }]).validate()?;
    Ok(())
}

/// Allowed relative deviation of transient s21 from nodal analysis.
const SANITY_TOL: f64 = 5e-3;

fn cmd_timedomain(l: &Loaded) -> CliResult<()> {
    let spec = l.cfg.timedomain.clone().ok_or_else(|| CliError::Input("configuration has no timedomain section".into()))?;
    let dev = operating_point(&l.cfg)?;
    let net = td_network(&dev, &spec)?;
    let f_p = dev.pump_frequency_hz;
    let pump = (dev.pump_power_w > 0.0).then(|| Tone::from_power(f_p, dev.pump_power_w, net.source_resistance));
    let exec = l.cfg.exec;
    let st = &spec.settings;
    match &spec.experiment {
        TdExperiment::Sparams { freq_hz } => {
            let f_max = freq_hz.iter().cloned().fold(0.0, f64::max);
            if freq_hz.is_empty() {
                return Err(CliError::Input("sparams needs at least one frequency".into()));
            }
            preflight(&spec, f_max)?;
            let runs = exec.try_map(freq_hz, |&f| -> mtwpa::Result<_> {
                let out = transient(&net, &st.drive(vec![Tone { freq_hz: f, amplitude_v: 1e-6, phase_rad: 0.0 }]))?;
                let (s11, s21) = extract_sparams(&out, &net, f)?;
                let (_, s21_n) = net.small_signal(omega_from_hz(f))?;
                Ok((out, s11, s21, s21_n))
            })?;
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for (&f, (_, s11, s21, s21_n)) in freq_hz.iter().zip(&runs) {
                let err = (s21 - s21_n).norm() / s21_n.norm();
                worst = worst.max(err);
                rows.push(vec![f, s11.re, s11.im, s21.re, s21.im, s21_n.re, s21_n.im, err]);
            }
            let verdict = if worst <= SANITY_TOL { "PASS" } else { "FAIL" };
            println!("s21 against nodal analysis: worst relative error {:.3e} ({verdict} at {SANITY_TOL})", worst);
            let mut run = Run::new("timedomain", l, None);
            run.emit(
                "td_sparams.csv",
                &csv_string(
                    &["freq_hz", "s11_re", "s11_im", "s21_re", "s21_im", "s21_nodal_re", "s21_nodal_im", "rel_err"],
                    &rows,
                ),
            )?;
            let out = &runs[0].0;
            let (vin, vout) = (out.probe("input").unwrap_or(&[]), out.probe("output").unwrap_or(&[]));
            let t: Vec<f64> = (0..out.source.len()).map(|i| out.t_start + i as f64 * out.dt).collect();
            run.emit("td_series.csv", &csv_columns(&["time_s", "source_v", "input_v", "output_v"], &[&t, &out.source, vin, vout]))?;
            let n = out.window_samples;
            let (f, a_in) = amplitude_spectrum(vin, n, out.dt);
            let (_, a_out) = amplitude_spectrum(vout, n, out.dt);
            let m_in: Vec<f64> = a_in.iter().map(|c| c.norm()).collect();
            let m_out: Vec<f64> = a_out.iter().map(|c| c.norm()).collect();
            run.emit("td_spectrum.csv", &csv_columns(&["freq_hz", "input_v", "output_v"], &[&f, &m_in, &m_out]))?;
            run.finish()
        }
        TdExperiment::SpmPhase { powers_dbm } => {
            preflight(&spec, f_p)?;
            let powers: Vec<f64> = powers_dbm.iter().map(|&p| watts_from_dbm(p)).collect();
            let c = measure_spm_phase(&net, f_p, &powers, st, exec)?;
            if let Some(t) = &c.truncated {
                println!("sweep stopped early: {t}");
            }
            let dbm: Vec<f64> = powers_dbm[..c.theta_rad.len()].to_vec();
            let mut run = Run::new("timedomain", l, None);
            run.emit("td_spm.csv", &csv_columns(&["pump_dbm", "theta_nl_rad"], &[&dbm, &c.theta_rad]))?;
            run.emit("td_spm.gp", &gnuplot_script("td_spm.csv", "Pump self-phase", "pump (dBm)", "θ_NL (rad)", &[(2, "θ_NL")]))?;
            run.finish()
        }
        TdExperiment::Gain { signal_hz, signal_dbm } => {
            let pump = pump.ok_or_else(|| CliError::Input("time-domain gain needs the pump on".into()))?;
            preflight(&spec, f_p.max(*signal_hz))?;
            let c = measure_gain_and_saturation(&net, pump, *signal_hz, signal_dbm, st, exec)?;
            println!("small-signal gain {:.3} dB at {:.4} GHz", c.small_signal_db, signal_hz / 1e9);
            match c.p1db_dbm {
                Some(p) => println!("1 dB compression at {p:.2} dBm input"),
                None => println!("no 1 dB compression within the swept powers"),
            }
            let mut run = Run::new("timedomain", l, None);
            run.emit("td_gain.csv", &csv_columns(&["signal_dbm", "gain_db"], &[&c.signal_dbm, &c.gain_db]))?;
            run.emit("td_gain.gp", &gnuplot_script("td_gain.csv", "Gain compression", "signal (dBm)", "gain (dB)", &[(2, "gain")]))?;
            run.finish()
        }
        TdExperiment::Noise { noise, pump_on } => {
            let pump = if *pump_on {
                Some(pump.ok_or_else(|| CliError::Input("pump_on needs a nonzero pump".into()))?)
            } else {
                None
            };
            preflight(&spec, pump.map_or(noise.band_hz.1, |p| p.freq_hz.max(noise.band_hz.1)))?;
            let m = inject_noise_and_measure_input(&net, pump, noise, st)?;
            println!("input noise {:.4} photons (incident {:.4}, reflected ratio {:.4})", m.photons, m.source_photons, m.reflected_ratio);
            let mut run = Run::new("timedomain", l, Some(noise.seed));
            run.emit(
                "td_noise.csv",
                &csv_string(&["photons", "source_photons", "reflected_ratio"], &[vec![m.photons, m.source_photons, m.reflected_ratio]]),
            )?;
            run.finish()
        }
    }
}

fn cmd_sweep(l: &Loaded) -> CliResult<()> {
    let spec = l.cfg.sweep.clone().ok_or_else(|| CliError::Input("configuration has no sweep section".into()))?;
    let dev = operating_point(&l.cfg)?;
    let res = sweep(&dev, &spec, l.cfg.exec)?;
    let rows: Vec<Vec<f64>> = res
        .rows
        .iter()
        .map(|r| {
            let lo = r.phase_matching_hz.first().copied().unwrap_or(f64::NAN);
            let hi = if r.phase_matching_hz.len() > 1 { *r.phase_matching_hz.last().unwrap() } else { f64::NAN };
            vec![r.value, r.peak_gain_db, r.peak_hz, r.return_loss_db, r.input_noise_photons, lo, hi]
        })
        .collect();
    let mut flags = String::new();
    for r in res.rows.iter().filter(|r| r.flag.is_some()) {
        let _ = writeln!(flags, "{}: {}", r.value, r.flag.as_deref().unwrap_or_default());
    }
    if !flags.is_empty() {
        print!("flagged points:\n{flags}");
    }
    if spec.variable == SweepVariable::FilterImpedance {
        let (z, n) = optimal_filter_impedance(&dev, spec.start, spec.stop, l.cfg.exec)?;
        println!("noise minimum {n:.4} photons at Z_f = {z:.3} Ω");
    }
    let mut run = Run::new("sweep", l, None);
    run.emit(
        "sweep.csv",
        &csv_string(
            &["value", "peak_gain_db", "peak_hz", "return_loss_db", "input_noise_photons", "root_low_hz", "root_high_hz"],
            &rows,
        ),
    )?;
    if !flags.is_empty() {
        run.emit("sweep_flags.txt", &flags)?;
    }
    run.emit("sweep_noise.gp", &gnuplot_script("sweep.csv", "Input noise", "swept value", "photons", &[(5, "noise")]))?;
    run.emit("sweep_returnloss.gp", &gnuplot_script("sweep.csv", "Return loss", "swept value", "dB", &[(4, "return loss")]))?;
    run.finish()
}

fn cmd_noisefit(l: &Loaded) -> CliResult<()> {
    let nf = l.cfg.noisefit.clone().ok_or_else(|| CliError::Input("configuration has no noisefit section".into()))?;
    // relative data paths resolve against the configuration file
    let data = Path::new(&nf.data);
    let data = if data.is_relative() { l.path.parent().unwrap_or(Path::new(".")).join(data) } else { data.to_path_buf() };
    let text = std::fs::read_to_string(&data).map_err(|e| CliError::Input(format!("{}: {e}", data.display())))?;
    let ds = YFactorDataset::from_csv(&text, nf.bandwidth_hz).map_err(|e| match e {
        Error::Parse { line, message } => CliError::Input(format!("{}: row {line}: {message}", data.display())),
        other => CliError::Model(other),
    })?;
    let fit = fit_y_factor(&ds, l.cfg.exec)?;
    for p in &fit.points {
        println!(
            "{:.4} GHz: T_HEMT = {:.4} K, G = {:.3} dB",
            hz_from_omega(p.omega) / 1e9,
            p.t_hemt,
            db_from_power_ratio(p.gain)
        );
    }
    let mut run = Run::new("noisefit", l, None);
    run.emit("noisefit.csv", &fit.to_csv())?;
    run.emit("noisefit.gp", &gnuplot_script("noisefit.csv", "Y-factor fit", "frequency (Hz)", "photons", &[(3, "N_HEMT")]))?;
    run.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, f): (&Common, fn(&Loaded) -> CliResult<()>) = match &cli.command {
        Command::Dispersion(c) => (c, cmd_dispersion),
        Command::Gain(c) => (c, cmd_gain),
        Command::Isolation(c) => (c, cmd_isolation),
        Command::Returnloss(c) => (c, cmd_returnloss),
        Command::Timedomain(c) => (c, cmd_timedomain),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Noisefit(c) => (c, cmd_noisefit),
        Command::ExportTouchstone(c) => (c, cmd_export_touchstone),
    };
    match load(common).and_then(|l| f(&l)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
