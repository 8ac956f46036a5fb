//! Transient simulation of the discretized nonlinear transmission line.
//!
//! The ladder carries the cubic Kerr constitutive law of the continuum wave
//! equation. Sources are Thévenin EMFs behind the source resistance; for
//! equal port resistances `s21 = 2·V_out/V_s` and `s11 = 2·V_in/V_s − 1`.
//! Tones must sit on the analysis-window frequency grid.

pub mod ladder;
pub mod spectrum;
pub mod transient;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use ladder::{build_device, build_ladder, CellParams, LadderBuilder, LadderNetwork};
pub use transient::{transient, DriveSpec, EnergyAudit, NoiseDrive, SimOutput, Tone};

use crate::constants::{HBAR, K_B};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::units::{db_from_power_ratio, omega_from_hz, watts_from_dbm};
use spectrum::{band_power_ratio, tone_phasor};

/// `(s11, s21)` at `freq_hz` from a finished run.
pub fn extract_sparams(out: &SimOutput, net: &LadderNetwork, freq_hz: f64) -> Result<(Complex64, Complex64)> {
    let n = out.window_samples;
    let src = tone_phasor(&out.source, n, out.dt, freq_hz)?;
    if src.norm() == 0.0 {
        return Err(domain(format!("no source tone at {freq_hz:.6e} Hz")));
    }
    let vin = tone_phasor(out.probe("input").expect("input probe"), n, out.dt, freq_hz)?;
    let vout = tone_phasor(out.probe("output").expect("output probe"), n, out.dt, freq_hz)?;
    let norm = (net.source_resistance / net.load_resistance).sqrt();
    Ok((2.0 * vin / src - 1.0, 2.0 * vout / src * norm))
}

/// Analysis-window and resolution settings shared by the measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    /// Analysis window (s); its inverse is the tone grid.
    pub window: f64,
    /// Samples per period of the highest drive frequency.
    pub points_per_period: usize,
    /// Discarded lead-in (s); defaults to one window.
    #[serde(default)]
    pub settle: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { window: 10e-9, points_per_period: 64, settle: None }
    }
}

impl RunSettings {
    pub fn drive(&self, tones: Vec<Tone>) -> DriveSpec {
        let d = DriveSpec::resolved(tones, self.window, self.points_per_period);
        match self.settle {
            Some(s) => d.with_settle(s),
            None => d,
        }
    }
}

/// Pump transmission phase versus power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpmCurve {
    pub power_w: Vec<f64>,
    /// −Δ∠S21 relative to the linear network (rad).
    pub theta_rad: Vec<f64>,
    /// Set when the sweep stopped early on a solver failure.
    pub truncated: Option<String>,
}

/// Measures `θ_NL(P) = −(∠S21(P) − ∠S21(0))` at `freq_hz` for ascending
/// available powers. Phases are unwrapped along the sweep, so successive
/// points must differ by less than π.
pub fn measure_spm_phase(
    net: &LadderNetwork,
    freq_hz: f64,
    powers_w: &[f64],
    settings: &RunSettings,
    exec: Exec,
) -> Result<SpmCurve> {
    if powers_w.windows(2).any(|p| p[1] <= p[0]) || powers_w.iter().any(|&p| !(p > 0.0)) {
        return Err(domain("pump powers must be positive and ascending"));
    }
    let lin = net.linearized();
    let probe = Tone::from_power(freq_hz, 1e-15, net.source_resistance);
    let d0 = settings.drive(vec![probe]);
    let ref_phase = extract_sparams(&transient(&lin, &d0)?, &lin, freq_hz)?.1.arg();
    let runs = exec.map(powers_w, |&p| -> Result<f64> {
        let d = settings.drive(vec![Tone::from_power(freq_hz, p, net.source_resistance)]);
        Ok(extract_sparams(&transient(net, &d)?, net, freq_hz)?.1.arg())
    });
    let mut curve = SpmCurve { power_w: vec![], theta_rad: vec![], truncated: None };
    let mut prev = 0.0;
    for (p, r) in powers_w.iter().zip(runs) {
        match r {
            Ok(phase) => {
                let raw = -(phase - ref_phase);
                // unwrap onto the branch nearest the previous point
                let theta = raw + 2.0 * std::f64::consts::PI * ((prev - raw) / (2.0 * std::f64::consts::PI)).round();
                curve.power_w.push(*p);
                curve.theta_rad.push(theta);
                prev = theta;
            }
            Err(e @ Error::NonConvergence { .. }) => {
                curve.truncated = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// Forward gain versus signal power under a fixed pump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCurve {
    pub signal_dbm: Vec<f64>,
    /// |s21|² at the signal (dB).
    pub gain_db: Vec<f64>,
    pub small_signal_db: f64,
    /// Input power at 1 dB compression, if reached.
    pub p1db_dbm: Option<f64>,
}

/// |s21|² (dB) at `signal_hz` with the pump on; the pump must lie on the
/// window grid too.
pub fn signal_gain_db(net: &LadderNetwork, pump: Option<Tone>, signal: Tone, settings: &RunSettings) -> Result<f64> {
    let mut tones = vec![signal];
    tones.extend(pump);
    let out = transient(net, &settings.drive(tones))?;
    Ok(db_from_power_ratio(extract_sparams(&out, net, signal.freq_hz)?.1.norm_sqr()))
}

/// Gain at ascending signal powers (dBm) and the 1 dB compression point,
/// referenced to the gain at the lowest power.
pub fn measure_gain_and_saturation(
    net: &LadderNetwork,
    pump: Tone,
    signal_hz: f64,
    signal_dbm: &[f64],
    settings: &RunSettings,
    exec: Exec,
) -> Result<GainCurve> {
    if signal_dbm.is_empty() || signal_dbm.windows(2).any(|p| p[1] <= p[0]) {
        return Err(domain("signal powers must be nonempty and ascending"));
    }
    let gains = exec.try_map(signal_dbm, |&p| {
        let s = Tone::from_power(signal_hz, watts_from_dbm(p), net.source_resistance);
        signal_gain_db(net, Some(pump), s, settings)
    })?;
    let g0 = gains[0];
    let mut p1db = None;
    for i in 1..gains.len() {
        if gains[i] <= g0 - 1.0 {
            let (a, b) = (gains[i - 1] - (g0 - 1.0), gains[i] - (g0 - 1.0));
            let t = if a == b { 0.0 } else { a / (a - b) };
            p1db = Some(signal_dbm[i - 1] + t * (signal_dbm[i] - signal_dbm[i - 1]));
            break;
        }
    }
    Ok(GainCurve { signal_dbm: signal_dbm.to_vec(), gain_db: gains, small_signal_db: g0, p1db_dbm: p1db })
}

/// Noise injection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Analysis band (Hz).
    pub band_hz: (f64, f64),
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
    /// Bandwidth over which the source rms is quoted (Hz).
    #[serde(default = "default_noise_bw")]
    pub bandwidth_hz: f64,
    pub seed: u64,
    /// Number of averaged windows.
    pub segments: usize,
}

fn default_temperature() -> f64 {
    0.01
}

fn default_noise_bw() -> f64 {
    50e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseMeasurement {
    /// Input-referred noise: incident plus backward photons.
    pub photons: f64,
    /// Backward-wave to incident-wave power ratio in the band.
    pub reflected_ratio: f64,
    /// Incident photons ½·coth(ħω/2k_BT) at the band center.
    pub source_photons: f64,
}

/// Injects thermal-vacuum noise at the source and measures the wave leaving
/// the input port. The incident wave is `e/2`; the backward wave is
/// `V_in − e/2`.
pub fn inject_noise_and_measure_input(
    net: &LadderNetwork,
    pump: Option<Tone>,
    spec: &NoiseSpec,
    settings: &RunSettings,
) -> Result<NoiseMeasurement> {
    let (f_lo, f_hi) = spec.band_hz;
    if !(f_lo > 0.0 && f_hi > f_lo) || spec.segments == 0 {
        return Err(domain("noise band must be positive and ordered with at least one segment"));
    }
    let w = omega_from_hz(0.5 * (f_lo + f_hi));
    let x = HBAR * w / (2.0 * K_B * spec.temperature_k);
    let coth = 1.0 + 2.0 / (2.0 * x).exp_m1();
    let rms = (net.source_resistance * spec.bandwidth_hz * HBAR * w / 2.0 * coth).sqrt();
    // grid set by the highest frequency present: band edge or pump
    let f_top = pump.map_or(f_hi, |p| p.freq_hz.max(f_hi));
    let mut drive = DriveSpec::resolved(vec![], settings.window, 1)
        .with_segments(spec.segments)
        .with_noise(NoiseDrive { rms_v: rms, bandwidth_hz: spec.bandwidth_hz, seed: spec.seed });
    let n = (settings.window * f_top * settings.points_per_period as f64).ceil() as usize;
    drive.dt = settings.window / n as f64;
    if let Some(p) = pump {
        drive.tones.push(p);
    }
    if let Some(s) = settings.settle {
        drive = drive.with_settle(s);
    }
    let out = transient(net, &drive)?;
    let vin = out.probe("input").expect("input probe");
    let incident: Vec<f64> = out.source.iter().map(|e| 0.5 * e).collect();
    let backward: Vec<f64> = vin.iter().zip(&incident).map(|(v, a)| v - a).collect();
    let exclude: Vec<f64> = pump.iter().map(|p| p.freq_hz).collect();
    let ratio = band_power_ratio(&backward, &incident, out.window_samples, out.dt, spec.band_hz, &exclude);
    let n_src = 0.5 * coth;
    Ok(NoiseMeasurement { photons: n_src * (1.0 + ratio), reflected_ratio: ratio, source_photons: n_src })
}
