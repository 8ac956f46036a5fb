//! Phase-matching roots, pump calibration and one-variable design sweeps.

use serde::{Deserialize, Serialize};

use crate::cascade::{evaluate_point, lower_band, maximize, peak_forward_gain, peak_two_stage_gain, MtwpaConfig};
use crate::coupled_mode::total_mismatch;
use crate::device::cutoff_omega;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::units::{db_from_power_ratio, hz_from_omega, omega_from_hz, watts_from_dbm};

/// Bracketing grid spacing for phase-matching roots (Hz).
pub const ROOT_GRID_HZ: f64 = 1e6;
/// Root tolerance (Hz).
pub const ROOT_TOL_HZ: f64 = 1e3;

/// Stage-one signal frequencies (rad/s) where the total mismatch κ vanishes.
///
/// The search covers signals whose idler is also below the stage cutoff.
/// The grid is anchored on the pump so that the degenerate root, which is
/// a double zero of the unpumped mismatch, is sampled exactly.
pub fn find_phase_matching(cfg: &MtwpaConfig, exec: Exec) -> Result<Vec<f64>> {
    let r = cfg.resolve()?;
    let wp = cfg.omega_p();
    let wc = cutoff_omega(&r.stage1, r.flux1)?;
    if wp >= wc {
        return Err(Error::Cutoff { freq_hz: hz_from_omega(wp), cutoff_hz: hz_from_omega(wc) });
    }
    let dw = omega_from_hz(ROOT_GRID_HZ);
    let half = wp.min(wc - wp);
    let m = ((half / dw).floor() as i64 - 1).max(0);
    let grid: Vec<f64> = (-m..=m).map(|j| wp + j as f64 * dw).collect();
    let kappa = |w: f64| total_mismatch(&r.stage1, r.flux1, &r.pump1, w);
    let vals = exec.try_map(&grid, |&w| kappa(w))?;
    let tol = omega_from_hz(ROOT_TOL_HZ);
    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < grid.len() && vals[i + 1] != 0.0 && vals[i].signum() != vals[i + 1].signum() {
            let (mut a, mut b, fa) = (grid[i], grid[i + 1], vals[i]);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                let fm = kappa(mid)?;
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                } else if fm.signum() == fa.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    Ok(roots)
}

/// Default bound on |θ_NL| beyond which pump depletion invalidates the
/// stiff-pump model (rad).
pub const DEFAULT_THETA_BOUND: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpCalibration {
    pub power_w: f64,
    pub power_dbm: f64,
    /// Achieved peak stop-band gain (dB); zero when the pump is off.
    pub gain_db: f64,
    pub peak_hz: f64,
    pub nonlinear_phase_rad: f64,
}

/// Lowest and highest pump powers tried (dBm).
const CAL_FLOOR_DBM: f64 = -130.0;
const CAL_CEIL_DBM: f64 = -40.0;

/// Pump power giving a peak two-stage stop-band gain of `target_db`.
///
/// Fails with [`Error::Unreachable`] when the target needs a pump self-phase
/// beyond `theta_bound` or cannot be reached at all.
pub fn calibrate_pump(cfg: &MtwpaConfig, target_db: f64, theta_bound: f64, exec: Exec) -> Result<PumpCalibration> {
    if !target_db.is_finite() {
        return Err(domain("target gain must be finite"));
    }
    if target_db <= 0.0 {
        return Ok(PumpCalibration {
            power_w: 0.0,
            power_dbm: f64::NEG_INFINITY,
            gain_db: 0.0,
            peak_hz: cfg.pump_frequency_hz,
            nonlinear_phase_rad: 0.0,
        });
    }
    let at = |dbm: f64| -> Result<(f64, f64, f64)> {
        let c = cfg.with_pump_power(watts_from_dbm(dbm));
        let (w, g) = peak_two_stage_gain(&c, exec)?;
        Ok((g, w, c.resolve()?.nonlinear_phase()?))
    };
    // coarse ascent in 1 dB steps, stopping once the target or the bound is passed
    let mut lo = CAL_FLOOR_DBM;
    let mut hi = None;
    let mut dbm = CAL_FLOOR_DBM;
    while dbm <= CAL_CEIL_DBM {
        let (g, _, theta) = at(dbm)?;
        if g >= target_db {
            hi = Some(dbm);
            break;
        }
        if theta.abs() > theta_bound {
            return Err(Error::Unreachable(format!(
                "{target_db} dB needs |θ_NL| above {theta_bound} rad (reached {g:.2} dB at {theta:.3} rad)"
            )));
        }
        lo = dbm;
        dbm += 1.0;
    }
    let mut hi = hi.ok_or_else(|| Error::Unreachable(format!("{target_db} dB not reached below {CAL_CEIL_DBM} dBm")))?;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.0 >= target_db {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (gain_db, w, theta) = at(hi)?;
    if theta.abs() > theta_bound {
        return Err(Error::Unreachable(format!(
            "{target_db} dB needs |θ_NL| = {:.3} rad, above the {theta_bound} rad bound",
            theta.abs()
        )));
    }
    Ok(PumpCalibration {
        power_w: watts_from_dbm(hi),
        power_dbm: hi,
        gain_db,
        peak_hz: hz_from_omega(w),
        nonlinear_phase_rad: theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Stage-one cell count.
    Stage1Length,
    /// Filter input impedance Z_f (Ω).
    FilterImpedance,
    /// Pump power (dBm).
    PumpPower,
    AppliedFlux,
    /// Pump frequency (Hz).
    PumpFrequency,
}

/// How a stage-one length change is compensated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthPolicy {
    /// Stage three absorbs the change; the pump stays fixed.
    FixedTotalLength { total_cells: usize },
    /// Stage three is fixed; the pump is recalibrated to the target gain.
    RecalibratePump { target_gain_db: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    #[default]
    CoupledMode,
    TimeDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default)]
    pub evaluator: Evaluator,
    #[serde(default)]
    pub policy: Option<LengthPolicy>,
    /// θ_NL bound used by pump recalibration (rad).
    #[serde(default = "default_theta_bound")]
    pub theta_bound: f64,
}

fn default_theta_bound() -> f64 {
    DEFAULT_THETA_BOUND
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, start: f64, stop: f64, step: f64) -> Self {
        Self {
            variable,
            start,
            stop,
            step,
            evaluator: Evaluator::CoupledMode,
            policy: None,
            theta_bound: DEFAULT_THETA_BOUND,
        }
    }

    pub fn with_policy(self, policy: LengthPolicy) -> Self {
        Self { policy: Some(policy), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(domain("sweep step must be positive"));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop >= self.start) {
            return Err(domain("sweep range must be finite and nonempty"));
        }
        if self.evaluator == Evaluator::TimeDomain {
            return Err(domain("design sweeps support only the coupled_mode evaluator"));
        }
        if self.policy.is_some() && self.variable != SweepVariable::Stage1Length {
            return Err(domain("a length policy applies only to stage1_length sweeps"));
        }
        Ok(())
    }

    /// Swept values, ascending.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Peak forward gain in the lower band (dB).
    pub peak_gain_db: f64,
    pub peak_hz: f64,
    /// Return loss at the gain peak (dB).
    pub return_loss_db: f64,
    pub input_noise_photons: f64,
    pub phase_matching_hz: Vec<f64>,
    /// Why a point has no metrics.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

/// Configuration at one sweep value.
pub fn configure_point(cfg: &MtwpaConfig, spec: &SweepSpec, value: f64, exec: Exec) -> Result<MtwpaConfig> {
    let mut c = cfg.clone();
    match spec.variable {
        SweepVariable::Stage1Length => {
            let l1 = value.round();
            if !(l1 >= 1.0) {
                return Err(domain(format!("stage-1 length {value} is below one cell")));
            }
            c.stage1.n_cells = l1 as usize;
            match spec.policy {
                Some(LengthPolicy::FixedTotalLength { total_cells }) => {
                    if total_cells <= c.stage1.n_cells {
                        return Err(domain(format!("total length {total_cells} leaves no stage three")));
                    }
                    c.stage3.n_cells = total_cells - c.stage1.n_cells;
                }
                Some(LengthPolicy::RecalibratePump { target_gain_db }) => {
                    c.pump_power_w = calibrate_pump(&c, target_gain_db, spec.theta_bound, exec)?.power_w;
                }
                None => {}
            }
        }
        SweepVariable::FilterImpedance => c.interface_z_f = value,
        SweepVariable::PumpPower => c.pump_power_w = watts_from_dbm(value),
        SweepVariable::AppliedFlux => c.applied_flux = value,
        SweepVariable::PumpFrequency => c.pump_frequency_hz = value,
    }
    c.validate()?;
    Ok(c)
}

fn evaluate_row(cfg: &MtwpaConfig, spec: &SweepSpec, value: f64, exec: Exec) -> Result<SweepRow> {
    let c = configure_point(cfg, spec, value, exec)?;
    let (w, g) = peak_forward_gain(&c, lower_band(&c), exec)?;
    let p = evaluate_point(&c, &c.resolve()?, w)?;
    let roots = find_phase_matching(&c, exec)?;
    Ok(SweepRow {
        value,
        peak_gain_db: g,
        peak_hz: hz_from_omega(w),
        return_loss_db: -db_from_power_ratio(p.s11),
        input_noise_photons: p.input_noise,
        phase_matching_hz: roots.into_iter().map(hz_from_omega).collect(),
        flag: None,
    })
}

/// Runs a sweep; points that fail for numerical or domain reasons are kept
/// as flagged rows with NaN metrics.
pub fn sweep(cfg: &MtwpaConfig, spec: &SweepSpec, exec: Exec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = exec.map(&spec.values(), |&v| {
        evaluate_row(cfg, spec, v, exec).unwrap_or_else(|e| SweepRow {
            value: v,
            peak_gain_db: f64::NAN,
            peak_hz: f64::NAN,
            return_loss_db: f64::NAN,
            input_noise_photons: f64::NAN,
            phase_matching_hz: Vec::new(),
            flag: Some(e.to_string()),
        })
    });
    Ok(SweepResult { variable: spec.variable, rows })
}

pub fn sweep_stage_length(cfg: &MtwpaConfig, spec: &SweepSpec, exec: Exec) -> Result<SweepResult> {
    if spec.variable != SweepVariable::Stage1Length {
        return Err(domain("sweep_stage_length needs variable stage1_length"));
    }
    sweep(cfg, spec, exec)
}

pub fn sweep_filter_impedance(cfg: &MtwpaConfig, spec: &SweepSpec, exec: Exec) -> Result<SweepResult> {
    if spec.variable != SweepVariable::FilterImpedance {
        return Err(domain("sweep_filter_impedance needs variable filter_impedance"));
    }
    sweep(cfg, spec, exec)
}

/// Filter impedance in `[z_lo, z_hi]` minimizing input noise at the
/// lower-lobe gain peak: `(Z_f, noise photons)`.
pub fn optimal_filter_impedance(cfg: &MtwpaConfig, z_lo: f64, z_hi: f64, exec: Exec) -> Result<(f64, f64)> {
    cfg.validate()?;
    let (w, _) = peak_forward_gain(cfg, lower_band(cfg), exec)?;
    let r = cfg.resolve()?;
    let (z, neg) = maximize(z_lo, z_hi, exec, |z| {
        let c = MtwpaConfig { interface_z_f: z, ..cfg.clone() };
        Ok(-evaluate_point(&c, &r, w)?.input_noise)
    })?;
    Ok((z, -neg))
}
