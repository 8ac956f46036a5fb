//! Three-stage composition: parametric stage, reflectionless filter,
//! parametric stage.
//!
//! The forward signal reaches the output by two incoherently summed paths:
//! directly (`H1·|F21(ω_s)|²·H3`) and through the idler
//! (`I1·|F21(ω_i)|²·R3`), where `H` is the parametric power gain, `I` the
//! idler conversion and `R` the signal regeneration. In the filter stop-band
//! the idler path dominates; in the pass-band the direct path does. Each
//! traversal of a stage multiplies power by `e^{−k·tanδ·l}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupled_mode::{
    cme_coefficients, idler_transfer, power_gain, signal_regen_transfer, two_stage_gain, CmeCoefficients, PumpDrive,
};
use crate::device::{characteristic_impedance, cutoff_omega, dispersion_k, flux_partition, linear_params, FluxBias, StageGeometry};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::rf::filters::{balanced_compose, morgan_netlist};
use crate::rf::{BehavioralHighpass, FrequencyGrid, TwoPortResponse, Z_REF};
use crate::units::{db_from_power_ratio, hz_from_omega, omega_from_hz, power_ratio_from_db};

/// Filter stage selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterModel {
    Behavioral(BehavioralHighpass),
    Lumped {
        l_f: f64,
        c_f: f64,
        n_stages: usize,
        /// Hybrid insertion loss (dB) and quadrature phase (deg) when the
        /// lumped filter is used inside a balanced pair.
        #[serde(default)]
        balanced: Option<(f64, f64)>,
    },
}

impl Default for FilterModel {
    fn default() -> Self {
        FilterModel::Behavioral(BehavioralHighpass::default())
    }
}

impl FilterModel {
    /// Paper lumped-element values in a two-stage topology.
    pub fn paper_lumped() -> Self {
        FilterModel::Lumped { l_f: 1.4e-9, c_f: 0.7e-12, n_stages: 2, balanced: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterModel::Behavioral(b) => b.validate(),
            FilterModel::Lumped { l_f, c_f, n_stages, .. } => {
                if !(*l_f > 0.0 && *c_f > 0.0) || *n_stages == 0 {
                    Err(domain("lumped filter needs positive elements and at least one stage"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Complex `[s11, s12, s21, s22]` at one angular frequency.
    pub fn sparams_at(&self, omega: f64) -> Result<[Complex64; 4]> {
        let grid = FrequencyGrid::new(vec![omega])?;
        let r = self.response(&grid)?;
        Ok([r.s11[0], r.s12[0], r.s21[0], r.s22[0]])
    }

    pub fn response(&self, grid: &FrequencyGrid) -> Result<TwoPortResponse> {
        match self {
            FilterModel::Behavioral(b) => crate::rf::behavioral_highpass(b, grid),
            FilterModel::Lumped { l_f, c_f, n_stages, balanced } => {
                let (net, a, b) = morgan_netlist(*l_f, *c_f, *n_stages, Z_REF)?;
                let r = TwoPortResponse::try_from_fn(grid, Exec::Sequential, |w| {
                    let s = net.sparams(a, b, Z_REF, w)?;
                    Ok([s[0][0], s[0][1], s[1][0], s[1][1]])
                })?;
                match balanced {
                    Some((il, ph)) => balanced_compose(*il, *ph, &r),
                    None => Ok(r),
                }
            }
        }
    }

    /// Nominal cutoff, where one is defined.
    pub fn cutoff_hz(&self) -> Option<f64> {
        match self {
            FilterModel::Behavioral(b) => Some(b.cutoff_hz),
            FilterModel::Lumped { .. } => None,
        }
    }
}

/// Everything needed to evaluate the three-stage device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtwpaConfig {
    pub stage1: StageGeometry,
    pub stage3: StageGeometry,
    #[serde(default)]
    pub filter: FilterModel,
    pub applied_flux: f64,
    pub pump_frequency_hz: f64,
    pub pump_power_w: f64,
    /// Pump power lost between the stage-one input and stage three (dB).
    pub stage3_pump_derate_db: f64,
    /// Filter input impedance Z_f (Ω).
    pub interface_z_f: f64,
    /// Port reference impedance (Ω).
    #[serde(default = "default_port")]
    pub port_impedance: f64,
    /// Labeled empirical pump-on isolation degradation (dB); not a model.
    #[serde(default)]
    pub isolation_offset_db: f64,
    /// Worst-case coherent addition of reflections instead of power sum.
    #[serde(default)]
    pub coherent_reflections: bool,
}

fn default_port() -> f64 {
    Z_REF
}

impl MtwpaConfig {
    /// Fabricated device at its reported operating point, pump off.
    pub fn paper() -> Self {
        let (stage1, stage3) = StageGeometry::paper_pair();
        Self {
            stage1,
            stage3,
            filter: FilterModel::default(),
            applied_flux: 0.48,
            pump_frequency_hz: 7.4e9,
            pump_power_w: 0.0,
            stage3_pump_derate_db: 2.0,
            interface_z_f: 50.0,
            port_impedance: Z_REF,
            isolation_offset_db: 0.0,
            coherent_reflections: false,
        }
    }

    pub fn with_pump_power(&self, power_w: f64) -> Self {
        Self { pump_power_w: power_w, ..self.clone() }
    }

    pub fn pump_off(&self) -> Self {
        self.with_pump_power(0.0)
    }

    /// Same device with the stage-three pump derate set to the filter's
    /// own insertion loss at the pump, `−10·log10|s21(ω_p)|²`.
    pub fn with_filter_pump_derate(&self) -> Result<Self> {
        let s21 = self.filter.sparams_at(self.omega_p())?[2];
        Ok(Self { stage3_pump_derate_db: -db_from_power_ratio(s21.norm_sqr()), ..self.clone() })
    }

    pub fn omega_p(&self) -> f64 {
        omega_from_hz(self.pump_frequency_hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage3.validate()?;
        self.filter.validate()?;
        if !(self.pump_frequency_hz > 0.0) {
            return Err(domain("pump frequency must be positive"));
        }
        if !(self.pump_power_w >= 0.0 && self.pump_power_w.is_finite()) {
            return Err(domain("pump power must be nonnegative"));
        }
        if !(self.stage3_pump_derate_db >= 0.0) {
            return Err(domain("stage-3 pump derate must be nonnegative"));
        }
        if !(self.interface_z_f > 0.0 && self.port_impedance > 0.0) {
            return Err(domain("impedances must be positive"));
        }
        if !(self.applied_flux.is_finite()) {
            return Err(domain("applied flux must be finite"));
        }
        if let Some(fc) = self.filter.cutoff_hz() {
            if self.pump_frequency_hz <= fc {
                return Err(domain(format!(
                    "pump at {:.4e} Hz must sit in the filter pass-band above {fc:.4e} Hz",
                    self.pump_frequency_hz
                )));
            }
        }
        let r = self.resolve()?;
        for (g, f) in [(&r.stage1, r.flux1), (&r.stage3, r.flux3)] {
            let wc = cutoff_omega(g, f)?;
            if self.omega_p() >= wc {
                return Err(Error::Cutoff { freq_hz: self.pump_frequency_hz, cutoff_hz: hz_from_omega(wc) });
            }
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedStages> {
        let (flux1, flux3) = flux_partition(self.applied_flux, &self.stage1, &self.stage3);
        let wp = self.omega_p();
        let pump1 = PumpDrive::for_stage(&self.stage1, flux1, wp, self.pump_power_w)?;
        let p3 = self.pump_power_w * power_ratio_from_db(-self.stage3_pump_derate_db);
        let pump3 = PumpDrive::for_stage(&self.stage3, flux3, wp, p3)?;
        Ok(ResolvedStages {
            stage1: self.stage1,
            stage3: self.stage3,
            flux1,
            flux3,
            pump1,
            pump3,
            l1: self.stage1.n_cells as f64,
            l3: self.stage3.n_cells as f64,
        })
    }
}

/// Stage geometries with their fluxes and pump drives resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedStages {
    pub stage1: StageGeometry,
    pub stage3: StageGeometry,
    pub flux1: FluxBias,
    pub flux3: FluxBias,
    pub pump1: PumpDrive,
    pub pump3: PumpDrive,
    pub l1: f64,
    pub l3: f64,
}

impl ResolvedStages {
    pub fn coefficients(&self, omega_s: f64) -> Result<(CmeCoefficients, CmeCoefficients)> {
        Ok((
            cme_coefficients(&self.stage1, self.flux1, &self.pump1, omega_s)?,
            cme_coefficients(&self.stage3, self.flux3, &self.pump3, omega_s)?,
        ))
    }

    /// Parametric two-stage gain (idler path only, no filter or loss).
    pub fn two_stage_gain(&self, omega_s: f64) -> Result<f64> {
        let (c1, c3) = self.coefficients(omega_s)?;
        Ok(two_stage_gain(&c1, &c3, self.l1, self.l3))
    }

    /// Total pump self-phase (rad).
    pub fn nonlinear_phase(&self) -> Result<f64> {
        crate::coupled_mode::nonlinear_phase(
            (&self.stage1, self.flux1, &self.pump1),
            (&self.stage3, self.flux3, &self.pump3),
            self.l1,
            self.l3,
        )
    }
}

/// Line power transmission e^{−k·tanδ·l}.
fn line_loss(geom: &StageGeometry, flux: FluxBias, omega: f64, l: f64) -> Result<f64> {
    Ok((-dispersion_k(omega, geom, flux)? * geom.tan_delta * l).exp())
}

/// Impedance seen by a weak probe on a pumped line: the pump's cross-phase
/// lowers the inverse inductance by (3/2)·γ·k_p²·A_p².
pub fn pumped_impedance(geom: &StageGeometry, flux: FluxBias, pump: &PumpDrive, omega: f64) -> Result<f64> {
    let z_lin = characteristic_impedance(omega, geom, flux)?;
    if pump.amp_flux == 0.0 {
        return Ok(z_lin);
    }
    let p = linear_params(geom, flux)?;
    let kp = dispersion_k(pump.omega_p, geom, flux)?;
    let m = 1.0 / (geom.c_gnd * z_lin * z_lin) - 1.5 * p.gamma * kp * kp * pump.amp_flux * pump.amp_flux;
    if m <= 0.0 {
        return Err(domain("pump cross-phase closes the pass-band"));
    }
    Ok(1.0 / (geom.c_gnd * m).sqrt())
}

fn refl(z: f64, z_ref: f64) -> f64 {
    (z - z_ref) / (z + z_ref)
}

/// Per-frequency breakdown of the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResponse {
    pub omega_s: f64,
    /// Stage-one signal power gain.
    pub h1: f64,
    /// Stage-one idler conversion.
    pub i1: f64,
    pub h3: f64,
    /// Stage-three signal regeneration from the idler.
    pub r3: f64,
    /// Forward power transmission including filter and line loss.
    pub forward: f64,
    /// Reverse power transmission.
    pub reverse: f64,
    /// Input reflected power fraction.
    pub s11: f64,
    /// Pumped stage-one impedance at the signal.
    pub z1: f64,
    /// Interface reflected power fraction |Γ_if|².
    pub interface_reflection: f64,
    /// Input-referred noise (photons): vacuum floor plus amplified stage-one
    /// vacuum reflected at the interface and returned through stage one.
    pub input_noise: f64,
}

pub fn evaluate_point(cfg: &MtwpaConfig, r: &ResolvedStages, omega_s: f64) -> Result<PointResponse> {
    let wi = 2.0 * r.pump1.omega_p - omega_s;
    let (c1, c3) = r.coefficients(omega_s)?;
    let h1 = power_gain(&c1, r.l1);
    let i1 = idler_transfer(&c1, r.l1);
    let h3 = power_gain(&c3, r.l3);
    let r3 = signal_regen_transfer(&c3, r.l3);
    let fs = cfg.filter.sparams_at(omega_s)?;
    let fi = cfg.filter.sparams_at(wi)?;
    let loss1_s = line_loss(&r.stage1, r.flux1, omega_s, r.l1)?;
    let loss1_i = line_loss(&r.stage1, r.flux1, wi, r.l1)?;
    let loss3_s = line_loss(&r.stage3, r.flux3, omega_s, r.l3)?;
    let forward =
        h1 * loss1_s * fs[2].norm_sqr() * h3 * loss3_s + i1 * loss1_i * fi[2].norm_sqr() * r3 * loss3_s;
    let reverse = loss3_s * fs[1].norm_sqr() * loss1_s * power_ratio_from_db(-cfg.isolation_offset_db).recip();
    let z1 = pumped_impedance(&r.stage1, r.flux1, &r.pump1, omega_s)?;
    let g_in = refl(z1, cfg.port_impedance).abs();
    let g_step = refl(cfg.interface_z_f, z1).abs();
    let f11 = fs[0].norm();
    let (interface_reflection, s11) = if cfg.coherent_reflections {
        let g_if = g_step + f11;
        let a = g_in + g_if * (h1 * loss1_s).sqrt() * loss1_s.sqrt();
        (g_if * g_if, a * a)
    } else {
        let g_if2 = g_step * g_step + f11 * f11;
        (g_if2, g_in * g_in + g_if2 * h1 * loss1_s * loss1_s)
    };
    let input_noise = crate::noise::input_backaction_estimate(
        h1 * loss1_s * loss1_s,
        -db_from_power_ratio(interface_reflection),
        0.0,
    );
    Ok(PointResponse { omega_s, h1, i1, h3, r3, forward, reverse, s11, z1, interface_reflection, input_noise })
}

/// Spectra of the three-stage device on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeSpectra {
    pub freq_hz: Vec<f64>,
    pub s21_db: Vec<f64>,
    pub s12_db: Vec<f64>,
    pub s11_db: Vec<f64>,
    pub stage1_db: Vec<f64>,
    pub idler_db: Vec<f64>,
    pub stage3_db: Vec<f64>,
}

pub fn evaluate_grid(cfg: &MtwpaConfig, grid: &FrequencyGrid, exec: Exec) -> Result<Vec<PointResponse>> {
    cfg.validate()?;
    let r = cfg.resolve()?;
    exec.try_map(grid.points(), |&w| evaluate_point(cfg, &r, w))
}

pub fn forward_gain_spectrum(cfg: &MtwpaConfig, grid: &FrequencyGrid, exec: Exec) -> Result<CascadeSpectra> {
    let pts = evaluate_grid(cfg, grid, exec)?;
    let col = |f: &dyn Fn(&PointResponse) -> f64| pts.iter().map(|p| db_from_power_ratio(f(p))).collect::<Vec<_>>();
    Ok(CascadeSpectra {
        freq_hz: grid.hz(),
        s21_db: col(&|p| p.forward),
        s12_db: col(&|p| p.reverse),
        s11_db: col(&|p| p.s11),
        stage1_db: col(&|p| p.h1),
        idler_db: col(&|p| p.i1),
        stage3_db: col(&|p| p.r3),
    })
}

/// Reverse isolation in dB (positive): pump-off filter and line loss, less
/// the labeled empirical pump-on offset.
pub fn reverse_isolation_spectrum(cfg: &MtwpaConfig, grid: &FrequencyGrid, exec: Exec) -> Result<Vec<f64>> {
    let pts = evaluate_grid(&cfg.pump_off(), grid, exec)?;
    Ok(pts.iter().map(|p| -db_from_power_ratio(p.reverse)).collect())
}

/// Return loss in dB (positive).
pub fn return_loss_spectrum(cfg: &MtwpaConfig, grid: &FrequencyGrid, exec: Exec) -> Result<Vec<f64>> {
    let pts = evaluate_grid(cfg, grid, exec)?;
    Ok(pts.iter().map(|p| -db_from_power_ratio(p.s11)).collect())
}

/// Points per search band and golden-section refinements.
const SEARCH_POINTS: usize = 1201;

/// Maximum of `f` over `[a, b]`: dense scan, then golden-section refinement.
pub fn maximize<F: Fn(f64) -> Result<f64> + Sync + Send>(a: f64, b: f64, exec: Exec, f: F) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (0..SEARCH_POINTS).map(|i| a + (b - a) * i as f64 / (SEARCH_POINTS - 1) as f64).collect();
    let ys = exec.try_map(&xs, |&x| f(x))?;
    let (mut ib, mut yb) = (0, f64::NEG_INFINITY);
    for (i, &y) in ys.iter().enumerate() {
        if y > yb {
            ib = i;
            yb = y;
        }
    }
    let mut lo = xs[ib.saturating_sub(1)];
    let mut hi = xs[(ib + 1).min(xs.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let (x, y) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    Ok(if y >= yb { (x, y) } else { (xs[ib], yb) })
}

/// Lower signal band searched for the stop-band gain lobe: from a quarter of
/// the pump frequency up to the filter cutoff (or the pump, if lower).
pub fn lower_band(cfg: &MtwpaConfig) -> (f64, f64) {
    let wp = cfg.omega_p();
    let top = cfg.filter.cutoff_hz().map(omega_from_hz).unwrap_or(wp).min(wp);
    (0.25 * wp, top * (1.0 - 1e-9))
}

/// Upper signal band, mirror of the lower band about the pump.
pub fn upper_band(cfg: &MtwpaConfig) -> (f64, f64) {
    let wp = cfg.omega_p();
    let (a, b) = lower_band(cfg);
    (2.0 * wp - b, 2.0 * wp - a)
}

/// Peak of the two-stage parametric gain in the lower band: (ω_s, dB).
pub fn peak_two_stage_gain(cfg: &MtwpaConfig, exec: Exec) -> Result<(f64, f64)> {
    let r = cfg.resolve()?;
    let (a, b) = lower_band(cfg);
    maximize(a, b, exec, |w| Ok(db_from_power_ratio(r.two_stage_gain(w)?.max(1e-300))))
}

/// Peak of the forward transmission within a band: (ω_s, dB).
pub fn peak_forward_gain(cfg: &MtwpaConfig, band: (f64, f64), exec: Exec) -> Result<(f64, f64)> {
    cfg.validate()?;
    let r = cfg.resolve()?;
    maximize(band.0, band.1, exec, |w| Ok(db_from_power_ratio(evaluate_point(cfg, &r, w)?.forward)))
}

/// Contiguous width (Hz) around `peak` where `gain_db(ω) ≥ threshold_db`,
/// with crossings located by bisection.
pub fn bandwidth_above<F: Fn(f64) -> Result<f64>>(
    gain_db: F,
    peak: f64,
    threshold_db: f64,
    band: (f64, f64),
) -> Result<f64> {
    if gain_db(peak)? < threshold_db {
        return Ok(0.0);
    }
    let edge = |limit: f64| -> Result<f64> {
        let n = 2000;
        let mut inside = peak;
        for i in 1..=n {
            let x = peak + (limit - peak) * i as f64 / n as f64;
            if gain_db(x)? < threshold_db {
                let mut outside = x;
                for _ in 0..60 {
                    let mid = 0.5 * (inside + outside);
                    if gain_db(mid)? >= threshold_db {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                return Ok(0.5 * (inside + outside));
            }
            inside = x;
        }
        Ok(limit)
    };
    Ok(hz_from_omega(edge(band.1)? - edge(band.0)?))
}

/// Summary of the forward response at the calibrated operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSummary {
    pub lower_peak_hz: f64,
    pub lower_peak_db: f64,
    pub upper_peak_hz: f64,
    pub upper_peak_db: f64,
    /// Width of the lower lobe with two-stage gain within 3 dB of its peak.
    pub lower_bandwidth_hz: f64,
    pub nonlinear_phase_rad: f64,
}

pub fn gain_summary(cfg: &MtwpaConfig, exec: Exec) -> Result<GainSummary> {
    cfg.validate()?;
    let r = cfg.resolve()?;
    let (wl, gl) = peak_two_stage_gain(cfg, exec)?;
    let ub = upper_band(cfg);
    let (wu, gu) = maximize(ub.0, ub.1, exec, |w| {
        let (c1, c3) = r.coefficients(w)?;
        Ok(db_from_power_ratio(power_gain(&c1, r.l1) * power_gain(&c3, r.l3)))
    })?;
    let bw = bandwidth_above(
        |w| Ok(db_from_power_ratio(r.two_stage_gain(w)?.max(1e-300))),
        wl,
        gl - 3.0,
        lower_band(cfg),
    )?;
    Ok(GainSummary {
        lower_peak_hz: hz_from_omega(wl),
        lower_peak_db: gl,
        upper_peak_hz: hz_from_omega(wu),
        upper_peak_db: gu,
        lower_bandwidth_hz: bw,
        nonlinear_phase_rad: r.nonlinear_phase()?,
    })
}

/// Pump-on peak forward gain minus pump-off transmission at the same
/// frequency (dB).
pub fn extinction_ratio(cfg: &MtwpaConfig, exec: Exec) -> Result<f64> {
    let (w, on_db) = peak_forward_gain(cfg, lower_band(cfg), exec)?;
    let off = cfg.pump_off();
    let r = off.resolve()?;
    Ok(on_db - db_from_power_ratio(evaluate_point(&off, &r, w)?.forward))
}

/// Stage contributions at the lower-lobe peak (dB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainDistribution {
    pub freq_hz: f64,
    pub stage1_db: f64,
    pub stage3_db: f64,
    pub idler_at_filter_db: f64,
    pub total_db: f64,
}

pub fn gain_distribution(cfg: &MtwpaConfig, exec: Exec) -> Result<GainDistribution> {
    cfg.validate()?;
    let r = cfg.resolve()?;
    let (w, total_db) = peak_two_stage_gain(cfg, exec)?;
    let (c1, _) = r.coefficients(w)?;
    let stage1_db = db_from_power_ratio(power_gain(&c1, r.l1));
    Ok(GainDistribution {
        freq_hz: hz_from_omega(w),
        stage1_db,
        stage3_db: total_db - stage1_db,
        idler_at_filter_db: db_from_power_ratio(idler_transfer(&c1, r.l1)),
        total_db,
    })
}
