//! Degenerate-pump four-wave-mixing coupled-mode theory under a stiff pump.
//!
//! Signal and idler amplitudes obey
//! `a_s' = iκ_s·a_i*·e^{iκz}`, `a_i' = iκ_i·a_s*·e^{iκz}` with
//! `κ = Δk + α_s + α_i − 2α_p`. Lengths are in cells.
//!
//! The pump amplitude `A_p` is the physical peak node flux of a wave
//! `φ = A_p·cos(k_p z − ω_p t)`, carrying power `ω_p²A_p²/(2Z₀)`. With this
//! convention a weak probe sees the pumped inductance
//! `1/L − (3/2)·γ·k_p²·A_p²`, which fixes the signal and idler cross-phase as
//! `α_{s,i} = 3γ·k_{s,i}³·k_p²·A_p²/(4·C_gnd·ω_{s,i}²)`. The pump self-phase
//! `α_p = 3γ·k_p⁵·A_p²/(8·C_gnd·ω_p²)` carries the 3/4 SPM factor, so that
//! `α_s = 2α_p` at degeneracy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{characteristic_impedance, dispersion_k, linear_params, FluxBias, StageGeometry};
use crate::error::{domain, Result};

/// |gz| below which the series forms of the transfer functions are used.
const SERIES_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpDrive {
    /// Pump angular frequency (rad/s).
    pub omega_p: f64,
    /// Pump power (W).
    pub power_w: f64,
    /// Peak node-flux amplitude A_p (Wb).
    pub amp_flux: f64,
}

impl PumpDrive {
    /// Drive carrying `power_w` on a line of impedance `z0` at the pump.
    pub fn from_power(omega_p: f64, power_w: f64, z0: f64) -> Result<Self> {
        Ok(Self {
            omega_p,
            power_w,
            amp_flux: pump_amplitude_from_power(power_w, omega_p, z0)?,
        })
    }

    pub fn off(omega_p: f64) -> Self {
        Self { omega_p, power_w: 0.0, amp_flux: 0.0 }
    }

    /// Drive for a stage, using that stage's own impedance at the pump.
    pub fn for_stage(geom: &StageGeometry, flux: FluxBias, omega_p: f64, power_w: f64) -> Result<Self> {
        let z0 = characteristic_impedance(omega_p, geom, flux)?;
        Self::from_power(omega_p, power_w, z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePair {
    pub a_s: Complex64,
    pub a_i: Complex64,
    pub omega_s: f64,
    pub omega_i: f64,
}

impl ModePair {
    pub fn new(a_s: Complex64, a_i: Complex64, omega_s: f64, omega_p: f64) -> Self {
        Self { a_s, a_i, omega_s, omega_i: 2.0 * omega_p - omega_s }
    }
}

/// Coefficients of the coupled-mode equations at one signal frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmeCoefficients {
    pub alpha_s: f64,
    pub alpha_i: f64,
    pub alpha_p: f64,
    pub kappa_s: f64,
    pub kappa_i: f64,
    pub delta_k: f64,
    pub kappa: f64,
    /// g² = κ_s·κ_i − (κ/2)²; negative in the oscillatory regime.
    pub g_squared: f64,
}

impl CmeCoefficients {
    /// Builds coefficients from their primitive parts, enforcing the
    /// definitions of κ and g².
    pub fn from_parts(alpha_s: f64, alpha_i: f64, alpha_p: f64, kappa_s: f64, kappa_i: f64, delta_k: f64) -> Self {
        let kappa = delta_k + (alpha_s + alpha_i - 2.0 * alpha_p);
        Self {
            alpha_s,
            alpha_i,
            alpha_p,
            kappa_s,
            kappa_i,
            delta_k,
            kappa,
            g_squared: kappa_s * kappa_i - (kappa / 2.0) * (kappa / 2.0),
        }
    }

    /// Principal square root of g² (imaginary in the oscillatory regime).
    pub fn g(&self) -> Complex64 {
        Complex64::new(self.g_squared, 0.0).sqrt()
    }

    /// Coefficients with κ_s and κ_i exchanged.
    pub fn swapped(&self) -> Self {
        Self { kappa_s: self.kappa_i, kappa_i: self.kappa_s, ..*self }
    }
}

/// `C = cosh(gz)` and `S = sinh(gz)/g`, both real for real g².
fn cosh_sinhc(g_squared: f64, z: f64) -> (f64, f64) {
    let x2 = g_squared * z * z;
    if x2.abs() < SERIES_THRESHOLD * SERIES_THRESHOLD {
        (1.0 + x2 / 2.0 + x2 * x2 / 24.0, z * (1.0 + x2 / 6.0 + x2 * x2 / 120.0))
    } else if g_squared > 0.0 {
        let g = g_squared.sqrt();
        ((g * z).cosh(), (g * z).sinh() / g)
    } else {
        let q = (-g_squared).sqrt();
        ((q * z).cos(), (q * z).sin() / q)
    }
}

pub fn pump_amplitude_from_power(power_w: f64, omega_p: f64, z0: f64) -> Result<f64> {
    if !(power_w >= 0.0 && power_w.is_finite()) {
        return Err(domain(format!("pump power must be nonnegative, got {power_w}")));
    }
    if !(z0 > 0.0 && omega_p > 0.0) {
        return Err(domain("impedance and pump frequency must be positive"));
    }
    Ok((2.0 * z0 * power_w).sqrt() / omega_p)
}

struct Wavenumbers {
    ks: f64,
    ki: f64,
    kp: f64,
    ws: f64,
    wi: f64,
    wp: f64,
    /// 3γ|A_p|²/(C_gnd)
    scale: f64,
}

fn wavenumbers(geom: &StageGeometry, flux: FluxBias, pump: &PumpDrive, omega_s: f64) -> Result<Wavenumbers> {
    let p = linear_params(geom, flux)?;
    let wp = pump.omega_p;
    let wi = 2.0 * wp - omega_s;
    if !(omega_s > 0.0 && wi > 0.0) {
        return Err(domain(format!(
            "signal {omega_s} rad/s must lie strictly between 0 and twice the pump"
        )));
    }
    Ok(Wavenumbers {
        ks: dispersion_k(omega_s, geom, flux)?,
        ki: dispersion_k(wi, geom, flux)?,
        kp: dispersion_k(wp, geom, flux)?,
        ws: omega_s,
        wi,
        wp,
        scale: 3.0 * p.gamma * pump.amp_flux * pump.amp_flux / geom.c_gnd,
    })
}

pub fn spm_xpm_coefficients(
    geom: &StageGeometry,
    flux: FluxBias,
    pump: &PumpDrive,
    omega_s: f64,
) -> Result<(f64, f64, f64)> {
    let w = wavenumbers(geom, flux, pump, omega_s)?;
    Ok(spm_xpm(&w))
}

fn spm_xpm(w: &Wavenumbers) -> (f64, f64, f64) {
    let kp2 = w.kp * w.kp;
    let alpha_s = w.scale * w.ks.powi(3) * kp2 / (4.0 * w.ws * w.ws);
    let alpha_i = w.scale * w.ki.powi(3) * kp2 / (4.0 * w.wi * w.wi);
    let alpha_p = w.scale * w.kp.powi(5) / (8.0 * w.wp * w.wp);
    (alpha_s, alpha_i, alpha_p)
}

pub fn coupling_coefficients(
    geom: &StageGeometry,
    flux: FluxBias,
    pump: &PumpDrive,
    omega_s: f64,
) -> Result<(f64, f64)> {
    let w = wavenumbers(geom, flux, pump, omega_s)?;
    Ok(couplings(&w))
}

fn couplings(w: &Wavenumbers) -> (f64, f64) {
    let common = w.scale * w.kp * w.kp * w.ks * w.ki / 8.0;
    let kappa_s = common * (2.0 * w.kp - w.ki) / (w.ws * w.ws);
    let kappa_i = common * (2.0 * w.kp - w.ks) / (w.wi * w.wi);
    (kappa_s, kappa_i)
}

pub fn cme_coefficients(
    geom: &StageGeometry,
    flux: FluxBias,
    pump: &PumpDrive,
    omega_s: f64,
) -> Result<CmeCoefficients> {
    let w = wavenumbers(geom, flux, pump, omega_s)?;
    let (alpha_s, alpha_i, alpha_p) = spm_xpm(&w);
    let (kappa_s, kappa_i) = couplings(&w);
    let delta_k = w.ks + w.ki - 2.0 * w.kp;
    Ok(CmeCoefficients::from_parts(alpha_s, alpha_i, alpha_p, kappa_s, kappa_i, delta_k))
}

pub fn total_mismatch(geom: &StageGeometry, flux: FluxBias, pump: &PumpDrive, omega_s: f64) -> Result<f64> {
    Ok(cme_coefficients(geom, flux, pump, omega_s)?.kappa)
}

/// Closed-form solution of the coupled-mode equations after `z` cells.
pub fn evolve_modes(input: &ModePair, c: &CmeCoefficients, z: f64) -> ModePair {
    let (ch, sh) = cosh_sinhc(c.g_squared, z);
    let i = Complex64::i();
    let diag = Complex64::new(ch, -c.kappa * sh / 2.0);
    let phase = Complex64::from_polar(1.0, c.kappa * z / 2.0);
    let a_s = (input.a_s * diag + i * c.kappa_s * sh * input.a_i.conj()) * phase;
    let a_i = (input.a_i * diag + i * c.kappa_i * sh * input.a_s.conj()) * phase;
    ModePair { a_s, a_i, ..*input }
}

/// Transfer matrix acting on `(a_s, a_i*)`.
pub fn transfer_matrix(c: &CmeCoefficients, z: f64) -> [[Complex64; 2]; 2] {
    let (ch, sh) = cosh_sinhc(c.g_squared, z);
    let i = Complex64::i();
    let phase = Complex64::from_polar(1.0, c.kappa * z / 2.0);
    [
        [Complex64::new(ch, -c.kappa * sh / 2.0) * phase, i * c.kappa_s * sh * phase],
        [-i * c.kappa_i * sh * phase.conj(), Complex64::new(ch, c.kappa * sh / 2.0) * phase.conj()],
    ]
}

/// Signal (or idler) power gain cosh²(gz) + (κ²/4g²)·sinh²(gz).
pub fn power_gain(c: &CmeCoefficients, z: f64) -> f64 {
    let (ch, sh) = cosh_sinhc(c.g_squared, z);
    ch * ch + c.kappa * c.kappa / 4.0 * sh * sh
}

/// Idler power generated per unit input signal power, with no input idler.
pub fn idler_transfer(c: &CmeCoefficients, z: f64) -> f64 {
    let (_, sh) = cosh_sinhc(c.g_squared, z);
    c.kappa_i * c.kappa_i * sh * sh
}

/// Signal power regenerated per unit input idler power, with no input signal.
pub fn signal_regen_transfer(c: &CmeCoefficients, z: f64) -> f64 {
    let (_, sh) = cosh_sinhc(c.g_squared, z);
    c.kappa_s * c.kappa_s * sh * sh
}

/// Stop-band signal gain through idler conversion in stage one and signal
/// regeneration in stage three.
pub fn two_stage_gain(c1: &CmeCoefficients, c3: &CmeCoefficients, l1: f64, l3: f64) -> f64 {
    idler_transfer(c1, l1) * signal_regen_transfer(c3, l3)
}

/// Large-gain phase-matched estimate exp(4|α_p|l)/16.
pub fn phase_matched_approx(alpha_p: f64, l: f64) -> f64 {
    (4.0 * alpha_p.abs() * l).exp() / 16.0
}

/// Total pump self-phase α_p1·l1 + α_p3·l3 (rad); negative for inverse Kerr.
pub fn nonlinear_phase(
    stage1: (&StageGeometry, FluxBias, &PumpDrive),
    stage3: (&StageGeometry, FluxBias, &PumpDrive),
    l1: f64,
    l3: f64,
) -> Result<f64> {
    let alpha_p = |(g, f, p): (&StageGeometry, FluxBias, &PumpDrive)| -> Result<f64> {
        let lp = linear_params(g, f)?;
        let kp = dispersion_k(p.omega_p, g, f)?;
        Ok(3.0 * lp.gamma * p.amp_flux * p.amp_flux * kp.powi(5) / (8.0 * g.c_gnd * p.omega_p * p.omega_p))
    };
    Ok(alpha_p(stage1)? * l1 + alpha_p(stage3)? * l3)
}

/// Fixed-step fourth-order Runge–Kutta integration of the coupled-mode
/// equations in their original (non-rotating) form.
pub fn integrate_cme_numeric(input: &ModePair, c: &CmeCoefficients, z: f64, step: f64) -> Result<ModePair> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(domain(format!("step must be positive, got {step}")));
    }
    if !(z >= 0.0) {
        return Err(domain(format!("length must be nonnegative, got {z}")));
    }
    let i = Complex64::i();
    let rhs = |zz: f64, s: Complex64, id: Complex64| {
        let e = Complex64::from_polar(1.0, c.kappa * zz);
        (i * c.kappa_s * id.conj() * e, i * c.kappa_i * s.conj() * e)
    };
    let n = (z / step).ceil() as usize;
    let h = if n == 0 { 0.0 } else { z / n as f64 };
    let (mut s, mut id) = (input.a_s, input.a_i);
    for k in 0..n {
        let zz = k as f64 * h;
        let (k1s, k1i) = rhs(zz, s, id);
        let (k2s, k2i) = rhs(zz + h / 2.0, s + k1s * (h / 2.0), id + k1i * (h / 2.0));
        let (k3s, k3i) = rhs(zz + h / 2.0, s + k2s * (h / 2.0), id + k2i * (h / 2.0));
        let (k4s, k4i) = rhs(zz + h, s + k3s * h, id + k3i * h);
        s += (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (h / 6.0);
        id += (k1i + k2i * 2.0 + k3i * 2.0 + k4i) * (h / 6.0);
    }
    Ok(ModePair { a_s: s, a_i: id, ..*input })
}

/// Photon-flux invariant κ_i|a_s|² − κ_s|a_i|².
pub fn manley_rowe(c: &CmeCoefficients, m: &ModePair) -> f64 {
    c.kappa_i * m.a_s.norm_sqr() - c.kappa_s * m.a_i.norm_sqr()
}
