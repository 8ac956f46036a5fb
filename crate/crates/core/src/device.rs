//! Linear and Kerr circuit constants of one SQUID transmission-line stage.
//!
//! One unit cell is a series branch (flux-tunable inductance `L` shunted by
//! the junction capacitance `C₀(r/2 + 2)`) followed by a shunt capacitance
//! `C_gnd` with dielectric conductance `G = ω·C_gnd·tanδ`. Wavenumbers are in
//! radians per cell.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{PHI0, PHI0_REDUCED};
use crate::error::{domain, Error, Result};

/// Ratio of the stage-3 to stage-1 flux periodicities.
pub const STAGE3_FLUX_RATIO: f64 = 1.26;

/// Applied flux at which stage one sits at 0.41 Φ₀.
pub const CALIBRATION_APPLIED_FLUX: f64 = 0.48;
pub const CALIBRATION_STAGE1_FLUX: f64 = 0.41;

/// Fabrication parameters of one nonlinear transmission-line stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageGeometry {
    /// Critical current of the small junction (A).
    pub i0: f64,
    /// Junction area ratio.
    pub r: f64,
    /// Small-junction capacitance (F).
    pub c0: f64,
    /// Ground capacitance per cell (F).
    pub c_gnd: f64,
    pub tan_delta: f64,
    pub n_cells: usize,
    /// Cell length (m).
    pub cell_length: f64,
    /// Converts globally applied flux into this stage's loop flux.
    pub flux_period_scale: f64,
}

impl StageGeometry {
    /// Fabricated design values with unit flux scale.
    pub fn paper() -> Self {
        Self {
            i0: 1.2e-6,
            r: 6.0,
            c0: 45e-15,
            c_gnd: 110e-15,
            tan_delta: 5e-4,
            n_cells: 350,
            cell_length: 10e-6,
            flux_period_scale: 1.0,
        }
    }

    /// Paper geometry for stage one and stage three with calibrated flux scales.
    pub fn paper_pair() -> (Self, Self) {
        let (s1, s3) = paper_flux_scales();
        let g = Self::paper();
        (
            Self { flux_period_scale: s1, ..g },
            Self { flux_period_scale: s3, ..g },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos(self.i0, "i0")?;
        pos(self.c0, "c0")?;
        pos(self.c_gnd, "c_gnd")?;
        pos(self.cell_length, "cell_length")?;
        pos(self.flux_period_scale, "flux_period_scale")?;
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(domain(format!("r must be at least 1, got {}", self.r)));
        }
        if !(self.tan_delta >= 0.0 && self.tan_delta.is_finite()) {
            return Err(domain(format!("tan_delta must be nonnegative, got {}", self.tan_delta)));
        }
        if self.n_cells == 0 {
            return Err(domain("n_cells must be at least 1"));
        }
        Ok(())
    }

    /// Single-junction inductance L₀ (H).
    pub fn l0(&self) -> f64 {
        PHI0 / (2.0 * PI * self.i0)
    }

    /// Series junction capacitance C_J = C₀(r/2 + 2) (F).
    pub fn junction_capacitance(&self) -> f64 {
        self.c0 * (self.r / 2.0 + 2.0)
    }

    /// Loop flux seen by this stage for a globally applied flux.
    pub fn stage_flux(&self, applied: f64) -> FluxBias {
        FluxBias::new(applied * self.flux_period_scale)
    }
}

/// Normalized loop flux Φ/Φ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FluxBias {
    pub phi_over_phi0: f64,
}

impl FluxBias {
    pub fn new(phi_over_phi0: f64) -> Self {
        Self { phi_over_phi0 }
    }

    /// cos(2πΦ/Φ₀), evaluated on the period-reduced flux so that shifts by
    /// whole flux quanta and sign changes leave it bit-identical.
    pub fn cos_term(self) -> f64 {
        let mut x = self.phi_over_phi0.abs().rem_euclid(1.0);
        if x > 0.5 {
            x = 1.0 - x;
        }
        (2.0 * PI * x).cos()
    }
}

/// Circuit constants at one flux bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    /// Series inductance per cell L (H).
    pub l_cell: f64,
    /// Kerr constant γ (A/Wb³).
    pub gamma: f64,
    pub l0: f64,
    pub c_gnd: f64,
    pub tan_delta: f64,
}

impl LinearParams {
    /// Dielectric conductance G(ω) = ω·C_gnd·tanδ (S).
    pub fn g_of_omega(&self, omega: f64) -> f64 {
        omega * self.c_gnd * self.tan_delta
    }
}

pub fn josephson_inductance(i0: f64) -> Result<f64> {
    if !(i0 > 0.0 && i0.is_finite()) {
        return Err(domain(format!("critical current must be positive, got {i0}")));
    }
    Ok(PHI0 / (2.0 * PI * i0))
}

/// r/2 + 2cos(2πΦ/Φ₀).
pub fn inductance_denominator(geom: &StageGeometry, flux: FluxBias) -> f64 {
    geom.r / 2.0 + 2.0 * flux.cos_term()
}

pub fn linear_params(geom: &StageGeometry, flux: FluxBias) -> Result<LinearParams> {
    let l0 = josephson_inductance(geom.i0)?;
    let den = inductance_denominator(geom, flux);
    if den <= 0.0 {
        return Err(Error::Frustrated { denominator: den });
    }
    let gamma = (geom.r / 16.0 + flux.cos_term()) / (3.0 * PHI0_REDUCED * PHI0_REDUCED * l0);
    Ok(LinearParams {
        l_cell: l0 / den,
        gamma,
        l0,
        c_gnd: geom.c_gnd,
        tan_delta: geom.tan_delta,
    })
}

/// Angular frequency at which the dispersion relation diverges.
pub fn cutoff_omega(geom: &StageGeometry, flux: FluxBias) -> Result<f64> {
    let den = inductance_denominator(geom, flux);
    if den <= 0.0 {
        return Err(Error::Frustrated { denominator: den });
    }
    Ok((den / (geom.l0() * geom.junction_capacitance())).sqrt())
}

/// Bracket of the dispersion relation divided by L₀: 1/L − ω²C_J (1/H).
fn stiffness(omega: f64, geom: &StageGeometry, flux: FluxBias) -> Result<f64> {
    let den = inductance_denominator(geom, flux);
    if den <= 0.0 {
        return Err(Error::Frustrated { denominator: den });
    }
    let l0 = geom.l0();
    let m = den / l0 - omega * omega * geom.junction_capacitance();
    if m <= 0.0 {
        return Err(Error::Cutoff {
            freq_hz: omega / (2.0 * PI),
            cutoff_hz: cutoff_omega(geom, flux)? / (2.0 * PI),
        });
    }
    Ok(m)
}

/// Linear wavenumber k(ω, Φ) in radians per cell.
pub fn dispersion_k(omega: f64, geom: &StageGeometry, flux: FluxBias) -> Result<f64> {
    Ok(omega * characteristic_impedance(omega, geom, flux)? * geom.c_gnd)
}

/// Image impedance k(ω)/(ω·C_gnd) of the ladder (Ω); finite at ω = 0.
pub fn characteristic_impedance(omega: f64, geom: &StageGeometry, flux: FluxBias) -> Result<f64> {
    let m = stiffness(omega, geom, flux)?;
    Ok(1.0 / (geom.c_gnd * m).sqrt())
}

/// Stage-1 and stage-3 flux scales pinned so that the calibration applied
/// flux lands stage one on its calibration flux.
pub fn paper_flux_scales() -> (f64, f64) {
    let s = CALIBRATION_STAGE1_FLUX / CALIBRATION_APPLIED_FLUX;
    (s, STAGE3_FLUX_RATIO * s)
}

pub fn flux_partition(applied: f64, stage1: &StageGeometry, stage3: &StageGeometry) -> (FluxBias, FluxBias) {
    (stage1.stage_flux(applied), stage3.stage_flux(applied))
}
