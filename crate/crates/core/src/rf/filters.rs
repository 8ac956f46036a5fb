//! Reflectionless high-pass filter models.
//!
//! The lumped model cascades constant-resistance bridged-T cells. A cell has
//! ports `p`, `q` and an internal node `m`:
//!
//! ```text
//!   p ──┬──────── Z_b ────────┬── q        Z_b: bridging reactance
//!       └─ R0 ──┬── m ── R0 ──┘            Z_s: m to ground
//!               Z_s                        Z_b·Z_s = R0²
//!               ⏚
//! ```
//!
//! Under even excitation `Z_b` carries no current and the half circuit is
//! `R0 + 2Z_s`; under odd excitation `m` is a virtual ground and the half
//! circuit is `R0 ∥ Z_b/2`. The duality `Z_b·Z_s = R0²` makes the two
//! half-circuit impedances reciprocal about `R0`, so `s11 = 0` identically and
//! `s21 = Z_s/(R0 + Z_s)`. Stop-band power is dissipated in the two resistors.
//!
//! One filter stage holds two cells: a capacitive cell (bridging `C_f`, shunt
//! inductance `R0²·C_f`) and an inductive cell (shunt `L_f`, bridging
//! capacitance `L_f/R0²`).

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{FrequencyGrid, TwoPortResponse, Z_REF};
use crate::circuit::Netlist;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;

type C64 = Complex64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPhase {
    #[default]
    Zero,
    Minimum,
}

/// Piecewise-linear-in-dB high-pass abstraction of a measured filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehavioralHighpass {
    pub cutoff_hz: f64,
    pub rolloff_db_per_ghz: f64,
    /// Largest stop-band isolation in excess of the pass-band loss.
    pub stopband_floor_db: f64,
    pub passband_il_db: f64,
    pub return_loss_db: f64,
    #[serde(default)]
    pub phase: FilterPhase,
}

impl Default for BehavioralHighpass {
    fn default() -> Self {
        Self {
            cutoff_hz: 7.3e9,
            rolloff_db_per_ghz: 60.0,
            stopband_floor_db: 55.0,
            passband_il_db: 3.0,
            return_loss_db: 15.0,
            phase: FilterPhase::Zero,
        }
    }
}

impl BehavioralHighpass {
    pub fn validate(&self) -> Result<()> {
        if !(self.rolloff_db_per_ghz > 0.0) {
            return Err(domain("rolloff must be positive"));
        }
        if !(self.stopband_floor_db >= 0.0 && self.passband_il_db >= 0.0 && self.return_loss_db >= 0.0) {
            return Err(domain("floor, insertion loss and return loss must be nonnegative"));
        }
        if !(self.cutoff_hz > 0.0) {
            return Err(domain("cutoff must be positive"));
        }
        // |s11| + |s21| bounds the largest singular value of a symmetric S
        if 10f64.powf(-self.passband_il_db / 20.0) + 10f64.powf(-self.return_loss_db / 20.0) > 1.0 {
            return Err(domain("insertion loss and return loss describe an active network"));
        }
        Ok(())
    }

    /// Transmission in dB (negative) at frequency `f_hz`.
    pub fn s21_db_at(&self, f_hz: f64) -> f64 {
        let below = ((self.cutoff_hz - f_hz) / 1e9).max(0.0);
        -self.passband_il_db - (self.rolloff_db_per_ghz * below).min(self.stopband_floor_db)
    }
}

pub fn behavioral_highpass(model: &BehavioralHighpass, grid: &FrequencyGrid) -> Result<TwoPortResponse> {
    model.validate()?;
    let refl = C64::new(10f64.powf(-model.return_loss_db / 20.0), 0.0);
    let hz = grid.hz();
    let mags: Vec<f64> = hz.iter().map(|&f| 10f64.powf(model.s21_db_at(f) / 20.0)).collect();
    let phases = match model.phase {
        FilterPhase::Zero => vec![0.0; hz.len()],
        FilterPhase::Minimum => minimum_phase(|f| model.s21_db_at(f), &hz),
    };
    let rows = mags
        .iter()
        .zip(&phases)
        .map(|(&m, &p)| {
            let t = C64::from_polar(m, p);
            [refl, t, t, refl]
        })
        .collect();
    Ok(TwoPortResponse::from_rows(grid, rows))
}

/// Minimum-phase response (rad) of a magnitude given in dB, by folding the
/// real cepstrum on a uniform grid from DC.
fn minimum_phase<F: Fn(f64) -> f64>(mag_db: F, hz: &[f64]) -> Vec<f64> {
    const N: usize = 1 << 16;
    let f_max = 16.0 * hz.iter().cloned().fold(0.0, f64::max);
    let df = f_max / (N / 2) as f64;
    let mut buf: Vec<C64> = (0..N)
        .map(|k| {
            let kk = if k <= N / 2 { k } else { N - k };
            C64::new(mag_db(kk as f64 * df).max(-300.0) * (10f64.ln() / 20.0), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(N);
    let fwd = planner.plan_fft_forward(N);
    inv.process(&mut buf);
    for (n, v) in buf.iter_mut().enumerate() {
        let w = match n {
            0 => 1.0,
            n if n < N / 2 => 2.0,
            n if n == N / 2 => 1.0,
            _ => 0.0,
        };
        *v *= w / N as f64;
    }
    fwd.process(&mut buf);
    let phase: Vec<f64> = buf.iter().map(|v| v.im).collect();
    hz.iter()
        .map(|&f| {
            let x = f / df;
            let i = (x.floor() as usize).min(N / 2 - 1);
            let t = x - i as f64;
            phase[i] * (1.0 - t) + phase[i + 1] * t
        })
        .collect()
}

/// Appends `n_stages` reflectionless high-pass stages to `net` starting at
/// node `input`; returns the output node.
pub fn append_morgan(net: &mut Netlist, input: usize, l_f: f64, c_f: f64, n_stages: usize, r0: f64) -> Result<usize> {
    if !(l_f > 0.0 && c_f > 0.0 && r0 > 0.0) {
        return Err(domain("filter elements must be positive"));
    }
    if n_stages == 0 {
        return Err(domain("filter needs at least one stage"));
    }
    let mut p = input;
    for _ in 0..n_stages {
        for (bridge_c, shunt_l) in [(c_f, r0 * r0 * c_f), (l_f / (r0 * r0), l_f)] {
            let m = net.add_node();
            let q = net.add_node();
            net.capacitor(Some(p), Some(q), bridge_c)?;
            net.resistor(Some(p), Some(m), r0)?;
            net.resistor(Some(m), Some(q), r0)?;
            net.inductor(Some(m), None, shunt_l)?;
            p = q;
        }
    }
    Ok(p)
}

/// Netlist of the lumped filter with its port nodes.
pub fn morgan_netlist(l_f: f64, c_f: f64, n_stages: usize, r0: f64) -> Result<(Netlist, usize, usize)> {
    let mut net = Netlist::new();
    let input = net.add_node();
    let output = append_morgan(&mut net, input, l_f, c_f, n_stages, r0)?;
    Ok((net, input, output))
}

/// S-parameters of the lumped reflectionless filter by nodal analysis.
pub fn morgan_highpass(l_f: f64, c_f: f64, n_stages: usize, grid: &FrequencyGrid) -> Result<TwoPortResponse> {
    let (net, a, b) = morgan_netlist(l_f, c_f, n_stages, Z_REF)?;
    TwoPortResponse::try_from_fn(grid, Exec::Sequential, |w| {
        let s = net.sparams(a, b, Z_REF, w)?;
        Ok([s[0][0], s[0][1], s[1][0], s[1][1]])
    })
}

/// e^{jθ} for θ in degrees, exact at multiples of 90°.
fn cis_deg(deg: f64) -> C64 {
    let q = deg / 90.0;
    if q == q.round() {
        match (q as i64).rem_euclid(4) {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    } else {
        C64::from_polar(1.0, deg * PI / 180.0)
    }
}

/// Balanced filter: input hybrid, two identical filters, output hybrid.
///
/// Each hybrid passes amplitude `a = 10^(−IL/20)` to its direct port and
/// `a·e^{−jφ}` to its coupled port. Filter reflections return through the
/// input hybrid as `a²(1 + e^{−2jφ})`, which vanishes for `φ = 90°`; the
/// transmitted paths recombine as `2a²e^{−jφ}`.
pub fn balanced_compose(hybrid_il_db: f64, hybrid_phase_deg: f64, filter: &TwoPortResponse) -> Result<TwoPortResponse> {
    if !(hybrid_il_db >= 0.0) {
        return Err(domain("hybrid insertion loss must be nonnegative"));
    }
    let a2 = 10f64.powf(-hybrid_il_db / 10.0);
    let refl = (C64::new(1.0, 0.0) + cis_deg(-2.0 * hybrid_phase_deg)) * a2;
    let thru = cis_deg(-hybrid_phase_deg) * (2.0 * a2);
    let rows = (0..filter.len())
        .map(|i| [filter.s11[i] * refl, filter.s12[i] * thru, filter.s21[i] * thru, filter.s22[i] * refl])
        .collect();
    Ok(TwoPortResponse::from_rows(&filter.grid, rows))
}

/// Checks that two responses share a grid.
pub fn same_grid(a: &TwoPortResponse, b: &TwoPortResponse) -> Result<()> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
