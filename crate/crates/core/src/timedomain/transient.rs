//! Implicit trapezoidal integration of the node-flux equations
//! `M·φ̈ + D·φ̇ + F(φ) = b(t)`.
//!
//! `M` stamps capacitors, `D` resistors (including both port resistances)
//! and `F` inductors plus the Kerr cubic. The source is a Thévenin EMF
//! behind the source resistance, entered as the Norton current `e/R_s`.
//! One step solves
//! `(4/h²)M(y − φ₀) − (4/h)M·v₀ + (2/h)D(y − φ₀) + F(y) + F(φ₀) = b₀ + b₁`
//! for `y = φ₁` by Newton's method and sets `v₁ = 2(y − φ₀)/h − v₀`.
//! The discrete energy identity
//! `E₁ − E₀ = h·v̄ᵀ(b̄ − D·v̄)` holds exactly for linear networks.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ladder::LadderNetwork;
use crate::circuit::Element;
use crate::error::{domain, Error, Result};
use crate::linalg::BandMatrix;

/// Newton update tolerance relative to the largest node flux.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub freq_hz: f64,
    /// Peak source EMF (V).
    pub amplitude_v: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Tone {
    /// Tone whose available power into a matched `r_s` is `power_w`.
    pub fn from_power(freq_hz: f64, power_w: f64, r_s: f64) -> Self {
        Self { freq_hz, amplitude_v: (8.0 * r_s * power_w).sqrt(), phase_rad: 0.0 }
    }
}

/// White Gaussian EMF of single-sided density `rms_v²/bandwidth_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDrive {
    pub rms_v: f64,
    pub bandwidth_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub tones: Vec<Tone>,
    #[serde(default)]
    pub noise: Option<NoiseDrive>,
    /// Step (s); an integer fraction of the window.
    pub dt: f64,
    /// Analysis window (s); tones must sit on its frequency grid.
    pub window: f64,
    /// Number of consecutive recorded windows.
    #[serde(default = "one")]
    pub segments: usize,
    /// Discarded lead-in (s).
    pub settle: f64,
    /// Raised-cosine turn-on time (s), at most the settle time.
    pub ramp: f64,
}

fn one() -> usize {
    1
}

impl DriveSpec {
    /// One window of `n` samples after an equal settle time (half the run is
    /// discarded) with a ramp over a quarter of the settle time.
    pub fn new(tones: Vec<Tone>, window: f64, n: usize) -> Self {
        Self { tones, noise: None, dt: window / n as f64, window, segments: 1, settle: window, ramp: window / 4.0 }
    }

    /// Like [`DriveSpec::new`] with `points_per_period` samples per period
    /// of the highest tone.
    pub fn resolved(tones: Vec<Tone>, window: f64, points_per_period: usize) -> Self {
        let f_max = tones.iter().map(|t| t.freq_hz).fold(0.0, f64::max);
        let n = (window * f_max * points_per_period as f64).ceil().max(16.0) as usize;
        Self::new(tones, window, n)
    }

    pub fn with_settle(self, settle: f64) -> Self {
        Self { settle, ramp: self.ramp.min(settle), ..self }
    }

    pub fn with_segments(self, segments: usize) -> Self {
        Self { segments, ..self }
    }

    pub fn with_noise(self, noise: NoiseDrive) -> Self {
        Self { noise: Some(noise), ..self }
    }

    pub fn window_samples(&self) -> usize {
        (self.window / self.dt).round() as usize
    }

    pub fn settle_steps(&self) -> usize {
        (self.settle / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.settle_steps() + self.segments * self.window_samples()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.window > 0.0 && self.dt.is_finite() && self.window.is_finite()) {
            return Err(domain("dt and window must be positive"));
        }
        let n = self.window / self.dt;
        if (n - n.round()).abs() > 1e-6 * n || n.round() < 16.0 {
            return Err(domain(format!("window holds {n} steps; it must be an integer of at least 16")));
        }
        if self.segments == 0 {
            return Err(domain("at least one segment is needed"));
        }
        if !(self.settle >= 0.0 && self.ramp >= 0.0 && self.ramp <= self.settle + 1e-18) {
            return Err(domain("settle must be nonnegative and cover the ramp"));
        }
        for t in &self.tones {
            if !(t.freq_hz > 0.0 && t.amplitude_v >= 0.0 && t.amplitude_v.is_finite()) {
                return Err(domain("tones need positive frequency and nonnegative amplitude"));
            }
        }
        let f_max = self.tones.iter().map(|t| t.freq_hz).fold(0.0, f64::max);
        if f_max > 0.0 && self.dt >= 1.0 / (20.0 * f_max) {
            return Err(domain(format!(
                "dt = {:.4e} s is too coarse for {f_max:.4e} Hz; it must be below 1/(20·f_max)",
                self.dt
            )));
        }
        let f_min = self.tones.iter().map(|t| t.freq_hz).fold(f64::INFINITY, f64::min);
        let duration = self.settle + self.segments as f64 * self.window;
        if f_min.is_finite() && duration * f_min < 64.0 {
            return Err(domain(format!("run of {duration:.4e} s spans fewer than 64 periods of {f_min:.4e} Hz")));
        }
        if let Some(nz) = self.noise {
            if !(nz.rms_v >= 0.0 && nz.bandwidth_hz > 0.0) {
                return Err(domain("noise needs nonnegative rms and positive bandwidth"));
            }
        }
        Ok(())
    }

    fn envelope(&self, t: f64) -> f64 {
        if t >= self.ramp {
            1.0
        } else {
            0.5 * (1.0 - (PI * t / self.ramp).cos())
        }
    }

    /// Source EMF at every step from 0 to the end of the run.
    pub fn emf(&self) -> Vec<f64> {
        let steps = self.total_steps();
        let mut e: Vec<f64> = (0..=steps)
            .map(|n| {
                let t = n as f64 * self.dt;
                let s: f64 =
                    self.tones.iter().map(|tn| tn.amplitude_v * (2.0 * PI * tn.freq_hz * t + tn.phase_rad).cos()).sum();
                self.envelope(t) * s
            })
            .collect();
        if let Some(nz) = self.noise {
            let f_nyq = 0.5 / self.dt;
            let sigma = nz.rms_v * (f_nyq / nz.bandwidth_hz).sqrt();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(nz.seed);
            for v in &mut e {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * x;
            }
        }
        e
    }
}

/// Energy bookkeeping over the whole run (J).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyAudit {
    /// Work done by the Norton source current.
    pub source_work: f64,
    /// Dissipation in all resistances, port resistances included.
    pub dissipated: f64,
    /// Stored energy at the end.
    pub stored: f64,
}

/// Recorded node voltages over the analysis windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub dt: f64,
    /// Time of the first recorded sample (s).
    pub t_start: f64,
    pub window_samples: usize,
    /// Source EMF at the recorded samples.
    pub source: Vec<f64>,
    /// `(name, node, voltages)`; always includes `input` and `output`.
    pub probes: Vec<(String, usize, Vec<f64>)>,
    pub audit: EnergyAudit,
    pub max_newton_iters: usize,
}

impl SimOutput {
    pub fn probe(&self, name: &str) -> Option<&[f64]> {
        self.probes.iter().find(|p| p.0 == name).map(|p| p.2.as_slice())
    }
}

struct Kerr {
    a: Option<usize>,
    b: Option<usize>,
    gamma: f64,
}

fn branch(phi: &[f64], a: Option<usize>, b: Option<usize>) -> f64 {
    a.map_or(0.0, |i| phi[i]) - b.map_or(0.0, |i| phi[i])
}

fn stamp(m: &mut BandMatrix, a: Option<usize>, b: Option<usize>, v: f64) {
    if let Some(a) = a {
        m.add(a, a, v);
    }
    if let Some(b) = b {
        m.add(b, b, v);
    }
    if let (Some(a), Some(b)) = (a, b) {
        m.add(a, b, -v);
        m.add(b, a, -v);
    }
}

/// Nodal matrices of a network.
struct Stamps {
    m: BandMatrix,
    d: BandMatrix,
    k: BandMatrix,
    kerr: Vec<Kerr>,
}

fn assemble(net: &LadderNetwork) -> Stamps {
    let n = net.netlist.n_nodes;
    let w = net.netlist.bandwidth().max(1);
    let mut s = Stamps { m: BandMatrix::zeros(n, w), d: BandMatrix::zeros(n, w), k: BandMatrix::zeros(n, w), kerr: vec![] };
    for e in &net.netlist.elements {
        match *e {
            Element::Capacitor { a, b, c } => stamp(&mut s.m, a, b, c),
            Element::Resistor { a, b, r } => stamp(&mut s.d, a, b, 1.0 / r),
            Element::Inductor { a, b, l } => stamp(&mut s.k, a, b, 1.0 / l),
            Element::Kerr { a, b, l, gamma } => {
                stamp(&mut s.k, a, b, 1.0 / l);
                s.kerr.push(Kerr { a, b, gamma });
            }
        }
    }
    s.d.add(net.input, net.input, 1.0 / net.source_resistance);
    s.d.add(net.output, net.output, 1.0 / net.load_resistance);
    s
}

/// `F(φ) = K·φ − Σ γ·Δφ³` stamped per Kerr branch.
fn force(st: &Stamps, phi: &[f64], out: &mut [f64]) {
    st.k.mul_vec(phi, out);
    for k in &st.kerr {
        let d = branch(phi, k.a, k.b);
        let i = k.gamma * d * d * d;
        if let Some(a) = k.a {
            out[a] -= i;
        }
        if let Some(b) = k.b {
            out[b] += i;
        }
    }
}

fn stored_energy(net: &LadderNetwork, st: &Stamps, phi: &[f64], v: &[f64]) -> f64 {
    let mut mv = vec![0.0; v.len()];
    st.m.mul_vec(v, &mut mv);
    let mut e = 0.5 * v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
    for el in &net.netlist.elements {
        match *el {
            Element::Inductor { a, b, l } => e += 0.5 * branch(phi, a, b).powi(2) / l,
            Element::Kerr { a, b, l, gamma } => {
                let d = branch(phi, a, b);
                e += 0.5 * d * d / l - 0.25 * gamma * d.powi(4);
            }
            _ => {}
        }
    }
    e
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs the transient and records probe voltages over the analysis windows.
pub fn transient(net: &LadderNetwork, drive: &DriveSpec) -> Result<SimOutput> {
    drive.validate()?;
    let n = net.netlist.n_nodes;
    let h = drive.dt;
    let st = assemble(net);
    let mut a_lin = st.m.clone();
    for (x, (d, k)) in a_lin.data.iter_mut().zip(st.d.data.iter().zip(&st.k.data)) {
        *x = *x * 4.0 / (h * h) + d * 2.0 / h + k;
    }
    let linear = st.kerr.is_empty();
    let lin_factored = if linear {
        let mut f = a_lin.clone();
        if !f.factor() {
            return Err(Error::Conditioning("linear step matrix has a zero pivot".into()));
        }
        Some(f)
    } else {
        None
    };

    let emf = drive.emf();
    let settle = drive.settle_steps();
    let total = drive.total_steps();
    let mut probe_nodes: Vec<(String, usize)> = vec![("input".into(), net.input), ("output".into(), net.output)];
    probe_nodes.extend(net.probes.iter().cloned());
    let mut rec: Vec<Vec<f64>> = vec![Vec::with_capacity(total - settle); probe_nodes.len()];
    let mut source = Vec::with_capacity(total - settle);

    let mut phi = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut f0 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut tmp2 = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut audit = EnergyAudit::default();
    let mut max_iters = 0;
    let g_s = 1.0 / net.source_resistance;

    for step in 0..total {
        // rhs = (4/h²)Mφ₀ + (4/h)Mv₀ + (2/h)Dφ₀ + b₀ + b₁ − F(φ₀)
        for i in 0..n {
            tmp[i] = phi[i] * 4.0 / (h * h) + v[i] * 4.0 / h;
        }
        st.m.mul_vec(&tmp, &mut rhs);
        st.d.mul_vec(&phi, &mut tmp2);
        force(&st, &phi, &mut f0);
        for i in 0..n {
            rhs[i] += tmp2[i] * 2.0 / h - f0[i];
        }
        rhs[net.input] += (emf[step] + emf[step + 1]) * g_s;

        if let Some(f) = &lin_factored {
            y.copy_from_slice(&rhs);
            f.solve_factored(&mut y);
        } else {
            for i in 0..n {
                y[i] = phi[i] + h * v[i];
            }
            let mut converged = false;
            let mut last = f64::INFINITY;
            for it in 1..=NEWTON_MAX_ITERS {
                // residual r = A_lin·y − cubic(y) − rhs, Jacobian A_lin − 3γΔ² stamps
                a_lin.mul_vec(&y, &mut fy);
                let mut jac = a_lin.clone();
                for k in &st.kerr {
                    let d = branch(&y, k.a, k.b);
                    let i = k.gamma * d * d * d;
                    if let Some(a) = k.a {
                        fy[a] -= i;
                    }
                    if let Some(b) = k.b {
                        fy[b] += i;
                    }
                    stamp(&mut jac, k.a, k.b, -3.0 * k.gamma * d * d);
                }
                for i in 0..n {
                    fy[i] = rhs[i] - fy[i];
                }
                if !jac.factor() {
                    return Err(Error::NonConvergence { step, iterations: it, update: f64::NAN });
                }
                jac.solve_factored(&mut fy);
                for i in 0..n {
                    y[i] += fy[i];
                }
                last = inf_norm(&fy);
                if !last.is_finite() {
                    return Err(Error::NonConvergence { step, iterations: it, update: last });
                }
                if last <= NEWTON_TOL * inf_norm(&y) || last == 0.0 {
                    max_iters = max_iters.max(it);
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NonConvergence { step, iterations: NEWTON_MAX_ITERS, update: last });
            }
        }

        // v₁ and the energy terms on the midpoint velocity
        for i in 0..n {
            let v1 = 2.0 * (y[i] - phi[i]) / h - v[i];
            tmp[i] = 0.5 * (v[i] + v1);
            v[i] = v1;
            phi[i] = y[i];
        }
        st.d.mul_vec(&tmp, &mut tmp2);
        audit.dissipated += h * tmp.iter().zip(&tmp2).map(|(a, b)| a * b).sum::<f64>();
        audit.source_work += h * tmp[net.input] * 0.5 * (emf[step] + emf[step + 1]) * g_s;

        if step + 1 > settle {
            source.push(emf[step + 1]);
            for (r, (_, node)) in rec.iter_mut().zip(&probe_nodes) {
                r.push(v[*node]);
            }
        }
    }
    audit.stored = stored_energy(net, &st, &phi, &v);
    Ok(SimOutput {
        dt: h,
        t_start: (settle + 1) as f64 * h,
        window_samples: drive.window_samples(),
        source,
        probes: probe_nodes.into_iter().zip(rec).map(|((name, node), r)| (name, node, r)).collect(),
        audit,
        max_newton_iters: max_iters,
    })
}
