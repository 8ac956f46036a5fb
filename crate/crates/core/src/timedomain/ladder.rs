//! Lumped ladder networks built from stage geometries.
//!
//! A cell from node `p` to a new node `q` holds the Kerr inductor `L` in
//! parallel with `C_J` between `p` and `q`, then `C_gnd` and the dielectric
//! conductance `G` from `q` to ground. The source and load resistances are
//! kept outside the netlist so that the netlist stays a pure two-port.

use num_complex::Complex64;

use crate::cascade::{FilterModel, MtwpaConfig};
use crate::circuit::{Element, Netlist};
use crate::device::{linear_params, FluxBias, StageGeometry};
use crate::error::{domain, Result};
use crate::linalg::solve_band_complex;
use crate::rf::filters::append_morgan;

/// Circuit values of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub l: f64,
    pub gamma: f64,
    pub c_j: f64,
    pub c_gnd: f64,
    /// Dielectric conductance (S), fixed at a reference frequency.
    pub g: f64,
}

impl CellParams {
    pub fn new(geom: &StageGeometry, flux: FluxBias, omega_ref: f64) -> Result<Self> {
        let p = linear_params(geom, flux)?;
        Ok(Self {
            l: p.l_cell,
            gamma: p.gamma,
            c_j: geom.junction_capacitance(),
            c_gnd: geom.c_gnd,
            g: p.g_of_omega(omega_ref),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderNetwork {
    pub netlist: Netlist,
    pub input: usize,
    pub output: usize,
    pub source_resistance: f64,
    pub load_resistance: f64,
    /// Named internal nodes, such as the interface ahead of a filter.
    pub probes: Vec<(String, usize)>,
}

/// Incremental construction from the input port.
#[derive(Debug, Clone)]
pub struct LadderBuilder {
    net: Netlist,
    input: usize,
    head: usize,
    probes: Vec<(String, usize)>,
}

impl Default for LadderBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl LadderBuilder {
    pub fn new() -> Self {
        let mut net = Netlist::new();
        let input = net.add_node();
        Self { net, input, head: input, probes: Vec::new() }
    }

    /// Appends `n` identical cells.
    pub fn cells(mut self, cell: CellParams, n: usize) -> Result<Self> {
        for _ in 0..n {
            let q = self.net.add_node();
            if cell.gamma == 0.0 {
                self.net.inductor(Some(self.head), Some(q), cell.l)?;
            } else {
                self.net.kerr(Some(self.head), Some(q), cell.l, cell.gamma)?;
            }
            self.net.capacitor(Some(self.head), Some(q), cell.c_j)?;
            self.net.capacitor(Some(q), None, cell.c_gnd)?;
            if cell.g > 0.0 {
                self.net.resistor(Some(q), None, 1.0 / cell.g)?;
            }
            self.head = q;
        }
        Ok(self)
    }

    /// Appends the lumped reflectionless filter with termination `r0`.
    pub fn morgan(mut self, l_f: f64, c_f: f64, n_stages: usize, r0: f64) -> Result<Self> {
        self.head = append_morgan(&mut self.net, self.head, l_f, c_f, n_stages, r0)?;
        Ok(self)
    }

    /// Marks the current head node.
    pub fn probe(mut self, name: &str) -> Self {
        self.probes.push((name.to_string(), self.head));
        self
    }

    pub fn finish(self, source_resistance: f64, load_resistance: f64) -> Result<LadderNetwork> {
        if !(source_resistance > 0.0 && load_resistance > 0.0) {
            return Err(domain("port resistances must be positive"));
        }
        if self.net.n_nodes < 3 {
            return Err(domain("a ladder needs at least two cells"));
        }
        Ok(LadderNetwork {
            netlist: self.net,
            input: self.input,
            output: self.head,
            source_resistance,
            load_resistance,
            probes: self.probes,
        })
    }
}

/// One stage of `geom.n_cells` cells between the given port resistances.
/// `omega_ref` fixes the dielectric conductance.
pub fn build_ladder(
    geom: &StageGeometry,
    flux: FluxBias,
    ports: (f64, f64),
    omega_ref: f64,
) -> Result<LadderNetwork> {
    geom.validate()?;
    if geom.n_cells < 2 {
        return Err(domain("a ladder needs at least two cells"));
    }
    LadderBuilder::new()
        .cells(CellParams::new(geom, flux, omega_ref)?, geom.n_cells)?
        .finish(ports.0, ports.1)
}

/// Stage one, lumped filter terminated in `Z_f`, stage three, between
/// `port_impedance` terminations. The behavioral filter has no circuit form
/// and is rejected.
pub fn build_device(cfg: &MtwpaConfig, omega_ref: f64) -> Result<LadderNetwork> {
    let (l_f, c_f, n) = match cfg.filter {
        FilterModel::Lumped { l_f, c_f, n_stages, balanced: None } => (l_f, c_f, n_stages),
        FilterModel::Lumped { .. } => return Err(domain("balanced hybrids have no circuit model")),
        FilterModel::Behavioral(_) => return Err(domain("the behavioral filter has no circuit model")),
    };
    let r = cfg.resolve()?;
    LadderBuilder::new()
        .cells(CellParams::new(&r.stage1, r.flux1, omega_ref)?, r.stage1.n_cells)?
        .probe("interface")
        .morgan(l_f, c_f, n, cfg.interface_z_f)?
        .probe("stage3_in")
        .cells(CellParams::new(&r.stage3, r.flux3, omega_ref)?, r.stage3.n_cells)?
        .finish(cfg.port_impedance, cfg.port_impedance)
}

impl LadderNetwork {
    /// Same network with every Kerr inductor linearized.
    pub fn linearized(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.netlist.elements {
            if let Element::Kerr { a, b, l, .. } = *e {
                *e = Element::Inductor { a, b, l };
            }
        }
        out
    }

    pub fn probe(&self, name: &str) -> Option<usize> {
        self.probes.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    /// Small-signal node voltages per volt of source EMF at `omega`.
    pub fn phasors(&self, omega: f64) -> Result<Vec<Complex64>> {
        let n = self.netlist.n_nodes;
        let w = self.netlist.bandwidth();
        let stride = 2 * w + 1;
        let mut a = vec![Complex64::new(0.0, 0.0); n * stride];
        let at = |i: usize, j: usize| i * stride + (j + w - i);
        for e in &self.netlist.elements {
            let y = e.admittance(omega);
            let (p, q) = e.nodes();
            if let Some(p) = p {
                a[at(p, p)] += y;
            }
            if let Some(q) = q {
                a[at(q, q)] += y;
            }
            if let (Some(p), Some(q)) = (p, q) {
                a[at(p, q)] -= y;
                a[at(q, p)] -= y;
            }
        }
        a[at(self.input, self.input)] += 1.0 / self.source_resistance;
        a[at(self.output, self.output)] += 1.0 / self.load_resistance;
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[self.input] = Complex64::new(1.0 / self.source_resistance, 0.0);
        solve_band_complex(n, w, a, b).ok_or_else(|| domain("singular nodal matrix"))
    }

    /// Small-signal `(s11, s21)` with the source-divider normalization
    /// `s21 = 2·V_out/V_s`, `s11 = 2·V_in/V_s − 1`.
    pub fn small_signal(&self, omega: f64) -> Result<(Complex64, Complex64)> {
        let v = self.phasors(omega)?;
        Ok((2.0 * v[self.input] - 1.0, 2.0 * v[self.output]))
    }
}
