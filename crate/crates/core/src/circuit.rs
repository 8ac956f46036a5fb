//! Lumped-element netlists shared by small-signal and transient analysis.
//!
//! Nodes are numbered from zero; `None` is ground. A Kerr inductor carries
//! the branch current `Δφ/L − γ·Δφ³` where `Δφ` is the branch flux; in
//! small-signal analysis it is the linear inductor `L`.

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::linalg::solve_dense;

pub type Node = Option<usize>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor { a: Node, b: Node, r: f64 },
    Capacitor { a: Node, b: Node, c: f64 },
    Inductor { a: Node, b: Node, l: f64 },
    Kerr { a: Node, b: Node, l: f64, gamma: f64 },
}

impl Element {
    pub fn nodes(&self) -> (Node, Node) {
        match *self {
            Element::Resistor { a, b, .. }
            | Element::Capacitor { a, b, .. }
            | Element::Inductor { a, b, .. }
            | Element::Kerr { a, b, .. } => (a, b),
        }
    }

    /// Small-signal admittance at angular frequency `omega`.
    pub fn admittance(&self, omega: f64) -> Complex64 {
        match *self {
            Element::Resistor { r, .. } => Complex64::new(1.0 / r, 0.0),
            Element::Capacitor { c, .. } => Complex64::new(0.0, omega * c),
            Element::Inductor { l, .. } | Element::Kerr { l, .. } => Complex64::new(0.0, -1.0 / (omega * l)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Netlist {
    pub n_nodes: usize,
    pub elements: Vec<Element>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self) -> usize {
        self.n_nodes += 1;
        self.n_nodes - 1
    }

    pub fn push(&mut self, e: Element) -> Result<()> {
        let value = match e {
            Element::Resistor { r, .. } => r,
            Element::Capacitor { c, .. } => c,
            Element::Inductor { l, .. } | Element::Kerr { l, .. } => l,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(domain(format!("element value must be positive, got {e:?}")));
        }
        let (a, b) = e.nodes();
        for n in [a, b].into_iter().flatten() {
            if n >= self.n_nodes {
                return Err(domain(format!("node {n} does not exist")));
            }
        }
        if a == b {
            return Err(domain("element shorted to itself"));
        }
        self.elements.push(e);
        Ok(())
    }

    pub fn resistor(&mut self, a: Node, b: Node, r: f64) -> Result<()> {
        self.push(Element::Resistor { a, b, r })
    }

    pub fn capacitor(&mut self, a: Node, b: Node, c: f64) -> Result<()> {
        self.push(Element::Capacitor { a, b, c })
    }

    pub fn inductor(&mut self, a: Node, b: Node, l: f64) -> Result<()> {
        self.push(Element::Inductor { a, b, l })
    }

    pub fn kerr(&mut self, a: Node, b: Node, l: f64, gamma: f64) -> Result<()> {
        self.push(Element::Kerr { a, b, l, gamma })
    }

    /// Largest |i − j| over element terminals.
    pub fn bandwidth(&self) -> usize {
        self.elements
            .iter()
            .filter_map(|e| match e.nodes() {
                (Some(a), Some(b)) => Some(a.abs_diff(b)),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Dense nodal admittance matrix at `omega`, row-major.
    pub fn admittance_matrix(&self, omega: f64) -> Vec<Complex64> {
        let n = self.n_nodes;
        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        for e in &self.elements {
            let v = e.admittance(omega);
            let (a, b) = e.nodes();
            if let Some(a) = a {
                y[a * n + a] += v;
            }
            if let Some(b) = b {
                y[b * n + b] += v;
            }
            if let (Some(a), Some(b)) = (a, b) {
                y[a * n + b] -= v;
                y[b * n + a] -= v;
            }
        }
        y
    }

    /// Two-port S-matrix `[[s11, s12], [s21, s22]]` between nodes `p1` and
    /// `p2` against reference resistance `r0`.
    ///
    /// Each port is driven in turn by a 2 V source behind `r0` with the
    /// other port terminated; then `s_jj = V_j − 1` and `s_kj = V_k`.
    pub fn sparams(&self, p1: usize, p2: usize, r0: f64, omega: f64) -> Result<[[Complex64; 2]; 2]> {
        let n = self.n_nodes;
        let mut y = self.admittance_matrix(omega);
        let g0 = Complex64::new(1.0 / r0, 0.0);
        y[p1 * n + p1] += g0;
        y[p2 * n + p2] += g0;
        let mut s = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (j, &pj) in [p1, p2].iter().enumerate() {
            let mut rhs = vec![Complex64::new(0.0, 0.0); n];
            rhs[pj] = Complex64::new(2.0 / r0, 0.0);
            let v = solve_dense(y.clone(), n, rhs).ok_or_else(|| domain("singular nodal matrix"))?;
            for (k, &pk) in [p1, p2].iter().enumerate() {
                s[k][j] = if k == j { v[pk] - 1.0 } else { v[pk] };
            }
        }
        Ok(s)
    }
}
