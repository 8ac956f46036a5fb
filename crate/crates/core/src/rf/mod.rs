//! Two-port network algebra on frequency grids.
//!
//! All S-parameters use a common real reference impedance (50 Ω unless a
//! constructor says otherwise). Cascades go through ABCD matrices.

pub mod filters;
pub mod touchstone;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Exec;

pub use filters::{balanced_compose, behavioral_highpass, morgan_highpass, BehavioralHighpass, FilterPhase};

pub const Z_REF: f64 = 50.0;

type C64 = Complex64;

/// Strictly increasing positive angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.points
    }
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(domain("frequency grid is empty"));
        }
        if points.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(domain("frequency grid points must be positive and finite"));
        }
        if points.windows(2).any(|p| p[1] <= p[0]) {
            return Err(domain("frequency grid must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// `n` points evenly spaced in Hz from `f_start` to `f_stop` inclusive.
    pub fn linspace_hz(f_start: f64, f_stop: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("frequency grid is empty"));
        }
        if n == 1 {
            return Self::new(vec![crate::units::omega_from_hz(f_start)]);
        }
        let step = (f_stop - f_start) / (n - 1) as f64;
        Self::new(
            (0..n)
                .map(|i| crate::units::omega_from_hz(f_start + step * i as f64))
                .collect(),
        )
    }

    pub fn from_hz(hz: &[f64]) -> Result<Self> {
        Self::new(hz.iter().map(|&f| crate::units::omega_from_hz(f)).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn hz(&self) -> Vec<f64> {
        self.points.iter().map(|&w| crate::units::hz_from_omega(w)).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Complex S-matrix sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortResponse {
    pub grid: FrequencyGrid,
    pub s11: Vec<C64>,
    pub s12: Vec<C64>,
    pub s21: Vec<C64>,
    pub s22: Vec<C64>,
}

/// ABCD matrix `[[A, B], [C, D]]`.
pub type Abcd = [[C64; 2]; 2];

pub fn abcd_from_s(s11: C64, s12: C64, s21: C64, s22: C64, z0: f64) -> Abcd {
    let one = C64::new(1.0, 0.0);
    let d = 2.0 * s21;
    [
        [
            ((one + s11) * (one - s22) + s12 * s21) / d,
            z0 * ((one + s11) * (one + s22) - s12 * s21) / d,
        ],
        [
            ((one - s11) * (one - s22) - s12 * s21) / (d * z0),
            ((one - s11) * (one + s22) + s12 * s21) / d,
        ],
    ]
}

pub fn s_from_abcd(m: &Abcd, z0: f64) -> [C64; 4] {
    let [[a, b], [c, d]] = *m;
    let den = a + b / z0 + c * z0 + d;
    let det = a * d - b * c;
    [
        (a + b / z0 - c * z0 - d) / den,
        2.0 * det / den,
        2.0 / den,
        (-a + b / z0 - c * z0 + d) / den,
    ]
}

fn matmul(x: &Abcd, y: &Abcd) -> Abcd {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

impl TwoPortResponse {
    pub fn from_fn<F>(grid: &FrequencyGrid, exec: Exec, f: F) -> Self
    where
        F: Fn(f64) -> [C64; 4] + Sync + Send,
    {
        Self::from_rows(grid, exec.map(grid.points(), |&w| f(w)))
    }

    pub fn try_from_fn<F>(grid: &FrequencyGrid, exec: Exec, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<[C64; 4]> + Sync + Send,
    {
        Ok(Self::from_rows(grid, exec.try_map(grid.points(), |&w| f(w))?))
    }

    /// Rows ordered `[s11, s12, s21, s22]`, one per grid point.
    pub fn from_rows(grid: &FrequencyGrid, rows: Vec<[C64; 4]>) -> Self {
        debug_assert_eq!(rows.len(), grid.len());
        let mut out = Self {
            grid: grid.clone(),
            s11: Vec::with_capacity(rows.len()),
            s12: Vec::with_capacity(rows.len()),
            s21: Vec::with_capacity(rows.len()),
            s22: Vec::with_capacity(rows.len()),
        };
        for [a, b, c, d] in rows {
            out.s11.push(a);
            out.s12.push(b);
            out.s21.push(c);
            out.s22.push(d);
        }
        out
    }

    pub fn thru(grid: &FrequencyGrid) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::from_fn(grid, Exec::Sequential, |_| [zero, one, one, zero])
    }

    /// Matched attenuator of `db` decibels.
    pub fn attenuator(grid: &FrequencyGrid, db: f64) -> Self {
        let t = C64::new(10f64.powf(-db / 20.0), 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::from_fn(grid, Exec::Sequential, |_| [zero, t, t, zero])
    }

    /// Uniform line of impedance `z` and electrical length `theta(ω)`.
    pub fn line<F: Fn(f64) -> f64 + Sync + Send>(grid: &FrequencyGrid, z: f64, theta: F) -> Self {
        Self::from_fn(grid, Exec::Sequential, |w| {
            let t = theta(w);
            let j = C64::i();
            let m = [
                [C64::new(t.cos(), 0.0), j * z * t.sin()],
                [j * t.sin() / z, C64::new(t.cos(), 0.0)],
            ];
            s_from_abcd(&m, Z_REF)
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn abcd(&self, i: usize) -> Abcd {
        abcd_from_s(self.s11[i], self.s12[i], self.s21[i], self.s22[i], Z_REF)
    }

    /// Network with ports exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            s11: self.s22.clone(),
            s12: self.s21.clone(),
            s21: self.s12.clone(),
            s22: self.s11.clone(),
        }
    }

    /// Largest singular value of the 2×2 S-matrix over the grid.
    pub fn max_singular_value(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b, c, d) = (self.s11[i], self.s12[i], self.s21[i], self.s22[i]);
                // eigenvalues of SᴴS
                let p = a.norm_sqr() + c.norm_sqr();
                let q = b.norm_sqr() + d.norm_sqr();
                let r = a.conj() * b + c.conj() * d;
                let tr = p + q;
                let disc = ((p - q) * (p - q) / 4.0 + r.norm_sqr()).sqrt();
                (tr / 2.0 + disc).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_reciprocal(&self, tol: f64) -> bool {
        self.s12.iter().zip(&self.s21).all(|(a, b)| (a - b).norm() <= tol)
    }

    /// |s21|² in dB.
    pub fn s21_db(&self) -> Vec<f64> {
        self.s21.iter().map(|v| 10.0 * v.norm_sqr().log10()).collect()
    }

    pub fn s12_db(&self) -> Vec<f64> {
        self.s12.iter().map(|v| 10.0 * v.norm_sqr().log10()).collect()
    }

    pub fn s11_db(&self) -> Vec<f64> {
        self.s11.iter().map(|v| 10.0 * v.norm_sqr().log10()).collect()
    }

    /// Complex S-parameters at `omega`, linearly interpolated between grid
    /// points and held constant outside the grid.
    pub fn interpolate(&self, omega: f64) -> [C64; 4] {
        let pts = self.grid.points();
        let at = |i: usize| [self.s11[i], self.s12[i], self.s21[i], self.s22[i]];
        if omega <= pts[0] {
            return at(0);
        }
        if omega >= pts[pts.len() - 1] {
            return at(pts.len() - 1);
        }
        let hi = pts.partition_point(|&w| w < omega);
        let lo = hi - 1;
        let t = (omega - pts[lo]) / (pts[hi] - pts[lo]);
        let (a, b) = (at(lo), at(hi));
        [0, 1, 2, 3].map(|k| a[k] + (b[k] - a[k]) * t)
    }
}

/// `a` followed by `b`, by ABCD multiplication at each grid point.
pub fn cascade(a: &TwoPortResponse, b: &TwoPortResponse) -> Result<TwoPortResponse> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let rows = (0..a.len())
        .map(|i| s_from_abcd(&matmul(&a.abcd(i), &b.abcd(i)), Z_REF))
        .collect();
    Ok(TwoPortResponse::from_rows(&a.grid, rows))
}

/// Cascade of many networks in order.
pub fn cascade_all(parts: &[&TwoPortResponse]) -> Result<TwoPortResponse> {
    let (first, rest) = parts.split_first().ok_or_else(|| domain("nothing to cascade"))?;
    rest.iter().try_fold((*first).clone(), |acc, p| cascade(&acc, p))
}
