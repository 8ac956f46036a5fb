//! Small dense and banded solvers.

use num_complex::Complex64;

/// Solves `a·x = b` for a dense row-major complex matrix by Gaussian
/// elimination with partial pivoting. Returns `None` if `a` is singular.
pub fn solve_dense(mut a: Vec<Complex64>, n: usize, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))?;
        if a[piv * n + col].norm() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * b[k];
        }
        b[row] = s / a[row * n + row];
    }
    Some(b)
}

/// Real square band matrix with `w` sub- and super-diagonals, stored by
/// rows as `data[i*(2w+1) + (j + w - i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    pub n: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self { n, w, data: vec![0.0; n * (2 * w + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.w);
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// y = A·x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.w);
            let hi = (i + self.w).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[self.idx(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    /// In-place LU factorization without pivoting; valid for the diagonally
    /// dominant or symmetric positive definite systems produced by circuit
    /// stamps. Returns `false` on a zero pivot.
    pub fn factor(&mut self) -> bool {
        let (n, w) = (self.n, self.w);
        for k in 0..n {
            let p = self.data[self.idx(k, k)];
            if p == 0.0 || !p.is_finite() {
                return false;
            }
            let hi = (k + w).min(n - 1);
            for i in k + 1..=hi {
                let ik = self.idx(i, k);
                let f = self.data[ik] / p;
                self.data[ik] = f;
                for j in k + 1..=hi {
                    let kj = self.idx(k, j);
                    let ij = self.idx(i, j);
                    self.data[ij] -= f * self.data[kj];
                }
            }
        }
        true
    }

    /// Solves with a matrix previously passed through [`BandMatrix::factor`].
    pub fn solve_factored(&self, b: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }
}

/// Solves a complex band system without pivoting; `a` uses the
/// [`BandMatrix`] layout. Returns `None` on a zero pivot.
pub fn solve_band_complex(n: usize, w: usize, mut a: Vec<Complex64>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let stride = 2 * w + 1;
    let idx = |i: usize, j: usize| i * stride + (j + w - i);
    for k in 0..n {
        let p = a[idx(k, k)];
        if p.norm() == 0.0 || !p.is_finite() {
            return None;
        }
        let hi = (k + w).min(n - 1);
        for i in k + 1..=hi {
            let f = a[idx(i, k)] / p;
            for j in k + 1..=hi {
                let v = a[idx(k, j)];
                a[idx(i, j)] -= f * v;
            }
            let v = b[k];
            b[i] -= f * v;
        }
    }
    for i in (0..n).rev() {
        let hi = (i + w).min(n - 1);
        let mut s = b[i];
        for j in i + 1..=hi {
            s -= a[idx(i, j)] * b[j];
        }
        b[i] = s / a[idx(i, i)];
    }
    Some(b)
}
