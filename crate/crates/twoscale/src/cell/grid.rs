//! Uniform periodic grids on the unit torus with FFT-based differentiation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::coeff::{Coefficient, Tensor};

/// An `n^dim` periodic grid with point `(i, j)` at `(i/n, j/n)`, stored as `i + n·j`.
#[derive(Clone)]
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2, "grid dimension must be 1 or 2");
        let mut planner = FftPlanner::new();
        SpectralGrid {
            dim,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Torus coordinates of grid point `p`.
    pub fn point(&self, p: usize) -> [f64; 2] {
        let h = 1.0 / self.n as f64;
        [(p % self.n) as f64 * h, (p / self.n) as f64 * h]
    }

    /// Signed wavenumber of index `k`, with the Nyquist index mapped to `n/2`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k <= n / 2 {
            k
        } else {
            k - n
        }
    }

    fn is_nyquist(&self, k: usize) -> bool {
        self.n % 2 == 0 && k == self.n / 2
    }

    /// Wavenumber used for differentiation; the Nyquist mode has no derivative.
    fn diff_wavenumber(&self, k: usize) -> f64 {
        if self.is_nyquist(k) {
            0.0
        } else {
            2.0 * PI * self.wavenumber(k) as f64
        }
    }

    fn mode_axes(&self, p: usize) -> [usize; 2] {
        [p % self.n, p / self.n]
    }

    /// Modes annihilated by every discrete derivative: each axis at 0 or Nyquist.
    pub fn is_null_mode(&self, p: usize) -> bool {
        let m = self.mode_axes(p);
        (0..self.dim).all(|a| m[a] == 0 || self.is_nyquist(m[a]))
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[i + n * j];
            }
            plan.process(&mut col);
            for j in 0..n {
                data[i + n * j] = col[j];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut c, &self.fwd);
        c
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut c, &self.inv);
        let s = 1.0 / self.len() as f64;
        c.iter().map(|z| z.re * s).collect()
    }

    /// Spectral derivative along `axis`.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let mut c = self.forward(f);
        for (p, z) in c.iter_mut().enumerate() {
            let k = self.diff_wavenumber(self.mode_axes(p)[axis]);
            *z *= Complex64::new(0.0, k);
        }
        self.inverse(c)
    }

    /// Removes the components along the operator's null modes (constants and
    /// Nyquist-only modes). For smooth fields this is the mean-zero projection.
    pub fn project_range(&self, f: &mut [f64]) {
        let mut c = self.forward(f);
        for (p, z) in c.iter_mut().enumerate() {
            if self.is_null_mode(p) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        f.copy_from_slice(&self.inverse(c));
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// `−Δ` symbol for mode `p` (zero on null modes).
    fn neg_laplacian_symbol(&self, p: usize) -> f64 {
        let m = self.mode_axes(p);
        (0..self.dim)
            .map(|a| self.diff_wavenumber(m[a]).powi(2))
            .sum()
    }

    /// Applies `(−Δ)⁻¹ · scale` on the range, zero on null modes.
    pub fn inverse_neg_laplacian(&self, f: &[f64], scale: f64) -> Vec<f64> {
        let mut c = self.forward(f);
        for (p, z) in c.iter_mut().enumerate() {
            let s = self.neg_laplacian_symbol(p);
            *z = if self.is_null_mode(p) || s == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                *z * (scale / s)
            };
        }
        self.inverse(c)
    }

    /// Spectral `−Δ`.
    pub fn neg_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut c = self.forward(f);
        for (p, z) in c.iter_mut().enumerate() {
            *z *= self.neg_laplacian_symbol(p);
        }
        self.inverse(c)
    }

    /// Samples a coefficient field at every grid point.
    pub fn sample(&self, field: &dyn Coefficient) -> Vec<Tensor> {
        (0..self.len())
            .map(|p| field.sample(&self.point(p)[..self.dim]))
            .collect()
    }

    /// The collocation operator `u ↦ −Σ_k D_k(Σ_l a_kl D_l u)`.
    pub fn apply_operator(&self, a: &[Tensor], u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let grads: Vec<Vec<f64>> = (0..d).map(|l| self.derivative(u, l)).collect();
        let mut out = vec![0.0; u.len()];
        for k in 0..d {
            let flux: Vec<f64> = (0..u.len())
                .map(|p| (0..d).map(|l| a[p][k][l] * grads[l][p]).sum())
                .collect();
            let div = self.derivative(&flux, k);
            for (o, v) in out.iter_mut().zip(div) {
                *o -= v;
            }
        }
        out
    }

    /// Precomputes Fourier coefficients for pointwise trigonometric interpolation.
    pub fn interpolant(&self, f: &[f64]) -> TrigInterpolant {
        let c = self.forward(f);
        let s = 1.0 / self.len() as f64;
        let coef = c
            .iter()
            .enumerate()
            .map(|(p, z)| {
                let m = self.mode_axes(p);
                if (0..self.dim).any(|a| self.is_nyquist(m[a])) {
                    Complex64::new(0.0, 0.0)
                } else {
                    *z * s
                }
            })
            .collect();
        TrigInterpolant {
            dim: self.dim,
            n: self.n,
            coef,
        }
    }
}

/// Trigonometric interpolant of a grid field (Nyquist modes dropped).
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    dim: usize,
    n: usize,
    coef: Vec<Complex64>,
}

impl TrigInterpolant {
    fn phases(&self, y: f64) -> Vec<Complex64> {
        let n = self.n as i64;
        (0..self.n)
            .map(|k| {
                let k = k as i64;
                let w = if k <= n / 2 { k } else { k - n };
                Complex64::from_polar(1.0, 2.0 * PI * w as f64 * y)
            })
            .collect()
    }

    fn wave(&self, k: usize) -> f64 {
        let n = self.n as i64;
        let k = k as i64;
        2.0 * PI * (if k <= n / 2 { k } else { k - n }) as f64
    }

    /// Value and gradient (with respect to y) at a torus point.
    pub fn eval_with_grad(&self, y: &[f64]) -> (f64, [f64; 2]) {
        let n = self.n;
        let e1 = self.phases(y[0]);
        if self.dim == 1 {
            let mut v = Complex64::new(0.0, 0.0);
            let mut g = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let t = self.coef[k] * e1[k];
                v += t;
                g += t * Complex64::new(0.0, self.wave(k));
            }
            return (v.re, [g.re, 0.0]);
        }
        let e2 = self.phases(y[1]);
        let mut v = Complex64::new(0.0, 0.0);
        let mut g1 = Complex64::new(0.0, 0.0);
        let mut g2 = Complex64::new(0.0, 0.0);
        for k2 in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            let mut row_d = Complex64::new(0.0, 0.0);
            for k1 in 0..n {
                let t = self.coef[k1 + n * k2] * e1[k1];
                row += t;
                row_d += t * self.wave(k1);
            }
            v += row * e2[k2];
            g1 += Complex64::new(0.0, 1.0) * row_d * e2[k2];
            g2 += Complex64::new(0.0, self.wave(k2)) * row * e2[k2];
        }
        (v.re, [g1.re, g2.re])
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.eval_with_grad(y).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_single_mode() {
        let g = SpectralGrid::new(2, 16);
        let f: Vec<f64> = (0..g.len())
            .map(|p| {
                let y = g.point(p);
                (2.0 * PI * y[0]).sin() * (4.0 * PI * y[1]).cos()
            })
            .collect();
        let d2 = g.derivative(&f, 1);
        for p in 0..g.len() {
            let y = g.point(p);
            let exact = -4.0 * PI * (2.0 * PI * y[0]).sin() * (4.0 * PI * y[1]).sin();
            assert!((d2[p] - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolant_reproduces_trig_polynomial_off_grid() {
        let g = SpectralGrid::new(2, 8);
        let exact = |y: &[f64]| (2.0 * PI * (y[0] + 2.0 * y[1])).cos() + 0.3 * (2.0 * PI * y[1]).sin();
        let f: Vec<f64> = (0..g.len()).map(|p| exact(&g.point(p))).collect();
        let it = g.interpolant(&f);
        for y in [[0.123, 0.77], [0.5, 0.01], [0.9, 0.333]] {
            let (v, gr) = it.eval_with_grad(&y);
            assert!((v - exact(&y)).abs() < 1e-12);
            let h = 1e-6;
            let fd = (exact(&[y[0] + h, y[1]]) - exact(&[y[0] - h, y[1]])) / (2.0 * h);
            assert!((gr[0] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn inverse_laplacian_single_mode() {
        let g = SpectralGrid::new(2, 16);
        let f: Vec<f64> = (0..g.len()).map(|p| (2.0 * PI * g.point(p)[0]).sin()).collect();
        let u = g.inverse_neg_laplacian(&f, 1.0);
        for p in 0..g.len() {
            let exact = (2.0 * PI * g.point(p)[0]).sin() / (4.0 * PI * PI);
            assert!((u[p] - exact).abs() < 1e-14);
        }
    }
}
