//! Reference solutions on the unit interval with aligned periods `ε = 1/n`.
//!
//! Eigenvalues of `−(a(x/ε)u′)′ = λu`, `u(0) = u(1) = 0`, come from Prüfer-angle
//! shooting: with `u = r sin θ`, `a u′ = r cos θ` the angle obeys
//! `θ′ = cos²θ / a + λ sin²θ`, `θ(0) = 0`, and the k-th eigenvalue is the
//! unique `λ` with `θ(1) = kπ`.

mod ode;

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;
use thiserror::Error;

use crate::coeff::{make_family, CoeffError, Coefficient, CoefficientField};

pub use ode::{integrate, Tolerance};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no eigenvalue bracket for mode {k} in [{lo}, {hi}]")]
    Bracket { k: usize, lo: f64, hi: f64 },
    #[error("ODE step size underflow at lambda = {0}")]
    Integration(f64),
    #[error("invalid period count {0}; need n >= 2")]
    Period(usize),
    #[error("mode index must be >= 1")]
    Mode,
    #[error(transparent)]
    Coefficient(#[from] CoeffError),
}

/// The trig1d family `a(y) = 1/(2 + cos(2πy + φ))` with a fixed mode.
#[derive(Debug, Clone)]
pub struct Oracle1DCase {
    pub phase: f64,
    pub k: usize,
    pub field: CoefficientField,
}

impl Oracle1DCase {
    pub fn new(phase: f64, k: usize) -> Result<Self, OracleError> {
        if k == 0 {
            return Err(OracleError::Mode);
        }
        Ok(Oracle1DCase {
            phase,
            k,
            field: make_family("trig1d", &[phase])?,
        })
    }

    /// Harmonic mean of `a`, independent of the phase.
    pub fn a_hat(&self) -> f64 {
        0.5
    }

    pub fn chi(&self, y: f64) -> f64 {
        (2.0 * PI * y + self.phase).sin() / (4.0 * PI)
    }

    pub fn chi_at_zero(&self) -> f64 {
        self.chi(0.0)
    }

    pub fn lambda0(&self) -> f64 {
        self.a_hat() * (self.k as f64 * PI).powi(2)
    }

    pub fn phi0(&self, x: f64) -> f64 {
        SQRT_2 * (self.k as f64 * PI * x).sin()
    }

    pub fn dphi0(&self, x: f64) -> f64 {
        let w = self.k as f64 * PI;
        SQRT_2 * w * (w * x).cos()
    }
}

fn tolerance(eps: f64) -> Tolerance {
    Tolerance {
        rtol: 1e-13,
        atol: 1e-15,
        max_step: eps / 8.0,
    }
}

fn prufer_end_angle(field: &dyn Coefficient, eps: f64, lambda: f64) -> Result<f64, OracleError> {
    let rhs = |x: f64, t: &[f64; 1]| {
        let a = field.sample(&[x / eps])[0][0];
        let (s, c) = t[0].sin_cos();
        [c * c / a + lambda * s * s]
    };
    let mut theta = [0.0];
    integrate(&rhs, 0.0, 1.0, &mut theta, tolerance(eps)).ok_or(OracleError::Integration(lambda))?;
    Ok(theta[0])
}

fn coefficient_range(field: &dyn Coefficient) -> (f64, f64) {
    (0..1024).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let a = field.sample(&[i as f64 / 1024.0])[0][0];
        (lo.min(a), hi.max(a))
    })
}

/// k-th Dirichlet eigenvalue of `−(a(x/ε)u′)′ = λu` on (0, 1), relative
/// accuracy `tol`.
pub fn eigenvalue(field: &dyn Coefficient, eps: f64, k: usize, tol: f64) -> Result<f64, OracleError> {
    if k == 0 {
        return Err(OracleError::Mode);
    }
    let target = k as f64 * PI;
    let (amin, amax) = coefficient_range(field);
    let mut lo = 0.9 * amin * target * target;
    let mut hi = 1.1 * amax * target * target;
    let mut flo = prufer_end_angle(field, eps, lo)? - target;
    let mut fhi = prufer_end_angle(field, eps, hi)? - target;
    if flo > 0.0 || fhi < 0.0 {
        return Err(OracleError::Bracket { k, lo, hi });
    }
    // Illinois false position with a bisection fallback.
    let mut side = 0i8;
    for _ in 0..200 {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = prufer_end_angle(field, eps, x)? - target;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= tol * 0.1 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenfunction values at sorted points in [0, 1], normalized by the given
/// quadrature (weights `w` at points `xs`) and signed so that `⟨u, reference⟩ > 0`.
pub fn eigenfunction(
    field: &dyn Coefficient,
    eps: f64,
    lambda: f64,
    xs: &[f64],
    w: &[f64],
    reference: &dyn Fn(f64) -> f64,
) -> Result<Vec<f64>, OracleError> {
    let rhs = |x: f64, y: &[f64; 2]| {
        let a = field.sample(&[x / eps])[0][0];
        [y[1] / a, -lambda * y[0]]
    };
    let mut y = [0.0, 1.0];
    let mut x = 0.0;
    let mut u = Vec::with_capacity(xs.len());
    for &xi in xs {
        integrate(&rhs, x, xi, &mut y, tolerance(eps)).ok_or(OracleError::Integration(lambda))?;
        x = xi.max(x);
        u.push(y[0]);
    }
    let norm = u.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    let sign = if u.iter().zip(xs).zip(w).map(|((v, &x), w)| w * v * reference(x)).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    Ok(u.iter().map(|v| sign * v / norm).collect())
}

/// Composite 5-point Gauss–Legendre rule on (0, 1) with `m` equal panels.
pub fn gauss_panels(m: usize) -> (Vec<f64>, Vec<f64>) {
    const NODES: [(f64, f64); 5] = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let h = 1.0 / m as f64;
    let mut xs = Vec::with_capacity(5 * m);
    let mut ws = Vec::with_capacity(5 * m);
    for p in 0..m {
        for (t, w) in NODES {
            xs.push(h * (p as f64 + 0.5 * (t + 1.0)));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Eigenvalue and eigenfunction samples at aligned `ε = 1/n`.
#[derive(Debug, Clone)]
pub struct ExactEigen {
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub weights: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn eigen_exact_eps(case: &Oracle1DCase, n: usize, tol: f64) -> Result<ExactEigen, OracleError> {
    eigen_exact_field(&case.field, n, case.k, tol)
}

/// As [`eigen_exact_eps`] for any 1D coefficient.
pub fn eigen_exact_field(field: &dyn Coefficient, n: usize, k: usize, tol: f64) -> Result<ExactEigen, OracleError> {
    if n < 2 {
        return Err(OracleError::Period(n));
    }
    let eps = 1.0 / n as f64;
    let lambda = eigenvalue(field, eps, k, tol)?;
    let (xs, weights) = gauss_panels(16 * n.max(4 * k));
    let w = k as f64 * PI;
    let phi = eigenfunction(field, eps, lambda, &xs, &weights, &|x| (w * x).sin())?;
    Ok(ExactEigen {
        lambda,
        xs,
        weights,
        phi,
    })
}

/// Closed-form first-order eigenfunction correction and `θ`.
#[derive(Debug, Clone, Copy)]
pub struct PsiBl {
    /// `ψ(x) = amplitude · cos(kπx)`.
    pub amplitude: f64,
    pub k: usize,
    pub theta: f64,
}

impl PsiBl {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (self.k as f64 * PI * x).cos()
    }
}

/// `ψ = −χ(0)·√2·kπ·cos(kπx)`: solves `−â ψ″ = λ₀ ψ` with boundary values
/// `−χ(0) φ₀′` and is orthogonal to `φ₀`. The boundary-layer pairing vanishes.
pub fn psi_bl_exact(case: &Oracle1DCase) -> PsiBl {
    PsiBl {
        amplitude: -case.chi_at_zero() * SQRT_2 * case.k as f64 * PI,
        k: case.k,
        theta: 0.0,
    }
}

/// Limit of the boundary-layer solution for `g = φ₀`: the linear interpolant
/// of the boundary data `−χ(0) φ₀′`.
pub fn kbl_exact(case: &Oracle1DCase, x: f64) -> f64 {
    let c0 = case.chi_at_zero();
    let (l, r) = (-c0 * case.dphi0(0.0), -c0 * case.dphi0(1.0));
    l + (r - l) * x
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow1D {
    pub eps: f64,
    pub lambda: f64,
    pub r0: f64,
    pub r1: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

/// Residuals of the eigenvalue and eigenfunction expansions for each `n`.
pub fn expansion_residuals_1d(case: &Oracle1DCase, periods: &[usize], tol: f64) -> Result<Vec<ResidualRow1D>, OracleError> {
    let psi = psi_bl_exact(case);
    let lambda0 = case.lambda0();
    periods
        .iter()
        .map(|&n| {
            let ex = eigen_exact_eps(case, n, tol)?;
            let eps = 1.0 / n as f64;
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for ((&x, &w), &u) in ex.xs.iter().zip(&ex.weights).zip(&ex.phi) {
                let d0 = u - case.phi0(x);
                let d1 = d0 - eps * case.chi(x / eps) * case.dphi0(x);
                let d2 = d1 - eps * psi.eval(x);
                s0 += w * d0 * d0;
                s1 += w * d1 * d1;
                s2 += w * d2 * d2;
            }
            Ok(ResidualRow1D {
                eps,
                lambda: ex.lambda,
                r0: (ex.lambda - lambda0).abs(),
                r1: (ex.lambda - lambda0 - eps * psi.theta).abs(),
                e0: s0.sqrt(),
                e1: s1.sqrt(),
                e2: s2.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues_exact() {
        let id = CoefficientField::identity(1);
        for k in 1..=10 {
            let l = eigenvalue(&id, 0.25, k, 1e-12).unwrap();
            let exact = (k as f64 * PI).powi(2);
            assert!((l - exact).abs() <= 1e-10 * exact, "k={k}: {l}");
        }
    }

    #[test]
    fn identity_residuals_vanish() {
        // Identity is the trig1d-independent case: a ≡ 1, χ ≡ 0.
        let id = CoefficientField::identity(1);
        let ex = eigen_exact_field(&id, 8, 1, 1e-12).unwrap();
        let err = ex
            .xs
            .iter()
            .zip(&ex.phi)
            .map(|(&x, &u)| (u - SQRT_2 * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9 && (ex.lambda - PI * PI).abs() < 1e-9);
    }

    #[test]
    fn trig1d_eigenvalues_approach_limit_and_are_ordered() {
        let case = Oracle1DCase::new(PI / 3.0, 1).unwrap();
        let l8 = eigenvalue(&case.field, 1.0 / 8.0, 1, 1e-11).unwrap();
        let l16 = eigenvalue(&case.field, 1.0 / 16.0, 1, 1e-11).unwrap();
        let l2 = eigenvalue(&case.field, 1.0 / 8.0, 2, 1e-11).unwrap();
        let lim = PI * PI / 2.0;
        assert!((l16 - lim).abs() < (l8 - lim).abs());
        assert!(l8 < l2);
    }

    #[test]
    fn psi_bl_amplitude_and_orthogonality() {
        let case = Oracle1DCase::new(PI / 3.0, 1).unwrap();
        let psi = psi_bl_exact(&case);
        // χ(0) = sin(π/3)/(4π) = √3/(8π)
        let expected = -(3f64.sqrt() / (8.0 * PI)) * SQRT_2 * PI;
        assert!((psi.amplitude - expected).abs() < 1e-15);
        assert!((psi.amplitude.abs() - 0.3062).abs() < 1e-4);
        let (xs, ws) = gauss_panels(64);
        let ip: f64 = xs.iter().zip(&ws).map(|(&x, w)| w * psi.eval(x) * case.phi0(x)).sum();
        assert!(ip.abs() < 1e-14);
        assert!((psi.eval(0.0) - kbl_exact(&case, 0.0)).abs() < 1e-15);
        assert!((psi.eval(1.0) - kbl_exact(&case, 1.0)).abs() < 1e-15);
        let zero = psi_bl_exact(&Oracle1DCase::new(0.0, 1).unwrap());
        assert_eq!(zero.amplitude.abs(), 0.0);
    }
}
