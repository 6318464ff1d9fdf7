//! Periodic coefficient fields on the unit torus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 2×2 tensor; one-dimensional fields only use the `[0][0]` entry.
pub type Tensor = [[f64; 2]; 2];

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffError {
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` expects {expected} parameter(s), got {got}")]
    ParamCount {
        family: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("coefficient is not elliptic at y = {point:?}: smallest eigenvalue {min_eig:.3e}")]
    NotElliptic { point: Vec<f64>, min_eig: f64 },
}

/// Closed-form coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// A = I in dimension `dim`.
    Identity { dim: usize },
    /// a(y) = 1 / (2 + cos(2πy + phase)).
    Trig1d { phase: f64 },
    /// A(y) = (2 + amp·sin 2πy₁ · sin 2πy₂)·I, |amp| < 2.
    Trig2d { amp: f64 },
    /// Full symmetric tensor
    /// `[[k(2 + s cos 2πy₁), t sin 2π(y₁+y₂)], [t sin 2π(y₁+y₂), 2 + s cos 2πy₂]]`.
    Aniso2d { k: f64, s: f64, t: f64 },
}

/// Anything that can be sampled as a symmetric tensor on the torus.
pub trait Coefficient {
    fn dim(&self) -> usize;
    fn sample(&self, y: &[f64]) -> Tensor;
}

/// A validated periodic coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    family: Family,
}

impl CoefficientField {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn identity(dim: usize) -> Self {
        CoefficientField {
            family: Family::Identity { dim },
        }
    }

    /// True if the field is a scalar multiple of the identity.
    pub fn is_isotropic(&self) -> bool {
        !matches!(self.family, Family::Aniso2d { .. })
    }

    /// Scalar value a(y) for isotropic families.
    pub fn scalar(&self, y: &[f64]) -> f64 {
        self.sample(y)[0][0]
    }

    pub fn name(&self) -> String {
        match self.family {
            Family::Identity { dim } => format!("identity{dim}d"),
            Family::Trig1d { phase } => format!("trig1d({phase})"),
            Family::Trig2d { amp } => format!("trig2d({amp})"),
            Family::Aniso2d { k, s, t } => format!("aniso2d({k},{s},{t})"),
        }
    }
}

impl Coefficient for CoefficientField {
    fn dim(&self) -> usize {
        match self.family {
            Family::Identity { dim } => dim,
            Family::Trig1d { .. } => 1,
            Family::Trig2d { .. } | Family::Aniso2d { .. } => 2,
        }
    }

    fn sample(&self, y: &[f64]) -> Tensor {
        // Reduce to the fundamental cell so integer shifts give identical bits
        // whenever y itself is exactly representable after the shift.
        let w = |v: f64| v.rem_euclid(1.0);
        match self.family {
            Family::Identity { .. } => [[1.0, 0.0], [0.0, 1.0]],
            Family::Trig1d { phase } => {
                let a = 1.0 / (2.0 + (TAU * w(y[0]) + phase).cos());
                [[a, 0.0], [0.0, a]]
            }
            Family::Trig2d { amp } => {
                let (y1, y2) = (w(y[0]), w(y[1]));
                let a = 2.0 + amp * (TAU * y1).sin() * (TAU * y2).sin();
                [[a, 0.0], [0.0, a]]
            }
            Family::Aniso2d { k, s, t } => {
                let (y1, y2) = (w(y[0]), w(y[1]));
                let off = t * (TAU * (y1 + y2)).sin();
                [
                    [k * (2.0 + s * (TAU * y1).cos()), off],
                    [off, 2.0 + s * (TAU * y2).cos()],
                ]
            }
        }
    }
}

/// Builds a named family from a parameter list and validates ellipticity.
///
/// Parameter lists: `identity` takes `[]` (2D) or `[d]`; `trig1d` takes `[phase]`;
/// `trig2d` takes `[amp]`; `aniso2d` takes `[k, s, t]`.
pub fn make_family(name: &str, params: &[f64]) -> Result<CoefficientField, CoeffError> {
    let need = |family: &'static str, expected: &'static str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(CoeffError::ParamCount {
                family,
                expected,
                got: params.len(),
            })
        }
    };
    let family = match name {
        "identity" => {
            need("identity", "0 or 1", params.len() <= 1)?;
            let dim = params.first().map_or(2, |&d| d as usize);
            if dim != 1 && dim != 2 {
                return Err(CoeffError::ParamCount {
                    family: "identity",
                    expected: "dimension 1 or 2",
                    got: dim,
                });
            }
            Family::Identity { dim }
        }
        "trig1d" => {
            need("trig1d", "1", params.len() == 1)?;
            Family::Trig1d { phase: params[0] }
        }
        "trig2d" => {
            need("trig2d", "1", params.len() == 1)?;
            Family::Trig2d { amp: params[0] }
        }
        "aniso2d" => {
            need("aniso2d", "3", params.len() == 3)?;
            Family::Aniso2d {
                k: params[0],
                s: params[1],
                t: params[2],
            }
        }
        other => return Err(CoeffError::UnknownFamily(other.to_string())),
    };
    if params.iter().any(|p| !p.is_finite()) {
        return Err(CoeffError::NotElliptic {
            point: vec![],
            min_eig: f64::NAN,
        });
    }
    let field = CoefficientField { family };
    let (min_eig, point) = scan_min_eig(&field, 256);
    if !(min_eig > 0.0) {
        return Err(CoeffError::NotElliptic { point, min_eig });
    }
    Ok(field)
}

/// Measured properties of a coefficient field on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub grid: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub symmetry_defect: f64,
    pub periodicity_defect: f64,
    pub passed: bool,
}

fn sym_eigs(a: &Tensor, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let m = 0.5 * (a[0][0] + a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    let r = (0.25 * (a[0][0] - a[1][1]).powi(2) + off * off).sqrt();
    (m - r, m + r)
}

fn grid_points(dim: usize, n: usize) -> impl Iterator<Item = [f64; 2]> {
    let total = n.pow(dim as u32);
    (0..total).map(move |k| {
        let i = k % n;
        let j = k / n;
        [i as f64 / n as f64, j as f64 / n as f64]
    })
}

fn scan_min_eig(field: &dyn Coefficient, n: usize) -> (f64, Vec<f64>) {
    let dim = field.dim();
    let mut best = (f64::INFINITY, vec![]);
    for y in grid_points(dim, n) {
        let (lo, _) = sym_eigs(&field.sample(&y[..dim]), dim);
        if lo < best.0 || lo.is_nan() {
            best = (lo, y[..dim].to_vec());
            if lo.is_nan() {
                break;
            }
        }
    }
    best
}

/// Scans the field on an `grid^d` lattice and reports ellipticity, symmetry and
/// periodicity. Passes iff both defects are at most `tol` and the lower
/// ellipticity bound exceeds `tol`.
pub fn check_assumptions(field: &dyn Coefficient, grid: usize, tol: f64) -> AssumptionReport {
    let dim = field.dim();
    let grid = grid.max(8);
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    let mut symmetry_defect: f64 = 0.0;
    let mut periodicity_defect: f64 = 0.0;
    for y in grid_points(dim, grid) {
        let a = field.sample(&y[..dim]);
        let (lo, hi) = sym_eigs(&a, dim);
        lambda_min = lambda_min.min(lo);
        lambda_max = lambda_max.max(hi);
        if dim == 2 {
            symmetry_defect = symmetry_defect.max((a[0][1] - a[1][0]).abs());
        }
        for axis in 0..dim {
            let mut z = y;
            z[axis] += 1.0;
            let b = field.sample(&z[..dim]);
            for r in 0..dim {
                for c in 0..dim {
                    periodicity_defect = periodicity_defect.max((a[r][c] - b[r][c]).abs());
                }
            }
        }
    }
    let passed = symmetry_defect <= tol && periodicity_defect <= tol && lambda_min > tol;
    AssumptionReport {
        grid,
        lambda_min,
        lambda_max,
        symmetry_defect,
        periodicity_defect,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Skewed;
    impl Coefficient for Skewed {
        fn dim(&self) -> usize {
            2
        }
        fn sample(&self, y: &[f64]) -> Tensor {
            [[2.0, 0.1 * (TAU * y[0]).cos()], [0.0, 2.0]]
        }
    }

    #[test]
    fn identity_is_identity() {
        let f = make_family("identity", &[]).unwrap();
        assert_eq!(f.sample(&[0.3, 0.7]), [[1.0, 0.0], [0.0, 1.0]]);
        let r = check_assumptions(&f, 64, 1e-10);
        assert_eq!((r.lambda_min, r.lambda_max), (1.0, 1.0));
        assert_eq!(r.symmetry_defect, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn trig1d_value_at_origin() {
        let f = make_family("trig1d", &[PI / 3.0]).unwrap();
        // 1 / (2 + cos(π/3)) = 1 / 2.5
        assert!((f.scalar(&[0.0]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn trig2d_spectrum_range() {
        let f = make_family("trig2d", &[1.0]).unwrap();
        // Independent scan of 2 + sin·sin on a 256² grid.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..256 {
            for j in 0..256 {
                let v = 2.0 + (TAU * i as f64 / 256.0).sin() * (TAU * j as f64 / 256.0).sin();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let r = check_assumptions(&f, 256, 1e-10);
        assert!((r.lambda_min - lo).abs() < 1e-3);
        assert!((r.lambda_max - hi).abs() < 1e-3);
        assert!(r.passed);
    }

    #[test]
    fn skewed_field_flagged() {
        let r = check_assumptions(&Skewed, 16, 1e-10);
        assert!(r.symmetry_defect > 0.05);
        assert!(!r.passed);
    }

    #[test]
    fn rejects_bad_families() {
        assert!(matches!(
            make_family("trig2d", &[2.0]),
            Err(CoeffError::NotElliptic { .. })
        ));
        assert!(matches!(
            make_family("trig2d", &[-2.5]),
            Err(CoeffError::NotElliptic { .. })
        ));
        assert!(matches!(
            make_family("checkerboard", &[]),
            Err(CoeffError::UnknownFamily(_))
        ));
        assert!(matches!(
            make_family("trig1d", &[]),
            Err(CoeffError::ParamCount { .. })
        ));
        assert!(make_family("aniso2d", &[1.0, 0.5, 2.0]).is_err());
        assert!(make_family("aniso2d", &[1.5, 0.5, 0.3]).is_ok());
    }

    #[test]
    fn builtins_pass_at_tight_tol() {
        for (name, p) in [
            ("identity", vec![1.0]),
            ("identity", vec![]),
            ("trig1d", vec![0.4]),
            ("trig2d", vec![1.0]),
            ("trig2d", vec![-1.9]),
            ("aniso2d", vec![1.5, 0.5, 0.3]),
        ] {
            let f = make_family(name, &p).unwrap();
            assert!(check_assumptions(&f, 64, 1e-10).passed, "{name}");
        }
    }

    proptest! {
        #[test]
        fn integer_shift_is_bitwise_periodic(i in 0u32..1024, j in 0u32..1024, amp in -1.9f64..1.9) {
            let y = [i as f64 / 1024.0, j as f64 / 1024.0];
            for f in [
                make_family("trig2d", &[amp]).unwrap(),
                make_family("aniso2d", &[1.2, 0.4, 0.2]).unwrap(),
            ] {
                let a = f.sample(&y);
                let b = f.sample(&[y[0] + 1.0, y[1] + 1.0]);
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn samples_symmetric(y1 in -3.0f64..3.0, y2 in -3.0f64..3.0) {
            let f = make_family("aniso2d", &[1.2, 0.4, 0.2]).unwrap();
            let a = f.sample(&[y1, y2]);
            prop_assert_eq!(a[0][1], a[1][0]);
        }
    }
}
