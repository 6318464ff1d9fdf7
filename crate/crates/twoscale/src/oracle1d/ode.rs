//! Adaptive Dormand–Prince 5(4) integration for small systems.

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, e.g. a fraction of the coefficient period.
    pub max_step: f64,
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` in place. Returns the number of
/// accepted steps, or `None` if the step size underflows.
pub fn integrate<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y: &mut [f64; N],
    tol: Tolerance,
) -> Option<usize> {
    let span = x1 - x0;
    if span <= 0.0 {
        return Some(0);
    }
    let mut x = x0;
    let mut h = tol.max_step.min(span);
    let mut steps = 0;
    let mut k = [[0.0; N]; 7];
    k[0] = f(x, y);
    while x < x1 {
        if x + h > x1 {
            h = x1 - x;
        }
        if h <= 1e-15 * span.max(x.abs()) {
            return None;
        }
        for s in 1..7 {
            let mut ys = *y;
            for (c, ks) in A[s].iter().zip(&k).take(s) {
                for i in 0..N {
                    ys[i] += h * c * ks[i];
                }
            }
            k[s] = f(x + C[s] * h, &ys);
        }
        let mut y5 = *y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += h * d5;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (d5 - d4) / sc).abs());
        }
        if err <= 1.0 {
            x += h;
            *y = y5;
            k[0] = k[6];
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(tol.max_step);
    }
    Some(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let mut y = [0.0, 1.0];
        let tol = Tolerance {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 0.1,
        };
        integrate(&|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, 10.0, &mut y, tol).unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-10);
        assert!((y[1] - 10f64.cos()).abs() < 1e-10);
    }
}
