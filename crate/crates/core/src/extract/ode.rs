//! Adaptive Dormand-Prince 5(4) integration of small autonomous-in-form
//! systems y' = f(x, y), forwards or backwards in x.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 100_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates from (x0, y0) to x1 and returns y(x1) and the number of
/// accepted steps. Errors from `f` abort the integration.
pub fn dopri5<const N: usize, F>(mut f: F, x0: f64, y0: [f64; N], x1: f64, opts: &OdeOptions) -> Result<([f64; N], usize)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok((y0, 0));
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = dir * span.abs().min(0.1 * span.abs().max(1e-3));
    let mut k = [[0.0; N]; 7];
    k[0] = f(x, &y)?;
    let mut accepted = 0;
    for _ in 0..opts.max_steps {
        if (x1 - x) * dir <= 0.0 {
            return Ok((y, accepted));
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                *yi += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(x + C[s] * h, &ys)?;
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let d5: f64 = (0..7).map(|s| B5[s] * k[s][i]).sum();
            let d4: f64 = (0..7).map(|s| B4[s] * k[s][i]).sum();
            y5[i] += h * d5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (d5 - d4) / sc).abs());
        }
        if err <= 1.0 {
            x = if (x + h - x1) * dir >= 0.0 { x1 } else { x + h };
            y = y5;
            k[0] = k[6];
            accepted += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * (1.0 + x.abs()) {
            return Err(Error::Invariant { name: "ODE step size", detail: format!("step underflow at x = {x}") });
        }
    }
    Err(Error::Invariant { name: "ODE step count", detail: format!("more than {} steps", opts.max_steps) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_backwards_and_forwards() {
        let f = |_: f64, y: &[f64; 1]| Ok([-2.0 * y[0]]);
        let (y, _) = dopri5(f, 0.0, [1.0], 1.5, &OdeOptions::default()).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
        let (back, _) = dopri5(f, 1.5, y, 0.0, &OdeOptions::default()).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rhs_errors_propagate() {
        let f = |x: f64, _: &[f64; 1]| if x > 0.5 { Err(Error::SignChange("test".into())) } else { Ok([1.0]) };
        assert!(matches!(dopri5(f, 0.0, [0.0], 1.0, &OdeOptions::default()), Err(Error::SignChange(_))));
    }
}
