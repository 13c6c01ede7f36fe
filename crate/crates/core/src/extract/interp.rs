//! Tricubic (4-point Lagrange) interpolation of sampled vector fields,
//! periodic in y and z and with a clamped stencil in x.

use crate::field::VectorField3;
use crate::grid::GridSpec;

#[derive(Clone, Debug)]
pub struct VelocityInterpolant {
    spec: GridSpec,
    /// Interleaved (v1, v2, v3) per node.
    data: Vec<[f64; 3]>,
    pub tricubic: bool,
}

fn lagrange4(t: f64) -> [f64; 4] {
    // Nodes at -1, 0, 1, 2.
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn linear2(t: f64) -> [f64; 4] {
    [0.0, 1.0 - t, t, 0.0]
}

impl VelocityInterpolant {
    pub fn new(v: &VectorField3) -> Self {
        Self::with_order(v, true)
    }

    /// `tricubic = false` selects the trilinear fallback.
    pub fn with_order(v: &VectorField3, tricubic: bool) -> Self {
        let spec = *v.spec();
        let data = (0..spec.len()).map(|n| v.at(n)).collect();
        VelocityInterpolant { spec, data, tricubic }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Stencil start and weights along x; the stencil stays inside the grid.
    fn x_stencil(&self, x: f64) -> (usize, [f64; 4]) {
        let s = &self.spec;
        let u = (x / s.hx()).clamp(0.0, (s.nx - 1) as f64);
        let base = (u.floor() as usize).min(s.nx - 2);
        if !self.tricubic {
            let t = u - base as f64;
            return (base, [1.0 - t, t, 0.0, 0.0]);
        }
        let start = base.saturating_sub(1).min(s.nx - 4);
        let t = u - (start + 1) as f64;
        (start, lagrange4(t))
    }

    fn periodic_stencil(&self, c: f64, h: f64, n: usize) -> ([usize; 4], [f64; 4]) {
        let u = c / h;
        let base = u.floor();
        let t = u - base;
        let b = base as i64;
        let idx = [-1i64, 0, 1, 2].map(|o| (b + o).rem_euclid(n as i64) as usize);
        (idx, if self.tricubic { lagrange4(t) } else { linear2(t) })
    }

    /// v at an arbitrary point; x is clamped to [0, L].
    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        let s = &self.spec;
        let (x0, wx) = self.x_stencil(p[0]);
        let (iy, wy) = self.periodic_stencil(p[1], s.hy(), s.ny);
        let (iz, wz) = self.periodic_stencil(p[2], s.hz(), s.nz);
        let mut out = [0.0; 3];
        for (a, &w1) in wx.iter().enumerate() {
            if w1 == 0.0 {
                continue;
            }
            let i = x0 + a;
            for (b, &w2) in wy.iter().enumerate() {
                if w2 == 0.0 {
                    continue;
                }
                for (c, &w3) in wz.iter().enumerate() {
                    let w = w1 * w2 * w3;
                    let d = &self.data[(i * s.ny + iy[b]) * s.nz + iz[c]];
                    out[0] += w * d[0];
                    out[1] += w * d[1];
                    out[2] += w * d[2];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_cubics_and_nodes() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 9, 8, 8).unwrap()).unwrap();
        let v = VectorField3::from_fn(&g, |x, y, z| [x * x * x - 2.0 * x, (2.0 * PI * y).sin(), (2.0 * PI * z).cos() * x]);
        let it = VelocityInterpolant::new(&v);
        for x in [0.0, 0.03, 0.5, 0.97, 1.0] {
            let e = it.eval([x, 0.25, 0.0]);
            assert!((e[0] - (x * x * x - 2.0 * x)).abs() < 1e-12);
        }
        let e = it.eval([0.5, 0.25 + 1.0, -1.0]);
        assert!((e[1] - 1.0).abs() < 1e-12 && (e[2] - 0.5).abs() < 1e-12);
        let lin = VelocityInterpolant::with_order(&v, false);
        for x in [0.0, 0.06, 0.5, 1.0] {
            let e = lin.eval([x, 0.0, 0.0]);
            let exact = x * x * x - 2.0 * x;
            assert!((e[0] - exact).abs() < 0.02);
        }
    }
}
