//! Sharp spectral projections S_theta: sine series in x (zero at both walls)
//! times Fourier series in y and z.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::field::ScalarField3;
use crate::grid::GridSpec;
use crate::pair::FieldPair;

/// Cutoff for the projection. A mode with sine index m >= 1 in x and signed
/// Fourier indices (p, q) in (y, z) is kept when sqrt(m^2 + p^2 + q^2) <= theta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub theta: f64,
    /// Number of sine modes retained in x at most; `None` uses all Nx - 2.
    pub x_mode_basis: Option<usize>,
}

impl SmoothingParams {
    pub fn new(theta: f64) -> Self {
        SmoothingParams { theta, x_mode_basis: None }
    }

    /// Largest combined index present on the grid.
    pub fn max_mode_magnitude(spec: &GridSpec) -> f64 {
        let m = (spec.nx - 2) as f64;
        let p = (spec.ny / 2) as f64;
        let q = (spec.nz / 2) as f64;
        (m * m + p * p + q * q).sqrt()
    }

    /// True when the cutoff keeps every representable mode.
    pub fn is_identity_on(&self, spec: &GridSpec) -> bool {
        let basis_full = self.x_mode_basis.is_none_or(|b| b >= spec.nx - 2);
        basis_full && self.theta >= Self::max_mode_magnitude(spec)
    }
}

fn sine_matrix(n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n * n];
    for m in 0..n {
        for i in 0..n {
            s[m * n + i] = (PI * ((m + 1) * (i + 1)) as f64 / (n + 1) as f64).sin();
        }
    }
    s
}

pub fn smooth_field(field: &ScalarField3, params: &SmoothingParams) -> ScalarField3 {
    let grid = field.grid().clone();
    let spec = *grid.spec();
    let (nx, ny, nz, s) = (spec.nx, spec.ny, spec.nz, spec.slice_len());
    let n = nx - 2;
    let basis = params.x_mode_basis.unwrap_or(n).min(n);
    let sm = sine_matrix(n);
    let values = field.values();

    // Forward sine transform over the interior rows.
    let mut coeffs = vec![0.0; n * s];
    coeffs.par_chunks_mut(s).enumerate().for_each(|(m, out)| {
        for i in 0..n {
            let w = sm[m * n + i];
            let row = &values[(i + 1) * s..(i + 2) * s];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    });

    let theta2 = params.theta * params.theta;
    coeffs.par_chunks_mut(s).enumerate().for_each(|(m, slice)| {
        let mx = (m + 1) as f64;
        if m >= basis || mx * mx > theta2 {
            slice.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let mut spectrum = vec![Complex64::new(0.0, 0.0); s];
        grid.forward_slice(slice, &mut spectrum);
        for k in 0..nz {
            let q = GridSpec::signed_mode(k, nz) as f64;
            for j in 0..ny {
                let p = GridSpec::signed_mode(j, ny) as f64;
                if mx * mx + p * p + q * q > theta2 {
                    spectrum[grid.mode_slot(j, k)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        grid.inverse_slice(&mut spectrum, slice);
    });

    // Inverse sine transform back onto the interior rows.
    let norm = 2.0 / (n + 1) as f64;
    let mut out = vec![0.0; nx * s];
    out[s..(nx - 1) * s].par_chunks_mut(s).enumerate().for_each(|(i, row)| {
        for m in 0..basis {
            let w = norm * sm[m * n + i];
            if w == 0.0 {
                continue;
            }
            for (o, c) in row.iter_mut().zip(&coeffs[m * s..(m + 1) * s]) {
                *o += w * c;
            }
        }
    });
    ScalarField3::from_values(&grid, out).expect("same grid")
}

/// Applies S_theta to both members of a pair. Wall rows come out exactly zero.
pub fn smooth(pair: &FieldPair, params: &SmoothingParams) -> FieldPair {
    FieldPair { f: smooth_field(&pair.f, params), g: smooth_field(&pair.g, params) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::norms::sobolev_norm;

    #[test]
    fn keeps_low_mode() {
        let g = Grid::cube(16).unwrap();
        let f = ScalarField3::from_fn(&g, |x, y, _| (PI * x).sin() * (2.0 * PI * y).cos());
        let p = FieldPair { f: f.clone(), g: ScalarField3::zeros(&g) };
        let out = smooth(&p, &SmoothingParams::new(2.0));
        assert!(out.f.sub(&f).unwrap().max_abs() < 1e-13);
        assert_eq!(out.g.max_abs(), 0.0);
    }

    #[test]
    fn removes_high_mode_and_walls() {
        let g = Grid::cube(16).unwrap();
        let f = ScalarField3::from_fn(&g, |x, _, z| (PI * x).sin() * (2.0 * PI * 5.0 * z).cos() + 1.0);
        let out = smooth_field(&f, &SmoothingParams::new(3.0));
        assert_eq!(out.boundary_max_abs(), 0.0);
        // The constant becomes its truncated sine series; the z mode is gone.
        let spec = *g.spec();
        let line: Vec<f64> = (0..spec.nz).map(|k| out.at(5, 3, k)).collect();
        let spread = line.iter().cloned().fold(f64::MIN, f64::max) - line.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);
    }

    #[test]
    fn large_theta_is_identity_on_interior() {
        let g = Grid::cube(8).unwrap();
        let mut f = ScalarField3::from_fn(&g, |x, y, z| (x * 7.0 + y * 3.0).sin() * (z * 6.0).cos());
        f.clear_walls();
        let p = SmoothingParams::new(1e9);
        assert!(p.is_identity_on(g.spec()));
        assert!(smooth_field(&f, &p).sub(&f).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn contracts_h0_and_h1() {
        let g = Grid::cube(12).unwrap();
        let mut seed = 12345u64;
        let mut f = ScalarField3::from_fn(&g, |_, _, _| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        f.clear_walls();
        let p = FieldPair { f: f.clone(), g: f.scale(-0.5) };
        let s = smooth(&p, &SmoothingParams::new(8.0));
        for k in 0..=1 {
            assert!(sobolev_norm(&s, k).unwrap() <= sobolev_norm(&p, k).unwrap());
        }
        let twice = smooth(&s, &SmoothingParams::new(8.0));
        assert!(twice.sub(&s).unwrap().max_abs() < 1e-13);
    }
}
