//! Discrete Sobolev norms ||(F, G)||_k over one period cell.

use crate::error::{Error, Result};
use crate::field::ScalarField3;
use crate::grid::dx;
use crate::pair::FieldPair;

pub const MAX_SOBOLEV_ORDER: usize = 6;

/// Sum over multi-indices |alpha| <= k of ||d^alpha u||^2. x-derivatives are
/// repeated summation-by-parts stencils; y and z derivatives are spectral and
/// their L^2 norms are taken in Fourier space (Parseval).
pub fn sobolev_seminorms_sq(field: &ScalarField3, k: usize) -> Result<Vec<f64>> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    field.ensure_finite("sobolev input")?;
    let grid = field.grid();
    let spec = *grid.spec();
    let (ny, nz, s) = (spec.ny, spec.nz, spec.slice_len());
    let parseval = spec.hy() * spec.hz() / s as f64;
    let mut by_order = vec![0.0; k + 1];
    let mut current = field.values().to_vec();
    for a in 0..=k {
        if a > 0 {
            current = dx(&spec, &current);
        }
        let spectrum = grid.forward(&current);
        for b in 0..=(k - a) {
            for c in 0..=(k - a - b) {
                let mut total = 0.0;
                for (i, w) in grid.weights_x().iter().enumerate() {
                    let slice = &spectrum[i * s..(i + 1) * s];
                    let mut acc = 0.0;
                    for kk in 0..nz {
                        let qz = grid.kz()[kk].powi(c as i32);
                        for j in 0..ny {
                            let q = grid.ky()[j].powi(b as i32) * qz;
                            acc += q * q * slice[grid.mode_slot(j, kk)].norm_sqr();
                        }
                    }
                    total += w * acc;
                }
                by_order[a + b + c] += total * parseval;
            }
        }
    }
    Ok(by_order)
}

pub fn sobolev_norm_field(field: &ScalarField3, k: usize) -> Result<f64> {
    Ok(sobolev_seminorms_sq(field, k)?.iter().sum::<f64>().sqrt())
}

/// ||(F, G)||_k^2 = ||F||^2_{H^k} + ||G||^2_{H^k}.
pub fn sobolev_norm(pair: &FieldPair, k: usize) -> Result<f64> {
    pair.same_grid(pair)?;
    let f: f64 = sobolev_seminorms_sq(&pair.f, k)?.iter().sum();
    let g: f64 = sobolev_seminorms_sq(&pair.g, k)?.iter().sum();
    Ok((f + g).sqrt())
}

/// Grid max-norm of all stencil derivatives of order <= r; the discrete
/// stand-in for a C^r norm.
pub fn max_norm_derivatives(field: &ScalarField3, r: usize) -> Result<f64> {
    if r > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    let grid = field.grid();
    let spec = *grid.spec();
    let mut best = 0.0f64;
    let mut current = field.values().to_vec();
    for a in 0..=r {
        if a > 0 {
            current = dx(&spec, &current);
        }
        let mut orders = Vec::new();
        for b in 0..=(r - a) {
            for c in 0..=(r - a - b) {
                orders.push((b as u32, c as u32));
            }
        }
        for d in grid.yz_derivatives(&current, &orders) {
            best = d.iter().fold(best, |m, v| m.max(v.abs()));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn constant_pair_order_zero() {
        let g = Grid::new(GridSpec::new(2.0, 1.0, 0.5, 8, 4, 4).unwrap()).unwrap();
        let pair = FieldPair { f: ScalarField3::constant(&g, 1.0), g: ScalarField3::zeros(&g) };
        assert!((sobolev_norm(&pair, 0).unwrap() - 1.0f64.sqrt()).abs() < 1e-14);
        assert!((sobolev_norm(&pair, 3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sobolev_norm(&FieldPair::zeros(&g), 4).unwrap(), 0.0);
        assert!(matches!(sobolev_norm(&pair, 7), Err(Error::UnsupportedOrder(7))));
    }

    #[test]
    fn h1_of_y_mode() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 9, 16, 8).unwrap()).unwrap();
        let f = ScalarField3::from_fn(&g, |_, y, _| (2.0 * PI * y).sin());
        let pair = FieldPair { f, g: ScalarField3::zeros(&g) };
        let expect = ((1.0 + 4.0 * PI * PI) * 0.5).sqrt();
        assert!((sobolev_norm(&pair, 1).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_order() {
        let g = Grid::cube(8).unwrap();
        let f = ScalarField3::from_fn(&g, |x, y, z| (x * 3.0).sin() + (2.0 * PI * (y - z)).cos());
        let pair = FieldPair { f: f.clone(), g: f.scale(0.3) };
        let mut last = 0.0;
        for k in 0..=6 {
            let n = sobolev_norm(&pair, k).unwrap();
            assert!(n >= last);
            last = n;
        }
    }
}
