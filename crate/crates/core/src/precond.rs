//! Exact inverse of the constant-coefficient operator at a linear base
//! state: Fourier transform in (y, z), then one banded Hermitian solve in x
//! per mode.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{cross3, ScalarField3};
use crate::grid::Grid;
use crate::linearized::linear_flux;
use crate::pair::FieldPair;

/// Half bandwidth of the interleaved (F_i, G_i) ordering: the wide x stencil
/// couples rows i and i +- 2.
const BAND: usize = 5;

/// Banded Cholesky factor L (lower), stored row-wise as L[i][i - d].
#[derive(Clone, Debug)]
struct BandedCholesky {
    n: usize,
    l: Vec<Complex64>,
}

impl BandedCholesky {
    fn factor(dense: &[Complex64], n: usize) -> Option<Self> {
        let mut l = vec![Complex64::new(0.0, 0.0); n * (BAND + 1)];
        let at = |i: usize, j: usize| i * (BAND + 1) + (i - j);
        for i in 0..n {
            let j0 = i.saturating_sub(BAND);
            for j in j0..=i {
                let mut s = dense[i * n + j];
                for k in j0.max(j.saturating_sub(BAND))..j {
                    s -= l[at(i, k)] * l[at(j, k)].conj();
                }
                if i == j {
                    if !(s.re > 0.0) {
                        return None;
                    }
                    l[at(i, i)] = Complex64::new(s.re.sqrt(), 0.0);
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Some(BandedCholesky { n, l })
    }

    fn solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        let at = |i: usize, j: usize| i * (BAND + 1) + (i - j);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(BAND)..i {
                s -= self.l[at(i, k)] * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + BAND + 1) {
                s -= self.l[at(k, i)].conj() * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
    }
}

/// The 6x6 flux matrix M with (Phi_F, Phi_G) = M (A, B) at constant a, b.
fn flux_matrix(a: [f64; 3], b: [f64; 3], eps: f64) -> [[f64; 6]; 6] {
    let v = cross3(a, b);
    let mut m = [[0.0; 6]; 6];
    for col in 0..6 {
        let mut ga = [0.0; 3];
        let mut gb = [0.0; 3];
        if col < 3 {
            ga[col] = 1.0;
        } else {
            gb[col - 3] = 1.0;
        }
        let (pf, pg) = linear_flux(a, b, v, eps, ga, gb);
        for r in 0..3 {
            m[r][col] = pf[r];
            m[r + 3][col] = pg[r];
        }
    }
    m
}

pub struct BasePreconditioner {
    grid: Arc<Grid>,
    epsilon: f64,
    factors: Vec<BandedCholesky>,
}

impl BasePreconditioner {
    /// Factorises the base operator for constant gradients (a, b) and eps.
    pub fn new(grid: &Arc<Grid>, grad_f: [f64; 3], grad_g: [f64; 3], epsilon: f64) -> Result<Self> {
        let spec = *grid.spec();
        let (nx, ny, nz) = (spec.nx, spec.ny, spec.nz);
        let n = nx - 2;
        let h = spec.hx();
        // Full x-derivative matrix, then its interior blocks.
        let mut d = vec![0.0; nx * nx];
        for i in 1..nx - 1 {
            d[i * nx + i - 1] = -0.5 / h;
            d[i * nx + i + 1] = 0.5 / h;
        }
        d[0] = -1.0 / h;
        d[1] = 1.0 / h;
        d[(nx - 1) * nx + nx - 2] = -1.0 / h;
        d[(nx - 1) * nx + nx - 1] = 1.0 / h;
        let mut dd = vec![0.0; n * n];
        let mut d1 = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                d1[r * n + c] = d[(r + 1) * nx + c + 1];
                dd[r * n + c] = (0..nx).map(|k| d[(r + 1) * nx + k] * d[k * nx + c + 1]).sum();
            }
        }
        let m = flux_matrix(grad_f, grad_g, epsilon);
        let modes: Vec<(usize, usize)> = (0..nz).flat_map(|k| (0..ny).map(move |j| (j, k))).collect();
        let factors: Vec<Option<BandedCholesky>> = modes
            .par_iter()
            .map(|&(j, k)| {
                let i = Complex64::new(0.0, 1.0);
                let kappa = [Complex64::new(0.0, 0.0), i * grid.ky()[j], i * grid.kz()[k]];
                let size = 2 * n;
                let mut dense = vec![Complex64::new(0.0, 0.0); size * size];
                for s in 0..2 {
                    for t in 0..2 {
                        let mm = |c: usize, e: usize| m[3 * s + c][3 * t + e];
                        // x-x block, mixed blocks, and the y/z algebraic part.
                        let mixed: Complex64 = (1..3).map(|e| kappa[e] * mm(0, e) + kappa[e] * mm(e, 0)).sum();
                        let mut alg = Complex64::new(0.0, 0.0);
                        for c in 1..3 {
                            for e in 1..3 {
                                alg += kappa[c] * kappa[e] * mm(c, e);
                            }
                        }
                        for r in 0..n {
                            for c in 0..n {
                                let mut val = -(mm(0, 0) * dd[r * n + c]) - mixed * d1[r * n + c];
                                if r == c {
                                    val -= alg;
                                }
                                dense[(2 * r + s) * size + 2 * c + t] = val;
                            }
                        }
                    }
                }
                BandedCholesky::factor(&dense, size)
            })
            .collect();
        let factors = factors
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::LinearSolve("base operator is not positive definite".into()))?;
        Ok(BasePreconditioner { grid: grid.clone(), epsilon, factors })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Solves L_base u = r on interior rows; wall rows of `r` are ignored and
    /// those of the result are zero.
    pub fn apply(&self, r: &FieldPair) -> FieldPair {
        let grid = &self.grid;
        let spec = *grid.spec();
        let (nx, s) = (spec.nx, spec.slice_len());
        let n = nx - 2;
        let rf = grid.forward(r.f.values());
        let rg = grid.forward(r.g.values());
        let solved: Vec<Vec<Complex64>> = (0..s)
            .into_par_iter()
            .map(|slot| {
                let mut b = vec![Complex64::new(0.0, 0.0); 2 * n];
                for row in 0..n {
                    b[2 * row] = rf[(row + 1) * s + slot];
                    b[2 * row + 1] = rg[(row + 1) * s + slot];
                }
                self.factors[slot].solve(&mut b);
                b
            })
            .collect();
        let mut uf = vec![Complex64::new(0.0, 0.0); nx * s];
        let mut ug = vec![Complex64::new(0.0, 0.0); nx * s];
        for (slot, b) in solved.iter().enumerate() {
            for row in 0..n {
                uf[(row + 1) * s + slot] = b[2 * row];
                ug[(row + 1) * s + slot] = b[2 * row + 1];
            }
        }
        let f = ScalarField3::from_values(grid, grid.inverse(uf)).expect("grid");
        let g = ScalarField3::from_values(grid, grid.inverse(ug)).expect("grid");
        FieldPair { f, g }.with_clear_walls()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearized::LinearizedOperator;
    use crate::problem::StreamPair;
    use crate::bernoulli::BernoulliSpec;
    use std::f64::consts::PI;

    #[test]
    fn inverts_base_operator() {
        let g = Grid::new(crate::grid::GridSpec::new(1.0, 1.0, 2.0, 10, 8, 6).unwrap()).unwrap();
        for (a, b, eps) in [([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], 0.0), ([0.1, 0.9, 0.2], [0.0, -0.1, 0.8], 0.3)] {
            let pair = StreamPair::linear(&g, a, b);
            let op = LinearizedOperator::new(&pair, &BernoulliSpec::zero(), eps).unwrap();
            let pc = BasePreconditioner::new(&g, a, b, eps).unwrap();
            let u = FieldPair {
                f: ScalarField3::from_fn(&g, |x, y, z| (PI * x).sin() * (1.0 + (2.0 * PI * y).cos() * (PI * z).sin())),
                g: ScalarField3::from_fn(&g, |x, y, z| x * (1.0 - x) * (2.0 * PI * (y - z)).sin()),
            }
            .with_clear_walls();
            let r = op.apply(&u).unwrap();
            let back = pc.apply(&r);
            assert!(back.sub(&u).unwrap().max_abs() < 1e-10, "{}", back.sub(&u).unwrap().max_abs());
        }
    }
}
