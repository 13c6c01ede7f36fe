//! Seeded smooth random fields: finite sums of sin(m pi x / L) times
//! Fourier modes in (y, z), so every sample vanishes at both walls.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::ScalarField3;
use crate::grid::Grid;
use crate::pair::FieldPair;

#[derive(Clone, Debug)]
pub struct SmoothSampler {
    rng: ChaCha8Rng,
    /// Sine modes 1..=max_x_mode in x.
    pub max_x_mode: usize,
    /// Fourier indices |p|, |q| <= max_yz_mode (clipped below Nyquist).
    pub max_yz_mode: i64,
    /// Coefficients scale like (1 + m^2 + p^2 + q^2)^(-decay / 2).
    pub decay: f64,
}

impl SmoothSampler {
    pub fn new(seed: u64) -> Self {
        SmoothSampler { rng: ChaCha8Rng::seed_from_u64(seed), max_x_mode: 4, max_yz_mode: 3, decay: 2.0 }
    }

    pub fn with_modes(mut self, max_x_mode: usize, max_yz_mode: i64) -> Self {
        self.max_x_mode = max_x_mode;
        self.max_yz_mode = max_yz_mode;
        self
    }

    pub fn field(&mut self, grid: &Arc<Grid>) -> ScalarField3 {
        let spec = *grid.spec();
        let (nx, ny, nz) = (spec.nx, spec.ny, spec.nz);
        let py = self.max_yz_mode.min(ny as i64 / 2 - 1).max(0);
        let pz = self.max_yz_mode.min(nz as i64 / 2 - 1).max(0);
        let mut values = vec![0.0; spec.len()];
        let mut plane = vec![0.0; ny * nz];
        for m in 1..=self.max_x_mode.min(nx.saturating_sub(2)).max(1) {
            plane.iter_mut().for_each(|v| *v = 0.0);
            for p in -py..=py {
                for q in -pz..=pz {
                    // (p, q) and (-p, -q) give the same real modes.
                    if p < 0 || (p == 0 && q < 0) {
                        continue;
                    }
                    let w = (1.0 + (m * m) as f64 + (p * p + q * q) as f64).powf(-self.decay / 2.0);
                    let a = w * self.rng.random_range(-1.0..1.0);
                    let b = if p == 0 && q == 0 { 0.0 } else { w * self.rng.random_range(-1.0..1.0) };
                    for j in 0..ny {
                        for k in 0..nz {
                            let th = 2.0 * PI * (p as f64 * spec.y(j) / spec.period_y + q as f64 * spec.z(k) / spec.period_z);
                            plane[j * nz + k] += a * th.cos() + b * th.sin();
                        }
                    }
                }
            }
            for i in 0..nx {
                let s = (m as f64 * PI * spec.x(i) / spec.length).sin();
                for (v, pv) in values[i * ny * nz..(i + 1) * ny * nz].iter_mut().zip(&plane) {
                    *v += s * pv;
                }
            }
        }
        let mut f = ScalarField3::from_values(grid, values).expect("grid length");
        f.clear_walls();
        f
    }

    pub fn pair(&mut self, grid: &Arc<Grid>) -> FieldPair {
        let f = self.field(grid);
        let g = self.field(grid);
        FieldPair { f, g }
    }

    /// Uniform sample in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}
