//! Channel grid: closed x range with both walls, periodic y and z without a
//! duplicated seam sample, plus the FFT machinery for the periodic directions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum XScheme {
    /// Centered differences with first-order one-sided wall rows and
    /// trapezoid weights: a summation-by-parts pair.
    #[default]
    CenteredSecondOrder,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub length: f64,
    pub period_y: f64,
    pub period_z: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub x_scheme: XScheme,
}

impl GridSpec {
    pub fn new(length: f64, period_y: f64, period_z: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let spec = GridSpec { length, period_y, period_z, nx, ny, nz, x_scheme: XScheme::CenteredSecondOrder };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit cell with `n` samples per direction.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, n, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("L", self.length), ("P1", self.period_y), ("P2", self.period_z)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.nx < 4 {
            return Err(Error::InvalidGrid(format!("Nx must be at least 4, got {}", self.nx)));
        }
        for (name, n) in [("Ny", self.ny), ("Nz", self.nz)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} must be even and at least 4, got {n}")));
            }
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.period_y / self.ny as f64
    }

    pub fn hz(&self) -> f64 {
        self.period_z / self.nz as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn volume(&self) -> f64 {
        self.length * self.period_y * self.period_z
    }

    /// Flat index, x slowest and z fastest. y and z wrap.
    #[inline]
    pub fn index(&self, i: usize, j: isize, k: isize) -> usize {
        let j = j.rem_euclid(self.ny as isize) as usize;
        let k = k.rem_euclid(self.nz as isize) as usize;
        (i * self.ny + j) * self.nz + k
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.hz()
    }

    /// Signed Fourier index of storage slot `j` out of `n`.
    #[inline]
    pub fn signed_mode(j: usize, n: usize) -> i64 {
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{} on [0,{}]x[0,{})x[0,{})",
            self.nx, self.ny, self.nz, self.length, self.period_y, self.period_z
        )
    }
}

/// A grid together with its quadrature weights and FFT plans.
pub struct Grid {
    spec: GridSpec,
    weights_x: Vec<f64>,
    ky: Vec<f64>,
    kz: Vec<f64>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    fft_z: Arc<dyn Fft<f64>>,
    ifft_z: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        spec.validate()?;
        let h = spec.hx();
        let mut weights_x = vec![h; spec.nx];
        weights_x[0] = 0.5 * h;
        weights_x[spec.nx - 1] = 0.5 * h;
        let wavenumbers = |n: usize, period: f64| -> Vec<f64> {
            (0..n)
                .map(|j| if j == n / 2 { 0.0 } else { 2.0 * PI * GridSpec::signed_mode(j, n) as f64 / period })
                .collect()
        };
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            spec,
            weights_x,
            ky: wavenumbers(spec.ny, spec.period_y),
            kz: wavenumbers(spec.nz, spec.period_z),
            fft_y: planner.plan_fft_forward(spec.ny),
            ifft_y: planner.plan_fft_inverse(spec.ny),
            fft_z: planner.plan_fft_forward(spec.nz),
            ifft_z: planner.plan_fft_inverse(spec.nz),
        }))
    }

    pub fn cube(n: usize) -> Result<Arc<Self>> {
        Self::new(GridSpec::cube(n)?)
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Trapezoid weights in x (h/2 at the walls).
    pub fn weights_x(&self) -> &[f64] {
        &self.weights_x
    }

    /// Derivative wavenumbers in y; the Nyquist entry is zero so that the
    /// discrete derivative is exactly antisymmetric.
    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn kz(&self) -> &[f64] {
        &self.kz
    }

    /// Position of mode (j, k) inside a transformed slice.
    #[inline]
    pub fn mode_slot(&self, j: usize, k: usize) -> usize {
        k * self.spec.ny + j
    }

    /// 2-D forward transform of one x-slice. Output is stored z-major
    /// (`mode_slot`), unnormalised.
    pub fn forward_slice(&self, input: &[f64], out: &mut [Complex64]) {
        let (ny, nz) = (self.spec.ny, self.spec.nz);
        let mut rows: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in rows.chunks_mut(nz) {
            self.fft_z.process(row);
        }
        for j in 0..ny {
            for k in 0..nz {
                out[k * ny + j] = rows[j * nz + k];
            }
        }
        for col in out.chunks_mut(ny) {
            self.fft_y.process(col);
        }
    }

    /// Inverse of `forward_slice`, including the 1/(Ny Nz) factor. The
    /// spectral buffer is consumed as scratch.
    pub fn inverse_slice(&self, spectrum: &mut [Complex64], out: &mut [f64]) {
        let (ny, nz) = (self.spec.ny, self.spec.nz);
        for col in spectrum.chunks_mut(ny) {
            self.ifft_y.process(col);
        }
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * nz];
        for j in 0..ny {
            for k in 0..nz {
                rows[j * nz + k] = spectrum[k * ny + j];
            }
        }
        let scale = 1.0 / (ny * nz) as f64;
        for (row, dst) in rows.chunks_mut(nz).zip(out.chunks_mut(nz)) {
            self.ifft_z.process(row);
            for (d, c) in dst.iter_mut().zip(row.iter()) {
                *d = c.re * scale;
            }
        }
    }

    /// Forward transform of every x-slice of a full field.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let s = self.spec.slice_len();
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        out.par_chunks_mut(s)
            .zip(values.par_chunks(s))
            .for_each(|(o, v)| self.forward_slice(v, o));
        out
    }

    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        let s = self.spec.slice_len();
        let mut out = vec![0.0; spectrum.len()];
        out.par_chunks_mut(s)
            .zip(spectrum.par_chunks_mut(s))
            .for_each(|(o, c)| self.inverse_slice(c, o));
        out
    }

    /// Multiplier of the spectral derivative D_y^a D_z^b at mode (j, k).
    #[inline]
    pub fn derivative_symbol(&self, j: usize, k: usize, a: u32, b: u32) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        (i * self.ky[j]).powu(a) * (i * self.kz[k]).powu(b)
    }

    /// Applies D_y^a D_z^b to each requested (a, b) pair, sharing one forward
    /// transform.
    pub fn yz_derivatives(&self, values: &[f64], orders: &[(u32, u32)]) -> Vec<Vec<f64>> {
        let (ny, nz) = (self.spec.ny, self.spec.nz);
        let s = ny * nz;
        let mut outs: Vec<Vec<f64>> = orders.iter().map(|_| vec![0.0; values.len()]).collect();
        let symbols: Vec<Vec<Complex64>> = orders
            .iter()
            .map(|&(a, b)| {
                let mut sym = vec![Complex64::new(0.0, 0.0); s];
                for k in 0..nz {
                    for j in 0..ny {
                        sym[self.mode_slot(j, k)] = self.derivative_symbol(j, k, a, b);
                    }
                }
                sym
            })
            .collect();
        let slices: Vec<Vec<Vec<f64>>> = values
            .par_chunks(s)
            .map(|slice| {
                let mut spec = vec![Complex64::new(0.0, 0.0); s];
                self.forward_slice(slice, &mut spec);
                symbols
                    .iter()
                    .map(|sym| {
                        let mut work: Vec<Complex64> = spec.iter().zip(sym).map(|(c, m)| c * m).collect();
                        let mut out = vec![0.0; s];
                        self.inverse_slice(&mut work, &mut out);
                        out
                    })
                    .collect()
            })
            .collect();
        for (i, per_slice) in slices.into_iter().enumerate() {
            for (o, data) in outs.iter_mut().zip(per_slice) {
                o[i * s..(i + 1) * s].copy_from_slice(&data);
            }
        }
        outs
    }

    /// D_y p + D_z q with two forward transforms and one inverse.
    pub fn yz_divergence(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let (ny, nz) = (self.spec.ny, self.spec.nz);
        let s = ny * nz;
        let mut out = vec![0.0; p.len()];
        out.par_chunks_mut(s)
            .zip(p.par_chunks(s).zip(q.par_chunks(s)))
            .for_each(|(o, (ps, qs))| {
                let mut sp = vec![Complex64::new(0.0, 0.0); s];
                let mut sq = vec![Complex64::new(0.0, 0.0); s];
                self.forward_slice(ps, &mut sp);
                self.forward_slice(qs, &mut sq);
                for k in 0..nz {
                    for j in 0..ny {
                        let m = self.mode_slot(j, k);
                        sp[m] = sp[m] * self.derivative_symbol(j, k, 1, 0) + sq[m] * self.derivative_symbol(j, k, 0, 1);
                    }
                }
                self.inverse_slice(&mut sp, o);
            });
        out
    }
}

/// Summation-by-parts first derivative in x: centered in the interior,
/// one-sided first order in the two wall rows.
pub fn dx(spec: &GridSpec, values: &[f64]) -> Vec<f64> {
    let s = spec.slice_len();
    let nx = spec.nx;
    let h = spec.hx();
    let mut out = vec![0.0; values.len()];
    let plane = |i: usize| &values[i * s..(i + 1) * s];
    out.par_chunks_mut(s).enumerate().for_each(|(i, o)| {
        let (lo, hi, scale) = if i == 0 {
            (0, 1, 1.0 / h)
        } else if i == nx - 1 {
            (nx - 2, nx - 1, 1.0 / h)
        } else {
            (i - 1, i + 1, 0.5 / h)
        };
        let (a, b) = (plane(lo), plane(hi));
        for ((o, &va), &vb) in o.iter_mut().zip(a).zip(b) {
            *o = (vb - va) * scale;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(1.0, 1.0, 1.0, 3, 4, 4).is_err());
        assert!(GridSpec::new(1.0, 1.0, 1.0, 4, 5, 4).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1.0, 8, 4, 4).is_err());
        let g = GridSpec::new(2.0, 1.0, 0.5, 9, 8, 4).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.125);
        assert_eq!(g.hz(), 0.125);
        assert_eq!(g.index(1, -1, 4), g.index(1, 7, 0));
    }

    #[test]
    fn transform_roundtrip() {
        let grid = Grid::new(GridSpec::new(1.0, 1.0, 2.0, 4, 6, 8).unwrap()).unwrap();
        let values: Vec<f64> = (0..grid.spec().len()).map(|n| ((n * 7919) % 113) as f64 / 113.0).collect();
        let back = grid.inverse(grid.forward(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_single_mode() {
        let spec = GridSpec::new(1.0, 1.0, 0.5, 4, 8, 16).unwrap();
        let grid = Grid::new(spec).unwrap();
        let mut v = vec![0.0; spec.len()];
        for i in 0..4 {
            for j in 0..8 {
                for k in 0..16 {
                    v[spec.index(i, j as isize, k as isize)] = (2.0 * PI * spec.y(j)).sin() * (4.0 * PI * spec.z(k)).cos();
                }
            }
        }
        let d = grid.yz_derivatives(&v, &[(1, 0), (0, 1)]);
        for j in 0..8 {
            for k in 0..16 {
                let n = spec.index(2, j as isize, k as isize);
                let (y, z) = (spec.y(j), spec.z(k));
                assert!((d[0][n] - 2.0 * PI * (2.0 * PI * y).cos() * (4.0 * PI * z).cos()).abs() < 1e-12);
                assert!((d[1][n] + 4.0 * PI * (2.0 * PI * y).sin() * (4.0 * PI * z).sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sbp_property() {
        // W D + (W D)^T = diag(-1, 0, ..., 0, 1) for the x operator.
        let spec = GridSpec::new(1.3, 1.0, 1.0, 7, 4, 4).unwrap();
        let grid = Grid::new(spec).unwrap();
        let w = grid.weights_x();
        let n = spec.nx;
        let mut d = vec![vec![0.0; n]; n];
        for c in 0..n {
            let mut e = vec![0.0; spec.len()];
            for jk in 0..spec.slice_len() {
                e[c * spec.slice_len() + jk] = 1.0;
            }
            let col = dx(&spec, &e);
            for r in 0..n {
                d[r][c] = col[r * spec.slice_len()];
            }
        }
        for r in 0..n {
            for c in 0..n {
                let q = w[r] * d[r][c] + w[c] * d[c][r];
                let expect = if r == c && r == 0 {
                    -1.0
                } else if r == c && r == n - 1 {
                    1.0
                } else {
                    0.0
                };
                assert!((q - expect).abs() < 1e-13, "({r},{c}) {q}");
            }
        }
    }
}
