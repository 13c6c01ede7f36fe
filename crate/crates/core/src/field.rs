//! Scalar and vector fields on the channel grid and the pointwise / stencil
//! operations on them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{dx, Grid, GridSpec};

#[derive(Clone, Debug)]
pub struct ScalarField3 {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField3 { grid: grid.clone(), values: vec![0.0; grid.spec().len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        ScalarField3 { grid: grid.clone(), values: vec![c; grid.spec().len()] }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.spec().len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.spec().len(),
                values.len()
            )));
        }
        Ok(ScalarField3 { grid: grid.clone(), values })
    }

    /// Samples `f(x, y, z)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let s = *grid.spec();
        let mut values = Vec::with_capacity(s.len());
        for i in 0..s.nx {
            for j in 0..s.ny {
                for k in 0..s.nz {
                    values.push(f(s.x(i), s.y(j), s.z(k)));
                }
            }
        }
        ScalarField3 { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.spec().ny + j) * self.spec().nz + k]
    }

    pub fn same_grid(&self, other: &ScalarField3) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField3 { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField3, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(ScalarField3 {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField3) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField3) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField3) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &ScalarField3) -> Result<()> {
        self.same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm over the rows 1..Nx-1, i.e. away from the walls.
    pub fn max_abs_interior(&self) -> f64 {
        let s = self.spec().slice_len();
        let nx = self.spec().nx;
        self.values[s..(nx - 1) * s].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm over the two wall rows.
    pub fn max_abs_walls(&self) -> f64 {
        let s = self.spec().slice_len();
        let nx = self.spec().nx;
        self.values[..s]
            .iter()
            .chain(&self.values[(nx - 1) * s..])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest magnitude on the walls x = 0 and x = L.
    pub fn boundary_max_abs(&self) -> f64 {
        self.max_abs_walls()
    }

    /// Sets both wall rows to zero.
    pub fn clear_walls(&mut self) {
        let s = self.spec().slice_len();
        let nx = self.spec().nx;
        self.values[..s].iter_mut().for_each(|v| *v = 0.0);
        self.values[(nx - 1) * s..].iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn l2_norm(&self) -> f64 {
        integrate(&self.map(|v| v * v)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct VectorField3 {
    pub x: ScalarField3,
    pub y: ScalarField3,
    pub z: ScalarField3,
}

impl VectorField3 {
    pub fn new(x: ScalarField3, y: ScalarField3, z: ScalarField3) -> Result<Self> {
        x.same_grid(&y)?;
        x.same_grid(&z)?;
        Ok(VectorField3 { x, y, z })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let z = ScalarField3::zeros(grid);
        VectorField3 { x: z.clone(), y: z.clone(), z }
    }

    pub fn constant(grid: &Arc<Grid>, c: [f64; 3]) -> Self {
        VectorField3 {
            x: ScalarField3::constant(grid, c[0]),
            y: ScalarField3::constant(grid, c[1]),
            z: ScalarField3::constant(grid, c[2]),
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        VectorField3 {
            x: ScalarField3::from_fn(grid, |x, y, z| f(x, y, z)[0]),
            y: ScalarField3::from_fn(grid, |x, y, z| f(x, y, z)[1]),
            z: ScalarField3::from_fn(grid, |x, y, z| f(x, y, z)[2]),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.x.grid()
    }

    pub fn spec(&self) -> &GridSpec {
        self.x.spec()
    }

    pub fn components(&self) -> [&ScalarField3; 3] {
        [&self.x, &self.y, &self.z]
    }

    #[inline]
    pub fn at(&self, n: usize) -> [f64; 3] {
        [self.x.values[n], self.y.values[n], self.z.values[n]]
    }

    pub fn same_grid(&self, other: &VectorField3) -> Result<()> {
        self.x.same_grid(&other.x)
    }

    pub fn add(&self, other: &VectorField3) -> Result<Self> {
        Ok(VectorField3 { x: self.x.add(&other.x)?, y: self.y.add(&other.y)?, z: self.z.add(&other.z)? })
    }

    pub fn sub(&self, other: &VectorField3) -> Result<Self> {
        Ok(VectorField3 { x: self.x.sub(&other.x)?, y: self.y.sub(&other.y)?, z: self.z.sub(&other.z)? })
    }

    pub fn scale(&self, c: f64) -> Self {
        VectorField3 { x: self.x.scale(c), y: self.y.scale(c), z: self.z.scale(c) }
    }

    pub fn add_constant(&self, c: [f64; 3]) -> Self {
        VectorField3 { x: self.x.map(|v| v + c[0]), y: self.y.map(|v| v + c[1]), z: self.z.map(|v| v + c[2]) }
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField3 {
        let values = (0..self.x.values.len())
            .map(|n| {
                let a = self.at(n);
                (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
            })
            .collect();
        ScalarField3 { grid: self.grid().clone(), values }
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn max_abs_interior(&self) -> f64 {
        self.magnitude().max_abs_interior()
    }

    pub fn max_abs_walls(&self) -> f64 {
        self.magnitude().max_abs_walls()
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        self.x.ensure_finite(what)?;
        self.y.ensure_finite(what)?;
        self.z.ensure_finite(what)
    }
}

#[inline]
pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// x-derivative (summation-by-parts stencil) of a field.
pub fn partial_x(field: &ScalarField3) -> ScalarField3 {
    ScalarField3 { grid: field.grid.clone(), values: dx(field.spec(), &field.values) }
}

/// Gradient: summation-by-parts differences in x, Fourier collocation in y
/// and z. The field must be periodic in y and z.
pub fn gradient(field: &ScalarField3) -> Result<VectorField3> {
    field.ensure_finite("gradient input")?;
    let grid = field.grid.clone();
    let mut yz = grid.yz_derivatives(&field.values, &[(1, 0), (0, 1)]);
    let dz = yz.pop().expect("two outputs");
    let dy = yz.pop().expect("two outputs");
    Ok(VectorField3 {
        x: partial_x(field),
        y: ScalarField3 { grid: grid.clone(), values: dy },
        z: ScalarField3 { grid, values: dz },
    })
}

pub fn cross(u: &VectorField3, v: &VectorField3) -> Result<VectorField3> {
    u.same_grid(v)?;
    let n = u.x.values.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for m in 0..n {
        let c = cross3(u.at(m), v.at(m));
        out[0][m] = c[0];
        out[1][m] = c[1];
        out[2][m] = c[2];
    }
    let grid = u.grid().clone();
    let [x, y, z] = out;
    Ok(VectorField3 {
        x: ScalarField3 { grid: grid.clone(), values: x },
        y: ScalarField3 { grid: grid.clone(), values: y },
        z: ScalarField3 { grid, values: z },
    })
}

pub fn dot(u: &VectorField3, v: &VectorField3) -> Result<ScalarField3> {
    u.same_grid(v)?;
    let values = (0..u.x.values.len()).map(|m| dot3(u.at(m), v.at(m))).collect();
    Ok(ScalarField3 { grid: u.grid().clone(), values })
}

pub fn divergence(v: &VectorField3) -> Result<ScalarField3> {
    v.ensure_finite("divergence input")?;
    let grid = v.grid().clone();
    let yz = grid.yz_divergence(&v.y.values, &v.z.values);
    let mut out = dx(grid.spec(), &v.x.values);
    for (o, a) in out.iter_mut().zip(yz) {
        *o += a;
    }
    Ok(ScalarField3 { grid, values: out })
}

pub fn curl(v: &VectorField3) -> Result<VectorField3> {
    let gx = gradient(&v.x)?;
    let gy = gradient(&v.y)?;
    let gz = gradient(&v.z)?;
    Ok(VectorField3 { x: gz.y.sub(&gy.z)?, y: gx.z.sub(&gz.x)?, z: gy.x.sub(&gx.y)? })
}

/// Trapezoid rule in x, rectangle rule in y and z.
pub fn integrate(field: &ScalarField3) -> f64 {
    let spec = field.spec();
    let s = spec.slice_len();
    let area = spec.hy() * spec.hz();
    field
        .values
        .chunks(s)
        .zip(field.grid.weights_x())
        .map(|(slice, w)| w * slice.iter().sum::<f64>())
        .sum::<f64>()
        * area
}

/// L^2 inner product with the quadrature of `integrate`.
pub fn inner(a: &ScalarField3, b: &ScalarField3) -> Result<f64> {
    a.same_grid(b)?;
    let spec = a.spec();
    let s = spec.slice_len();
    let area = spec.hy() * spec.hz();
    Ok(a.values
        .chunks(s)
        .zip(b.values.chunks(s))
        .zip(a.grid.weights_x())
        .map(|((x, y), w)| w * x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum::<f64>()
        * area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::cube(n).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid(8);
        let d = gradient(&ScalarField3::constant(&g, 3.5)).unwrap();
        assert!(d.max_abs() < 1e-13);
    }

    #[test]
    fn gradient_of_linear_x_is_exact() {
        let g = grid(8);
        let d = gradient(&ScalarField3::from_fn(&g, |x, _, _| 2.0 * x)).unwrap();
        assert!(d.x.map(|v| v - 2.0).max_abs() < 1e-13);
        assert!(d.y.max_abs() < 1e-13 && d.z.max_abs() < 1e-13);
    }

    #[test]
    fn gradient_of_z_mode_is_spectral() {
        let g = grid(16);
        let d = gradient(&ScalarField3::from_fn(&g, |_, _, z| (2.0 * PI * z).sin())).unwrap();
        let exact = ScalarField3::from_fn(&g, |_, _, z| 2.0 * PI * (2.0 * PI * z).cos());
        assert!(d.z.sub(&exact).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = grid(4);
        let mut f = ScalarField3::zeros(&g);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(gradient(&f), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cross_products() {
        let g = grid(4);
        let e1 = VectorField3::constant(&g, [1.0, 0.0, 0.0]);
        let e2 = VectorField3::constant(&g, [0.0, 1.0, 0.0]);
        let c = cross(&e1, &e2).unwrap();
        assert_eq!(c.at(5), [0.0, 0.0, 1.0]);
        assert!(cross(&e1, &e1).unwrap().max_abs() == 0.0);
        let other = Grid::cube(6).unwrap();
        assert!(matches!(cross(&e1, &VectorField3::zeros(&other)), Err(Error::GridMismatch)));
    }

    #[test]
    fn divergence_of_position_is_three_in_x_direction() {
        // y and z are periodic, so only the x component of (x, y, z) can be
        // sampled as a field; its divergence contribution is exact.
        let g = grid(8);
        let v = VectorField3::from_fn(&g, |x, _, _| [x, 0.0, 0.0]);
        assert!(divergence(&v).unwrap().map(|d| d - 1.0).max_abs() < 1e-13);
    }

    #[test]
    fn curl_of_x_in_z_component() {
        let g = grid(8);
        let v = VectorField3::from_fn(&g, |x, _, _| [0.0, 0.0, x]);
        let c = curl(&v).unwrap();
        assert!(c.x.max_abs() < 1e-13);
        assert!(c.y.map(|v| v + 1.0).max_abs() < 1e-13);
        assert!(c.z.max_abs() < 1e-13);
    }

    #[test]
    fn integrals() {
        let spec = GridSpec::new(2.0, 1.5, 0.5, 9, 8, 6).unwrap();
        let g = Grid::new(spec).unwrap();
        assert!((integrate(&ScalarField3::constant(&g, 1.0)) - 1.5).abs() < 1e-14);
        let s = ScalarField3::from_fn(&g, |_, y, _| (2.0 * PI * y / 1.5).sin());
        assert!(integrate(&s).abs() < 1e-14);
        // Trapezoid error for sin^2(pi x / L): the rule is exact for this
        // periodic-in-x integrand's cosine part except at the aliasing mode.
        let q = ScalarField3::from_fn(&g, |x, _, _| (PI * x / 2.0).sin().powi(2));
        assert!((integrate(&q) - 0.5 * 2.0 * 1.5 * 0.5).abs() < 1e-12);
    }
}
