//! Pairs of scalar fields: corrections (F, G), residuals (mu, nu) and
//! stream-function iterates (f1, g1).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{inner, ScalarField3};
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct FieldPair {
    pub f: ScalarField3,
    pub g: ScalarField3,
}

impl FieldPair {
    pub fn new(f: ScalarField3, g: ScalarField3) -> Result<Self> {
        f.same_grid(&g)?;
        Ok(FieldPair { f, g })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        FieldPair { f: ScalarField3::zeros(grid), g: ScalarField3::zeros(grid) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f.grid()
    }

    pub fn same_grid(&self, other: &FieldPair) -> Result<()> {
        self.f.same_grid(&other.f)
    }

    pub fn add(&self, other: &FieldPair) -> Result<Self> {
        Ok(FieldPair { f: self.f.add(&other.f)?, g: self.g.add(&other.g)? })
    }

    pub fn sub(&self, other: &FieldPair) -> Result<Self> {
        Ok(FieldPair { f: self.f.sub(&other.f)?, g: self.g.sub(&other.g)? })
    }

    pub fn scale(&self, c: f64) -> Self {
        FieldPair { f: self.f.scale(c), g: self.g.scale(c) }
    }

    pub fn axpy(&mut self, c: f64, other: &FieldPair) -> Result<()> {
        self.f.axpy(c, &other.f)?;
        self.g.axpy(c, &other.g)
    }

    /// L^2 inner product of pairs over one period cell.
    pub fn inner(&self, other: &FieldPair) -> Result<f64> {
        Ok(inner(&self.f, &other.f)? + inner(&self.g, &other.g)?)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    pub fn max_abs(&self) -> f64 {
        self.f.max_abs().max(self.g.max_abs())
    }

    pub fn boundary_max_abs(&self) -> f64 {
        self.f.boundary_max_abs().max(self.g.boundary_max_abs())
    }

    pub fn clear_walls(&mut self) {
        self.f.clear_walls();
        self.g.clear_walls();
    }

    pub fn with_clear_walls(mut self) -> Self {
        self.clear_walls();
        self
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        self.f.ensure_finite(what)?;
        self.g.ensure_finite(what)
    }

    /// Checks the Dirichlet condition at x = 0 and x = L.
    pub fn ensure_admissible(&self, what: &str) -> Result<()> {
        self.ensure_finite("pair")?;
        let b = self.boundary_max_abs();
        let scale = 1.0 + self.max_abs();
        if b > 1e-13 * scale {
            return Err(Error::NotAdmissible(format!("{what} has wall values up to {b:e}")));
        }
        Ok(())
    }

    /// L^2 norm restricted to interior rows, i.e. the norm of the part of a
    /// residual that the discrete system actually constrains.
    pub fn interior_l2_norm(&self) -> f64 {
        self.clone().with_clear_walls().l2_norm()
    }
}
