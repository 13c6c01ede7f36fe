//! Stream-function pairs and the data of the boundary-value problem.

use std::sync::Arc;

use crate::bernoulli::BernoulliSpec;
use crate::error::{Error, Result};
use crate::field::{cross3, gradient, ScalarField3, VectorField3};
use crate::grid::Grid;
use crate::pair::FieldPair;

/// f = linear_f . (x, y, z) + periodic_f, and likewise for g.
#[derive(Clone, Debug)]
pub struct StreamPair {
    pub linear_f: [f64; 3],
    pub linear_g: [f64; 3],
    pub periodic_f: ScalarField3,
    pub periodic_g: ScalarField3,
}

impl StreamPair {
    pub fn new(linear_f: [f64; 3], linear_g: [f64; 3], periodic_f: ScalarField3, periodic_g: ScalarField3) -> Result<Self> {
        periodic_f.same_grid(&periodic_g)?;
        Ok(StreamPair { linear_f, linear_g, periodic_f, periodic_g })
    }

    /// Purely linear pair.
    pub fn linear(grid: &Arc<Grid>, linear_f: [f64; 3], linear_g: [f64; 3]) -> Self {
        StreamPair { linear_f, linear_g, periodic_f: ScalarField3::zeros(grid), periodic_g: ScalarField3::zeros(grid) }
    }

    /// Purely periodic pair.
    pub fn periodic(pair: FieldPair) -> Self {
        StreamPair { linear_f: [0.0; 3], linear_g: [0.0; 3], periodic_f: pair.f, periodic_g: pair.g }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.periodic_f.grid()
    }

    pub fn periodic_pair(&self) -> FieldPair {
        FieldPair { f: self.periodic_f.clone(), g: self.periodic_g.clone() }
    }

    fn total(grid: &Arc<Grid>, linear: [f64; 3], periodic: &ScalarField3) -> ScalarField3 {
        let lin = ScalarField3::from_fn(grid, |x, y, z| linear[0] * x + linear[1] * y + linear[2] * z);
        lin.add(periodic).expect("same grid")
    }

    /// Samples of the total function f.
    pub fn total_f(&self) -> ScalarField3 {
        Self::total(self.grid(), self.linear_f, &self.periodic_f)
    }

    pub fn total_g(&self) -> ScalarField3 {
        Self::total(self.grid(), self.linear_g, &self.periodic_g)
    }

    pub fn grad_f(&self) -> Result<VectorField3> {
        Ok(gradient(&self.periodic_f)?.add_constant(self.linear_f))
    }

    pub fn grad_g(&self) -> Result<VectorField3> {
        Ok(gradient(&self.periodic_g)?.add_constant(self.linear_g))
    }

    pub fn add(&self, other: &StreamPair) -> Result<Self> {
        Ok(StreamPair {
            linear_f: add3(self.linear_f, other.linear_f),
            linear_g: add3(self.linear_g, other.linear_g),
            periodic_f: self.periodic_f.add(&other.periodic_f)?,
            periodic_g: self.periodic_g.add(&other.periodic_g)?,
        })
    }

    /// Adds a periodic correction pair to the periodic parts.
    pub fn with_correction(&self, w: &FieldPair) -> Result<Self> {
        Ok(StreamPair {
            linear_f: self.linear_f,
            linear_g: self.linear_g,
            periodic_f: self.periodic_f.add(&w.f)?,
            periodic_g: self.periodic_g.add(&w.g)?,
        })
    }

    pub fn scale(&self, lambda: f64) -> Self {
        StreamPair {
            linear_f: self.linear_f.map(|v| lambda * v),
            linear_g: self.linear_g.map(|v| lambda * v),
            periodic_f: self.periodic_f.scale(lambda),
            periodic_g: self.periodic_g.scale(lambda),
        }
    }

    /// The swapped pair (g, f).
    pub fn swapped(&self) -> Self {
        StreamPair {
            linear_f: self.linear_g,
            linear_g: self.linear_f,
            periodic_f: self.periodic_g.clone(),
            periodic_g: self.periodic_f.clone(),
        }
    }
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm_sq(a: [f64; 3]) -> f64 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

/// Left-hand side |grad f|^2 + |grad g|^2 + sqrt((|grad f|^2 + |grad g|^2)^2 - 4|v|^2)
/// of the normalisation on constant base gradients.
pub fn simplicity_value(grad_f: [f64; 3], grad_g: [f64; 3]) -> f64 {
    let s = norm_sq(grad_f) + norm_sq(grad_g);
    let v = norm_sq(cross3(grad_f, grad_g));
    s + (s * s - 4.0 * v).max(0.0).sqrt()
}

/// Data of the problem: base (fbar, gbar), boundary perturbation (f0, g0)
/// and the Bernoulli function. Unknown iterates (f1, g1) vanish at the walls.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub grid: Arc<Grid>,
    pub base: StreamPair,
    pub boundary_perturbation: StreamPair,
    pub bernoulli: BernoulliSpec,
}

impl ProblemData {
    pub fn new(base_grad_f: [f64; 3], base_grad_g: [f64; 3], f0: ScalarField3, g0: ScalarField3, bernoulli: BernoulliSpec) -> Result<Self> {
        f0.same_grid(&g0)?;
        let grid = f0.grid().clone();
        let data = ProblemData {
            base: StreamPair::linear(&grid, base_grad_f, base_grad_g),
            boundary_perturbation: StreamPair::new([0.0; 3], [0.0; 3], f0, g0)?,
            grid,
            bernoulli,
        };
        data.validate()?;
        Ok(data)
    }

    /// f = y, g = z with no perturbation and H = 0.
    pub fn base_state(grid: &Arc<Grid>) -> Self {
        ProblemData::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], ScalarField3::zeros(grid), ScalarField3::zeros(grid), BernoulliSpec::zero())
            .expect("base state is valid")
    }

    pub fn base_velocity(&self) -> [f64; 3] {
        cross3(self.base.linear_f, self.base.linear_g)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.base.linear_f;
        let b = self.base.linear_g;
        let vbar = self.base_velocity();
        let scale = norm_sq(a).sqrt() * norm_sq(b).sqrt();
        if !(vbar[0].abs() > 1e-12 * scale.max(1e-300)) {
            return Err(Error::Invariant {
                name: "first component of vbar does not vanish",
                detail: format!("vbar = {vbar:?} for grad fbar = {a:?}, grad gbar = {b:?}"),
            });
        }
        let s = simplicity_value(a, b);
        if s > 2.0 * (1.0 + 1e-12) {
            let lambda = (2.0 / s).sqrt();
            return Err(Error::Invariant {
                name: "base normalisation |grad f|^2+|grad g|^2+sqrt(...) <= 2",
                detail: format!("value {s}; rescale the base by lambda <= {lambda}"),
            });
        }
        self.boundary_perturbation.periodic_f.ensure_finite("f0")?;
        self.boundary_perturbation.periodic_g.ensure_finite("g0")?;
        Ok(())
    }

    /// Total pair fbar + f0 + f1, gbar + g0 + g1.
    pub fn total(&self, iterate: &FieldPair) -> Result<StreamPair> {
        self.base.add(&self.boundary_perturbation)?.with_correction(iterate)
    }

    /// Same problem after (f, g, H) -> (lambda f, lambda g, lambda^4 H(./lambda)).
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Ok(ProblemData {
            grid: self.grid.clone(),
            base: self.base.scale(lambda),
            boundary_perturbation: self.boundary_perturbation.scale(lambda),
            bernoulli: self.bernoulli.rescaled(lambda)?,
        })
    }

    /// Moves w = (wf, wg), vanishing at the walls, from the unknown into the
    /// boundary perturbation. The solution of the new problem is the old one
    /// minus w.
    pub fn reencoded(&self, w: &FieldPair) -> Result<Self> {
        w.ensure_admissible("re-encoding shift")?;
        Ok(ProblemData { boundary_perturbation: self.boundary_perturbation.with_correction(w)?, ..self.clone() })
    }
}
