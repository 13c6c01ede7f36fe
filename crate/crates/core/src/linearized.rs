//! The regularised second variation B^eps at a frozen background and its
//! conservative strong form.

use std::sync::Arc;

use crate::bernoulli::BernoulliSpec;
use crate::error::{Error, Result};
use crate::field::{cross, cross3, divergence, dot3, gradient, integrate, ScalarField3, VectorField3};
use crate::grid::Grid;
use crate::pair::FieldPair;
use crate::problem::{ProblemData, StreamPair};

/// Fluxes (Phi_F, Phi_G) = (b x w + B x v + eps A, w x a + v x A + eps B) with
/// w = A x b + a x B, the partial gradients of half the B^eps integrand.
#[inline]
pub fn linear_flux(a: [f64; 3], b: [f64; 3], v: [f64; 3], eps: f64, ga: [f64; 3], gb: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let t1 = cross3(ga, b);
    let t2 = cross3(a, gb);
    let w = [t1[0] + t2[0], t1[1] + t2[1], t1[2] + t2[2]];
    let bw = cross3(b, w);
    let bv = cross3(gb, v);
    let wa = cross3(w, a);
    let va = cross3(v, ga);
    (
        [bw[0] + bv[0] + eps * ga[0], bw[1] + bv[1] + eps * ga[1], bw[2] + bv[2] + eps * ga[2]],
        [wa[0] + va[0] + eps * gb[0], wa[1] + va[1] + eps * gb[1], wa[2] + va[2] + eps * gb[2]],
    )
}

/// Pointwise B^eps integrand for gradients (A, B) and (A', B').
#[inline]
pub fn bilinear_density(a: [f64; 3], b: [f64; 3], v: [f64; 3], eps: f64, u: ([f64; 3], [f64; 3]), t: ([f64; 3], [f64; 3])) -> f64 {
    let w = |ga: [f64; 3], gb: [f64; 3]| {
        let p = cross3(ga, b);
        let q = cross3(a, gb);
        [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
    };
    dot3(w(u.0, u.1), w(t.0, t.1))
        + dot3(v, cross3(u.0, t.1))
        + dot3(v, cross3(t.0, u.1))
        + eps * (dot3(u.0, t.0) + dot3(u.1, t.1))
}

/// Frozen background coefficients and eps.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    background: StreamPair,
    grad_f: VectorField3,
    grad_g: VectorField3,
    v: VectorField3,
    /// (H_ff, H_fg, H_gg) at the background, absent when H'' vanishes.
    hessian: Option<[ScalarField3; 3]>,
    epsilon: f64,
}

impl LinearizedOperator {
    pub fn new(background: &StreamPair, bernoulli: &BernoulliSpec, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Invariant { name: "eps in [0, 1]", detail: format!("eps = {epsilon}") });
        }
        let grad_f = background.grad_f()?;
        let grad_g = background.grad_g()?;
        let v = cross(&grad_f, &grad_g)?;
        let hessian = if bernoulli.terms.is_empty() {
            None
        } else {
            let [_, _, _, hff, hfg, hgg] = bernoulli.jet_fields(&background.total_f(), &background.total_g())?;
            Some([hff, hfg, hgg])
        };
        Ok(LinearizedOperator { background: background.clone(), grad_f, grad_g, v, hessian, epsilon })
    }

    /// Linearisation of F at the iterate (f1, g1).
    pub fn at_iterate(data: &ProblemData, iterate: &FieldPair, epsilon: f64) -> Result<Self> {
        Self::new(&data.total(iterate)?, &data.bernoulli, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Invariant { name: "eps in [0, 1]", detail: format!("eps = {epsilon}") });
        }
        Ok(LinearizedOperator { epsilon, ..self.clone() })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    pub fn background(&self) -> &StreamPair {
        &self.background
    }

    pub fn grad_f(&self) -> &VectorField3 {
        &self.grad_f
    }

    pub fn grad_g(&self) -> &VectorField3 {
        &self.grad_g
    }

    pub fn velocity(&self) -> &VectorField3 {
        &self.v
    }

    pub fn hessian(&self) -> Option<&[ScalarField3; 3]> {
        self.hessian.as_ref()
    }

    /// Constant gradients of the background's linear part, used by the
    /// base-state preconditioner.
    pub fn base_gradients(&self) -> ([f64; 3], [f64; 3]) {
        (self.background.linear_f, self.background.linear_g)
    }

    /// Applies the operator without the admissibility check. Wall rows of the
    /// result are zero.
    pub(crate) fn apply_raw(&self, u: &FieldPair) -> Result<FieldPair> {
        let ga = gradient(&u.f)?;
        let gb = gradient(&u.g)?;
        let n = ga.x.values().len();
        let mut pf = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut pg = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for m in 0..n {
            let (p, q) = linear_flux(self.grad_f.at(m), self.grad_g.at(m), self.v.at(m), self.epsilon, ga.at(m), gb.at(m));
            for c in 0..3 {
                pf[c][m] = p[c];
                pg[c][m] = q[c];
            }
        }
        let grid = self.grid();
        let to_vec = |arr: [Vec<f64>; 3]| -> Result<VectorField3> {
            let [x, y, z] = arr;
            VectorField3::new(
                ScalarField3::from_values(grid, x)?,
                ScalarField3::from_values(grid, y)?,
                ScalarField3::from_values(grid, z)?,
            )
        };
        let mut mu = divergence(&to_vec(pf)?)?.scale(-1.0);
        let mut nu = divergence(&to_vec(pg)?)?.scale(-1.0);
        if let Some([hff, hfg, hgg]) = &self.hessian {
            let (mv, nv) = (mu.values_mut(), nu.values_mut());
            for m in 0..n {
                let (f, g) = (u.f.values()[m], u.g.values()[m]);
                mv[m] += hff.values()[m] * f + hfg.values()[m] * g;
                nv[m] += hfg.values()[m] * f + hgg.values()[m] * g;
            }
        }
        let mut out = FieldPair { f: mu, g: nu };
        out.clear_walls();
        Ok(out)
    }

    /// (mu, nu) = L_eps (F, G) on interior rows.
    pub fn apply(&self, u: &FieldPair) -> Result<FieldPair> {
        u.same_grid(&FieldPair { f: self.v.x.clone(), g: self.v.y.clone() })?;
        u.ensure_admissible("linearized argument")?;
        self.apply_raw(u)
    }

    /// B^eps(u, t) by quadrature of the first-derivative integrand.
    pub fn weak_form(&self, u: &FieldPair, t: &FieldPair) -> Result<f64> {
        u.ensure_admissible("weak-form argument")?;
        t.ensure_admissible("weak-form test pair")?;
        let gu = (gradient(&u.f)?, gradient(&u.g)?);
        let gt = (gradient(&t.f)?, gradient(&t.g)?);
        let n = u.f.values().len();
        let mut density = vec![0.0; n];
        for (m, d) in density.iter_mut().enumerate() {
            *d = bilinear_density(
                self.grad_f.at(m),
                self.grad_g.at(m),
                self.v.at(m),
                self.epsilon,
                (gu.0.at(m), gu.1.at(m)),
                (gt.0.at(m), gt.1.at(m)),
            );
            if let Some([hff, hfg, hgg]) = &self.hessian {
                let (f, g) = (u.f.values()[m], u.g.values()[m]);
                let (tf, tg) = (t.f.values()[m], t.g.values()[m]);
                *d += hff.values()[m] * f * tf + hfg.values()[m] * (f * tg + g * tf) + hgg.values()[m] * g * tg;
            }
        }
        Ok(integrate(&ScalarField3::from_values(self.grid(), density)?))
    }

    /// B^eps(u, u) / ||u||^2.
    pub fn rayleigh_quotient(&self, u: &FieldPair) -> Result<f64> {
        let n2 = u.inner(u)?;
        if n2 == 0.0 {
            return Err(Error::Invariant { name: "nonzero pair", detail: "Rayleigh quotient of the zero pair".into() });
        }
        Ok(self.weak_form(u, u)? / n2)
    }
}

pub fn apply_linearized(op: &LinearizedOperator, pair: &FieldPair) -> Result<FieldPair> {
    op.apply(pair)
}

pub fn weak_residual(op: &LinearizedOperator, pair: &FieldPair, test: &FieldPair) -> Result<f64> {
    op.weak_form(pair, test)
}
