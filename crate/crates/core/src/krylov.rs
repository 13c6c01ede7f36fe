//! Preconditioned symmetric Krylov solvers in the quadrature inner product:
//! conjugate gradients, and MINRES for indefinite or singular systems.

use crate::error::{Error, Result};
use crate::pair::FieldPair;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { rel_tol: 1e-10, abs_tol: 1e-14, max_iter: 500 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovMethod {
    Cg,
    Minres,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovStats {
    pub method: KrylovMethod,
    pub iterations: usize,
    pub rhs_norm: f64,
    pub residual_norm: f64,
    /// Smallest p.Ap / p.p met along the search directions.
    pub rayleigh_estimate: f64,
    /// Set when MINRES stopped on a least-squares criterion (singular system).
    pub least_squares: bool,
    /// (iteration, residual norm) pairs.
    pub history: Vec<(usize, f64)>,
}

pub trait LinearMap {
    fn apply(&self, u: &FieldPair) -> Result<FieldPair>;
}

impl<F: Fn(&FieldPair) -> Result<FieldPair>> LinearMap for F {
    fn apply(&self, u: &FieldPair) -> Result<FieldPair> {
        self(u)
    }
}

fn target(opts: &KrylovOptions, rhs_norm: f64) -> f64 {
    (opts.rel_tol * rhs_norm).max(opts.abs_tol)
}

/// Conjugate gradients with a symmetric positive definite preconditioner.
/// Fails with `NegativeCurvature` as soon as p.Ap <= 0.
pub fn pcg(a: &dyn LinearMap, m: &dyn LinearMap, b: &FieldPair, x0: Option<&FieldPair>, opts: &KrylovOptions) -> Result<(FieldPair, KrylovStats)> {
    let rhs_norm = b.l2_norm();
    let tgt = target(opts, rhs_norm);
    let mut x = match x0 {
        Some(x) => x.clone(),
        None => FieldPair::zeros(b.grid()),
    };
    let mut r = if x0.is_some() { b.sub(&a.apply(&x)?)? } else { b.clone() };
    let mut stats = KrylovStats {
        method: KrylovMethod::Cg,
        iterations: 0,
        rhs_norm,
        residual_norm: r.l2_norm(),
        rayleigh_estimate: f64::INFINITY,
        least_squares: false,
        history: vec![(0, r.l2_norm())],
    };
    if stats.residual_norm <= tgt {
        return Ok((x, stats));
    }
    let mut z = m.apply(&r)?;
    let mut p = z.clone();
    let mut rz = r.inner(&z)?;
    for it in 1..=opts.max_iter {
        let ap = a.apply(&p)?;
        let pap = p.inner(&ap)?;
        let pp = p.inner(&p)?;
        let q = pap / pp;
        stats.rayleigh_estimate = stats.rayleigh_estimate.min(q);
        if !(pap > 0.0) {
            return Err(Error::NegativeCurvature { quotient: q });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p)?;
        r.axpy(-alpha, &ap)?;
        let rn = r.l2_norm();
        stats.iterations = it;
        stats.residual_norm = rn;
        stats.history.push((it, rn));
        if !rn.is_finite() {
            return Err(Error::LinearSolve("non-finite residual in conjugate gradients".into()));
        }
        if rn <= tgt {
            return Ok((x, stats));
        }
        z = m.apply(&r)?;
        let rz_new = r.inner(&z)?;
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.add(&p.scale(beta))?;
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradients: residual {:.3e} above target {:.3e} after {} iterations",
        stats.residual_norm, tgt, opts.max_iter
    )))
}

/// Preconditioned MINRES (Paige and Saunders) for symmetric, possibly
/// indefinite or singular operators. Started from zero it returns the
/// minimum-norm least-squares solution of a singular system.
pub fn pminres(a: &dyn LinearMap, m: &dyn LinearMap, b: &FieldPair, opts: &KrylovOptions) -> Result<(FieldPair, KrylovStats)> {
    let rhs_norm = b.l2_norm();
    let tgt = target(opts, rhs_norm);
    let mut stats = KrylovStats {
        method: KrylovMethod::Minres,
        iterations: 0,
        rhs_norm,
        residual_norm: rhs_norm,
        rayleigh_estimate: f64::INFINITY,
        least_squares: false,
        history: vec![(0, rhs_norm)],
    };
    let mut x = FieldPair::zeros(b.grid());
    if rhs_norm <= tgt {
        return Ok((x, stats));
    }
    let mut r1 = b.clone();
    let mut y = m.apply(&r1)?;
    let beta1_sq = r1.inner(&y)?;
    if !(beta1_sq > 0.0) {
        return Err(Error::LinearSolve("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0, beta1, 0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut tnorm2 = 0.0;
    let mut w = FieldPair::zeros(b.grid());
    let mut w2 = FieldPair::zeros(b.grid());
    for it in 1..=opts.max_iter {
        let s = 1.0 / beta;
        let v = y.scale(s);
        y = a.apply(&v)?;
        if it >= 2 {
            y.axpy(-beta / oldb, &r1)?;
        }
        let alfa = v.inner(&y)?;
        stats.rayleigh_estimate = stats.rayleigh_estimate.min(alfa / v.inner(&v)?);
        y.axpy(-alfa / beta, &r2)?;
        r1 = std::mem::replace(&mut r2, y);
        y = m.apply(&r2)?;
        oldb = beta;
        let beta_sq = r2.inner(&y)?;
        if beta_sq < 0.0 {
            return Err(Error::LinearSolve("preconditioner is not positive definite".into()));
        }
        beta = beta_sq.sqrt();
        tnorm2 += alfa * alfa + oldb * oldb + beta * beta;
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let root = gbar.hypot(dbar);
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        let mut wn = v;
        wn.axpy(-oldeps, &w1)?;
        wn.axpy(-delta, &w2)?;
        w = wn.scale(1.0 / gamma);
        x.axpy(phi, &w)?;
        stats.iterations = it;
        let arnorm = phibar * root;
        let anorm = tnorm2.sqrt();
        stats.history.push((it, phibar));
        let converged = phibar <= 0.1 * (tgt / rhs_norm) * beta1 || beta == 0.0;
        let least_squares = arnorm <= 1e-12 * anorm * phibar.max(f64::MIN_POSITIVE);
        if converged || least_squares {
            let res = b.sub(&a.apply(&x)?)?;
            stats.residual_norm = res.l2_norm();
            if stats.residual_norm <= tgt {
                return Ok((x, stats));
            }
            if least_squares {
                stats.least_squares = true;
                return Ok((x, stats));
            }
        }
    }
    let res = b.sub(&a.apply(&x)?)?;
    stats.residual_norm = res.l2_norm();
    if stats.residual_norm <= tgt {
        return Ok((x, stats));
    }
    Err(Error::LinearSolve(format!(
        "MINRES: residual {:.3e} above target {:.3e} after {} iterations",
        stats.residual_norm, tgt, opts.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField3;
    use crate::grid::Grid;

    // Diagonal operator u -> d * u on interior rows.
    fn diag(d: Vec<f64>) -> impl Fn(&FieldPair) -> Result<FieldPair> {
        move |u: &FieldPair| {
            let f = u.f.values().iter().zip(&d).map(|(a, b)| a * b).collect();
            let g = u.g.values().iter().zip(&d).map(|(a, b)| -0.5 * a * b).collect();
            Ok(FieldPair { f: ScalarField3::from_values(u.f.grid(), f)?, g: ScalarField3::from_values(u.f.grid(), g)? }.with_clear_walls())
        }
    }

    #[test]
    fn cg_and_minres() {
        let grid = Grid::cube(4).unwrap();
        let n = grid.spec().len();
        let d: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let id = |u: &FieldPair| Ok(u.clone());
        let b = FieldPair { f: ScalarField3::constant(&grid, 1.0), g: ScalarField3::constant(&grid, 2.0) }.with_clear_walls();
        // The g block is negative definite: CG must detect it, MINRES solves.
        assert!(matches!(pcg(&diag(d.clone()), &id, &b, None, &KrylovOptions::default()), Err(Error::NegativeCurvature { .. })));
        let (x, stats) = pminres(&diag(d.clone()), &id, &b, &KrylovOptions::default()).unwrap();
        assert!(stats.residual_norm <= 1e-9 * stats.rhs_norm);
        for m in 0..n {
            let i = m / grid.spec().slice_len();
            if i == 0 || i == 3 {
                continue;
            }
            assert!((x.f.values()[m] - 1.0 / d[m]).abs() < 1e-9);
            assert!((x.g.values()[m] + 4.0 / d[m]).abs() < 1e-9);
        }
        let spd = |u: &FieldPair| {
            let mut out = diag(d.clone())(u)?;
            out.g = out.g.scale(-2.0);
            Ok(out)
        };
        let (x, stats) = pcg(&spd, &id, &b, None, &KrylovOptions::default()).unwrap();
        assert_eq!(stats.method, KrylovMethod::Cg);
        let m = grid.spec().index(1, 2, 3);
        assert!((x.g.values()[m] - 2.0 / d[m]).abs() < 1e-9);
    }
}
