//! Numerical probes of the coercivity, non-coercivity, normalisation,
//! convexity and tame-inverse estimates.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bernoulli::BernoulliSpec;
use crate::error::{Error, Result};
use crate::euler::energy;
use crate::field::ScalarField3;
use crate::linearized::LinearizedOperator;
use crate::linsolve::LinearSolver;
use crate::norms::{max_norm_derivatives, sobolev_norm};
use crate::pair::FieldPair;
use crate::problem::{simplicity_value, StreamPair};
use crate::sampling::SmoothSampler;

/// Relative tolerance on the extreme Rayleigh quotient.
pub const RAYLEIGH_TOLERANCE: f64 = 1e-8;
const RAYLEIGH_MAX_ITER: usize = 500;
const RAYLEIGH_SEED: u64 = 0x5eed;

/// pi^2 min v1^2 / (32 L^2).
pub fn coercivity_constant(min_v1: f64, length: f64) -> f64 {
    PI * PI * min_v1 * min_v1 / (32.0 * length * length)
}

/// (32 L^2 / (pi^2 min v1^2)), the L^2 solvability constant.
pub fn solvability_constant(min_v1: f64, length: f64) -> f64 {
    1.0 / coercivity_constant(min_v1, length)
}

#[derive(Clone, Debug)]
pub struct RayleighResult {
    /// B^eps(u, u) / ||u||^2 of the returned vector.
    pub min_quotient: f64,
    /// Ritz value of the last iteration.
    pub eigenvalue: f64,
    pub eigenvector: FieldPair,
    pub iterations: usize,
    pub epsilon: f64,
    /// ||L u - lambda u|| / ||u||.
    pub residual: f64,
}

impl RayleighResult {
    pub fn is_negative(&self) -> bool {
        self.min_quotient < 0.0
    }
}

fn w_orthonormalize(basis: Vec<FieldPair>) -> Result<Vec<FieldPair>> {
    let mut out: Vec<FieldPair> = Vec::with_capacity(basis.len());
    for mut v in basis {
        let n0 = v.l2_norm();
        if !(n0 > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = q.inner(&v)?;
                v.axpy(-c, q)?;
            }
        }
        let n = v.l2_norm();
        if n > 1e-10 * n0 {
            out.push(v.scale(1.0 / n));
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of the discrete B^eps with respect to the quadrature
/// L^2 product, by locally optimal block preconditioned conjugate gradients
/// with the base-state inverse as preconditioner.
pub fn rayleigh_min_op(op: &LinearizedOperator) -> Result<RayleighResult> {
    let grid = op.grid().clone();
    let mut solver = LinearSolver::default();
    let pc = solver.preconditioner(op)?;
    let start = SmoothSampler::new(RAYLEIGH_SEED).pair(&grid);
    let mut x = start.scale(1.0 / start.l2_norm());
    let mut lx = op.apply_raw(&x)?;
    let mut lambda = x.inner(&lx)?;
    let mut p: Option<(FieldPair, FieldPair)> = None;
    let mut last_change = f64::INFINITY;
    for it in 1..=RAYLEIGH_MAX_ITER {
        let mut r = lx.clone();
        r.axpy(-lambda, &x)?;
        r.clear_walls();
        let residual = r.l2_norm();
        let scale = lambda.abs().max(1.0);
        if it > 1 && last_change <= 1e-2 * RAYLEIGH_TOLERANCE * scale && residual <= 1e-4 * scale {
            return finish(op, x, lambda, it - 1, residual);
        }
        let w = pc.apply(&r);
        let mut raw = vec![x.clone(), w];
        if let Some((pp, _)) = &p {
            raw.push(pp.clone());
        }
        let basis = w_orthonormalize(raw)?;
        let images = basis.iter().map(|b| op.apply_raw(b)).collect::<Result<Vec<_>>>()?;
        let k = basis.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (basis[i].inner(&images[j])? + basis[j].inner(&images[i])?);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(a);
        let imin = eig.eigenvalues.iter().enumerate().min_by(|u, v| u.1.total_cmp(v.1)).map(|(i, _)| i).expect("non-empty basis");
        let c = eig.eigenvectors.column(imin);
        let mut xn = FieldPair::zeros(&grid);
        let mut lxn = FieldPair::zeros(&grid);
        let mut pn = FieldPair::zeros(&grid);
        let mut lpn = FieldPair::zeros(&grid);
        for i in 0..k {
            xn.axpy(c[i], &basis[i])?;
            lxn.axpy(c[i], &images[i])?;
            if i > 0 {
                pn.axpy(c[i], &basis[i])?;
                lpn.axpy(c[i], &images[i])?;
            }
        }
        let nrm = xn.l2_norm();
        x = xn.scale(1.0 / nrm);
        lx = lxn.scale(1.0 / nrm);
        let new_lambda = eig.eigenvalues[imin];
        last_change = (new_lambda - lambda).abs();
        lambda = new_lambda;
        p = Some((pn, lpn));
    }
    Err(Error::EigenStagnation(RAYLEIGH_MAX_ITER))
}

fn finish(op: &LinearizedOperator, x: FieldPair, lambda: f64, iterations: usize, residual: f64) -> Result<RayleighResult> {
    let q = op.rayleigh_quotient(&x)?;
    Ok(RayleighResult { min_quotient: q, eigenvalue: lambda, eigenvector: x, iterations, epsilon: op.epsilon(), residual })
}

pub fn rayleigh_min(background: &StreamPair, bernoulli: &BernoulliSpec, epsilon: f64) -> Result<RayleighResult> {
    rayleigh_min_op(&LinearizedOperator::new(background, bernoulli, epsilon)?)
}

/// C-infinity bump on [0, L], equal to 1 on [L/4, 3L/4] and vanishing with all
/// derivatives at both walls.
pub fn plateau_bump(x: f64, length: f64) -> f64 {
    fn psi(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    fn step(t: f64) -> f64 {
        let (a, b) = (psi(t), psi(1.0 - t));
        a / (a + b)
    }
    let w = 0.25 * length;
    step(x / w) * step((length - x) / w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoncoerciveRow {
    pub n: usize,
    /// B(F_n, 0).
    pub b_value: f64,
    pub h1_norm_sq: f64,
    pub quotient_h1: f64,
}

/// B(F_n, 0) / ||(F_n, 0)||^2_{H^1} for F_n = phi(x) cos(2 pi n z / P2).
pub fn noncoercive_probe(op: &LinearizedOperator, n_list: &[usize]) -> Result<Vec<NoncoerciveRow>> {
    let grid = op.grid();
    let spec = *grid.spec();
    let nyquist = spec.nz / 2;
    n_list
        .iter()
        .map(|&n| {
            if n >= nyquist {
                return Err(Error::BeyondNyquist { n, nyquist });
            }
            let f = ScalarField3::from_fn(grid, |x, _, z| plateau_bump(x, spec.length) * (2.0 * PI * n as f64 * z / spec.period_z).cos());
            let u = FieldPair { f, g: ScalarField3::zeros(grid) };
            let b_value = op.weak_form(&u, &u)?;
            let h1 = sobolev_norm(&u, 1)?;
            Ok(NoncoerciveRow { n, b_value, h1_norm_sq: h1 * h1, quotient_h1: b_value / (h1 * h1) })
        })
        .collect()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub fn noncoercive_csv(rows: &[NoncoerciveRow]) -> String {
    let mut s = String::from("n,b_value,h1_norm_sq,quotient_h1\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.12e},{:.12e},{:.12e}", r.n, r.b_value, r.h1_norm_sq, r.quotient_h1);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplicityCheck {
    pub value: f64,
    pub passes: bool,
    /// Largest lambda < 1 for which the rescaled base passes, when it fails.
    pub lambda_fix: Option<f64>,
}

pub fn simplicity_check_gradients(grad_f: [f64; 3], grad_g: [f64; 3]) -> Result<SimplicityCheck> {
    let v = crate::field::cross3(grad_f, grad_g);
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::DegenerateVelocity("base velocity vanishes".into()));
    }
    let ok = |lambda: f64| simplicity_value(grad_f.map(|c| lambda * c), grad_g.map(|c| lambda * c)) <= 2.0 * (1.0 + 1e-12);
    let value = simplicity_value(grad_f, grad_g);
    if ok(1.0) {
        return Ok(SimplicityCheck { value, passes: true, lambda_fix: None });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SimplicityCheck { value, passes: false, lambda_fix: Some(lo) })
}

/// Checks the normalisation on the linear part of a constant-gradient base.
pub fn simplicity_check(base: &StreamPair) -> Result<SimplicityCheck> {
    if base.periodic_f.max_abs() != 0.0 || base.periodic_g.max_abs() != 0.0 {
        return Err(Error::Invariant { name: "constant-gradient base", detail: "base has a periodic part".into() });
    }
    simplicity_check_gradients(base.linear_f, base.linear_g)
}

pub const CONVEXITY_POINTS: usize = 11;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityWitness {
    pub energies: Vec<f64>,
    /// (E(t-h) + E(t+h) - 2 E(t)) / h^2 at the interior sample points.
    pub second_differences: Vec<f64>,
    pub min_second_difference: f64,
    /// All second differences vanish to round-off.
    pub degenerate: bool,
}

impl fmt::Display for ConvexityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "min second difference {:.6e}", self.min_second_difference)?;
        if self.degenerate {
            write!(f, " (degenerate: energy constant along the segment)")?;
        }
        Ok(())
    }
}

/// Energy along the segment between two pairs with equal boundary values.
pub fn convexity_witness(a: &StreamPair, b: &StreamPair, bernoulli: &BernoulliSpec) -> Result<ConvexityWitness> {
    a.periodic_f.same_grid(&b.periodic_f)?;
    let lin_equal = a.linear_f.iter().zip(&b.linear_f).chain(a.linear_g.iter().zip(&b.linear_g)).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + u.abs()));
    let wall_gap = a.periodic_f.sub(&b.periodic_f)?.boundary_max_abs().max(a.periodic_g.sub(&b.periodic_g)?.boundary_max_abs());
    let scale = 1.0 + a.periodic_f.max_abs().max(a.periodic_g.max_abs()).max(b.periodic_f.max_abs()).max(b.periodic_g.max_abs());
    if !lin_equal || wall_gap > 1e-10 * scale {
        return Err(Error::BoundaryMismatch);
    }
    let m = CONVEXITY_POINTS - 1;
    let mut energies = Vec::with_capacity(CONVEXITY_POINTS);
    for i in 0..=m {
        let (wa, wb) = ((m - i) as f64 / m as f64, i as f64 / m as f64);
        let mix = |u: &ScalarField3, v: &ScalarField3| u.zip_map(v, |p, q| wa * p + wb * q);
        let pair = StreamPair::new(a.linear_f, a.linear_g, mix(&a.periodic_f, &b.periodic_f)?, mix(&a.periodic_g, &b.periodic_g)?)?;
        energies.push(energy(&pair, bernoulli)?);
    }
    let h = 1.0 / m as f64;
    let second_differences: Vec<f64> = energies.windows(3).map(|w| ((w[0] + w[2]) - 2.0 * w[1]) / (h * h)).collect();
    let min_second_difference = second_differences.iter().copied().fold(f64::INFINITY, f64::min);
    let e_scale = energies.iter().fold(0.0f64, |s, e| s.max(e.abs()));
    let degenerate = second_differences.iter().all(|d| d.abs() * h * h <= 64.0 * f64::EPSILON * (1.0 + e_scale));
    Ok(ConvexityWitness { energies, second_differences, min_second_difference, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TameSample {
    pub index: usize,
    pub rhs_hr: f64,
    pub rhs_h1: f64,
    pub solution_hr: f64,
    /// ||(F, G)||_r / (||(mu, nu)||_r + ||(mu, nu)||_1 K).
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct TameProbe {
    pub r: usize,
    /// K = ||(f, g)||_{r+4} + ||H''(f, g)||_{C^r} + 1 of the background.
    pub background_term: f64,
    pub samples: Vec<TameSample>,
    /// Right-hand sides skipped because they vanish.
    pub excluded: usize,
    /// Smallest C fitting every sample.
    pub constant: f64,
}

impl TameProbe {
    pub fn csv(&self) -> String {
        let mut s = String::from("sample,rhs_hr,rhs_h1,solution_hr,ratio\n");
        for t in &self.samples {
            let _ = writeln!(s, "{},{:.12e},{:.12e},{:.12e},{:.12e}", t.index, t.rhs_hr, t.rhs_h1, t.solution_hr, t.ratio);
        }
        s
    }
}

impl fmt::Display for TameProbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r={} samples={} excluded={} K={:.6e} C={:.6e}", self.r, self.samples.len(), self.excluded, self.background_term, self.constant)
    }
}

/// Measures the smallest C in ||(F,G)||_r <= C ||rhs||_r + C ||rhs||_1 K over
/// the given right-hand sides, solving at the operator's eps.
pub fn tame_probe(op: &LinearizedOperator, r: usize, rhs: &[FieldPair]) -> Result<TameProbe> {
    if !(1..=2).contains(&r) {
        return Err(Error::Invariant { name: "tame order r in {1, 2}", detail: format!("r = {r}") });
    }
    let bg = op.background().periodic_pair();
    let mut k = sobolev_norm(&bg, r + 4)? + 1.0;
    if let Some(h) = op.hessian() {
        k += h.iter().map(|c| max_norm_derivatives(c, r)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    }
    let mut solver = LinearSolver::default();
    let mut samples = Vec::new();
    let mut excluded = 0;
    for (index, b) in rhs.iter().enumerate() {
        let b = b.clone().with_clear_walls();
        let rhs_hr = sobolev_norm(&b, r)?;
        let rhs_h1 = sobolev_norm(&b, 1)?;
        if rhs_hr == 0.0 {
            excluded += 1;
            continue;
        }
        let sol = solver.solve(op, &b, None, 1e-10)?;
        let solution_hr = sobolev_norm(&sol.pair, r)?;
        samples.push(TameSample { index, rhs_hr, rhs_h1, solution_hr, ratio: solution_hr / (rhs_hr + rhs_h1 * k) });
    }
    let constant = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(TameProbe { r, background_term: k, samples, excluded, constant })
}

/// tame_probe on `count` seeded smooth random right-hand sides.
pub fn tame_probe_seeded(op: &LinearizedOperator, r: usize, count: usize, seed: u64) -> Result<TameProbe> {
    let mut sampler = SmoothSampler::new(seed);
    let rhs: Vec<FieldPair> = (0..count).map(|_| sampler.pair(op.grid())).collect();
    tame_probe(op, r, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::FourierTerm;
    use crate::grid::{Grid, GridSpec};
    use crate::problem::ProblemData;

    fn base_op(spec: GridSpec, eps: f64) -> LinearizedOperator {
        let g = Grid::new(spec).unwrap();
        LinearizedOperator::at_iterate(&ProblemData::base_state(&g), &FieldPair::zeros(&g), eps).unwrap()
    }

    #[test]
    fn bump_shape() {
        assert_eq!(plateau_bump(0.0, 2.0), 0.0);
        assert_eq!(plateau_bump(2.0, 2.0), 0.0);
        assert!((plateau_bump(0.5, 2.0) - 1.0).abs() < 1e-15);
        assert!((plateau_bump(1.3, 2.0) - 1.0).abs() < 1e-15);
        assert!(plateau_bump(0.2, 2.0) > 0.0 && plateau_bump(0.2, 2.0) < 1.0);
    }

    #[test]
    fn base_rayleigh_and_monotone_eps() {
        let spec = GridSpec::new(1.0, 1.0, 1.0, 16, 8, 8).unwrap();
        let r0 = rayleigh_min_op(&base_op(spec, 0.0)).unwrap();
        let h = spec.hx();
        // Lowest sine mode of the wide centered stencil.
        let sym = ((PI * h).sin() / h).powi(2);
        assert!(r0.min_quotient >= coercivity_constant(1.0, 1.0));
        assert!(r0.min_quotient <= sym * (1.0 + 1e-6), "{} vs {sym}", r0.min_quotient);
        assert!((r0.min_quotient - r0.eigenvalue).abs() <= 1e-8 * r0.eigenvalue);
        let r1 = rayleigh_min_op(&base_op(spec, 1.0)).unwrap();
        assert!(r1.min_quotient >= r0.min_quotient);
    }

    #[test]
    fn large_hessian_goes_indefinite() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 16, 8, 8).unwrap()).unwrap();
        let r = BernoulliSpec::lattice_matrix([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
        // H = a cos(2 pi f), |H''| = a (2 pi)^2.
        let a = 20.0 / (4.0 * PI * PI);
        let h = BernoulliSpec::new(0.0, 0.0, vec![FourierTerm { p: 1, q: 0, cos: a, sin: 0.0 }], r, [1.0, 1.0]).unwrap();
        let res = rayleigh_min(&StreamPair::linear(&g, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), &h, 0.0).unwrap();
        assert!(res.is_negative(), "{}", res.min_quotient);
    }

    #[test]
    fn noncoercive_sequence() {
        let op = base_op(GridSpec::new(1.0, 1.0, 1.0, 32, 4, 64).unwrap(), 0.0);
        let rows = noncoercive_probe(&op, &[2, 4, 8, 16]).unwrap();
        let b0 = rows[0].b_value;
        for r in &rows {
            assert!((r.b_value - b0).abs() <= 1e-10 * b0);
        }
        assert!(rows.windows(2).all(|w| w[1].quotient_h1 < w[0].quotient_h1));
        let slope = loglog_slope(&rows.iter().map(|r| (r.n as f64, r.quotient_h1)).collect::<Vec<_>>());
        assert!((slope + 2.0).abs() <= 0.2, "{slope}");
        assert!(matches!(noncoercive_probe(&op, &[32]), Err(Error::BeyondNyquist { n: 32, nyquist: 32 })));
    }

    #[test]
    fn simplicity_examples() {
        let s = simplicity_check_gradients([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!(s.passes && s.value == 2.0);
        let s = simplicity_check_gradients([0.0, 2.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!(!s.passes && s.value == 8.0);
        let l = s.lambda_fix.unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        assert!(simplicity_check_gradients([0.0, 2.0 * l, 0.0], [0.0, 0.0, l]).unwrap().passes);
        assert!(matches!(simplicity_check_gradients([0.0, 1.0, 0.0], [0.0, 2.0, 0.0]), Err(Error::DegenerateVelocity(_))));
    }

    #[test]
    fn convexity_identical_is_degenerate() {
        let g = Grid::cube(8).unwrap();
        let p = StreamPair::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], SmoothSampler::new(3).field(&g), ScalarField3::zeros(&g)).unwrap();
        let w = convexity_witness(&p, &p, &BernoulliSpec::zero()).unwrap();
        assert!(w.degenerate);
        let q = StreamPair::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], ScalarField3::constant(&g, 1.0), ScalarField3::zeros(&g)).unwrap();
        assert!(matches!(convexity_witness(&p, &q, &BernoulliSpec::zero()), Err(Error::BoundaryMismatch)));
    }

    #[test]
    fn tame_probe_excludes_zero() {
        let op = base_op(GridSpec::cube(12).unwrap(), 0.0);
        let g = op.grid().clone();
        let mut s = SmoothSampler::new(1);
        let rhs = vec![FieldPair::zeros(&g), s.pair(&g), s.pair(&g)];
        let t = tame_probe(&op, 1, &rhs).unwrap();
        assert_eq!(t.excluded, 1);
        assert_eq!(t.samples.len(), 2);
        assert!(t.constant.is_finite() && t.constant > 0.0);
        assert!(tame_probe(&op, 3, &rhs).is_err());
    }
}
