//! Solving the linearised problem: preconditioned Krylov iteration at one
//! eps, and eps-continuation towards zero.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::krylov::{pcg, pminres, KrylovMethod, KrylovOptions, KrylovStats};
use crate::linearized::LinearizedOperator;
use crate::pair::FieldPair;
use crate::precond::BasePreconditioner;

/// Outcome of one linear solve.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub pair: FieldPair,
    pub epsilon: f64,
    pub stats: KrylovStats,
    /// Negative curvature was met and MINRES took over.
    pub indefinite: bool,
}

impl LinearSolution {
    /// Per-iteration log lines: iteration, residual, eps, Rayleigh estimate.
    pub fn log_lines(&self) -> Vec<String> {
        self.stats
            .history
            .iter()
            .map(|(it, res)| {
                format!(
                    "iter={it} residual={res:.6e} eps={:.3e} rayleigh={:.6e} method={}",
                    self.epsilon,
                    self.stats.rayleigh_estimate,
                    match self.stats.method {
                        KrylovMethod::Cg => "cg",
                        KrylovMethod::Minres => "minres",
                    }
                )
            })
            .collect()
    }
}

/// Linear solver with a cache of base-state preconditioners keyed by eps.
pub struct LinearSolver {
    pub options: KrylovOptions,
    cache: HashMap<(u64, [u64; 6]), Arc<BasePreconditioner>>,
}

impl Default for LinearSolver {
    fn default() -> Self {
        Self::new(KrylovOptions::default())
    }
}

impl LinearSolver {
    pub fn new(options: KrylovOptions) -> Self {
        LinearSolver { options, cache: HashMap::new() }
    }

    pub fn preconditioner(&mut self, op: &LinearizedOperator) -> Result<Arc<BasePreconditioner>> {
        let (a, b) = op.base_gradients();
        let key = (
            op.epsilon().to_bits(),
            [a[0].to_bits(), a[1].to_bits(), a[2].to_bits(), b[0].to_bits(), b[1].to_bits(), b[2].to_bits()],
        );
        if let Some(p) = self.cache.get(&key) {
            if Arc::ptr_eq(p.grid(), op.grid()) {
                return Ok(p.clone());
            }
        }
        let p = Arc::new(BasePreconditioner::new(op.grid(), a, b, op.epsilon())?);
        self.cache.insert(key, p.clone());
        Ok(p)
    }

    /// Solves L_eps (F, G) = rhs on interior rows to relative residual `tol`
    /// in L^2, starting from `initial` when given.
    pub fn solve(&mut self, op: &LinearizedOperator, rhs: &FieldPair, initial: Option<&FieldPair>, tol: f64) -> Result<LinearSolution> {
        rhs.ensure_finite("linear right-hand side")?;
        let rhs = rhs.clone().with_clear_walls();
        let pc = self.preconditioner(op)?;
        let rhs_norm = rhs.l2_norm();
        let apply = |u: &FieldPair| op.apply_raw(u);
        let precond = |u: &FieldPair| Ok(pc.apply(u));
        let (x0, r) = match initial {
            Some(x0) => {
                x0.ensure_admissible("initial guess")?;
                (x0.clone(), rhs.sub(&op.apply_raw(x0)?)?)
            }
            None => (FieldPair::zeros(rhs.grid()), rhs.clone()),
        };
        let r_norm = r.l2_norm();
        let opts = KrylovOptions { rel_tol: if r_norm > 0.0 { tol * rhs_norm / r_norm } else { 1.0 }, abs_tol: self.options.abs_tol, max_iter: self.options.max_iter };
        let (correction, stats, indefinite) = match pcg(&apply, &precond, &r, None, &opts) {
            Ok((x, s)) => (x, s, false),
            Err(Error::NegativeCurvature { .. }) => {
                let (x, s) = pminres(&apply, &precond, &r, &opts)?;
                (x, s, true)
            }
            Err(Error::LinearSolve(_)) => {
                let (x, s) = pminres(&apply, &precond, &r, &opts)?;
                (x, s, false)
            }
            Err(e) => return Err(e),
        };
        let mut stats = stats;
        stats.rhs_norm = rhs_norm;
        Ok(LinearSolution { pair: x0.add(&correction)?, epsilon: op.epsilon(), stats, indefinite })
    }
}

/// (F, G) with L_eps (F, G) = rhs, to relative tolerance `tol`.
pub fn solve_linearized(op: &LinearizedOperator, rhs: &FieldPair, tol: f64) -> Result<LinearSolution> {
    LinearSolver::default().solve(op, rhs, None, tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationSchedule {
    pub eps_list: Vec<f64>,
    pub inner_tol: f64,
    /// Abort when ||u_k - u_{k-1}|| exceeds this multiple of the previous
    /// difference.
    pub safeguard_ratio: f64,
}

impl ContinuationSchedule {
    pub fn new(eps_list: Vec<f64>, inner_tol: f64) -> Result<Self> {
        let s = ContinuationSchedule { eps_list, inner_tol, safeguard_ratio: 10.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::Invariant { name: "continuation schedule", detail: d });
        if self.eps_list.is_empty() {
            return bad("empty eps list".into());
        }
        if self.eps_list[0] > 1.0 {
            return bad(format!("first eps {} exceeds 1", self.eps_list[0]));
        }
        if self.eps_list.iter().any(|e| !(*e >= 0.0)) {
            return bad("eps must be non-negative".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps list is not strictly decreasing".into());
        }
        if !(self.inner_tol > 0.0) || !(self.safeguard_ratio > 1.0) {
            return bad("inner tolerance must be positive and safeguard ratio above 1".into());
        }
        Ok(())
    }
}

impl Default for ContinuationSchedule {
    /// {1, 1e-1, ..., 1e-6, 0}.
    fn default() -> Self {
        let mut eps: Vec<f64> = (0..=6).map(|k| 10f64.powi(-k)).collect();
        eps.push(0.0);
        ContinuationSchedule { eps_list: eps, inner_tol: 1e-10, safeguard_ratio: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    /// L^2 distance to the previous step's solution.
    pub change: f64,
    pub indefinite: bool,
}

#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub pair: FieldPair,
    pub trace: Vec<ContinuationStep>,
}

impl fmt::Display for ContinuationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.trace {
            writeln!(f, "eps={:.3e} iterations={} residual={:.6e} change={:.6e}{}", s.epsilon, s.iterations, s.residual_norm, s.change, if s.indefinite { " indefinite" } else { "" })?;
        }
        Ok(())
    }
}

/// Solves at each eps of the schedule, warm-starting from the previous
/// solution.
pub fn continuation_solve(op: &LinearizedOperator, rhs: &FieldPair, schedule: &ContinuationSchedule, solver: &mut LinearSolver) -> Result<ContinuationResult> {
    schedule.validate()?;
    let mut trace: Vec<ContinuationStep> = Vec::with_capacity(schedule.eps_list.len());
    let mut current: Option<FieldPair> = None;
    let floor = schedule.inner_tol * rhs.l2_norm();
    for &eps in &schedule.eps_list {
        let op_eps = op.with_epsilon(eps)?;
        let sol = solver.solve(&op_eps, rhs, current.as_ref(), schedule.inner_tol)?;
        let change = match &current {
            Some(prev) => sol.pair.sub(prev)?.l2_norm(),
            None => sol.pair.l2_norm(),
        };
        if let Some(last) = trace.last() {
            if trace.len() >= 2 && change > floor.max(schedule.safeguard_ratio * last.change) && change > 100.0 * floor {
                return Err(Error::ContinuationDiverged { eps, ratio: change / last.change });
            }
        }
        trace.push(ContinuationStep { epsilon: eps, iterations: sol.stats.iterations, residual_norm: sol.stats.residual_norm, change, indefinite: sol.indefinite });
        current = Some(sol.pair);
    }
    Ok(ContinuationResult { pair: current.expect("schedule is non-empty"), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField3;
    use crate::grid::Grid;
    use crate::problem::ProblemData;
    use std::f64::consts::PI;

    #[test]
    fn base_state_inverse_mode() {
        let g = Grid::cube(16).unwrap();
        let data = ProblemData::base_state(&g);
        let op = LinearizedOperator::at_iterate(&data, &FieldPair::zeros(&g), 0.0).unwrap();
        let u = FieldPair { f: ScalarField3::from_fn(&g, |x, y, _| (PI * x).sin() * (1.0 + 0.3 * (2.0 * PI * y).cos())), g: ScalarField3::zeros(&g) }.with_clear_walls();
        let rhs = op.apply(&u).unwrap();
        let sol = solve_linearized(&op, &rhs, 1e-12).unwrap();
        assert!(sol.pair.sub(&u).unwrap().max_abs() < 1e-9);
        let zero = solve_linearized(&op, &FieldPair::zeros(&g), 1e-12).unwrap();
        assert_eq!(zero.pair.max_abs(), 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(ContinuationSchedule::new(vec![1.0, 0.1, 0.0], 1e-8).is_ok());
        assert!(ContinuationSchedule::new(vec![1.0, 1.0], 1e-8).is_err());
        assert!(ContinuationSchedule::new(vec![2.0, 0.0], 1e-8).is_err());
        assert!(ContinuationSchedule::default().validate().is_ok());
    }
}
