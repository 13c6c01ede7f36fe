//! Outer nonlinear iterations: plain Newton and the smoothed Nash-Moser
//! scheme, with per-iteration reports.

use std::fmt;

use crate::error::{Error, Result};
use crate::euler::{nonlinear_residual, system_residual};
use crate::krylov::KrylovOptions;
use crate::linearized::LinearizedOperator;
use crate::linsolve::{continuation_solve, ContinuationSchedule, LinearSolver};
use crate::norms::{sobolev_norm, MAX_SOBOLEV_ORDER};
use crate::pair::FieldPair;
use crate::problem::ProblemData;
use crate::smoothing::{smooth, SmoothingParams};

/// Default admission threshold on the residual gate, calibrated between the
/// Beltrami data at delta = 0.01 (admitted) and delta = 0.5 (rejected) on a
/// 32^3 grid.
pub const DEFAULT_GATE: f64 = 4.0e4;

/// Halvings of a step that increases the residual before giving up.
pub const MAX_HALVINGS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct NashMoserParams {
    pub m: usize,
    pub n: usize,
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub s0: usize,
    pub d_star: usize,
    pub s_tilde: usize,
    pub theta0: f64,
    pub sigma: f64,
    /// Trust radius on the iterate in H^{d0}.
    pub r0: f64,
    pub max_outer: usize,
    /// Admission threshold compared with [`residual_gate`].
    pub gate: f64,
    /// eps schedule of each inner linear solve.
    pub schedule: ContinuationSchedule,
    pub krylov: KrylovOptions,
}

impl Default for NashMoserParams {
    fn default() -> Self {
        NashMoserParams {
            m: 2,
            n: 3,
            d0: 5,
            d1: 0,
            d2: 4,
            d3: 1,
            s0: 1,
            d_star: 0,
            s_tilde: 9,
            theta0: 4.0,
            sigma: 2.0,
            r0: 1.0,
            max_outer: 30,
            gate: DEFAULT_GATE,
            schedule: ContinuationSchedule::default(),
            krylov: KrylovOptions { rel_tol: 1e-10, abs_tol: 1e-15, max_iter: 400 },
        }
    }
}

impl NashMoserParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, detail: String| Err(Error::Invariant { name, detail });
        let d0_min = self.m + self.n / 2 + 1;
        if self.d0 < d0_min {
            return bad("d0 >= m + floor(n/2) + 1", format!("d0 = {} < {d0_min}", self.d0));
        }
        let s_min = (3 * self.m + 2 * self.d_star + self.n / 2 + 2)
            .max(self.m + self.d_star + self.d0 + 1)
            .max(self.m + self.d2 + self.d3 + 1);
        if self.s_tilde < s_min {
            return bad("s_tilde >= max(3m+2d*+floor(n/2)+2, m+d*+d0+1, m+d2+d3+1)", format!("s_tilde = {} < {s_min}", self.s_tilde));
        }
        if !(self.theta0 > 1.0) || !(self.sigma > 1.0) {
            return bad("theta0 > 1 and sigma > 1", format!("theta0 = {}, sigma = {}", self.theta0, self.sigma));
        }
        if !(self.r0 > 0.0) || !(self.gate > 0.0) {
            return bad("r0 > 0 and gate > 0", format!("r0 = {}, gate = {}", self.r0, self.gate));
        }
        if self.max_outer == 0 {
            return bad("max_outer > 0", "max_outer = 0".into());
        }
        self.schedule.validate()
    }

    /// Sobolev order of the admission metric, min(s_tilde - m, 6).
    pub fn gate_order(&self) -> usize {
        self.s_tilde.saturating_sub(self.m).min(MAX_SOBOLEV_ORDER)
    }

    /// Order of the trust-radius norm, min(d0, 6).
    pub fn trust_order(&self) -> usize {
        self.d0.min(MAX_SOBOLEV_ORDER)
    }

    /// Cutoff of outer step l.
    pub fn theta(&self, l: usize) -> f64 {
        self.theta0 * self.sigma.powi(l as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Newton,
    NashMoser,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::NashMoser => "nash-moser",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    TrustRadiusExceeded,
    MaxIterations,
    LinearFailure,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::TrustRadiusExceeded => "trust-radius-exceeded",
            Verdict::MaxIterations => "max-iterations",
            Verdict::LinearFailure => "linear-failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Smallest eps of the inner continuation.
    pub eps: f64,
    /// Smoothing cutoff; infinite for Newton.
    pub theta: f64,
    pub res_l2: f64,
    pub res_h1: f64,
    /// Residual in H^{min(s_tilde - m, 6)}.
    pub res_gate: f64,
    pub norm_h0: f64,
    pub norm_h1: f64,
    /// Iterate in H^{d0}.
    pub norm_h5: f64,
    /// Iterate in H^{min(s_tilde, 6)}.
    pub norm_top: f64,
    pub linear_iterations: usize,
    pub halvings: usize,
    pub indefinite: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    verdict: Option<Verdict>,
    /// Nash-Moser cutoff reached the grid resolution; later steps are Newton.
    pub degenerated_to_newton: Option<usize>,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "iter,eps,theta,res_l2,res_h1,norm_h5";

impl SolveReport {
    pub fn new(method: Method) -> Self {
        SolveReport { method, records: Vec::new(), verdict: None, degenerated_to_newton: None, notes: Vec::new() }
    }

    pub fn push(&mut self, record: IterationRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.iter < record.iter));
        self.records.push(record);
    }

    /// Sets the verdict. Later calls are ignored.
    pub fn set_verdict(&mut self, verdict: Verdict) {
        if self.verdict.is_none() {
            self.verdict = Some(verdict);
        }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.verdict
    }

    pub fn verdict_label(&self) -> &'static str {
        self.verdict.map_or("unfinished", Verdict::label)
    }

    pub fn converged(&self) -> bool {
        self.verdict == Some(Verdict::Converged)
    }

    /// Number of Newton-type updates taken.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.res_l2)
    }

    /// Comma-separated table with the fixed header [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{:e},{},{:e},{:e},{:e}\n", r.iter, r.eps, r.theta, r.res_l2, r.res_h1, r.norm_h5));
        }
        s
    }

    /// r_{k+1} / r_k^2 over consecutive records.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| w[1].res_l2 / (w[0].res_l2 * w[0].res_l2)).collect()
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method {}", self.method.label())?;
        for r in &self.records {
            writeln!(
                f,
                "iter {:>3}  eps {:.1e}  theta {:>8}  res_l2 {:.6e}  res_h1 {:.6e}  res_gate {:.6e}  norm_h0 {:.6e}  norm_h1 {:.6e}  norm_h5 {:.6e}  norm_top {:.6e}  krylov {}  halvings {}{}",
                r.iter,
                r.eps,
                r.theta,
                r.res_l2,
                r.res_h1,
                r.res_gate,
                r.norm_h0,
                r.norm_h1,
                r.norm_h5,
                r.norm_top,
                r.linear_iterations,
                r.halvings,
                if r.indefinite { "  indefinite" } else { "" }
            )?;
        }
        if let Some(l) = self.degenerated_to_newton {
            writeln!(f, "smoothing is the identity from iteration {l}: the scheme is Newton from there on")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "verdict {}", self.verdict_label())
    }
}

/// A finished solve: the unknown (f1, g1) and the report.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub pair: FieldPair,
    pub report: SolveReport,
}

/// ||F(0, 0)|| in H^{min(s_tilde - m, 6)}, over all nodes.
pub fn residual_gate(data: &ProblemData, params: &NashMoserParams) -> Result<f64> {
    let r = nonlinear_residual(&FieldPair::zeros(&data.grid), data)?;
    sobolev_norm(&r, params.gate_order())
}

struct Measured {
    res: FieldPair,
    res_l2: f64,
}

fn measure(w: &FieldPair, data: &ProblemData) -> Result<Measured> {
    let res = system_residual(w, data)?;
    let res_l2 = res.l2_norm();
    Ok(Measured { res, res_l2 })
}

fn record(iter: usize, theta: f64, eps: f64, w: &FieldPair, m: &Measured, params: &NashMoserParams, lin: (usize, usize, bool)) -> Result<IterationRecord> {
    Ok(IterationRecord {
        iter,
        eps,
        theta,
        res_l2: m.res_l2,
        res_h1: sobolev_norm(&m.res, 1)?,
        res_gate: sobolev_norm(&m.res, params.gate_order())?,
        norm_h0: sobolev_norm(w, 0)?,
        norm_h1: sobolev_norm(w, 1)?,
        norm_h5: sobolev_norm(w, params.trust_order())?,
        norm_top: sobolev_norm(w, params.s_tilde.min(MAX_SOBOLEV_ORDER))?,
        linear_iterations: lin.0,
        halvings: lin.1,
        indefinite: lin.2,
    })
}

fn fail(mut report: SolveReport, verdict: Verdict, note: String) -> Error {
    report.notes.push(note);
    report.set_verdict(verdict);
    Error::Solve { report: Box::new(report) }
}

/// Shared outer loop. `smoothing` maps an iteration index to a cutoff, or
/// `None` for plain Newton.
fn outer(data: &ProblemData, initial: &FieldPair, tol: f64, params: &NashMoserParams, method: Method) -> Result<SolveOutcome> {
    params.validate()?;
    data.validate()?;
    initial.same_grid(&FieldPair::zeros(&data.grid))?;
    initial.ensure_admissible("initial iterate")?;
    if !(tol > 0.0) {
        return Err(Error::Invariant { name: "tol > 0", detail: format!("tol = {tol}") });
    }
    let spec = *data.grid.spec();
    let mut report = SolveReport::new(method);
    let mut solver = LinearSolver::new(params.krylov);
    let mut w = initial.clone();
    let mut current = measure(&w, data)?;
    let last_eps = *params.schedule.eps_list.last().expect("validated schedule");
    report.push(record(0, f64::INFINITY, last_eps, &w, &current, params, (0, 0, false))?);
    for l in 0..params.max_outer {
        if current.res_l2 < tol {
            report.set_verdict(Verdict::Converged);
            return Ok(SolveOutcome { pair: w, report });
        }
        let smoothing = match method {
            Method::Newton => None,
            Method::NashMoser => {
                let s = SmoothingParams::new(params.theta(l));
                if s.is_identity_on(&spec) {
                    report.degenerated_to_newton.get_or_insert(l + 1);
                    None
                } else {
                    Some(s)
                }
            }
        };
        let background = match &smoothing {
            Some(s) => smooth(&w, s),
            None => w.clone(),
        };
        let op = LinearizedOperator::at_iterate(data, &background, 1.0)?;
        let mut schedule = params.schedule.clone();
        schedule.inner_tol = (1e-4f64).min(current.res_l2).max(1e-13);
        let rhs = current.res.scale(-1.0);
        let step = match continuation_solve(&op, &rhs, &schedule, &mut solver) {
            Ok(s) => s,
            Err(e) => return Err(fail(report, Verdict::LinearFailure, format!("linear solve at iteration {}: {e}", l + 1))),
        };
        let lin_iters: usize = step.trace.iter().map(|s| s.iterations).sum();
        let indefinite = step.trace.iter().any(|s| s.indefinite);
        let mut rho = match &smoothing {
            Some(s) => smooth(&step.pair, s),
            None => step.pair,
        };
        let mut halvings = 0;
        let (next, measured) = loop {
            let cand = w.add(&rho)?;
            let m = measure(&cand, data)?;
            if m.res_l2.is_finite() && m.res_l2 <= current.res_l2 {
                break (cand, m);
            }
            if halvings == MAX_HALVINGS {
                return Err(fail(
                    report,
                    Verdict::LinearFailure,
                    format!("step {} increased the residual after {MAX_HALVINGS} halvings ({:.3e} > {:.3e})", l + 1, m.res_l2, current.res_l2),
                ));
            }
            halvings += 1;
            rho = rho.scale(0.5);
        };
        let theta = smoothing.map_or(f64::INFINITY, |s| s.theta);
        let rec = record(l + 1, theta, last_eps, &next, &measured, params, (lin_iters, halvings, indefinite))?;
        let norm = rec.norm_h5;
        report.push(rec);
        w = next;
        current = measured;
        if norm > params.r0 {
            return Err(fail(
                report,
                Verdict::TrustRadiusExceeded,
                format!("||w||_H{} = {norm:.3e} exceeds r0 = {}", params.trust_order(), params.r0),
            ));
        }
    }
    if current.res_l2 < tol {
        report.set_verdict(Verdict::Converged);
        return Ok(SolveOutcome { pair: w, report });
    }
    Err(fail(report, Verdict::MaxIterations, format!("residual {:.3e} above tol {tol:.3e}", current.res_l2)))
}

/// Newton iteration w <- w + rho with L(w) rho = -F(w), from `initial`,
/// until ||F(w)||_{L^2} < tol.
pub fn newton_solve(data: &ProblemData, initial: &FieldPair, tol: f64, params: &NashMoserParams) -> Result<SolveOutcome> {
    outer(data, initial, tol, params, Method::Newton)
}

/// Nash-Moser iteration from zero: w <- w + S_theta(rho), with rho solving the
/// linearisation at S_theta(w), theta = theta0 sigma^l. Rejects data whose
/// residual gate exceeds `params.gate`.
pub fn nash_moser_solve(data: &ProblemData, tol: f64, params: &NashMoserParams) -> Result<SolveOutcome> {
    params.validate()?;
    let gate = residual_gate(data, params)?;
    if gate > params.gate {
        return Err(Error::GateRejected { value: gate, gate: params.gate });
    }
    outer(data, &FieldPair::zeros(&data.grid), tol, params, Method::NashMoser)
}
