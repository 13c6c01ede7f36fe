//! The nonlinear map F(f1, g1), the energy, pressure bookkeeping and the
//! physical verification residuals of a flow v = grad f x grad g.

use std::fmt;

use crate::bernoulli::BernoulliSpec;
use crate::error::{Error, Result};
use crate::field::{cross, cross3, curl, divergence, dot, gradient, integrate, ScalarField3, VectorField3};
use crate::pair::FieldPair;
use crate::problem::{ProblemData, StreamPair};

/// Rejection threshold for degenerate velocities, relative to the maximum.
pub const VELOCITY_FLOOR: f64 = 1e-6;

pub fn velocity(pair: &StreamPair) -> Result<VectorField3> {
    cross(&pair.grad_f()?, &pair.grad_g()?)
}

/// (mu, nu) = (-Div(grad g x v) + H_f, -Div(v x grad f) + H_g) for a total
/// pair, evaluated at every node. Wall rows use the one-sided stencil and are
/// not part of the discrete system.
pub fn residual_of_total(total: &StreamPair, bernoulli: &BernoulliSpec) -> Result<FieldPair> {
    let a = total.grad_f()?;
    let b = total.grad_g()?;
    let v = cross(&a, &b)?;
    let mut mu = divergence(&cross(&b, &v)?)?.scale(-1.0);
    let mut nu = divergence(&cross(&v, &a)?)?.scale(-1.0);
    if !bernoulli.is_zero() {
        let [_, hf, hg, ..] = bernoulli.jet_fields(&total.total_f(), &total.total_g())?;
        mu = mu.add(&hf)?;
        nu = nu.add(&hg)?;
    }
    Ok(FieldPair { f: mu, g: nu })
}

/// F(f1, g1) at every node. The iterate must vanish at both walls.
pub fn nonlinear_residual(iterate: &FieldPair, data: &ProblemData) -> Result<FieldPair> {
    iterate.same_grid(&data.boundary_perturbation.periodic_pair())?;
    iterate.ensure_admissible("iterate")?;
    residual_of_total(&data.total(iterate)?, &data.bernoulli)
}

/// The part of F that the discrete system constrains (wall rows zeroed).
pub fn system_residual(iterate: &FieldPair, data: &ProblemData) -> Result<FieldPair> {
    Ok(nonlinear_residual(iterate, data)?.with_clear_walls())
}

pub fn energy_density(total: &StreamPair, bernoulli: &BernoulliSpec) -> Result<ScalarField3> {
    let v = velocity(total)?;
    let mut e = dot(&v, &v)?.scale(0.5);
    if !bernoulli.is_zero() {
        let [h, ..] = bernoulli.jet_fields(&total.total_f(), &total.total_g())?;
        e = e.add(&h)?;
    }
    Ok(e)
}

/// Integral over one cell of |grad f x grad g|^2 / 2 + H(f, g).
pub fn energy(total: &StreamPair, bernoulli: &BernoulliSpec) -> Result<f64> {
    Ok(integrate(&energy_density(total, bernoulli)?))
}

/// A complete flow: total stream functions, velocity and pressure.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub pair: StreamPair,
    pub bernoulli: BernoulliSpec,
    pub grad_f: VectorField3,
    pub grad_g: VectorField3,
    pub v: VectorField3,
    pub p: ScalarField3,
    /// grad p = -grad |v|^2 / 2 + H_f grad f + H_g grad g (chain rule for H,
    /// since H(f, g) need not be periodic).
    pub grad_p: VectorField3,
    /// grad(H(f, g)) by the chain rule.
    pub grad_h: VectorField3,
}

impl FlowState {
    pub fn new(pair: StreamPair, bernoulli: BernoulliSpec) -> Result<Self> {
        let grad_f = pair.grad_f()?;
        let grad_g = pair.grad_g()?;
        let v = cross(&grad_f, &grad_g)?;
        let half_v2 = dot(&v, &v)?.scale(0.5);
        let [h, hf, hg, ..] = bernoulli.jet_fields(&pair.total_f(), &pair.total_g())?;
        let p = h.sub(&half_v2)?;
        let scale = |s: &ScalarField3, w: &VectorField3| -> Result<VectorField3> {
            VectorField3::new(s.mul(&w.x)?, s.mul(&w.y)?, s.mul(&w.z)?)
        };
        let grad_h = scale(&hf, &grad_f)?.add(&scale(&hg, &grad_g)?)?;
        let grad_p = grad_h.sub(&gradient(&half_v2)?)?;
        Ok(FlowState { pair, bernoulli, grad_f, grad_g, v, p, grad_p, grad_h })
    }

    pub fn from_solution(iterate: &FieldPair, data: &ProblemData) -> Result<Self> {
        FlowState::new(data.total(iterate)?, data.bernoulli.clone())
    }
}

/// p = -|v|^2 / 2 + H(f, g).
pub fn pressure(state: &FlowState) -> ScalarField3 {
    state.p.clone()
}

/// (v . grad) v + grad p.
pub fn momentum_residual(v: &VectorField3, grad_p: &VectorField3) -> Result<VectorField3> {
    v.same_grid(grad_p)?;
    let gx = gradient(&v.x)?;
    let gy = gradient(&v.y)?;
    let gz = gradient(&v.z)?;
    Ok(VectorField3::new(dot(v, &gx)?, dot(v, &gy)?, dot(v, &gz)?)?.add(grad_p)?)
}

pub fn euler_residual(state: &FlowState) -> Result<VectorField3> {
    momentum_residual(&state.v, &state.grad_p)
}

/// max |v . grad(H(f, g))|.
pub fn bernoulli_drift(state: &FlowState) -> Result<f64> {
    Ok(dot(&state.v, &state.grad_h)?.max_abs())
}

/// rot v = alpha v + beta v x grad f + gamma grad g x v.
pub fn vorticity_decomposition(state: &FlowState) -> Result<[ScalarField3; 3]> {
    let rot = curl(&state.v)?;
    let v2 = dot(&state.v, &state.v)?;
    let vmax = v2.max_abs().sqrt();
    let vmin = v2.values().iter().fold(f64::INFINITY, |m, &x| m.min(x)).sqrt();
    if !(vmin >= VELOCITY_FLOOR * vmax) || vmax == 0.0 {
        return Err(Error::DegenerateVelocity(format!("min |v| = {vmin:e}, max |v| = {vmax:e}")));
    }
    let ratio = |w: &VectorField3| -> Result<ScalarField3> { dot(&rot, w)?.zip_map(&v2, |a, b| a / b) };
    Ok([ratio(&state.v)?, ratio(&state.grad_g)?, ratio(&state.grad_f)?])
}

/// Reassembles alpha v + beta v x grad f + gamma grad g x v.
pub fn recompose_vorticity(state: &FlowState, coeffs: &[ScalarField3; 3]) -> Result<VectorField3> {
    let n = state.v.x.values().len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for m in 0..n {
        let v = state.v.at(m);
        let a = state.grad_f.at(m);
        let b = state.grad_g.at(m);
        let t1 = cross3(v, a);
        let t2 = cross3(b, v);
        let (al, be, ga) = (coeffs[0].values()[m], coeffs[1].values()[m], coeffs[2].values()[m]);
        for c in 0..3 {
            out[c][m] = al * v[c] + be * t1[c] + ga * t2[c];
        }
    }
    let grid = state.v.grid();
    let [x, y, z] = out;
    VectorField3::new(
        ScalarField3::from_values(grid, x)?,
        ScalarField3::from_values(grid, y)?,
        ScalarField3::from_values(grid, z)?,
    )
}

/// Physical health metrics of a state. "Interior" values exclude the wall
/// rows x = 0 and x = L, where the equations are not imposed.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub max_v_sq: f64,
    pub euler_interior: f64,
    pub euler_walls: f64,
    pub euler_l2: f64,
    pub divergence_interior: f64,
    pub divergence_walls: f64,
    pub beltrami_interior: f64,
    pub lamb_minus_grad_h_interior: f64,
    pub rot_max: f64,
    pub wall_flux_min: f64,
    pub wall_flux_max: f64,
    pub bernoulli_drift: f64,
    pub invariance_f: f64,
    pub invariance_g: f64,
    pub pressure_deviation: f64,
}

pub fn verify_state(state: &FlowState) -> Result<VerificationReport> {
    let res = euler_residual(state)?;
    let div = divergence(&state.v)?;
    let rot = curl(&state.v)?;
    let lamb = cross(&state.v, &rot)?;
    let spec = *state.v.spec();
    let s = spec.slice_len();
    let v1 = state.v.x.values();
    let walls = v1[..s].iter().chain(&v1[(spec.nx - 1) * s..]);
    let (wmin, wmax) = walls.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean_p = integrate(&state.p) / spec.volume();
    Ok(VerificationReport {
        max_v_sq: dot(&state.v, &state.v)?.max_abs(),
        euler_interior: res.max_abs_interior(),
        euler_walls: res.max_abs_walls(),
        euler_l2: dot(&res, &res)?.map(f64::sqrt).l2_norm(),
        divergence_interior: div.max_abs_interior(),
        divergence_walls: div.max_abs_walls(),
        beltrami_interior: lamb.max_abs_interior(),
        lamb_minus_grad_h_interior: lamb.add(&state.grad_h)?.max_abs_interior(),
        rot_max: rot.max_abs(),
        wall_flux_min: wmin,
        wall_flux_max: wmax,
        bernoulli_drift: bernoulli_drift(state)?,
        invariance_f: dot(&state.v, &state.grad_f)?.max_abs(),
        invariance_g: dot(&state.v, &state.grad_g)?.max_abs(),
        pressure_deviation: state.p.map(|p| p - mean_p).max_abs(),
    })
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "max |v|^2                      {:.6e}", self.max_v_sq)?;
        writeln!(f, "euler residual (interior max)  {:.6e}", self.euler_interior)?;
        writeln!(f, "euler residual (wall rows max) {:.6e}", self.euler_walls)?;
        writeln!(f, "euler residual (L2)            {:.6e}", self.euler_l2)?;
        writeln!(f, "div v (interior max)           {:.6e}", self.divergence_interior)?;
        writeln!(f, "div v (wall rows max)          {:.6e}", self.divergence_walls)?;
        writeln!(f, "|v x rot v| (interior max)     {:.6e}", self.beltrami_interior)?;
        writeln!(f, "|v x rot v + grad H| (int.)    {:.6e}", self.lamb_minus_grad_h_interior)?;
        writeln!(f, "|rot v| max                    {:.6e}", self.rot_max)?;
        writeln!(f, "wall flux v1 range             [{:.12}, {:.12}]", self.wall_flux_min, self.wall_flux_max)?;
        writeln!(f, "bernoulli drift                {:.6e}", self.bernoulli_drift)?;
        writeln!(f, "max |v . grad f|               {:.6e}", self.invariance_f)?;
        writeln!(f, "max |v . grad g|               {:.6e}", self.invariance_g)?;
        write!(f, "max |p - mean p|               {:.6e}", self.pressure_deviation)
    }
}
