//! Recovering the x-x second derivatives of (F, G) from (mu, nu) and the
//! remaining derivatives, by solving the strong system pointwise.

use crate::error::{Error, Result};
use crate::field::{cross3, ScalarField3};
use crate::grid::dx;
use crate::linearized::LinearizedOperator;
use crate::pair::FieldPair;

/// Smallest admissible value of v1^2 + eps (|Ja|^2 + |Jb|^2) + eps^2.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Names of the twenty jet entries multiplied by a1..a20, in order.
pub const JET_NAMES: [&str; 20] = [
    "mu", "nu", "F12", "F13", "F22", "F23", "F33", "G12", "G13", "G22", "G23", "G33", "F1", "F2", "F3", "G1", "G2", "G3", "F", "G",
];

/// Frozen coefficients at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCoefficients {
    /// grad f and grad g.
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// Hessians of f and g.
    pub fh: [[f64; 3]; 3],
    pub gh: [[f64; 3]; 3],
    /// (H_ff, H_fg, H_gg).
    pub h: [f64; 3],
    pub eps: f64,
}

/// Second, first and zeroth derivatives of (F, G) at one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Jet {
    fh: [[f64; 3]; 3],
    gh: [[f64; 3]; 3],
    fd: [f64; 3],
    gd: [f64; 3],
    f: f64,
    g: f64,
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

fn trace(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lin(terms: &[(f64, [f64; 3])]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (c, v) in terms {
        for i in 0..3 {
            out[i] += c * v[i];
        }
    }
    out
}

/// Pointwise strong form (mu, nu) of the linearised operator.
fn strong(p: &PointCoefficients, j: &Jet) -> (f64, f64) {
    let (a, b) = (p.a, p.b);
    let (ga, gb) = (j.fd, j.gd);
    // rot v, rot(A x b) and rot(a x B) for gradient fields.
    let rot_v = lin(&[(trace(&p.gh), a), (-trace(&p.fh), b), (1.0, mat_vec(&p.fh, b)), (-1.0, mat_vec(&p.gh, a))]);
    let rot_ab = lin(&[(trace(&p.gh), ga), (-trace(&j.fh), b), (1.0, mat_vec(&j.fh, b)), (-1.0, mat_vec(&p.gh, ga))]);
    let rot_ab2 = lin(&[(trace(&j.gh), a), (-trace(&p.fh), gb), (1.0, mat_vec(&p.fh, gb)), (-1.0, mat_vec(&j.gh, a))]);
    let rot_w = lin(&[(1.0, rot_ab), (1.0, rot_ab2)]);
    let mu = dot(b, rot_w) + dot(gb, rot_v) - p.eps * trace(&j.fh) + p.h[0] * j.f + p.h[1] * j.g;
    let nu = -dot(a, rot_w) - dot(ga, rot_v) - p.eps * trace(&j.gh) + p.h[1] * j.f + p.h[2] * j.g;
    (mu, nu)
}

/// Unit jet for entry `idx` of [`JET_NAMES`] (entries 0 and 1 are mu, nu and
/// give the zero jet).
fn unit_jet(idx: usize) -> Jet {
    let mut j = Jet::default();
    let sym = |m: &mut [[f64; 3]; 3], r: usize, c: usize| {
        m[r][c] = 1.0;
        m[c][r] = 1.0;
    };
    match idx {
        2 => sym(&mut j.fh, 0, 1),
        3 => sym(&mut j.fh, 0, 2),
        4 => sym(&mut j.fh, 1, 1),
        5 => sym(&mut j.fh, 1, 2),
        6 => sym(&mut j.fh, 2, 2),
        7 => sym(&mut j.gh, 0, 1),
        8 => sym(&mut j.gh, 0, 2),
        9 => sym(&mut j.gh, 1, 1),
        10 => sym(&mut j.gh, 1, 2),
        11 => sym(&mut j.gh, 2, 2),
        12..=14 => j.fd[idx - 12] = 1.0,
        15..=17 => j.gd[idx - 15] = 1.0,
        18 => j.f = 1.0,
        19 => j.g = 1.0,
        _ => {}
    }
    j
}

/// v1^2 + eps (|(a2, a3)|^2 + |(b2, b3)|^2) + eps^2.
pub fn denominator(p: &PointCoefficients) -> f64 {
    let v1 = cross3(p.a, p.b)[0];
    let ja = p.a[1] * p.a[1] + p.a[2] * p.a[2];
    let jb = p.b[1] * p.b[1] + p.b[2] * p.b[2];
    v1 * v1 + p.eps * (ja + jb) + p.eps * p.eps
}

/// Coefficients (a1..a20 for F11, the same for G11) and the denominator at
/// one node. F11 = sum a_i jet_i with jet ordered as [`JET_NAMES`].
pub fn xx_coefficients(p: &PointCoefficients) -> Result<([f64; 20], [f64; 20], f64)> {
    let mut jf = Jet::default();
    jf.fh[0][0] = 1.0;
    let mut jg = Jet::default();
    jg.gh[0][0] = 1.0;
    let (m11, m21) = strong(p, &jf);
    let (m12, m22) = strong(p, &jg);
    let det = m11 * m22 - m12 * m21;
    let den = denominator(p);
    if !(den > DENOMINATOR_FLOOR) {
        return Err(Error::VanishingDenominator(den));
    }
    let inv = [[m22 / det, -m12 / det], [-m21 / det, m11 / det]];
    let mut cf = [0.0; 20];
    let mut cg = [0.0; 20];
    cf[0] = inv[0][0];
    cf[1] = inv[0][1];
    cg[0] = inv[1][0];
    cg[1] = inv[1][1];
    for idx in 2..20 {
        let (rm, rn) = strong(p, &unit_jet(idx));
        cf[idx] = -(inv[0][0] * rm + inv[0][1] * rn);
        cg[idx] = -(inv[1][0] * rm + inv[1][1] * rn);
    }
    Ok((cf, cg, den))
}

/// First and second derivatives of a sampled field (x by the SBP stencil,
/// y and z spectrally), plus a constant gradient.
struct Derivatives {
    d1: [Vec<f64>; 3],
    d2: [[Vec<f64>; 3]; 3],
}

fn derivatives(field: &ScalarField3, linear: [f64; 3]) -> Derivatives {
    let grid = field.grid();
    let spec = grid.spec();
    let v = field.values();
    let fx = dx(spec, v);
    let fxx = dx(spec, &fx);
    let mut yz = grid.yz_derivatives(v, &[(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]).into_iter();
    let mut xyz = grid.yz_derivatives(&fx, &[(1, 0), (0, 1)]).into_iter();
    let (fy, fz, fyy, fyz, fzz) = (yz.next().unwrap(), yz.next().unwrap(), yz.next().unwrap(), yz.next().unwrap(), yz.next().unwrap());
    let (fxy, fxz) = (xyz.next().unwrap(), xyz.next().unwrap());
    let shift = |mut w: Vec<f64>, c: f64| {
        w.iter_mut().for_each(|x| *x += c);
        w
    };
    Derivatives {
        d1: [shift(fx, linear[0]), shift(fy, linear[1]), shift(fz, linear[2])],
        d2: [[fxx, fxy.clone(), fxz.clone()], [fxy, fyy, fyz.clone()], [fxz, fyz, fzz]],
    }
}

/// (F11, G11) from (F, G), (mu, nu) and the operator's background and eps.
/// Requires the denominator to stay above [`DENOMINATOR_FLOOR`] everywhere.
pub fn reconstruct_xx(op: &LinearizedOperator, pair: &FieldPair, rhs: &FieldPair) -> Result<FieldPair> {
    pair.same_grid(rhs)?;
    let bg = op.background();
    let df = derivatives(&bg.periodic_f, bg.linear_f);
    let dg = derivatives(&bg.periodic_g, bg.linear_g);
    let uf = derivatives(&pair.f, [0.0; 3]);
    let ug = derivatives(&pair.g, [0.0; 3]);
    let n = pair.f.values().len();
    let mut out_f = vec![0.0; n];
    let mut out_g = vec![0.0; n];
    let mut min_den = f64::INFINITY;
    let hess = op.hessian();
    let at3 = |d: &[Vec<f64>; 3], m: usize| [d[0][m], d[1][m], d[2][m]];
    let at33 = |d: &[[Vec<f64>; 3]; 3], m: usize| [0, 1, 2].map(|r| [d[r][0][m], d[r][1][m], d[r][2][m]]);
    for m in 0..n {
        let p = PointCoefficients {
            a: at3(&df.d1, m),
            b: at3(&dg.d1, m),
            fh: at33(&df.d2, m),
            gh: at33(&dg.d2, m),
            h: hess.map_or([0.0; 3], |[a, b, c]| [a.values()[m], b.values()[m], c.values()[m]]),
            eps: op.epsilon(),
        };
        let (cf, cg, den) = match xx_coefficients(&p) {
            Ok(c) => c,
            Err(Error::VanishingDenominator(d)) => {
                min_den = min_den.min(d);
                continue;
            }
            Err(e) => return Err(e),
        };
        min_den = min_den.min(den);
        let jet = [
            rhs.f.values()[m],
            rhs.g.values()[m],
            uf.d2[0][1][m],
            uf.d2[0][2][m],
            uf.d2[1][1][m],
            uf.d2[1][2][m],
            uf.d2[2][2][m],
            ug.d2[0][1][m],
            ug.d2[0][2][m],
            ug.d2[1][1][m],
            ug.d2[1][2][m],
            ug.d2[2][2][m],
            uf.d1[0][m],
            uf.d1[1][m],
            uf.d1[2][m],
            ug.d1[0][m],
            ug.d1[1][m],
            ug.d1[2][m],
            pair.f.values()[m],
            pair.g.values()[m],
        ];
        out_f[m] = cf.iter().zip(&jet).map(|(c, j)| c * j).sum();
        out_g[m] = cg.iter().zip(&jet).map(|(c, j)| c * j).sum();
    }
    if !(min_den > DENOMINATOR_FLOOR) {
        return Err(Error::VanishingDenominator(min_den));
    }
    let grid = pair.grid();
    Ok(FieldPair { f: ScalarField3::from_values(grid, out_f)?, g: ScalarField3::from_values(grid, out_g)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::ProblemData;
    use std::f64::consts::PI;

    fn sample_point(eps: f64, curved: bool, h: bool) -> PointCoefficients {
        let c = if curved { 1.0 } else { 0.0 };
        PointCoefficients {
            a: [0.1, 0.9, -0.2],
            b: [0.05, 0.15, 1.1],
            fh: [[0.3 * c, 0.1 * c, -0.2 * c], [0.1 * c, 0.4 * c, 0.05 * c], [-0.2 * c, 0.05 * c, -0.1 * c]],
            gh: [[-0.2 * c, 0.3 * c, 0.1 * c], [0.3 * c, 0.1 * c, 0.0], [0.1 * c, 0.0, 0.25 * c]],
            h: if h { [0.7, -0.3, 0.2] } else { [0.0; 3] },
            eps,
        }
    }

    #[test]
    fn determinant_matches_closed_form() {
        for eps in [0.0, 0.3, 1.0] {
            let p = sample_point(eps, true, true);
            let mut jf = Jet::default();
            jf.fh[0][0] = 1.0;
            let mut jg = Jet::default();
            jg.gh[0][0] = 1.0;
            let (m11, m21) = strong(&p, &jf);
            let (m12, m22) = strong(&p, &jg);
            assert!((m11 * m22 - m12 * m21 - denominator(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn structural_zeros() {
        // a13..a18 multiply first derivatives and vanish when f'' = g'' = 0;
        // a19, a20 vanish when H'' = 0.
        let (cf, cg, _) = xx_coefficients(&sample_point(0.3, false, true)).unwrap();
        for i in 12..18 {
            assert!(cf[i].abs() < 1e-14 && cg[i].abs() < 1e-14);
        }
        let (cf, cg, _) = xx_coefficients(&sample_point(0.3, true, false)).unwrap();
        for i in 18..20 {
            assert!(cf[i].abs() < 1e-14 && cg[i].abs() < 1e-14);
        }
        let (cf, _, _) = xx_coefficients(&sample_point(0.3, true, true)).unwrap();
        assert!(cf[12..18].iter().any(|c| c.abs() > 1e-6));
    }

    #[test]
    fn coefficients_reproduce_the_jet() {
        let p = sample_point(0.3, true, true);
        let mut j = Jet::default();
        let vals = [0.4, -0.2, 0.3, 0.1, -0.5, 0.7, 0.2, -0.1, 0.6, 0.3, -0.4, 0.25, 0.15, -0.35, 0.45, 0.05, -0.6, 0.8];
        j.fh = [[1.3, vals[0], vals[1]], [vals[0], vals[2], vals[3]], [vals[1], vals[3], vals[4]]];
        j.gh = [[-0.7, vals[5], vals[6]], [vals[5], vals[7], vals[8]], [vals[6], vals[8], vals[9]]];
        j.fd = [vals[10], vals[11], vals[12]];
        j.gd = [vals[13], vals[14], vals[15]];
        j.f = vals[16];
        j.g = vals[17];
        let (mu, nu) = strong(&p, &j);
        let jet = [
            mu, nu, j.fh[0][1], j.fh[0][2], j.fh[1][1], j.fh[1][2], j.fh[2][2], j.gh[0][1], j.gh[0][2], j.gh[1][1], j.gh[1][2], j.gh[2][2], j.fd[0],
            j.fd[1], j.fd[2], j.gd[0], j.gd[1], j.gd[2], j.f, j.g,
        ];
        let (cf, cg, _) = xx_coefficients(&p).unwrap();
        let f11: f64 = cf.iter().zip(&jet).map(|(c, x)| c * x).sum();
        let g11: f64 = cg.iter().zip(&jet).map(|(c, x)| c * x).sum();
        assert!((f11 - 1.3).abs() < 1e-12 && (g11 + 0.7).abs() < 1e-12);
    }

    type Scalar = fn([f64; 3]) -> f64;

    fn fd_grad(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], h: f64) -> [f64; 3] {
        [0, 1, 2].map(|c| {
            let at = |t: f64| {
                let mut y = x;
                y[c] += t;
                f(y)
            };
            (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
        })
    }

    #[test]
    fn strong_form_matches_flux_divergence() {
        let f: Scalar = |x| x[1] + 0.2 * (x[0] + 0.3 * x[1]).sin() * x[2].cos();
        let g: Scalar = |x| x[2] + 0.1 * x[0] * x[0] * (x[1] - x[2]).cos();
        let uf: Scalar = |x| (1.3 * x[0]).sin() * (0.7 * x[1] + 0.2 * x[2]).cos();
        let ug: Scalar = |x| x[0] * (1.0 - x[0]) * (x[2] + 0.5 * x[1]).sin();
        let eps = 0.3;
        let x0 = [0.37, 0.21, 0.66];
        let flux = |x: [f64; 3], comp: usize| {
            let (a, b) = (fd_grad(&f, x, 1e-3), fd_grad(&g, x, 1e-3));
            let (pf, pg) = crate::linearized::linear_flux(a, b, cross3(a, b), eps, fd_grad(&uf, x, 1e-3), fd_grad(&ug, x, 1e-3));
            if comp == 0 { pf } else { pg }
        };
        let div = |comp: usize| -> f64 {
            (0..3).map(|c| fd_grad(&|y| flux(y, comp)[c], x0, 1e-2)[c]).sum()
        };
        let hess = |h: &dyn Fn([f64; 3]) -> f64| [0, 1, 2].map(|r| fd_grad(&|y| fd_grad(h, y, 1e-3)[r], x0, 1e-3));
        let p = PointCoefficients { a: fd_grad(&f, x0, 1e-3), b: fd_grad(&g, x0, 1e-3), fh: hess(&f), gh: hess(&g), h: [0.0; 3], eps };
        let j = Jet { fh: hess(&uf), gh: hess(&ug), fd: fd_grad(&uf, x0, 1e-3), gd: fd_grad(&ug, x0, 1e-3), f: uf(x0), g: ug(x0) };
        let (mu, nu) = strong(&p, &j);
        assert!((mu + div(0)).abs() < 1e-6, "{mu} {}", -div(0));
        assert!((nu + div(1)).abs() < 1e-6, "{nu} {}", -div(1));
    }

    #[test]
    fn vanishing_denominator() {
        let p = PointCoefficients { a: [1.0, 0.0, 0.0], b: [0.0, 0.0, 0.0], fh: [[0.0; 3]; 3], gh: [[0.0; 3]; 3], h: [0.0; 3], eps: 0.0 };
        assert!(matches!(xx_coefficients(&p), Err(Error::VanishingDenominator(_))));
    }

    #[test]
    fn single_x_mode_at_base() {
        let g = Grid::cube(32).unwrap();
        let data = ProblemData::base_state(&g);
        let op = LinearizedOperator::at_iterate(&data, &FieldPair::zeros(&g), 0.0).unwrap();
        let u = FieldPair { f: ScalarField3::from_fn(&g, |x, _, _| (PI * x).sin()), g: ScalarField3::zeros(&g) }.with_clear_walls();
        let rhs = op.apply(&u).unwrap();
        let rec = reconstruct_xx(&op, &u, &rhs).unwrap();
        let spec = *g.spec();
        let h = spec.hx();
        for i in 2..spec.nx - 2 {
            let exact = -PI * PI * (PI * spec.x(i)).sin();
            assert!((rec.f.at(i, 3, 5) - exact).abs() < 2.0 * PI.powi(4) * h * h / 6.0);
            assert!(rec.g.at(i, 3, 5).abs() < 1e-10);
        }
        let zero = reconstruct_xx(&op, &FieldPair::zeros(&g), &FieldPair::zeros(&g)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }
}
