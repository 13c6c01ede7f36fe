//! The Bernoulli function H(f, g) = c1 f + c2 g + H0(f, g), with H0 a
//! finite Fourier series periodic on the lattice generated by R P1 e1 and
//! R P2 e2. All derivatives are evaluated in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField3;

/// One real Fourier term `cos * cos(k.(f,g)) + sin * sin(k.(f,g))`, the real
/// form of a conjugate-symmetric pair of complex coefficients at +-(p, q).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub p: i64,
    pub q: i64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliSpec {
    pub c1: f64,
    pub c2: f64,
    pub terms: Vec<FourierTerm>,
    /// R = [[d2 fbar, d3 fbar], [d2 gbar, d3 gbar]].
    pub r: [[f64; 2]; 2],
    pub periods: [f64; 2],
    wavevectors: Vec<[f64; 2]>,
}

/// Value, gradient and Hessian of H at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HJet {
    pub value: f64,
    pub df: f64,
    pub dg: f64,
    pub dff: f64,
    pub dfg: f64,
    pub dgg: f64,
}

impl BernoulliSpec {
    pub fn new(c1: f64, c2: f64, terms: Vec<FourierTerm>, r: [[f64; 2]; 2], periods: [f64; 2]) -> Result<Self> {
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let scale = r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if !terms.is_empty() && det.abs() <= 1e-12 * scale * scale {
            return Err(Error::Invariant { name: "det R != 0", detail: format!("det R = {det:e}") });
        }
        for (name, v) in [("c1", c1), ("c2", c2)] {
            if !v.is_finite() {
                return Err(Error::Invariant { name: "finite Bernoulli data", detail: format!("{name} = {v}") });
            }
        }
        // Lattice basis columns l1 = P1 (R00, R10), l2 = P2 (R01, R11); dual
        // vectors k = 2 pi Lambda^{-T} (p, q).
        let lam = [[periods[0] * r[0][0], periods[1] * r[0][1]], [periods[0] * r[1][0], periods[1] * r[1][1]]];
        let ldet = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0];
        let wavevectors = terms
            .iter()
            .map(|t| {
                let (p, q) = (t.p as f64, t.q as f64);
                // Lambda^{-T} = (1/det) [[l11, -l10], [-l01, l00]]
                [
                    2.0 * PI * (lam[1][1] * p - lam[1][0] * q) / ldet,
                    2.0 * PI * (-lam[0][1] * p + lam[0][0] * q) / ldet,
                ]
            })
            .collect();
        Ok(BernoulliSpec { c1, c2, terms, r, periods, wavevectors })
    }

    pub fn zero() -> Self {
        BernoulliSpec::linear(0.0, 0.0)
    }

    pub fn linear(c1: f64, c2: f64) -> Self {
        BernoulliSpec { c1, c2, terms: Vec::new(), r: [[1.0, 0.0], [0.0, 1.0]], periods: [1.0, 1.0], wavevectors: Vec::new() }
    }

    /// R read off constant base gradients.
    pub fn lattice_matrix(grad_f: [f64; 3], grad_g: [f64; 3]) -> [[f64; 2]; 2] {
        [[grad_f[1], grad_f[2]], [grad_g[1], grad_g[2]]]
    }

    pub fn is_zero(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0 && self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn wavevectors(&self) -> &[[f64; 2]] {
        &self.wavevectors
    }

    pub fn jet(&self, f: f64, g: f64) -> HJet {
        let mut j = HJet { value: self.c1 * f + self.c2 * g, df: self.c1, dg: self.c2, ..HJet::default() };
        for (t, k) in self.terms.iter().zip(&self.wavevectors) {
            let phase = k[0] * f + k[1] * g;
            let (s, c) = phase.sin_cos();
            let val = t.cos * c + t.sin * s;
            let der = -t.cos * s + t.sin * c;
            j.value += val;
            j.df += der * k[0];
            j.dg += der * k[1];
            j.dff -= val * k[0] * k[0];
            j.dfg -= val * k[0] * k[1];
            j.dgg -= val * k[1] * k[1];
        }
        j
    }

    pub fn value(&self, f: f64, g: f64) -> f64 {
        self.jet(f, g).value
    }

    /// Evaluates H and its derivatives at every node of the total fields.
    pub fn jet_fields(&self, f: &ScalarField3, g: &ScalarField3) -> Result<[ScalarField3; 6]> {
        f.same_grid(g)?;
        let n = f.values().len();
        let mut out: [Vec<f64>; 6] = Default::default();
        for o in out.iter_mut() {
            o.reserve(n);
        }
        for (&a, &b) in f.values().iter().zip(g.values()) {
            let j = self.jet(a, b);
            for (o, v) in out.iter_mut().zip([j.value, j.df, j.dg, j.dff, j.dfg, j.dgg]) {
                o.push(v);
            }
        }
        let grid = f.grid();
        Ok(out.map(|v| ScalarField3::from_values(grid, v).expect("same length")))
    }

    /// (f, g, H) -> (lambda f, lambda g, lambda^4 H(./lambda, ./lambda)).
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        let l3 = lambda.powi(3);
        let l4 = lambda * l3;
        let terms = self.terms.iter().map(|t| FourierTerm { cos: l4 * t.cos, sin: l4 * t.sin, ..*t }).collect();
        let r = [[lambda * self.r[0][0], lambda * self.r[0][1]], [lambda * self.r[1][0], lambda * self.r[1][1]]];
        BernoulliSpec::new(l3 * self.c1, l3 * self.c2, terms, r, self.periods)
    }

    /// Max |H0''| over the lattice cell as an upper bound: sum of |coefficient| |k|^2.
    pub fn hessian_bound(&self) -> f64 {
        self.terms
            .iter()
            .zip(&self.wavevectors)
            .map(|(t, k)| t.cos.hypot(t.sin) * (k[0] * k[0] + k[1] * k[1]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BernoulliSpec {
        let terms = vec![FourierTerm { p: 1, q: 0, cos: 0.3, sin: -0.1 }, FourierTerm { p: 1, q: -2, cos: 0.05, sin: 0.2 }];
        BernoulliSpec::new(0.1, -0.2, terms, [[1.0, 0.3], [0.0, 1.0]], [1.0, 2.0]).unwrap()
    }

    #[test]
    fn lattice_periodicity() {
        let h = spec();
        let l1 = [1.0 * 1.0, 1.0 * 0.0];
        let l2 = [2.0 * 0.3, 2.0 * 1.0];
        for &(f, g) in &[(0.1, 0.7), (-1.3, 0.2)] {
            let base = h.jet(f, g);
            for l in [l1, l2] {
                let moved = h.jet(f + l[0], g + l[1]);
                assert!((moved.df - base.df).abs() < 1e-12);
                assert!((moved.dgg - base.dgg).abs() < 1e-12);
                let lin = h.c1 * l[0] + h.c2 * l[1];
                assert!((moved.value - base.value - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = spec();
        let (f, g, e) = (0.37, -0.81, 1e-5);
        let j = h.jet(f, g);
        assert!(((h.value(f + e, g) - h.value(f - e, g)) / (2.0 * e) - j.df).abs() < 1e-8);
        assert!(((h.value(f, g + e) - h.value(f, g - e)) / (2.0 * e) - j.dg).abs() < 1e-8);
        assert!(((h.jet(f + e, g).df - h.jet(f - e, g).df) / (2.0 * e) - j.dff).abs() < 1e-7);
        assert!(((h.jet(f, g + e).df - h.jet(f, g - e).df) / (2.0 * e) - j.dfg).abs() < 1e-7);
        assert!(((h.jet(f, g + e).dg - h.jet(f, g - e).dg) / (2.0 * e) - j.dgg).abs() < 1e-7);
    }

    #[test]
    fn rescaling_law() {
        let h = spec();
        let lambda = 1.1;
        let hs = h.rescaled(lambda).unwrap();
        let (f, g) = (0.4, 0.9);
        let expect = lambda.powi(4) * h.value(f / lambda, g / lambda);
        assert!((hs.value(f, g) - expect).abs() < 1e-12);
    }

    #[test]
    fn singular_lattice_rejected() {
        let terms = vec![FourierTerm { p: 1, q: 0, cos: 1.0, sin: 0.0 }];
        assert!(BernoulliSpec::new(0.0, 0.0, terms, [[1.0, 2.0], [0.5, 1.0]], [1.0, 1.0]).is_err());
    }
}
