//! Unimodular changes of stream functions (f, g) -> Phi(f, g) with
//! Phi = T + Phi0, Phi0 periodic on the value lattice, and the induced
//! transport of the Bernoulli function.

use std::f64::consts::PI;

use crate::bernoulli::BernoulliSpec;
use crate::error::{Error, Result};
use crate::field::ScalarField3;
use crate::problem::StreamPair;

/// Samples per lattice direction for the unimodularity check.
const DET_SAMPLES: usize = 16;

/// Tolerance of |det Phi' - 1| on the sample grid.
pub const DET_TOLERANCE: f64 = 1e-8;

/// One vector-valued Fourier term `cos * cos(k.(f,g)) + sin * sin(k.(f,g))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeTerm {
    pub p: i64,
    pub q: i64,
    pub cos: [f64; 2],
    pub sin: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMap {
    pub t: [[f64; 2]; 2],
    pub terms: Vec<GaugeTerm>,
    /// Lattice basis (columns) of the values of (f, g) under period shifts.
    pub lattice: [[f64; 2]; 2],
    wavevectors: Vec<[f64; 2]>,
}

impl GaugeMap {
    /// Map for pairs whose linear parts have (y, z) gradients R (rows f, g),
    /// on periods (P1, P2).
    pub fn new(t: [[f64; 2]; 2], terms: Vec<GaugeTerm>, r: [[f64; 2]; 2], periods: [f64; 2]) -> Result<Self> {
        let lam = [[periods[0] * r[0][0], periods[1] * r[0][1]], [periods[0] * r[1][0], periods[1] * r[1][1]]];
        let det = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0];
        if !terms.is_empty() && det.abs() < 1e-14 {
            return Err(Error::Invariant { name: "non-degenerate value lattice", detail: format!("det = {det:e}") });
        }
        // k = 2 pi Lambda^{-T} (p, q).
        let wavevectors = terms
            .iter()
            .map(|tm| {
                let (p, q) = (tm.p as f64, tm.q as f64);
                [2.0 * PI * (lam[1][1] * p - lam[1][0] * q) / det, 2.0 * PI * (-lam[0][1] * p + lam[0][0] * q) / det]
            })
            .collect();
        let map = GaugeMap { t, terms, lattice: lam, wavevectors };
        map.check_unimodular()?;
        Ok(map)
    }

    pub fn identity(r: [[f64; 2]; 2], periods: [f64; 2]) -> Self {
        GaugeMap::new([[1.0, 0.0], [0.0, 1.0]], Vec::new(), r, periods).expect("identity is unimodular")
    }

    /// R of a stream pair: (y, z) components of its linear gradients.
    pub fn lattice_of(pair: &StreamPair) -> [[f64; 2]; 2] {
        [[pair.linear_f[1], pair.linear_f[2]], [pair.linear_g[1], pair.linear_g[2]]]
    }

    pub fn apply(&self, f: f64, g: f64) -> [f64; 2] {
        let mut out = [self.t[0][0] * f + self.t[0][1] * g, self.t[1][0] * f + self.t[1][1] * g];
        for (tm, k) in self.terms.iter().zip(&self.wavevectors) {
            let th = k[0] * f + k[1] * g;
            let (s, c) = th.sin_cos();
            for r in 0..2 {
                out[r] += tm.cos[r] * c + tm.sin[r] * s;
            }
        }
        out
    }

    pub fn jacobian(&self, f: f64, g: f64) -> [[f64; 2]; 2] {
        let mut j = self.t;
        for (tm, k) in self.terms.iter().zip(&self.wavevectors) {
            let th = k[0] * f + k[1] * g;
            let (s, c) = th.sin_cos();
            for r in 0..2 {
                let d = -tm.cos[r] * s + tm.sin[r] * c;
                j[r][0] += d * k[0];
                j[r][1] += d * k[1];
            }
        }
        j
    }

    /// max |det Phi' - 1| over a sample grid of one lattice cell.
    pub fn unimodularity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..DET_SAMPLES {
            for b in 0..DET_SAMPLES {
                let (s, t) = (a as f64 / DET_SAMPLES as f64, b as f64 / DET_SAMPLES as f64);
                let f = self.lattice[0][0] * s + self.lattice[0][1] * t;
                let g = self.lattice[1][0] * s + self.lattice[1][1] * t;
                let j = self.jacobian(f, g);
                worst = worst.max((j[0][0] * j[1][1] - j[0][1] * j[1][0] - 1.0).abs());
            }
        }
        worst
    }

    pub fn check_unimodular(&self) -> Result<()> {
        let d = self.unimodularity_defect();
        if !(d <= DET_TOLERANCE) {
            return Err(Error::NotUnimodular(d));
        }
        Ok(())
    }

    /// Phi^{-1} by Newton's method from T^{-1}.
    pub fn invert(&self, target: [f64; 2]) -> Result<[f64; 2]> {
        let t = self.t;
        let dt = t[0][0] * t[1][1] - t[0][1] * t[1][0];
        let mut x = [(t[1][1] * target[0] - t[0][1] * target[1]) / dt, (-t[1][0] * target[0] + t[0][0] * target[1]) / dt];
        let scale = 1.0 + target[0].abs().max(target[1].abs());
        for _ in 0..60 {
            let y = self.apply(x[0], x[1]);
            let r = [y[0] - target[0], y[1] - target[1]];
            if r[0].abs().max(r[1].abs()) <= 1e-14 * scale {
                return Ok(x);
            }
            let j = self.jacobian(x[0], x[1]);
            let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            x[0] -= (j[1][1] * r[0] - j[0][1] * r[1]) / d;
            x[1] -= (-j[1][0] * r[0] + j[0][0] * r[1]) / d;
        }
        let y = self.apply(x[0], x[1]);
        let res = (y[0] - target[0]).abs().max((y[1] - target[1]).abs());
        if res <= 1e-10 * scale {
            Ok(x)
        } else {
            Err(Error::Invariant { name: "gauge map inversion", detail: format!("residual {res:e} at {target:?}") })
        }
    }
}

/// (f~, g~) = Phi(f, g). The map's lattice must be the pair's value lattice.
pub fn gauge_transform(pair: &StreamPair, map: &GaugeMap) -> Result<StreamPair> {
    map.check_unimodular()?;
    let spec = *pair.grid().spec();
    let r = GaugeMap::lattice_of(pair);
    let expect = [[spec.period_y * r[0][0], spec.period_z * r[0][1]], [spec.period_y * r[1][0], spec.period_z * r[1][1]]];
    if !map.terms.is_empty() && expect.iter().flatten().zip(map.lattice.iter().flatten()).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs())) {
        return Err(Error::Invariant { name: "gauge lattice matches the pair", detail: format!("map lattice {:?}, pair lattice {expect:?}", map.lattice) });
    }
    let (f, g) = (pair.total_f(), pair.total_g());
    let t = map.t;
    let lin = |r: usize| [0, 1, 2].map(|c| t[r][0] * pair.linear_f[c] + t[r][1] * pair.linear_g[c]);
    let (lf, lg) = (lin(0), lin(1));
    let n = f.values().len();
    let mut pf = vec![0.0; n];
    let mut pg = vec![0.0; n];
    for m in 0..n {
        let (i, rest) = (m / spec.slice_len(), m % spec.slice_len());
        let p = [spec.x(i), spec.y(rest / spec.nz), spec.z(rest % spec.nz)];
        let out = map.apply(f.values()[m], g.values()[m]);
        pf[m] = out[0] - (lf[0] * p[0] + lf[1] * p[1] + lf[2] * p[2]);
        pg[m] = out[1] - (lg[0] * p[0] + lg[1] * p[1] + lg[2] * p[2]);
    }
    let grid = pair.grid();
    StreamPair::new(lf, lg, ScalarField3::from_values(grid, pf)?, ScalarField3::from_values(grid, pg)?)
}

/// H o Phi^{-1}, the Bernoulli function of the transformed pair.
#[derive(Clone, Debug)]
pub struct TransportedBernoulli {
    pub map: GaugeMap,
    pub original: BernoulliSpec,
}

impl TransportedBernoulli {
    pub fn new(map: GaugeMap, original: BernoulliSpec) -> Self {
        TransportedBernoulli { map, original }
    }

    pub fn value(&self, f: f64, g: f64) -> Result<f64> {
        let x = self.map.invert([f, g])?;
        Ok(self.original.value(x[0], x[1]))
    }

    /// Samples H~(f~, g~) for a transformed pair.
    pub fn field(&self, pair: &StreamPair) -> Result<ScalarField3> {
        let (f, g) = (pair.total_f(), pair.total_g());
        let values = f.values().iter().zip(g.values()).map(|(&a, &b)| self.value(a, b)).collect::<Result<Vec<_>>>()?;
        ScalarField3::from_values(pair.grid(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::velocity;
    use crate::grid::Grid;

    fn pair() -> StreamPair {
        let g = Grid::cube(12).unwrap();
        let f1 = ScalarField3::from_fn(&g, |x, y, z| 0.05 * x * (1.0 - x) * (2.0 * PI * (y - z)).sin());
        let g1 = ScalarField3::from_fn(&g, |x, y, _| 0.04 * (PI * x).sin() * (2.0 * PI * y).cos());
        StreamPair::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], f1, g1).unwrap()
    }

    #[test]
    fn identity_and_shear() {
        let p = pair();
        let r = GaugeMap::lattice_of(&p);
        let id = gauge_transform(&p, &GaugeMap::identity(r, [1.0, 1.0])).unwrap();
        assert!(id.total_f().sub(&p.total_f()).unwrap().max_abs() == 0.0);
        let shear = GaugeMap::new([[1.0, 1.0], [0.0, 1.0]], Vec::new(), r, [1.0, 1.0]).unwrap();
        let q = gauge_transform(&p, &shear).unwrap();
        let dv = velocity(&q).unwrap().sub(&velocity(&p).unwrap()).unwrap().max_abs();
        assert!(dv < 1e-12, "{dv}");
    }

    #[test]
    fn periodic_part_and_transport() {
        let p = pair();
        let r = GaugeMap::lattice_of(&p);
        // Phi = (f + c sin(2 pi g), g) has det 1 exactly.
        let map = GaugeMap::new([[1.0, 0.0], [0.0, 1.0]], vec![GaugeTerm { p: 0, q: 1, cos: [0.0; 2], sin: [0.1, 0.0] }], r, [1.0, 1.0]).unwrap();
        let q = gauge_transform(&p, &map).unwrap();
        let h = BernoulliSpec::linear(0.3, -0.2);
        let tb = TransportedBernoulli::new(map.clone(), h.clone());
        let ht = tb.field(&q).unwrap();
        let (f, g) = (p.total_f(), p.total_g());
        for m in (0..f.values().len()).step_by(37) {
            assert!((ht.values()[m] - h.value(f.values()[m], g.values()[m])).abs() < 1e-12);
        }
        let bad = GaugeMap::new([[2.0, 0.0], [0.0, 1.0]], Vec::new(), r, [1.0, 1.0]);
        assert!(matches!(bad, Err(Error::NotUnimodular(_))));
    }
}
