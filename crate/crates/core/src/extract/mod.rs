//! Building (f, g) with grad f x grad g = v from a divergence-free velocity
//! with non-vanishing v1, by tracing streamlines back to the inflow plane.

pub mod gauge;
pub mod interp;
pub mod ode;

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{cross, divergence, ScalarField3, VectorField3};
use crate::grid::GridSpec;
use crate::problem::StreamPair;

pub use gauge::{gauge_transform, GaugeMap, GaugeTerm, TransportedBernoulli};
pub use interp::VelocityInterpolant;
pub use ode::{dopri5, OdeOptions};

/// |v1| below this fraction of max |v| counts as vanishing.
pub const V1_FLOOR: f64 = 1e-8;

/// Divergence above this multiple of max |v| is reported.
pub const DIVERGENCE_WARNING: f64 = 1e-6;

/// Backward characteristic through one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicTrace {
    pub origin: [f64; 3],
    /// Time from the plane x = 0 to the origin along the flow.
    pub t: f64,
    /// Landing coordinates on x = 0.
    pub y: f64,
    pub z: f64,
    pub steps: usize,
}

/// Streamline tracer over an interpolated velocity.
#[derive(Clone, Debug)]
pub struct Tracer {
    interp: VelocityInterpolant,
    sign: f64,
    pub options: OdeOptions,
}

fn check_one_signed(v1: &[f64], scale: f64) -> Result<(f64, f64)> {
    let (lo, hi) = v1.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let floor = V1_FLOOR * scale.max(1e-300);
    if lo > floor {
        Ok((1.0, lo))
    } else if hi < -floor {
        Ok((-1.0, -hi))
    } else if lo < -floor && hi > floor {
        Err(Error::SignChange(format!("v1 ranges over [{lo:e}, {hi:e}]")))
    } else {
        Err(Error::DegenerateVelocity(format!("min |v1| <= {floor:e} (v1 in [{lo:e}, {hi:e}])")))
    }
}

impl Tracer {
    pub fn new(v: &VectorField3, options: OdeOptions) -> Result<Self> {
        v.ensure_finite("velocity")?;
        let (sign, _) = check_one_signed(v.x.values(), v.max_abs())?;
        Ok(Tracer { interp: VelocityInterpolant::new(v), sign, options })
    }

    pub fn interpolant(&self) -> &VelocityInterpolant {
        &self.interp
    }

    fn rhs(&self, x: f64, s: &[f64; 3]) -> Result<[f64; 3]> {
        let w = self.interp.eval([x, s[0], s[1]]);
        if !(w[0] * self.sign > 0.0) {
            return Err(Error::SignChange(format!("v1 = {:e} at ({x}, {}, {})", w[0], s[0], s[1])));
        }
        Ok([w[1] / w[0], w[2] / w[0], 1.0 / w[0]])
    }

    /// Integrates the x-parametrised streamline from `point` down to x = 0.
    pub fn trace(&self, point: [f64; 3]) -> Result<CharacteristicTrace> {
        let l = self.interp.spec().length;
        if !(0.0..=l).contains(&point[0]) {
            return Err(Error::Invariant { name: "trace origin inside the channel", detail: format!("x = {}", point[0]) });
        }
        let (end, steps) = dopri5(|x, s| self.rhs(x, s), point[0], [point[1], point[2], 0.0], 0.0, &self.options)?;
        Ok(CharacteristicTrace { origin: point, t: -end[2], y: end[0], z: end[1], steps })
    }

    /// Forward integration from (0, Y, Z) back to the origin's x; returns the
    /// point reached and the elapsed time.
    pub fn reintegrate(&self, trace: &CharacteristicTrace) -> Result<([f64; 3], f64)> {
        let x1 = trace.origin[0];
        let (end, _) = dopri5(|x, s| self.rhs(x, s), 0.0, [trace.y, trace.z, 0.0], x1, &self.options)?;
        Ok(([x1, end[0], end[1]], end[2]))
    }
}

/// T, Y and Z for the backward streamline through `point`.
pub fn trace_invariants(v: &VectorField3, point: [f64; 3]) -> Result<CharacteristicTrace> {
    Tracer::new(v, OdeOptions::default())?.trace(point)
}

/// v1(0, Y, Z) = a(Y) b(Y, Z) with a the Z-average and alpha the mean of a.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxFactorization {
    pub alpha: f64,
    /// a at the y nodes.
    pub a: Vec<f64>,
    /// b at the (y, z) nodes, z fastest.
    pub b: Vec<f64>,
}

/// Factorises an x = 0 slice of v1 (index j * nz + k).
pub fn factorize_flux(spec: &GridSpec, v1_slice: &[f64]) -> Result<FluxFactorization> {
    let (ny, nz) = (spec.ny, spec.nz);
    if v1_slice.len() != ny * nz {
        return Err(Error::GridMismatch);
    }
    if v1_slice.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("flux slice"));
    }
    let scale = v1_slice.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    check_one_signed(v1_slice, scale)?;
    let a: Vec<f64> = v1_slice.chunks(nz).map(|row| row.iter().sum::<f64>() / nz as f64).collect();
    let b = v1_slice.iter().enumerate().map(|(n, x)| x / a[n / nz]).collect();
    let alpha = a.iter().sum::<f64>() / ny as f64;
    Ok(FluxFactorization { alpha, a, b })
}

/// Spectral antiderivatives F(Y) = int_0^Y a and G(Y, Z) = int_0^Z b(Y, .),
/// evaluated by trigonometric interpolation.
#[derive(Clone, Debug)]
pub struct FluxPotentials {
    pub alpha: f64,
    /// (k_p, a_p / (i k_p)) for p != 0 below Nyquist.
    f_modes: Vec<(f64, Complex64)>,
    /// (k_p, k_q, b_pq / (i k_q)) for q != 0 below Nyquist.
    g_modes: Vec<(f64, f64, Complex64)>,
}

fn wavenumbers(n: usize, period: f64) -> Vec<Option<f64>> {
    (0..n)
        .map(|j| {
            let s = GridSpec::signed_mode(j, n);
            if n % 2 == 0 && j == n / 2 {
                None
            } else {
                Some(2.0 * PI * s as f64 / period)
            }
        })
        .collect()
}

impl FluxPotentials {
    pub fn new(spec: &GridSpec, fac: &FluxFactorization) -> Self {
        let (ny, nz) = (spec.ny, spec.nz);
        let mut planner = rustfft::FftPlanner::<f64>::new();
        let fy = planner.plan_fft_forward(ny);
        let fz = planner.plan_fft_forward(nz);
        let ky = wavenumbers(ny, spec.period_y);
        let kz = wavenumbers(nz, spec.period_z);
        let mut a: Vec<Complex64> = fac.a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fy.process(&mut a);
        let f_modes = (1..ny).filter_map(|p| ky[p].map(|k| (k, a[p] / (ny as f64) / Complex64::new(0.0, k)))).collect();
        // 2-D transform of b: z first, then y.
        let mut b: Vec<Complex64> = fac.b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for row in b.chunks_mut(nz) {
            fz.process(row);
        }
        let mut g_modes = Vec::new();
        for q in 1..nz {
            let Some(kq) = kz[q] else { continue };
            let mut col: Vec<Complex64> = (0..ny).map(|j| b[j * nz + q]).collect();
            fy.process(&mut col);
            for (p, c) in col.iter().enumerate() {
                if let Some(kp) = ky[p] {
                    g_modes.push((kp, kq, c / ((ny * nz) as f64) / Complex64::new(0.0, kq)));
                }
            }
        }
        FluxPotentials { alpha: fac.alpha, f_modes, g_modes }
    }

    pub fn f(&self, y: f64) -> f64 {
        self.alpha * y + self.f_modes.iter().map(|(k, c)| (c * (Complex64::new(0.0, k * y).exp() - 1.0)).re).sum::<f64>()
    }

    pub fn g(&self, y: f64, z: f64) -> f64 {
        z + self
            .g_modes
            .iter()
            .map(|(kp, kq, c)| (c * Complex64::new(0.0, kp * y).exp() * (Complex64::new(0.0, kq * z).exp() - 1.0)).re)
            .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractReport {
    pub alpha: f64,
    pub min_abs_v1: f64,
    pub max_divergence: f64,
    pub divergence_warning: bool,
    /// ||grad f x grad g - v||_inf / max(1, ||v||_inf) of the result.
    pub roundtrip_error: f64,
    pub max_ode_steps: usize,
    pub tricubic: bool,
}

impl fmt::Display for ExtractReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha {:.12e}", self.alpha)?;
        writeln!(f, "min |v1| {:.6e}", self.min_abs_v1)?;
        writeln!(f, "max |div v| {:.6e}{}", self.max_divergence, if self.divergence_warning { " (warning: above tolerance)" } else { "" })?;
        writeln!(f, "max roundtrip error {:.6e}", self.roundtrip_error)?;
        writeln!(f, "max ode steps {}", self.max_ode_steps)?;
        writeln!(f, "interpolation {}", if self.tricubic { "tricubic" } else { "trilinear (fallback)" })
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub pair: StreamPair,
    pub factorization: FluxFactorization,
    pub potentials: FluxPotentials,
    /// (Y, Z, T) per node.
    pub landing: Vec<[f64; 3]>,
    pub report: ExtractReport,
}

/// (f, g) = (F(Y), G(Y, Z)) as a pair with linear parts (0, alpha, 0) and
/// (0, 0, 1).
pub fn extract_streams(v: &VectorField3) -> Result<Extraction> {
    extract_streams_with(v, OdeOptions::default())
}

pub fn extract_streams_with(v: &VectorField3, options: OdeOptions) -> Result<Extraction> {
    let grid = v.grid().clone();
    let spec = *grid.spec();
    let tracer = Tracer::new(v, options)?;
    let vmax = v.max_abs();
    let max_divergence = divergence(v)?.max_abs();
    let slice = &v.x.values()[..spec.slice_len()];
    let factorization = factorize_flux(&spec, slice)?;
    let potentials = FluxPotentials::new(&spec, &factorization);
    let nodes: Vec<[f64; 3]> = (0..spec.len())
        .map(|n| {
            let (i, r) = (n / spec.slice_len(), n % spec.slice_len());
            [spec.x(i), spec.y(r / spec.nz), spec.z(r % spec.nz)]
        })
        .collect();
    let traced: Vec<CharacteristicTrace> = nodes.par_iter().map(|&p| tracer.trace(p)).collect::<Result<_>>()?;
    let landing: Vec<[f64; 3]> = traced.iter().map(|t| [t.y, t.z, t.t]).collect();
    let pf: Vec<f64> = traced.par_iter().map(|t| potentials.f(t.y) - factorization.alpha * t.origin[1]).collect();
    let pg: Vec<f64> = traced.par_iter().map(|t| potentials.g(t.y, t.z) - t.origin[2]).collect();
    let pair = StreamPair::new(
        [0.0, factorization.alpha, 0.0],
        [0.0, 0.0, 1.0],
        ScalarField3::from_values(&grid, pf)?,
        ScalarField3::from_values(&grid, pg)?,
    )?;
    let roundtrip_error = verify_representation(&pair, v)?;
    let report = ExtractReport {
        alpha: factorization.alpha,
        min_abs_v1: v.x.values().iter().fold(f64::INFINITY, |m, x| m.min(x.abs())),
        max_divergence,
        divergence_warning: max_divergence > DIVERGENCE_WARNING * vmax.max(1.0),
        roundtrip_error,
        max_ode_steps: traced.iter().map(|t| t.steps).max().unwrap_or(0),
        tricubic: tracer.interpolant().tricubic,
    };
    Ok(Extraction { pair, factorization, potentials, landing, report })
}

/// ||grad f x grad g - v||_inf / max(1, ||v||_inf) over all nodes.
pub fn verify_representation(pair: &StreamPair, v: &VectorField3) -> Result<f64> {
    let w = cross(&pair.grad_f()?, &pair.grad_g()?)?;
    Ok(w.sub(v)?.max_abs() / v.max_abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid() -> std::sync::Arc<Grid> {
        Grid::new(GridSpec::new(1.0, 1.0, 1.0, 12, 16, 16).unwrap()).unwrap()
    }

    #[test]
    fn straight_and_tilted_streamlines() {
        let g = grid();
        let t = trace_invariants(&VectorField3::constant(&g, [1.0, 0.0, 0.0]), [0.4, 0.3, 0.7]).unwrap();
        assert!((t.t - 0.4).abs() < 1e-12 && (t.y - 0.3).abs() < 1e-12 && (t.z - 0.7).abs() < 1e-12);
        let t = trace_invariants(&VectorField3::constant(&g, [1.0, 0.25, 0.0]), [0.4, 0.3, 0.7]).unwrap();
        assert!((t.y - (0.3 - 0.25 * 0.4)).abs() < 1e-12 && (t.z - 0.7).abs() < 1e-12);
    }

    #[test]
    fn shear_trace() {
        let g = grid();
        let v = VectorField3::from_fn(&g, |_, y, _| [1.5 + 0.5 * (2.0 * PI * y).sin(), 0.0, 0.0]);
        let y0 = g.spec().y(3);
        let t = trace_invariants(&v, [0.6, y0, 0.25]).unwrap();
        assert!((t.t - 0.6 / (1.5 + 0.5 * (2.0 * PI * y0).sin())).abs() < 1e-10);
        assert!((t.y - y0).abs() < 1e-12 && (t.z - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sign_change_rejected() {
        let g = grid();
        let v = VectorField3::from_fn(&g, |_, y, _| [(2.0 * PI * y).sin(), 0.0, 0.0]);
        assert!(matches!(Tracer::new(&v, OdeOptions::default()), Err(Error::SignChange(_))));
    }

    #[test]
    fn factorizations() {
        let s = *grid().spec();
        let ones = vec![1.0; s.slice_len()];
        let f = factorize_flux(&s, &ones).unwrap();
        assert_eq!(f.alpha, 1.0);
        assert!(f.a.iter().all(|&x| x == 1.0) && f.b.iter().all(|&x| x == 1.0));
        let eps = 0.3;
        let sl: Vec<f64> = (0..s.slice_len()).map(|n| 1.0 + eps * (2.0 * PI * s.y(n / s.nz)).cos()).collect();
        let f = factorize_flux(&s, &sl).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-14);
        assert!(f.b.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let w1 = |y: f64| 2.0 + (2.0 * PI * y).sin();
        let w2 = |z: f64| 1.0 + 0.5 * (2.0 * PI * z).cos();
        let sl: Vec<f64> = (0..s.slice_len()).map(|n| w1(s.y(n / s.nz)) * w2(s.z(n % s.nz))).collect();
        let f = factorize_flux(&s, &sl).unwrap();
        for n in 0..s.slice_len() {
            assert!((f.a[n / s.nz] - w1(s.y(n / s.nz))).abs() < 1e-13);
            assert!((f.b[n] - w2(s.z(n % s.nz))).abs() < 1e-13);
        }
    }

    #[test]
    fn base_and_shear_extraction() {
        let g = grid();
        let e = extract_streams(&VectorField3::constant(&g, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(e.report.alpha, 1.0);
        assert!(e.pair.periodic_f.max_abs() < 1e-12 && e.pair.periodic_g.max_abs() < 1e-12);
        let v = VectorField3::from_fn(&g, |_, y, _| [1.5 + 0.5 * (2.0 * PI * y).sin(), 0.0, 0.0]);
        let e = extract_streams(&v).unwrap();
        assert!(e.report.roundtrip_error < 1e-10, "{}", e.report.roundtrip_error);
        // f = int_0^y w = 1.5 y + (1 - cos(2 pi y)) / (4 pi).
        let f = e.pair.total_f();
        let exact = ScalarField3::from_fn(&g, |_, y, _| 1.5 * y + (1.0 - (2.0 * PI * y).cos()) / (4.0 * PI));
        assert!(f.sub(&exact).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn corrupted_pair_detected() {
        let g = grid();
        let v = VectorField3::constant(&g, [1.0, 0.0, 0.0]);
        let corrupt = |c: fn(f64, f64) -> f64| {
            StreamPair::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], ScalarField3::zeros(&g), ScalarField3::from_fn(&g, |_, y, z| c(y, z))).unwrap()
        };
        // Adding a function of f = y to g is itself a gauge change.
        assert!(verify_representation(&corrupt(|y, _| 0.1 * (2.0 * PI * y).sin()), &v).unwrap() < 1e-12);
        assert!(verify_representation(&corrupt(|_, z| 0.1 * (2.0 * PI * z).sin()), &v).unwrap() >= 0.05);
        assert!(verify_representation(&StreamPair::linear(&g, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), &v).unwrap() < 1e-15);
    }
}
