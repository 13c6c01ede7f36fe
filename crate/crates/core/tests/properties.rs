use std::sync::Arc;

use proptest::prelude::*;

use twostream::bernoulli::{BernoulliSpec, FourierTerm};
use twostream::diagnostics::{convexity_witness, simplicity_check_gradients};
use twostream::dump::{read_field, write_field};
use twostream::euler::velocity;
use twostream::expr::{parse_expr, Constants};
use twostream::extract::gauge::{gauge_transform, GaugeMap};
use twostream::grid::{Grid, GridSpec};
use twostream::linearized::LinearizedOperator;
use twostream::pair::FieldPair;
use twostream::problem::{simplicity_value, StreamPair};
use twostream::sampling::SmoothSampler;
use twostream::smoothing::{smooth, SmoothingParams};

fn small_grid() -> Arc<Grid> {
    Grid::new(GridSpec::new(1.0, 1.0, 1.0, 10, 8, 8).unwrap()).unwrap()
}

fn background(seed: u64, amp: f64) -> StreamPair {
    let g = small_grid();
    let p = SmoothSampler::new(seed).pair(&g).scale(amp);
    StreamPair::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], p.f, p.g).unwrap()
}

fn bernoulli(c: f64) -> BernoulliSpec {
    let r = BernoulliSpec::lattice_matrix([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    BernoulliSpec::new(c, -0.5 * c, vec![FourierTerm { p: 1, q: 1, cos: c, sin: 0.3 * c }], r, [1.0, 1.0]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_form_and_action_are_symmetric(seed in 0u64..1000, amp in 0.0f64..0.1, c in -0.05f64..0.05, eps in 0.0f64..1.0) {
        let g = small_grid();
        let op = LinearizedOperator::new(&background(seed, amp), &bernoulli(c), eps).unwrap();
        let mut s = SmoothSampler::new(seed + 1);
        let (u, t) = (s.pair(&g), s.pair(&g));
        let (b_ut, b_tu) = (op.weak_form(&u, &t).unwrap(), op.weak_form(&t, &u).unwrap());
        let scale = op.weak_form(&u, &u).unwrap().abs().sqrt() * op.weak_form(&t, &t).unwrap().abs().sqrt() + 1e-300;
        prop_assert!((b_ut - b_tu).abs() <= 1e-12 * scale);
        let lu_t = op.apply(&u).unwrap().inner(&t).unwrap();
        let u_lt = u.inner(&op.apply(&t).unwrap()).unwrap();
        prop_assert!((lu_t - u_lt).abs() <= 1e-12 * scale);
    }

    #[test]
    fn rayleigh_quotient_grows_with_eps(seed in 0u64..1000, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let g = small_grid();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let op = LinearizedOperator::new(&background(seed, 0.05), &BernoulliSpec::zero(), lo).unwrap();
        let u = SmoothSampler::new(seed + 7).pair(&g);
        let q_lo = op.rayleigh_quotient(&u).unwrap();
        let q_hi = op.with_epsilon(hi).unwrap().rayleigh_quotient(&u).unwrap();
        prop_assert!(q_hi >= q_lo - 1e-12 * q_lo.abs());
    }

    #[test]
    fn simplicity_rescaling_is_consistent(a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0), t in 0.0f64..1.0) {
        let v = twostream::field::cross3(a, b);
        prop_assume!(v.iter().any(|c| c.abs() > 1e-6));
        let check = simplicity_check_gradients(a, b).unwrap();
        prop_assert_eq!(check.passes, check.value <= 2.0 * (1.0 + 1e-12));
        if let Some(lf) = check.lambda_fix {
            let lambda = t * lf;
            let scaled = simplicity_value(a.map(|c| lambda * c), b.map(|c| lambda * c));
            prop_assert!(scaled <= 2.0 * (1.0 + 1e-12));
            let exact = check.value * lf * lf;
            prop_assert!((exact - 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn convexity_witness_is_symmetric(s1 in 0u64..1000, s2 in 0u64..1000, c in -0.05f64..0.05) {
        let (a, b) = (background(s1, 0.05), background(s2, 0.05));
        let h = bernoulli(c);
        let ab = convexity_witness(&a, &b, &h).unwrap();
        let ba = convexity_witness(&b, &a, &h).unwrap();
        let mut rev = ba.second_differences.clone();
        rev.reverse();
        prop_assert_eq!(ab.second_differences, rev);
        prop_assert_eq!(ab.min_second_difference, ba.min_second_difference);
    }

    #[test]
    fn unimodular_shear_preserves_velocity(seed in 0u64..1000, k in -3i32..=3) {
        let pair = background(seed, 0.05);
        let map = GaugeMap::new([[1.0, k as f64], [0.0, 1.0]], Vec::new(), GaugeMap::lattice_of(&pair), [1.0, 1.0]).unwrap();
        let moved = gauge_transform(&pair, &map).unwrap();
        let dv = velocity(&moved).unwrap().sub(&velocity(&pair).unwrap()).unwrap().max_abs();
        prop_assert!(dv < 1e-10, "{}", dv);
    }

    #[test]
    fn expressions_evaluate_like_rust(a in -10.0f64..10.0, b in -10.0f64..10.0, c in 0.5f64..10.0, x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
        let mut k = Constants::new();
        k.insert("c".into(), c);
        let src = format!("{a:e}*x + ({b:e})*sin(2*pi*y) - exp(z)/c");
        let e = parse_expr(&src, &k).unwrap();
        let expect = a * x + b * (2.0 * std::f64::consts::PI * y).sin() - z.exp() / c;
        prop_assert!((e.eval(x, y, z) - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn smoothing_is_idempotent_and_keeps_walls(seed in 0u64..1000, theta in 1.0f64..12.0) {
        let g = small_grid();
        let u = SmoothSampler::new(seed).pair(&g);
        let p = SmoothingParams::new(theta);
        let once = smooth(&u, &p);
        let twice = smooth(&once, &p);
        prop_assert!(twice.sub(&once).unwrap().max_abs() <= 1e-12 * (1.0 + once.max_abs()));
        prop_assert_eq!(once.boundary_max_abs(), 0.0);
        prop_assert!(once.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn dumps_roundtrip_bitwise(seed in 0u64..1000) {
        let g = small_grid();
        let FieldPair { f, .. } = SmoothSampler::new(seed).pair(&g);
        let mut buf = Vec::new();
        write_field(&mut buf, &f, "f").unwrap();
        let back = read_field(&buf[..]).unwrap().into_field(&g).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}
