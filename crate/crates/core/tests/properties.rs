//! Invariants over randomly drawn parameters and fields.

use std::sync::Arc;

use compacton_lab::constructions::{
    amplitude_factor, oracle_1d, scale_compacton, scaled_lambda, supersolution_bound,
};
use compacton_lab::fiber::{fiber_roots, lambda1_of, lambda_of};
use compacton_lab::functionals::{energy_gradient, evaluate, pairing, FunctionalValues, Integrals};
use compacton_lab::nehari::{project_to_nehari, SolutionRecord};
use compacton_lab::pohozaev::DEFAULT_TOL_FLUX;
use compacton_lab::random::FieldSampler;
use compacton_lab::shooting::UnitCompacton;
use compacton_lab::{Field, ParamSet, RadialGrid};
use proptest::prelude::*;

fn exponents() -> impl Strategy<Value = (f64, f64)> {
    (0.01f64..0.98, 0.01f64..0.99).prop_map(|(a, t)| (a, a + t * (0.995 - a))).prop_filter("alpha < beta", |(a, b)| a < b)
}

fn ball_params() -> impl Strategy<Value = ParamSet> {
    (exponents(), 1usize..7, 0.25f64..4.0).prop_map(|((a, b), n, r)| ParamSet::new(a, b, n, r).unwrap())
}

fn radial_field(grid: &Arc<RadialGrid>, c: [f64; 4]) -> Field {
    let r_max = grid.radius();
    Field::from_fn(grid, |r| {
        let s = r / r_max;
        (1.0 - s * s) * (c[0] + c[1] * (3.0 * s).cos() + c[2] * (5.0 * s).sin() + c[3] * s)
    })
    .unwrap()
}

fn positive_coefficients() -> impl Strategy<Value = [f64; 4]> {
    (1.0f64..3.0, -0.3f64..0.3, -0.3f64..0.3, -0.3f64..0.3).prop_map(|(a, b, c, d)| [a, b, c, d])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn c1_below_c0((a, b) in exponents()) {
        let (c0, c1) = ParamSet::new(a, b, 3, 1.0).unwrap().fiber_constants();
        prop_assert!(c1 < c0, "c1={c1} c0={c0}");
        prop_assert!(c1 > 0.0);
    }

    #[test]
    fn holder_exponents_are_conjugate((a, b) in exponents(), n in 3usize..12) {
        let h = ParamSet::new(a, b, n, 1.0).unwrap().holder_exponents().unwrap();
        prop_assert!(h.p > 1.0 && h.q > 1.0);
        prop_assert!((1.0 / h.p + 1.0 / h.q - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn theta_decreases_in_dimension((a, b) in exponents(), n in 1usize..40) {
        let lo = ParamSet::new(a, b, n, 1.0).unwrap();
        let hi = ParamSet::new(a, b, n + 1, 1.0).unwrap();
        prop_assert!(hi.theta() < lo.theta());
        let nc = lo.theta_critical_dimension();
        prop_assert_eq!(lo.theta() < 0.0, (n as f64) > nc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_tile_the_ball(p in ball_params(), n in 16usize..600) {
        let g = RadialGrid::new(p, n).unwrap();
        let vol: f64 = g.quad_weights().iter().sum();
        prop_assert!((vol - p.ball_volume()).abs() <= 1e-10 * p.ball_volume());
        prop_assert!(g.quad_weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn integrals_obey_scaling_laws(p in ball_params(), c in positive_coefficients(), t in 0.05f64..20.0) {
        let g = RadialGrid::new(p, 200).unwrap();
        let f = radial_field(&g, c);
        let ints = Integrals::of(&g, f.values());
        let direct = Integrals::of(&g, f.scaled(t).values());
        let law = ints.scaled(t, &p);
        for (x, y) in [(direct.dirichlet, law.dirichlet), (direct.absorption, law.absorption), (direct.source, law.source)] {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs());
        }
        let l = lambda_of(&ints, &p).unwrap();
        prop_assert!((lambda_of(&direct, &p).unwrap() - l).abs() <= 1e-12 * l);
    }

    #[test]
    fn pairing_with_the_field_is_nehari(p in ball_params(), c in positive_coefficients(), lambda in 0.1f64..5.0) {
        let g = RadialGrid::new(p, 300).unwrap();
        let f = radial_field(&g, c);
        let v = evaluate(&f, lambda);
        let q = pairing(&g, &energy_gradient(&f, lambda), f.values());
        prop_assert!((q - v.nehari).abs() <= 1e-8 * v.magnitude());
        prop_assert!((v.energy - v.pohozaev - v.dirichlet / p.dim() as f64).abs() <= 1e-12 * v.magnitude());
    }

    #[test]
    fn fiber_roots_bracket_the_minimum(c in positive_coefficients(), s in 1e-3f64..3.0) {
        let p = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap();
        let g = RadialGrid::new(p, 200).unwrap();
        let f = radial_field(&g, c);
        let ints = Integrals::of(&g, f.values());
        let lambda = lambda1_of(&ints, &p).unwrap() * (1.0 + s);
        let roots = fiber_roots(&ints, lambda, &p).unwrap();
        let (t1, t2) = (roots.t1.unwrap(), roots.t2.unwrap());
        prop_assert!(t1 < roots.t_min && roots.t_min < t2);
        for t in [t1, t2] {
            let v = FunctionalValues::from_integrals(ints.scaled(t, &p), lambda, &p);
            prop_assert!(v.nehari.abs() <= 1e-9 * v.magnitude());
        }
        let v2 = FunctionalValues::from_integrals(ints.scaled(t2, &p), lambda, &p);
        prop_assert!(v2.fiber_curvature > 0.0);
        let (u, t) = project_to_nehari(&f, lambda).unwrap();
        prop_assert_eq!(t, t2);
        prop_assert!(evaluate(&u, lambda).nehari.abs() <= 1e-9 * v2.magnitude());
    }

    #[test]
    fn lambda_map_is_multiplicative(lambda in 0.1f64..10.0, s1 in 1.0f64..10.0, s2 in 1.0f64..10.0, (a, b) in exponents()) {
        let p = ParamSet::new(a, b, 4, 1.0).unwrap();
        let composed = scaled_lambda(scaled_lambda(lambda, s1, &p), s2, &p);
        let direct = scaled_lambda(lambda, s1 * s2, &p);
        prop_assert!((composed - direct).abs() <= 8.0 * f64::EPSILON * direct);
        let product = scaled_lambda(lambda, s1, &p) * scaled_lambda(lambda, s2, &p) / lambda;
        prop_assert!((product - direct).abs() <= 8.0 * f64::EPSILON * direct);
        let amp = amplitude_factor(s1, &p) * amplitude_factor(s2, &p);
        let conditioning = 1.0 + 2.0 / (1.0 - a) * (s1 * s2).ln();
        prop_assert!((amp - amplitude_factor(s1 * s2, &p)).abs() <= 8.0 * f64::EPSILON * conditioning * amp);
    }

    #[test]
    fn supersolution_bound_is_strict(lambda in 1e-6f64..50.0, e_max in 1e-4f64..10.0, (a, b) in exponents()) {
        let p = ParamSet::new(a, b, 3, 1.0).unwrap();
        let m = supersolution_bound(&p, lambda, e_max);
        prop_assume!(m.is_finite());
        prop_assert!(m > 0.0);
        prop_assert!(m - lambda * m.powf(b) * e_max.powf(b) > 0.0);
    }
}

#[test]
fn supersolution_bound_extremes() {
    let p = ParamSet::new(0.01, 0.99, 3, 1.0).unwrap();
    let tiny = supersolution_bound(&p, 1e-6, 1e-4);
    assert!(tiny > 0.0 && tiny - 1e-6 * tiny.powf(0.99) * 1e-4f64.powf(0.99) > 0.0);
    assert_eq!(supersolution_bound(&p, 1e4, 10.0), f64::INFINITY);
}

#[test]
fn supersolution_bound_vanishes_with_lambda() {
    let p = ParamSet::new(0.1, 0.2, 3, 1.0).unwrap();
    let ms: Vec<f64> = [1e-1, 1e-3, 1e-6, 1e-9].iter().map(|&l| supersolution_bound(&p, l, 1.0 / 6.0)).collect();
    assert!(ms.windows(2).all(|w| w[1] < w[0]) && ms[3] < 1e-10, "{ms:?}");
}

#[test]
fn half_width_decreases_in_lambda() {
    let p = ParamSet::new(0.1, 0.2, 1, 1.0).unwrap();
    let widths: Vec<f64> =
        (0..20).map(|i| oracle_1d(&p, 0.5 + 0.25 * i as f64, 4).unwrap().half_width).collect();
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

fn compacton_source(n: usize) -> SolutionRecord {
    let p = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap();
    let g = RadialGrid::new(p, n).unwrap();
    let unit = UnitCompacton::compute(&p, 1e-3).unwrap();
    let (f, lambda) = unit.on_grid(&g, 1.0).unwrap();
    SolutionRecord::from_field(f, lambda, DEFAULT_TOL_FLUX)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn family_composes(k1 in 1usize..4, k2 in 1usize..4) {
        let src = compacton_source(1025);
        let (s1, s2) = (k1 as f64, k2 as f64);
        let two_step = scale_compacton(&scale_compacton(&src, s1, DEFAULT_TOL_FLUX).unwrap(), s2, DEFAULT_TOL_FLUX).unwrap();
        let one_step = scale_compacton(&src, s1 * s2, DEFAULT_TOL_FLUX).unwrap();
        let scale = one_step.field.max_abs();
        let diff = one_step.field.values().iter().zip(two_step.field.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(diff <= 1e-6 * scale, "diff {diff} scale {scale}");
        prop_assert!((two_step.lambda - one_step.lambda).abs() <= 8.0 * f64::EPSILON * one_step.lambda);
    }
}

#[test]
fn family_composes_for_fractional_factors() {
    let src = compacton_source(4097);
    for (s1, s2) in [(1.5, 2.5), (1.25, 1.6), (2.2, 1.7)] {
        let two = scale_compacton(&scale_compacton(&src, s1, DEFAULT_TOL_FLUX).unwrap(), s2, DEFAULT_TOL_FLUX).unwrap();
        let one = scale_compacton(&src, s1 * s2, DEFAULT_TOL_FLUX).unwrap();
        let diff = one.field.values().iter().zip(two.field.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-6 * one.field.max_abs(), "({s1},{s2}): {:e}", diff / one.field.max_abs());
    }
}

#[test]
fn seeded_fields_are_reproducible() {
    let p = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap();
    let g = RadialGrid::new(p, 128).unwrap();
    let a = FieldSampler::new(42, 0).positive_fields(&g, 10);
    let b = FieldSampler::new(42, 0).positive_fields(&g, 10);
    let c = FieldSampler::new(43, 0).positive_fields(&g, 10);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().all(|f| f.values()[..127].iter().all(|&v| v > 0.0)));
}
