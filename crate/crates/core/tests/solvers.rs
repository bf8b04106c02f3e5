use std::sync::{Arc, OnceLock};

use compacton_lab::constructions::{
    amplitude_factor, monotone_iterate, scale_compacton, scaled_lambda, weak_residual, MonotoneOptions,
};
use compacton_lab::fiber::{minimize_spectral, SpectralOptions, SpectralResult};
use compacton_lab::functionals::{energy_gradient, evaluate, pairing};
use compacton_lab::nehari::{continuation_scan, minimize, NehariOptions, SolutionRecord};
use compacton_lab::pohozaev::{
    classify, pohozaev_residual, scan_z, Classification, DEFAULT_SOLUTION_TOL, DEFAULT_TOL_FLUX,
};
use compacton_lab::shooting::UnitCompacton;
use compacton_lab::{Field, LabError, ParamSet, RadialGrid};

const N: usize = 257;

fn grid() -> Arc<RadialGrid> {
    RadialGrid::new(ParamSet::new(0.1, 0.2, 4, 1.0).unwrap(), N).unwrap()
}

fn spectral() -> &'static SpectralResult {
    static CELL: OnceLock<SpectralResult> = OnceLock::new();
    CELL.get_or_init(|| minimize_spectral(&grid(), &SpectralOptions::default()).unwrap())
}

fn solve(lambda: f64) -> SolutionRecord {
    minimize(&grid(), lambda, None, &NehariOptions::default()).unwrap()
}

#[test]
fn spectral_points_are_ordered() {
    let s = spectral();
    let (c0, c1) = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap().fiber_constants();
    assert!(0.0 < s.lambda1 && s.lambda1 < s.lambda0 && s.lambda0.is_finite());
    assert!((s.lambda1 / s.lambda0 - c1 / c0).abs() <= 4.0 * f64::EPSILON);
    assert!(s.converged && s.radial_only);
    assert!(s.start_values.iter().all(|&v| v >= s.inf_lambda));
}

#[test]
fn energy_vanishes_at_lambda0() {
    let rec = solve(spectral().lambda0);
    assert!(rec.energy_hat.abs() <= 1e-4 * rec.vals.dirichlet, "{}", rec.energy_hat);
}

#[test]
fn energy_negative_above_lambda0() {
    let rec = solve(1.2 * spectral().lambda0);
    assert!(rec.energy_hat < 0.0);
    assert!(rec.vals.pohozaev < 0.0);
    assert_eq!(classify(&rec, DEFAULT_TOL_FLUX), Classification::Regular);
}

#[test]
fn infeasible_below_lambda1() {
    let res = minimize(&grid(), 0.5 * spectral().lambda1, None, &NehariOptions::default());
    assert!(matches!(res, Err(LabError::Infeasible { .. })), "{res:?}");
}

#[test]
fn minimizer_with_nonpositive_pohozaev_is_a_solution() {
    let rec = solve(1.1 * spectral().lambda0);
    assert!(rec.vals.pohozaev <= 0.0);
    assert!(rec.grad_residual < 1e-6, "{}", rec.grad_residual);
    let r = pohozaev_residual(&rec, DEFAULT_SOLUTION_TOL).unwrap();
    assert!(r.abs() <= 1e-2 * rec.flux, "P + flux = {r:e}, flux = {:e}", rec.flux);
    assert!(rec.vals.nehari.abs() <= 1e-10 * rec.vals.magnitude());
    let q = pairing(&grid(), &energy_gradient(&rec.field, rec.lambda), rec.field.values());
    assert!((q - rec.vals.nehari).abs() <= 1e-8 * rec.vals.magnitude());
}

#[test]
fn pohozaev_residual_gates_non_solutions() {
    let g = grid();
    let bump = Field::bump(&g);
    let rec = SolutionRecord::from_field(bump, 2.0, DEFAULT_TOL_FLUX);
    assert!(matches!(pohozaev_residual(&rec, DEFAULT_SOLUTION_TOL), Err(LabError::NotASolution { .. })));
    let zero = SolutionRecord::from_field(Field::zeros(&g), 2.0, DEFAULT_TOL_FLUX);
    assert_eq!(pohozaev_residual(&zero, DEFAULT_SOLUTION_TOL).unwrap(), 0.0);
    assert_eq!(weak_residual(&Field::zeros(&g), 2.0), 0.0);
}

#[test]
fn continuation_is_continuous_and_changes_sign() {
    let s = spectral();
    let step = 1e-3 * s.lambda0;
    let lambdas: Vec<f64> = (0..12).map(|i| s.lambda0 - 5.0 * step + i as f64 * step).collect();
    let recs: Vec<SolutionRecord> =
        continuation_scan(&grid(), &lambdas, &NehariOptions::default()).into_iter().map(Result::unwrap).collect();
    let slopes: Vec<f64> = recs.windows(2).map(|w| (w[1].energy_hat - w[0].energy_hat).abs() / step).collect();
    let max_slope = slopes.iter().copied().fold(0.0, f64::max);
    let mean_b = recs.iter().map(|r| r.vals.source).sum::<f64>() / recs.len() as f64;
    // dÊ/dλ = -B/(1+β) on the minimizing branch
    assert!(max_slope <= 2.0 * mean_b / 1.2, "slopes {slopes:?}");
    assert!(recs.first().unwrap().energy_hat > 0.0 && recs.last().unwrap().energy_hat < 0.0);

    let single = continuation_scan(&grid(), &[lambdas[7]], &NehariOptions::default()).pop().unwrap().unwrap();
    let direct = solve(lambdas[7]);
    assert_eq!(single.field, direct.field);
}

#[test]
fn z_scan_rows() {
    let s = spectral();
    let scan = scan_z(&grid(), 1.002 * s.lambda1, 1.3 * s.lambda0, 12, &NehariOptions::default());
    assert_eq!(scan.rows.len(), 12);
    let first = &scan.rows[0];
    assert!(first.pohozaev() > 0.0 && !first.in_z(), "P={}", first.pohozaev());
    for row in scan.rows.iter().filter(|r| r.lambda >= s.lambda0) {
        assert!(row.in_z(), "lambda {}", row.lambda);
    }
    for row in &scan.rows {
        let rec = row.record.as_ref().unwrap();
        if rec.vals.pohozaev <= 0.0 {
            assert!(rec.vals.fiber_curvature > 0.0);
        }
    }
    assert_eq!(scan.sign_changes.len(), 1);
}

#[test]
fn classification_bands() {
    let g = grid();
    let unit = UnitCompacton::compute(g.params(), 1e-3).unwrap();
    let (f, lambda) = unit.on_grid(&g, 1.0).unwrap();
    let rec = SolutionRecord::from_field(f, lambda, DEFAULT_TOL_FLUX);
    assert_eq!(rec.classification, Classification::NonRegular);
    let mut mid = rec.clone();
    mid.flux = 5.0 * DEFAULT_TOL_FLUX * rec.vals.dirichlet / g.radius();
    assert_eq!(classify(&mid, DEFAULT_TOL_FLUX), Classification::Indeterminate);
}

#[test]
fn scaled_compacton_examples() {
    let g = grid();
    let p = *g.params();
    assert!((amplitude_factor(2.0, &p) - 2f64.powf(-2.0 / 0.9)).abs() < 1e-15);
    assert!((amplitude_factor(2.0, &p) - 0.2143).abs() < 1e-4);
    assert!((scaled_lambda(1.0, 2.0, &p) - 1.1665).abs() < 1e-4);

    let unit = UnitCompacton::compute(&p, 1e-3).unwrap();
    let (f, lambda) = unit.on_grid(&g, 1.0).unwrap();
    let src = SolutionRecord::from_field(f, lambda, DEFAULT_TOL_FLUX);
    assert_eq!(scale_compacton(&src, 1.0, DEFAULT_TOL_FLUX).unwrap(), src);

    let s2 = scale_compacton(&src, 2.0, DEFAULT_TOL_FLUX).unwrap();
    let last_positive = |f: &Field| f.values().iter().rposition(|&v| v > 0.0).unwrap();
    let (r_src, r_s2) = (g.node_radii()[last_positive(&src.field)], g.node_radii()[last_positive(&s2.field)]);
    assert!((r_s2 - 0.5 * r_src).abs() <= g.h(), "{r_src} {r_s2}");
    assert_eq!(s2.classification, Classification::NonRegular);

    let regular = solve(1.2 * spectral().lambda0);
    assert!(matches!(scale_compacton(&regular, 2.0, DEFAULT_TOL_FLUX), Err(LabError::NotCompacton { .. })));
    assert!(matches!(scale_compacton(&src, 0.5, DEFAULT_TOL_FLUX), Err(LabError::Usage(_))));
}

#[test]
fn monotone_iteration_from_a_z_solution() {
    let g = grid();
    let lambda0 = 1.01 * spectral().lambda0;
    let sub = solve(lambda0);
    assert!(sub.vals.pohozaev < 0.0);
    let opts = MonotoneOptions::default();
    let out = monotone_iterate(&g, 1.05 * lambda0, &sub.field, &opts).unwrap();
    assert!(out.min_margin_over_sub >= -opts.tol);
    assert!(out.max_increase <= opts.tol);
    assert!(out.weak_residual <= 10.0 * opts.tol);
    assert!(out.record.field.values()[..N - 1].iter().all(|&v| v > 0.0));
    assert!(out.record.field.boundary_derivative() < 0.0);
    assert_eq!(out.record.classification, Classification::Regular);
    let v = evaluate(&out.record.field, out.record.lambda);
    assert!(v.pohozaev < 0.0);
}

#[test]
fn monotone_iteration_reports_lost_ordering() {
    let g = grid();
    let sub = solve(1.01 * spectral().lambda0);
    let opts = MonotoneOptions { shift: Some(0.0), ..MonotoneOptions::default() };
    match monotone_iterate(&g, 1.05 * sub.lambda, &sub.field, &opts) {
        Err(LabError::MonotonicityLost { iteration, max_violation, .. }) => {
            assert!(iteration >= 1 && max_violation > opts.tol);
        }
        Ok(out) => assert!(out.max_increase <= opts.tol),
        Err(e) => panic!("{e}"),
    }
}
