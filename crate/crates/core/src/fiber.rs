//! Fiber maps `t ↦ E_λ(tu)` and the spectral points `λ(u)`, `λ0(u)`, `λ1(u)`, `Λ0`, `Λ1`.
//!
//! Critical points of the fiber map are the positive roots of
//! `ψ(t) = t^{1-α}T - λ t^{β-α}B + A`, which is convex-then-increasing with a
//! single interior minimizer `t_min` available in closed form.

use std::sync::Arc;

use rayon::prelude::*;

use crate::descent::{descend, DescentOptions, SphereObjective};
use crate::error::{LabError, Result};
use crate::functionals::{signed_pow, Integrals};
use crate::grid::{Field, RadialGrid};
use crate::params::ParamSet;
use crate::random::FieldSampler;

/// Relative tolerance for declaring a double root.
pub const TOL_ROOT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberRoots {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t_min: f64,
    pub psi_min: f64,
}

impl FiberRoots {
    pub fn is_double(&self) -> bool {
        matches!((self.t1, self.t2), (Some(a), Some(b)) if a == b)
    }
}

fn check(ints: &Integrals) -> Result<()> {
    let Integrals { dirichlet: t, absorption: a, source: b } = *ints;
    if t > 0.0 && a > 0.0 && b > 0.0 && t.is_finite() && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(LabError::DegenerateField { t, a, b })
    }
}

/// `λ(u) = A^{(1-β)/(1-α)} T^{(β-α)/(1-α)} / B`, zero-homogeneous in `u`.
pub fn lambda_of(ints: &Integrals, params: &ParamSet) -> Result<f64> {
    check(ints)?;
    let (a, b) = (params.alpha(), params.beta());
    let ea = (1.0 - b) / (1.0 - a);
    let et = (b - a) / (1.0 - a);
    Ok(ints.absorption.powf(ea) * ints.dirichlet.powf(et) / ints.source)
}

pub fn lambda0_of(ints: &Integrals, params: &ParamSet) -> Result<f64> {
    Ok(params.fiber_constants().0 * lambda_of(ints, params)?)
}

pub fn lambda1_of(ints: &Integrals, params: &ParamSet) -> Result<f64> {
    Ok(params.fiber_constants().1 * lambda_of(ints, params)?)
}

/// `t0 = (2(β-α)A / ((1+α)(1-β)T))^{1/(1-α)}`: the zero-energy critical point at `λ = λ0(u)`.
pub fn t_zero(dirichlet: f64, absorption: f64, params: &ParamSet) -> Result<f64> {
    if !(dirichlet > 0.0 && absorption > 0.0) {
        return Err(LabError::DegenerateField { t: dirichlet, a: absorption, b: f64::NAN });
    }
    let (a, b) = (params.alpha(), params.beta());
    Ok((2.0 * (b - a) * absorption / ((1.0 + a) * (1.0 - b) * dirichlet)).powf(1.0 / (1.0 - a)))
}

fn psi(t: f64, ints: &Integrals, lambda: f64, params: &ParamSet) -> f64 {
    let (a, b) = (params.alpha(), params.beta());
    t.powf(1.0 - a) * ints.dirichlet - lambda * t.powf(b - a) * ints.source + ints.absorption
}

/// Geometric bisection between a point where `ψ > 0` and one where `ψ < 0`.
fn bisect_root(mut pos: f64, mut neg: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = (pos * neg).sqrt();
        if mid == pos || mid == neg {
            break;
        }
        if f(mid) > 0.0 {
            pos = mid;
        } else {
            neg = mid;
        }
        if (pos - neg).abs() <= 4.0 * f64::EPSILON * pos.max(neg) {
            break;
        }
    }
    if f(pos).abs() < f(neg).abs() {
        pos
    } else {
        neg
    }
}

pub fn fiber_roots(ints: &Integrals, lambda: f64, params: &ParamSet) -> Result<FiberRoots> {
    check(ints)?;
    if !(lambda > 0.0) {
        return Err(LabError::Usage(format!("fiber_roots needs lambda > 0, got {lambda}")));
    }
    let (a, b) = (params.alpha(), params.beta());
    let t_min = (lambda * (b - a) * ints.source / ((1.0 - a) * ints.dirichlet)).powf(1.0 / (1.0 - b));
    let f = |t: f64| psi(t, ints, lambda, params);
    let psi_min = f(t_min);
    let tol = TOL_ROOT * (ints.dirichlet + lambda * ints.source + ints.absorption);
    if psi_min > tol {
        return Ok(FiberRoots { t1: None, t2: None, t_min, psi_min });
    }
    if psi_min.abs() <= tol {
        return Ok(FiberRoots { t1: Some(t_min), t2: Some(t_min), t_min, psi_min });
    }
    let mut lo = t_min;
    while f(lo) <= 0.0 {
        lo *= 0.5;
    }
    let mut hi = t_min;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let t1 = bisect_root(lo, t_min, f);
    let t2 = bisect_root(hi, t_min, f);
    Ok(FiberRoots { t1: Some(t1), t2: Some(t2), t_min, psi_min })
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    /// Number of seeded random starts (the bump `1 - (r/R)²` is always added).
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub window: usize,
    pub rel_decrease_tol: f64,
    pub pg_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { starts: 8, seed: 42, max_iter: 20_000, window: 50, rel_decrease_tol: 1e-10, pg_tol: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub inf_lambda: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Minimizing direction, normalized to `T = 1`.
    pub argmin_field: Field,
    pub iterations: usize,
    pub converged: bool,
    /// Infimum searched over radial fields only.
    pub radial_only: bool,
    /// `λ(u)` reached from each start, bump first.
    pub start_values: Vec<f64>,
}

/// `log λ(v)`: the spectral objective, also the constraint of the Nehari problem.
pub(crate) struct LogLambda<'a> {
    pub grid: &'a RadialGrid,
}

impl LogLambda<'_> {
    pub(crate) fn log_lambda(&self, v: &[f64]) -> Option<f64> {
        let ints = Integrals::of(self.grid, v);
        lambda_of(&ints, self.grid.params()).ok().map(f64::ln)
    }

    pub(crate) fn log_gradient(&self, v: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        let p = grid.params();
        let (a, b) = (p.alpha(), p.beta());
        let ints = Integrals::of(grid, v);
        let ca = (1.0 - b) / (1.0 - a) * (1.0 + a) / ints.absorption;
        let ct = (b - a) / (1.0 - a) * 2.0 / ints.dirichlet;
        let cb = (1.0 + b) / ints.source;
        let sv = grid.apply_stiffness(v);
        let mut g: Vec<f64> = v
            .iter()
            .zip(grid.quad_weights())
            .zip(&sv)
            .map(|((x, w), s)| ct * s + w * (ca * signed_pow(*x, a) - cb * signed_pow(*x, b)))
            .collect();
        let n = g.len();
        g[n - 1] = 0.0;
        g
    }
}

impl SphereObjective for LogLambda<'_> {
    fn value(&self, v: &[f64]) -> Option<f64> {
        self.log_lambda(v)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        self.log_gradient(v)
    }
}

/// Minimizes `λ(u)` over nonnegative radial fields; `Λ0 = c0 inf λ`, `Λ1 = c1 inf λ`.
pub fn minimize_spectral(grid: &Arc<RadialGrid>, opts: &SpectralOptions) -> Result<SpectralResult> {
    let mut starts = vec![Field::bump(grid).into_values()];
    let sampler = FieldSampler::new(opts.seed, 1);
    starts.extend(sampler.positive_fields(grid, opts.starts).into_iter().map(Field::into_values));
    let dopts = DescentOptions {
        max_iter: opts.max_iter,
        window: opts.window,
        rel_decrease_tol: opts.rel_decrease_tol,
        pg_tol: opts.pg_tol,
        stop_below: None,
    };
    let objective = LogLambda { grid };
    let outcomes: Vec<_> = starts.par_iter().map(|s| descend(grid, &objective, s, &dopts)).collect();

    let mut best: Option<crate::descent::DescentOutcome> = None;
    let mut start_values = Vec::with_capacity(outcomes.len());
    let mut iterations = 0;
    for out in outcomes.into_iter().flatten() {
        start_values.push(out.value.exp());
        iterations += out.iterations;
        if best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    let best = best.ok_or(LabError::DegenerateField { t: 0.0, a: 0.0, b: 0.0 })?;
    let inf_lambda = best.value.exp();
    let (c0, c1) = grid.params().fiber_constants();
    Ok(SpectralResult {
        inf_lambda,
        lambda0: c0 * inf_lambda,
        lambda1: c1 * inf_lambda,
        argmin_field: Field::new(grid, best.v)?,
        iterations,
        converged: best.converged,
        radial_only: true,
        start_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParamSet {
        ParamSet::new(0.1, 0.2, 4, 1.0).unwrap()
    }

    fn ints(t: f64, a: f64, b: f64) -> Integrals {
        Integrals { dirichlet: t, absorption: a, source: b }
    }

    #[test]
    fn lambda_of_examples() {
        let p = params();
        assert!((lambda_of(&ints(1.0, 1.0, 1.0), &p).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambda_of(&ints(1.0, 1.0, 2.0), &p).unwrap() - 0.5).abs() < 1e-15);
        let a = lambda_of(&ints(0.3, 0.7, 0.9), &p).unwrap();
        let b = lambda_of(&ints(0.6, 1.4, 1.8), &p).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
        assert!(matches!(lambda_of(&ints(0.0, 1.0, 1.0), &p), Err(LabError::DegenerateField { .. })));
    }

    #[test]
    fn t_zero_examples() {
        let p = params();
        assert!((t_zero(1.0, 1.0, &p).unwrap() - 0.192775830).abs() < 1e-8);
        let ratio = 1.1 * 0.8 / 0.2;
        assert!((t_zero(1.0, ratio, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn roots_at_lambda_three() {
        let r = fiber_roots(&ints(1.0, 1.0, 1.0), 3.0, &params()).unwrap();
        assert!((r.t_min - 0.253278562).abs() < 1e-8);
        assert!((r.t1.unwrap() - (1.0f64 / 3.0).powi(10)).abs() < 1e-6);
        assert!((r.t2.unwrap() - 2.51).abs() < 0.01);
        assert!(r.t1.unwrap() < r.t_min && r.t_min < r.t2.unwrap());
    }

    #[test]
    fn double_root_at_c1_and_none_below() {
        let p = params();
        let (_, c1) = p.fiber_constants();
        let r = fiber_roots(&ints(1.0, 1.0, 1.0), c1, &p).unwrap();
        assert!(r.is_double());
        assert!(r.psi_min.abs() < 1e-12);
        let r = fiber_roots(&ints(1.0, 1.0, 1.0), 1.0, &p).unwrap();
        assert!(r.t1.is_none() && r.t2.is_none() && r.psi_min > 0.0);
    }
}
