//! Minimization of `E_λ` on the Nehari set `{Q_λ = 0}` through the reduced
//! functional `Ĵ(v) = E_λ(t2(v) v)` over nonnegative directions with `T(v) = 1`.
//!
//! `Ĵ` is defined only where the fiber map has roots, i.e. where
//! `λ1(v) <= λ`. Below the threshold where the minimizer leaves the interior
//! of that set it sits on the fold `{λ1(v) = λ}` (where `L = 0`), and the
//! descent treats the fold as an active constraint.

use std::sync::Arc;

use rayon::prelude::*;

use crate::descent::{descend, DescentOptions, SphereObjective};
use crate::error::{LabError, Result};
use crate::fiber::{fiber_roots, lambda1_of, LogLambda};
use crate::functionals::{
    energy_gradient_nodal, evaluate, source_scale, weak_residual, FunctionalValues, Integrals,
};
use crate::grid::{Field, RadialGrid};
use crate::pohozaev::{classify_values, Classification, DEFAULT_TOL_FLUX};

#[derive(Debug, Clone)]
pub struct NehariOptions {
    pub max_iter: usize,
    pub window: usize,
    pub rel_decrease_tol: f64,
    pub pg_tol: f64,
    pub tol_flux: f64,
}

impl Default for NehariOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, window: 50, rel_decrease_tol: 1e-11, pg_tol: 1e-7, tol_flux: DEFAULT_TOL_FLUX }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub lambda: f64,
    pub field: Field,
    pub vals: FunctionalValues,
    /// `(1/2n)|u'(R)|² R^n ω_{n-1}`
    pub flux: f64,
    /// Weak residual relative to the source-term norm `‖λ|u|^β‖`.
    pub grad_residual: f64,
    pub classification: Classification,
    pub energy_hat: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient: f64,
    /// The minimizing direction lies on the fold `λ1(v) = λ`.
    pub on_fold: bool,
}

impl SolutionRecord {
    /// Diagnostics for an arbitrary field at `λ` (no optimization).
    pub fn from_field(field: Field, lambda: f64, tol_flux: f64) -> Self {
        let vals = evaluate(&field, lambda);
        let flux = field.boundary_flux_term();
        let scale = source_scale(&field, lambda);
        let res = weak_residual(&field, lambda);
        let grad_residual = if scale > 0.0 { res / scale } else { res };
        let classification = classify_values(&vals, flux, field.grid().radius(), tol_flux);
        Self {
            lambda,
            energy_hat: vals.energy,
            vals,
            flux,
            grad_residual,
            classification,
            field,
            converged: true,
            iterations: 0,
            projected_gradient: 0.0,
            on_fold: false,
        }
    }

    /// Absolute weak residual.
    pub fn weak_residual(&self) -> f64 {
        weak_residual(&self.field, self.lambda)
    }
}

pub(crate) struct ReducedEnergy<'a> {
    pub grid: &'a RadialGrid,
    pub lambda: f64,
    pub spectral: LogLambda<'a>,
}

impl<'a> ReducedEnergy<'a> {
    pub(crate) fn new(grid: &'a RadialGrid, lambda: f64) -> Self {
        Self { grid, lambda, spectral: LogLambda { grid } }
    }

    pub(crate) fn t2(&self, v: &[f64]) -> Option<(f64, Integrals)> {
        let ints = Integrals::of(self.grid, v);
        let roots = fiber_roots(&ints, self.lambda, self.grid.params()).ok()?;
        roots.t2.map(|t| (t, ints))
    }
}

impl SphereObjective for ReducedEnergy<'_> {
    fn value(&self, v: &[f64]) -> Option<f64> {
        let (t, ints) = self.t2(v)?;
        let p = self.grid.params();
        Some(FunctionalValues::from_integrals(ints.scaled(t, p), self.lambda, p).energy)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let (t, _) = self.t2(v).expect("gradient requested at a feasible point");
        let u: Vec<f64> = v.iter().map(|x| t * x).collect();
        let mut g = energy_gradient_nodal(self.grid, &u, self.lambda);
        g.iter_mut().for_each(|x| *x *= t);
        g
    }

    fn scale(&self, v: &[f64]) -> f64 {
        self.t2(v).map_or(1.0, |(t, _)| t * t)
    }

    fn constraint_gradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        Some(self.spectral.log_gradient(v))
    }

    fn constraint_value(&self, v: &[f64]) -> Option<f64> {
        let (_, c1) = self.grid.params().fiber_constants();
        self.spectral.log_lambda(v).map(|l| l + c1.ln() - self.lambda.ln())
    }
}

/// `J(v) = E_λ(t2(v) v)`; `None` where the ray through `v` misses `M_λ`.
pub fn reduced_energy(field: &Field, lambda: f64) -> Option<f64> {
    ReducedEnergy::new(field.grid(), lambda).value(field.values())
}

/// Envelope gradient `t2 ∇E_λ(t2 v)` of [`reduced_energy`] as a density
/// (pairs with directions through the quadrature weights).
pub fn reduced_energy_gradient(field: &Field, lambda: f64) -> Result<Vec<f64>> {
    let grid = field.grid();
    let objective = ReducedEnergy::new(grid, lambda);
    if objective.t2(field.values()).is_none() {
        return Err(LabError::Infeasible { lambda, threshold: threshold_of(field) });
    }
    let mut g = objective.gradient(field.values());
    for (gi, w) in g.iter_mut().zip(grid.quad_weights()) {
        *gi /= w;
    }
    Ok(g)
}

/// Scales `field` onto `M_λ` by the larger fiber root; returns the scaled field and `t2`.
pub fn project_to_nehari(field: &Field, lambda: f64) -> Result<(Field, f64)> {
    let grid = field.grid();
    let ints = Integrals::of(grid, field.values());
    let roots = fiber_roots(&ints, lambda, grid.params())?;
    match roots.t2 {
        Some(t) => Ok((field.scaled(t), t)),
        None => Err(LabError::Infeasible { lambda, threshold: lambda1_of(&ints, grid.params())? }),
    }
}

fn threshold_of(field: &Field) -> f64 {
    let grid = field.grid();
    lambda1_of(&Integrals::of(grid, field.values()), grid.params()).unwrap_or(f64::INFINITY)
}

fn descent_options(opts: &NehariOptions) -> DescentOptions {
    DescentOptions {
        max_iter: opts.max_iter,
        window: opts.window,
        rel_decrease_tol: opts.rel_decrease_tol,
        pg_tol: opts.pg_tol,
        stop_below: None,
    }
}

/// Moves an infeasible start into `{λ1(v) < λ}` by descending `λ(v)`.
fn feasible_start(grid: &RadialGrid, lambda: f64, start: &Field, opts: &NehariOptions) -> Option<Vec<f64>> {
    let (_, c1) = grid.params().fiber_constants();
    let target = (lambda / c1).ln() - 1e-6;
    let dopts = DescentOptions {
        max_iter: opts.max_iter,
        window: opts.window,
        rel_decrease_tol: 1e-10,
        pg_tol: 1e-7,
        stop_below: Some(target),
    };
    let out = descend(grid, &LogLambda { grid }, start.values(), &dopts)?;
    (out.value <= target).then_some(out.v)
}

/// Minimizes `Ĵ` from `init` (default: the bump `1 - (r/R)²`).
///
/// An unconverged run is reported as `NotConverged` carrying the best record.
pub fn minimize(
    grid: &Arc<RadialGrid>,
    lambda: f64,
    init: Option<&Field>,
    opts: &NehariOptions,
) -> Result<SolutionRecord> {
    if !(lambda > 0.0) {
        return Err(LabError::Usage(format!("lambda must be positive, got {lambda}")));
    }
    let start = init.map_or_else(|| Field::bump(grid), |f| f.abs());
    let objective = ReducedEnergy::new(grid, lambda);
    let infeasible = || LabError::Infeasible { lambda, threshold: threshold_of(&start) };
    let mut v0 = start.values().to_vec();
    if objective.value(&v0).is_none() {
        v0 = feasible_start(grid, lambda, &start, opts).ok_or_else(infeasible)?;
    }
    let outcome = descend(grid, &objective, &v0, &descent_options(opts)).ok_or_else(infeasible)?;
    let (t, _) = objective.t2(&outcome.v).expect("descent iterates are feasible");
    let field = Field::new(grid, outcome.v.iter().map(|x| t * x).collect())?;
    let mut record = SolutionRecord::from_field(field, lambda, opts.tol_flux);
    record.converged = outcome.converged;
    record.iterations = outcome.iterations;
    record.projected_gradient = outcome.projected_gradient;
    record.on_fold = outcome.on_constraint;
    if record.converged {
        Ok(record)
    } else {
        Err(LabError::NotConverged {
            iterations: outcome.iterations,
            projected_gradient: outcome.projected_gradient,
            best: Some(Box::new(record)),
        })
    }
}

/// Keeps the best record of a `NotConverged` outcome; other errors pass through.
pub fn accept_best(res: Result<SolutionRecord>) -> Result<SolutionRecord> {
    match res {
        Err(e) => e.best_record().cloned().ok_or(e),
        ok => ok,
    }
}

/// Orders records by `energy_hat`, then `grad_residual`.
pub fn rank_records(records: &mut [SolutionRecord]) {
    records.sort_by(|a, b| {
        a.energy_hat
            .total_cmp(&b.energy_hat)
            .then(a.grad_residual.total_cmp(&b.grad_residual))
    });
}

/// Runs [`minimize`] from every start in parallel and returns all outcomes
/// ranked (unconverged runs keep their best record). Fails only if no start is feasible.
pub fn minimize_from_starts(
    grid: &Arc<RadialGrid>,
    lambda: f64,
    starts: &[Field],
    opts: &NehariOptions,
) -> Result<Vec<SolutionRecord>> {
    let results: Vec<Result<SolutionRecord>> = starts
        .par_iter()
        .map(|s| accept_best(minimize(grid, lambda, Some(s), opts)))
        .collect();
    let mut records = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if records.is_empty() {
        return Err(first_err.unwrap_or(LabError::Infeasible { lambda, threshold: f64::NAN }));
    }
    rank_records(&mut records);
    Ok(records)
}

/// Sequential warm-started solves; each entry carries its own outcome.
pub fn continuation_scan(
    grid: &Arc<RadialGrid>,
    lambdas: &[f64],
    opts: &NehariOptions,
) -> Vec<Result<SolutionRecord>> {
    let mut warm: Option<Field> = None;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut res = minimize(grid, lambda, warm.as_ref(), opts);
        if matches!(res, Err(LabError::Infeasible { .. })) && warm.is_some() {
            res = minimize(grid, lambda, None, opts);
        }
        let next = match &res {
            Ok(r) => Some(r.field.clone()),
            Err(e) => e.best_record().map(|r| r.field.clone()),
        };
        if next.is_some() {
            warm = next;
        }
        out.push(res);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamSet;

    #[test]
    fn projection_scale_matches_fiber_root() {
        let g = RadialGrid::new(ParamSet::new(0.1, 0.2, 4, 1.0).unwrap(), 128).unwrap();
        let f = Field::bump(&g);
        let lambda = 2.0 * threshold_of(&f);
        let (u, t) = project_to_nehari(&f, lambda).unwrap();
        let v = evaluate(&u, lambda);
        assert!(v.nehari.abs() <= 1e-8 * v.magnitude());
        assert!(v.fiber_curvature >= 0.0);
        let (u2, t2) = project_to_nehari(&u, lambda).unwrap();
        assert!((t2 - 1.0).abs() < 1e-8, "t={t} t2={t2}");
        assert!(u2.values().iter().zip(u.values()).all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs()));
    }

    #[test]
    fn infeasible_below_threshold() {
        let g = RadialGrid::new(ParamSet::new(0.1, 0.2, 4, 1.0).unwrap(), 128).unwrap();
        let f = Field::bump(&g);
        let lambda = 0.9 * threshold_of(&f);
        assert!(matches!(project_to_nehari(&f, lambda), Err(LabError::Infeasible { .. })));
    }
}
