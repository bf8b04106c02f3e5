//! Projected gradient descent on `{T(v) = 1, v >= 0}` in the discrete `H¹₀` metric.
//!
//! Gradients are Riesz representers `S⁻¹G` of the nodal gradient `G`; step
//! lengths are Barzilai-Borwein in that metric with Armijo backtracking.
//! Objectives may carry an inequality constraint `c(v) <= 0` (signalled by
//! `value` returning `None`); while the iterate sits on the constraint, the
//! outward component of the step is removed and infeasible trial points are
//! pulled back along `-∇c` by bisection.

use crate::grid::RadialGrid;

pub(crate) trait SphereObjective {
    fn value(&self, v: &[f64]) -> Option<f64>;
    /// Nodal gradient at a feasible `v`.
    fn gradient(&self, v: &[f64]) -> Vec<f64>;
    /// Magnitude of the objective near `v`; the gradient is divided by it.
    fn scale(&self, _v: &[f64]) -> f64 {
        1.0
    }
    /// Nodal gradient of the constraint function, if the objective has one.
    fn constraint_gradient(&self, _v: &[f64]) -> Option<Vec<f64>> {
        None
    }
    /// Constraint function `c(v)`; feasible points have `c <= 0` up to rounding.
    fn constraint_value(&self, _v: &[f64]) -> Option<f64> {
        None
    }
}

const ACTIVE_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentOptions {
    pub max_iter: usize,
    pub window: usize,
    pub rel_decrease_tol: f64,
    pub pg_tol: f64,
    /// Stop as soon as the objective drops to this value.
    pub stop_below: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub v: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient: f64,
    pub converged: bool,
    pub on_constraint: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Clamps to the nonnegative cone, enforces `v(R) = 0` and rescales to `T(v) = 1`.
pub(crate) fn normalize(grid: &RadialGrid, v: &mut [f64]) -> bool {
    let n = v.len();
    for x in v.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    v[n - 1] = 0.0;
    let t = grid.dirichlet_form(v, v);
    if !(t > 0.0) || !t.is_finite() {
        return false;
    }
    let s = t.sqrt().recip();
    v.iter_mut().for_each(|x| *x *= s);
    true
}

fn riesz(grid: &RadialGrid, g: &[f64], v: &[f64]) -> Vec<f64> {
    let mut r = g.to_vec();
    grid.solve_stiffness(&mut r, 0.0).expect("stiffness matrix is nonsingular");
    let radial = dot(g, v);
    r.iter_mut().zip(v).for_each(|(x, vi)| *x -= radial * vi);
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn step(grid: &RadialGrid, v: &[f64], d: &[f64], tau: f64) -> Option<Vec<f64>> {
    let mut w: Vec<f64> = v.iter().zip(d).map(|(a, b)| a + tau * b).collect();
    normalize(grid, &mut w).then_some(w)
}

fn s_dist(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    grid.dirichlet_form(&diff, &diff).sqrt()
}

/// Pulls an infeasible `w` back into the feasible set along `-∇c`.
fn restore<O: SphereObjective>(grid: &RadialGrid, obj: &O, w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let hc = obj.constraint_gradient(w)?;
    let h = riesz(grid, &hc, w);
    let hn = grid.dirichlet_form(&h, &h).sqrt();
    if !(hn > 0.0) {
        return None;
    }
    let dir: Vec<f64> = h.iter().map(|x| -x / hn).collect();
    let mut lo = 0.0;
    let mut hi = 1e-9;
    let mut found = None;
    for _ in 0..40 {
        if let Some(z) = step(grid, w, &dir, hi) {
            if let Some(f) = obj.value(&z) {
                found = Some((z, f));
                break;
            }
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut best = found?;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match step(grid, w, &dir, mid).and_then(|z| obj.value(&z).map(|f| (z, f))) {
            Some(zf) => {
                hi = mid;
                best = zf;
            }
            None => lo = mid,
        }
    }
    Some(best)
}

pub(crate) fn descend<O: SphereObjective>(
    grid: &RadialGrid,
    obj: &O,
    start: &[f64],
    opts: &DescentOptions,
) -> Option<DescentOutcome> {
    let mut v = start.to_vec();
    if !normalize(grid, &mut v) {
        return None;
    }
    let mut f = obj.value(&v)?;
    let mut history = vec![f];
    let active = |v: &[f64]| obj.constraint_value(v).is_some_and(|c| c > -ACTIVE_BAND);
    let mut on_constraint = active(&v);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut tau = 1.0;
    let mut pg = f64::INFINITY;

    for it in 0..opts.max_iter {
        if opts.stop_below.is_some_and(|target| f <= target) {
            return Some(DescentOutcome {
                v,
                value: f,
                iterations: it,
                projected_gradient: pg,
                converged: true,
                on_constraint,
            });
        }
        let scale = obj.scale(&v);
        let grad: Vec<f64> = obj.gradient(&v).iter().map(|x| x / scale).collect();
        let g = riesz(grid, &grad, &v);
        let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
        if on_constraint {
            if let Some(hc) = obj.constraint_gradient(&v) {
                let h = riesz(grid, &hc, &v);
                let hh = grid.dirichlet_form(&h, &h);
                let coef = grid.dirichlet_form(&d, &h) / hh;
                if hh > 0.0 && coef > 0.0 {
                    d.iter_mut().zip(&h).for_each(|(x, y)| *x -= coef * y);
                }
            }
        }
        pg = step(grid, &v, &d, 1.0).map_or(f64::INFINITY, |w| s_dist(grid, &w, &v));

        let window_ok = history.len() > opts.window && {
            let old = history[history.len() - 1 - opts.window];
            (old - f) <= opts.rel_decrease_tol * f.abs().max(f64::MIN_POSITIVE)
        };
        if pg < opts.pg_tol && window_ok {
            return Some(DescentOutcome {
                v,
                value: f,
                iterations: it,
                projected_gradient: pg,
                converged: true,
                on_constraint,
            });
        }

        if let Some((pv, pgrad)) = &prev {
            let s: Vec<f64> = v.iter().zip(pv).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(grad.iter().zip(pgrad)).map(|(si, (a, b))| si * (a - b)).sum();
            let ss = grid.dirichlet_form(&s, &s);
            if sy > 0.0 && ss > 0.0 {
                tau = (ss / sy).clamp(1e-12, 1e12);
            }
        }

        let mut accepted = None;
        let mut t = tau;
        for _ in 0..MAX_HALVINGS {
            let trial = step(grid, &v, &d, t).and_then(|w| match obj.value(&w) {
                Some(fw) => Some((w, fw, false)),
                None => restore(grid, obj, &w).map(|(z, fz)| (z, fz, true)),
            });
            if let Some((w, fw, hit)) = trial {
                let dec: f64 = grad.iter().zip(w.iter().zip(&v)).map(|(gi, (a, b))| gi * (a - b)).sum();
                if fw <= f + ARMIJO * scale * dec.min(0.0) && fw <= f {
                    accepted = Some((w, fw, hit));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((w, fw, _)) = accepted else {
            return Some(DescentOutcome {
                v,
                value: f,
                iterations: it,
                projected_gradient: pg,
                converged: pg < opts.pg_tol,
                on_constraint,
            });
        };
        prev = Some((std::mem::replace(&mut v, w), grad));
        f = fw;
        on_constraint = active(&v);
        history.push(f);
    }
    Some(DescentOutcome {
        v,
        value: f,
        iterations: opts.max_iter,
        projected_gradient: pg,
        converged: false,
        on_constraint,
    })
}
