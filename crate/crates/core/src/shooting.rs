//! Radial compacton by shooting.
//!
//! At `λ = 1` the profile equation `u'' + (n-1)/r u' + u^β - u^α = 0`,
//! `u(0) = a`, `u'(0) = 0` is integrated with classical RK4. Trajectories
//! either cross zero with negative slope (`a` too large) or turn upward while
//! positive (`a` too small); bisection on `a` isolates the compacton, whose
//! slope and value vanish together at the support radius `ρ`. The scaling
//! `u_R(x) = σ^{-2/(1-α)} u(σx)`, `σ = ρ/R`, places it on the ball of radius
//! `R` at `λ = σ^{2(β-α)/(1-α)}`.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::grid::{Field, RadialGrid};
use crate::params::ParamSet;

const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// Zero crossing at this radius.
    Hit(f64),
    /// Slope turned nonnegative while positive.
    Turn,
}

#[derive(Debug, Clone)]
pub struct UnitCompacton {
    params: ParamSet,
    pub center_value: f64,
    pub support: f64,
    step: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

fn rhs(params: &ParamSet, r: f64, u: f64, du: f64) -> (f64, f64) {
    let m = u.max(0.0);
    let f = if m > 0.0 { m.powf(params.beta()) - m.powf(params.alpha()) } else { 0.0 };
    let damp = if r > 0.0 { (params.dim() as f64 - 1.0) / r * du } else { 0.0 };
    (du, -damp - f)
}

/// Integrates from the centre; returns the outcome and the trajectory if requested.
fn shoot(params: &ParamSet, a: f64, step: f64, keep: bool) -> (Shot, Vec<f64>, Vec<f64>) {
    let n = params.dim() as f64;
    let f0 = a.powf(params.beta()) - a.powf(params.alpha());
    let (mut us, mut dus) = (vec![a], vec![0.0]);
    let mut r = step;
    let mut u = a - f0 * step * step / (2.0 * n);
    let mut du = -f0 * step / n;
    for _ in 0..MAX_STEPS {
        if keep {
            us.push(u);
            dus.push(du);
        }
        if du >= 0.0 {
            return (Shot::Turn, us, dus);
        }
        let h = step;
        let k1 = rhs(params, r, u, du);
        let k2 = rhs(params, r + h / 2.0, u + h / 2.0 * k1.0, du + h / 2.0 * k1.1);
        let k3 = rhs(params, r + h / 2.0, u + h / 2.0 * k2.0, du + h / 2.0 * k2.1);
        let k4 = rhs(params, r + h, u + h * k3.0, du + h * k3.1);
        let un = u + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let dun = du + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if un <= 0.0 {
            let hit = r + h * u / (u - un);
            if keep {
                us.push(0.0);
                dus.push(0.0);
            }
            return (Shot::Hit(hit), us, dus);
        }
        u = un;
        du = dun;
        r += h;
    }
    (Shot::Turn, us, dus)
}

impl UnitCompacton {
    /// Locates the compacton at `λ = 1` with RK4 step `step`.
    pub fn compute(params: &ParamSet, step: f64) -> Result<Self> {
        let mut lo = 1.0 + 1e-9;
        let mut hi = 2.0;
        while shoot(params, hi, step, false).0 == Shot::Turn {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(LabError::HypothesesUnmet("no compacton found by shooting".into()));
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match shoot(params, mid, step, false).0 {
                Shot::Turn => lo = mid,
                Shot::Hit(_) => hi = mid,
            }
        }
        let (shot, u, du) = shoot(params, hi, step, true);
        let Shot::Hit(support) = shot else {
            return Err(LabError::HypothesesUnmet("shooting bracket collapsed".into()));
        };
        Ok(Self { params: *params, center_value: hi, support, step, u, du })
    }

    /// Profile value at radius `r` (cubic Hermite between RK4 steps), zero beyond the support.
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.support {
            return 0.0;
        }
        let s = r.max(0.0) / self.step;
        let i = s.floor() as usize;
        if i + 1 >= self.u.len() {
            return 0.0;
        }
        let t = s - i as f64;
        let h = self.step;
        let (p0, p1, m0, m1) = (self.u[i], self.u[i + 1], self.du[i] * h, self.du[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        v.max(0.0)
    }

    /// `σ` that maps the support onto radius `support_radius`.
    pub fn sigma_for(&self, support_radius: f64) -> f64 {
        self.support / support_radius
    }

    /// `λ` at which the compacton with support radius `support_radius` solves the equation.
    pub fn lambda_for(&self, support_radius: f64) -> f64 {
        let p = &self.params;
        self.sigma_for(support_radius).powf(2.0 * (p.beta() - p.alpha()) / (1.0 - p.alpha()))
    }

    /// Samples the compacton of support radius `support_radius <= R` on `grid`; returns it with its `λ`.
    pub fn on_grid(&self, grid: &Arc<RadialGrid>, support_radius: f64) -> Result<(Field, f64)> {
        let sigma = self.sigma_for(support_radius);
        let amp = sigma.powf(-2.0 / (1.0 - self.params.alpha()));
        let field = Field::from_fn(grid, |r| amp * self.value(sigma * r))?;
        Ok((field, self.lambda_for(support_radius)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_slope_vanishes() {
        let p = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap();
        let c = UnitCompacton::compute(&p, 2e-3).unwrap();
        assert!(c.center_value > 1.0);
        let tail = c.du[c.du.len() - 2].abs();
        let peak = c.du.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(tail < 1e-3 * peak, "tail {tail} peak {peak}");
    }
}
