//! The scalar functionals `T, A, B, E, Q, L, P` and the discrete energy gradient.

use crate::error::{LabError, Result};
use crate::grid::{Field, RadialGrid};
use crate::params::ParamSet;

/// `T = ∫|∇u|²`, `A = ∫|u|^{1+α}`, `B = ∫|u|^{1+β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrals {
    pub dirichlet: f64,
    pub absorption: f64,
    pub source: f64,
}

impl Integrals {
    pub fn of(grid: &RadialGrid, u: &[f64]) -> Self {
        let p = grid.params();
        let (ea, eb) = (1.0 + p.alpha(), 1.0 + p.beta());
        let mut absorption = 0.0;
        let mut source = 0.0;
        for (w, v) in grid.quad_weights().iter().zip(u) {
            let m = v.abs();
            if m > 0.0 {
                absorption += w * m.powf(ea);
                source += w * m.powf(eb);
            }
        }
        Self { dirichlet: grid.dirichlet_form(u, u), absorption, source }
    }

    /// Values at `t·u`.
    pub fn scaled(&self, t: f64, params: &ParamSet) -> Self {
        Self {
            dirichlet: t * t * self.dirichlet,
            absorption: t.powf(1.0 + params.alpha()) * self.absorption,
            source: t.powf(1.0 + params.beta()) * self.source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValues {
    /// `T`
    pub dirichlet: f64,
    /// `A`
    pub absorption: f64,
    /// `B`
    pub source: f64,
    /// `E = T/2 - λB/(1+β) + A/(1+α)`
    pub energy: f64,
    /// `Q = T - λB + A`
    pub nehari: f64,
    /// `L = T - λβB + αA`
    pub fiber_curvature: f64,
    /// `P = (n-2)/(2n) T - λB/(1+β) + A/(1+α)`
    pub pohozaev: f64,
    pub lambda: f64,
}

impl FunctionalValues {
    pub fn from_integrals(ints: Integrals, lambda: f64, params: &ParamSet) -> Self {
        let (a, b) = (params.alpha(), params.beta());
        let n = params.dim() as f64;
        let Integrals { dirichlet: t, absorption: ai, source: bi } = ints;
        let lower = -lambda * bi / (1.0 + b) + ai / (1.0 + a);
        Self {
            dirichlet: t,
            absorption: ai,
            source: bi,
            energy: 0.5 * t + lower,
            nehari: t - lambda * bi + ai,
            fiber_curvature: t - lambda * b * bi + a * ai,
            pohozaev: (n - 2.0) / (2.0 * n) * t + lower,
            lambda,
        }
    }

    pub fn integrals(&self) -> Integrals {
        Integrals { dirichlet: self.dirichlet, absorption: self.absorption, source: self.source }
    }

    /// Scale for the Nehari-membership test, `T + λB + A`.
    pub fn magnitude(&self) -> f64 {
        self.dirichlet + self.lambda * self.source + self.absorption
    }
}

pub fn evaluate(field: &Field, lambda: f64) -> FunctionalValues {
    let grid = field.grid();
    FunctionalValues::from_integrals(Integrals::of(grid, field.values()), lambda, grid.params())
}

#[inline]
pub(crate) fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// `∂E_h/∂u_i` (nodal, Euclidean), zero at the boundary node.
pub(crate) fn energy_gradient_nodal(grid: &RadialGrid, u: &[f64], lambda: f64) -> Vec<f64> {
    let p = grid.params();
    let mut g = grid.apply_stiffness(u);
    for ((gi, w), v) in g.iter_mut().zip(grid.quad_weights()).zip(u) {
        *gi += w * (signed_pow(*v, p.alpha()) - lambda * signed_pow(*v, p.beta()));
    }
    let n = g.len();
    g[n - 1] = 0.0;
    g
}

/// Residual density `-Δ_h u - λ|u|^{β-1}u + |u|^{α-1}u`, zero at `r = R`.
///
/// Pairing with any `v` through the quadrature weights gives the exact
/// directional derivative of the discrete energy.
pub fn energy_gradient(field: &Field, lambda: f64) -> Vec<f64> {
    let grid = field.grid();
    let mut g = energy_gradient_nodal(grid, field.values(), lambda);
    for (gi, w) in g.iter_mut().zip(grid.quad_weights()) {
        *gi /= w;
    }
    g
}

/// `Σ V_i g_i v_i`.
pub fn pairing(grid: &RadialGrid, g: &[f64], v: &[f64]) -> f64 {
    grid.inner(g, v)
}

/// Weighted `L²` norm of [`energy_gradient`].
pub fn weak_residual(field: &Field, lambda: f64) -> f64 {
    let g = energy_gradient(field, lambda);
    field.grid().inner(&g, &g).sqrt()
}

/// Weighted `L²` norm of the source term `λ|u|^β`; the scale for relative residuals.
pub fn source_scale(field: &Field, lambda: f64) -> f64 {
    let beta = field.grid().params().beta();
    let s: Vec<f64> = field.values().iter().map(|v| lambda * v.abs().powf(beta)).collect();
    field.grid().inner(&s, &s).sqrt()
}

/// `(∫|u|^{2*})^{1/q} A^{1/p} - B`, nonnegative by Hölder's inequality.
pub fn holder_check(field: &Field) -> Result<f64> {
    let grid = field.grid();
    let params = grid.params();
    let s = params.critical_exponent()?;
    let h = params.holder_exponents()?;
    if field.is_zero() {
        return Err(LabError::DegenerateField { t: 0.0, a: 0.0, b: 0.0 });
    }
    let ints = Integrals::of(grid, field.values());
    let crit: Vec<f64> = field.values().iter().map(|v| v.abs().powf(s)).collect();
    let crit = grid.integrate_unchecked(&crit);
    Ok(crit.powf(1.0 / h.q) * ints.absorption.powf(1.0 / h.p) - ints.source)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid(dim: usize, n: usize) -> std::sync::Arc<RadialGrid> {
        RadialGrid::new(ParamSet::new(0.1, 0.2, dim, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn zero_field_is_all_zero() {
        let g = grid(4, 64);
        let v = evaluate(&Field::zeros(&g), 2.0);
        for x in [v.dirichlet, v.absorption, v.source, v.energy, v.nehari, v.fiber_curvature, v.pohozaev] {
            assert_eq!(x, 0.0);
        }
        assert!(energy_gradient(&Field::zeros(&g), 2.0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn parabola_dirichlet_energy() {
        let g = grid(3, 2001);
        let f = Field::from_fn(&g, |r| 1.0 - r * r).unwrap();
        let v = evaluate(&f, 1.0);
        assert!((v.dirichlet - 16.0 * PI / 5.0).abs() < 1e-5);
    }

    #[test]
    fn algebraic_identities() {
        let g = grid(4, 100);
        let f = Field::from_fn(&g, |r| (1.0 - r) * (2.0 + (5.0 * r).sin())).unwrap();
        let v = evaluate(&f, 1.7);
        let (a, b) = (0.1, 0.2);
        let lhs = v.nehari - v.fiber_curvature;
        let rhs = -1.7 * (1.0 - b) * v.source + (1.0 - a) * v.absorption;
        assert!((lhs - rhs).abs() < 1e-12 * v.magnitude());
        assert!((v.energy - v.pohozaev - v.dirichlet / 4.0).abs() < 1e-14 * v.dirichlet);
    }
}
