//! Uniform radial grid on the ball `B_R ⊂ R^n`.
//!
//! Nodes are `r_i = i h`, `h = R/(N-1)`. Each node owns the dual cell
//! `[r_i - h/2, r_i + h/2] ∩ [0, R]`; its volume (including `ω_{n-1}`) is the
//! quadrature weight, so the weights tile the ball exactly. Neighbouring nodes
//! are coupled through the face at `r_{i+1/2}` with conductance
//! `ω_{n-1} r_{i+1/2}^{n-1} / h`. The resulting stiffness matrix `S` is
//! symmetric, `T(u) = uᵀSu`, and `(Su)_i / V_i` is a second-order
//! approximation of `-Δu` (at the origin it reduces to `2n(u_0 - u_1)/h²`).

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::params::ParamSet;

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    params: ParamSet,
    h: f64,
    radii: Vec<f64>,
    weights: Vec<f64>,
    conductances: Vec<f64>,
}

impl RadialGrid {
    pub fn new(params: ParamSet, n_nodes: usize) -> Result<Arc<Self>> {
        if n_nodes < MIN_NODES {
            return Err(LabError::GridTooCoarse { n_nodes, min: MIN_NODES });
        }
        let r_max = params.radius();
        let h = r_max / (n_nodes - 1) as f64;
        let dim = params.dim() as i32;
        let omega = params.sphere_area();
        let radii: Vec<f64> = (0..n_nodes)
            .map(|i| if i == n_nodes - 1 { r_max } else { i as f64 * h })
            .collect();
        let cap = |r: f64| omega * r.powi(dim) / dim as f64;
        let weights = (0..n_nodes)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                let hi = if i == n_nodes - 1 { r_max } else { (i as f64 + 0.5) * h };
                cap(hi) - cap(lo)
            })
            .collect();
        let conductances = (0..n_nodes - 1)
            .map(|i| omega * ((i as f64 + 0.5) * h).powi(dim - 1) / h)
            .collect();
        Ok(Arc::new(Self { params, h, radii, weights, conductances }))
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.radii.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.params.radius()
    }

    pub fn node_radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Face conductances `ω r_{i+1/2}^{n-1} / h`, one per grid interval.
    pub fn conductances(&self) -> &[f64] {
        &self.conductances
    }

    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples.len())?;
        Ok(self.integrate_unchecked(samples))
    }

    pub(crate) fn integrate_unchecked(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, s)| w * s).sum()
    }

    /// Weighted inner product `Σ V_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// Discrete Dirichlet form `fᵀ S g`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> f64 {
        self.conductances
            .iter()
            .enumerate()
            .map(|(i, c)| c * (f[i + 1] - f[i]) * (g[i + 1] - g[i]))
            .sum()
    }

    /// `S u` (nodal, not divided by the cell volumes).
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for (i, c) in self.conductances.iter().enumerate() {
            let flux = c * (u[i] - u[i + 1]);
            out[i] += flux;
            out[i + 1] -= flux;
        }
        out
    }

    /// `-Δ_h u = (S u)_i / V_i`; the entry at `R` is the discrete boundary reaction density.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply_stiffness(u);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        out
    }

    /// Central differences inside, `u'(0) = 0` by even symmetry, one-sided second order at `R`.
    pub fn radial_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let h = self.h;
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        d[n - 1] = self.boundary_derivative(u);
        d
    }

    pub fn boundary_derivative(&self, u: &[f64]) -> f64 {
        let n = u.len();
        (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * self.h)
    }

    /// `(1/2n) |u'(R)|² R^n ω_{n-1}`.
    pub fn boundary_flux_term(&self, u: &[f64]) -> f64 {
        let p = &self.params;
        let d = self.boundary_derivative(u);
        d * d * p.radius().powi(p.dim() as i32) * p.sphere_area() / (2.0 * p.dim() as f64)
    }

    /// Solves `(-Δ_h + K) u = rhs` with `u(R) = 0` by a direct tridiagonal sweep.
    pub fn solve_shifted_poisson(self: &Arc<Self>, rhs: &[f64], shift: f64) -> Result<Field> {
        self.check_len(rhs.len())?;
        let values = self.solve_shifted_values(rhs, shift)?;
        Field::new(self, values)
    }

    pub(crate) fn solve_shifted_values(&self, rhs: &[f64], shift: f64) -> Result<Vec<f64>> {
        let mut b: Vec<f64> = rhs.iter().zip(&self.weights).map(|(f, w)| f * w).collect();
        self.solve_stiffness(&mut b, shift)?;
        Ok(b)
    }

    /// Solves `(S + K·V) x = b` in place on the interior unknowns; sets `x[N-1] = 0`.
    pub(crate) fn solve_stiffness(&self, b: &mut [f64], shift: f64) -> Result<()> {
        let m = b.len() - 1;
        let c = &self.conductances;
        let diag = |i: usize| {
            let left = if i == 0 { 0.0 } else { c[i - 1] };
            left + c[i] + shift * self.weights[i]
        };
        let mut sup = vec![0.0; m];
        let mut piv = diag(0);
        if !(piv.abs() > 0.0) || !piv.is_finite() {
            return Err(LabError::SingularSystem(0));
        }
        sup[0] = -c[0] / piv;
        b[0] /= piv;
        for i in 1..m {
            piv = diag(i) + c[i - 1] * sup[i - 1];
            if !(piv.abs() > 0.0) || !piv.is_finite() {
                return Err(LabError::SingularSystem(i));
            }
            sup[i] = -c[i] / piv;
            b[i] = (b[i] + c[i - 1] * b[i - 1]) / piv;
        }
        for i in (0..m - 1).rev() {
            b[i] -= sup[i] * b[i + 1];
        }
        b[m] = 0.0;
        Ok(())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.n_nodes() {
            return Err(LabError::LengthMismatch { expected: self.n_nodes(), found });
        }
        Ok(())
    }
}

/// Alias of [`RadialGrid::new`].
pub fn build_grid(params: ParamSet, n_nodes: usize) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(params, n_nodes)
}

/// Nodal function on a radial grid with `u(R) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFiniteValue(i));
        }
        let last = values[values.len() - 1];
        if last != 0.0 {
            return Err(LabError::NonzeroBoundary(last));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    /// Samples `f` at the nodes and forces the boundary value to zero.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = grid.node_radii().iter().map(|&r| f(r)).collect();
        let n = values.len();
        values[n - 1] = 0.0;
        Self::new(grid, values)
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: Arc::clone(grid), values: vec![0.0; grid.n_nodes()] }
    }

    /// The bump `1 - (r/R)²`.
    pub fn bump(grid: &Arc<RadialGrid>) -> Self {
        let r_max = grid.radius();
        Self::from_fn(grid, |r| 1.0 - (r / r_max).powi(2)).expect("bump is finite")
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| t * v).collect() }
    }

    pub fn abs(&self) -> Self {
        Self { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn radial_derivative(&self) -> Vec<f64> {
        self.grid.radial_derivative(&self.values)
    }

    pub fn boundary_derivative(&self) -> f64 {
        self.grid.boundary_derivative(&self.values)
    }

    pub fn boundary_flux_term(&self) -> f64 {
        self.grid.boundary_flux_term(&self.values)
    }

    /// Weighted `L²` norm `(Σ V_i u_i²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.grid.inner(&self.values, &self.values).sqrt()
    }

    /// Linear interpolation at radius `r`, zero beyond `R`.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.values.len();
        if r >= self.grid.radius() {
            return 0.0;
        }
        let s = (r.max(0.0) / self.grid.h()).min((n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}
