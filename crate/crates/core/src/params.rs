//! Problem parameters and closed-form constants of the fibering analysis.
//!
//! The equation is `-Δu = λ|u|^(β-1)u - |u|^(α-1)u` on the ball of radius `R`
//! in `R^n`, with `0 < α < β < 1`. `λ` is not part of the parameter set; it is
//! passed to each operation.

use std::f64::consts::PI;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    alpha: f64,
    beta: f64,
    dim: usize,
    radius: f64,
}

/// Exponents of the Hölder split `B <= (∫|u|^{2*})^{1/q} A^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderExponents {
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
}

impl ParamSet {
    pub fn new(alpha: f64, beta: f64, dim: usize, radius: f64) -> Result<Self> {
        let ok = alpha.is_finite() && beta.is_finite() && 0.0 < alpha && alpha < beta && beta < 1.0;
        if !ok {
            return Err(LabError::InvalidExponents { alpha, beta });
        }
        if dim < 1 {
            return Err(LabError::InvalidDimension(dim));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(LabError::InvalidRadius(radius));
        }
        Ok(Self { alpha, beta, dim, radius })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same exponents and dimension on a ball of another radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.dim, radius)
    }

    /// `θ = 2(1+α)(1+β) - n(1-α)(1-β)`; negative exactly above the critical dimension.
    pub fn theta(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        2.0 * (1.0 + a) * (1.0 + b) - self.dim as f64 * (1.0 - a) * (1.0 - b)
    }

    /// Real dimension at which `θ` vanishes.
    pub fn theta_critical_dimension(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        2.0 * (1.0 + a) * (1.0 + b) / ((1.0 - a) * (1.0 - b))
    }

    /// `(c0, c1)` with `λ0(u) = c0 λ(u)` and `λ1(u) = c1 λ(u)`; always `c1 < c0`.
    pub fn fiber_constants(&self) -> (f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        let e = (b - a) / (1.0 - a);
        let c0 = (1.0 - a) * (1.0 + b) / ((1.0 - b) * (1.0 + a))
            * ((1.0 + a) * (1.0 - b) / (2.0 * (b - a))).powf(e);
        let c1 = (1.0 - a) / (1.0 - b) * ((1.0 - b) / (b - a)).powf(e);
        (c0, c1)
    }

    /// Sobolev exponent `2* = 2n/(n-2)`.
    pub fn critical_exponent(&self) -> Result<f64> {
        if self.dim < 3 {
            return Err(LabError::DimensionTooLow { dim: self.dim, required: 3 });
        }
        let n = self.dim as f64;
        Ok(2.0 * n / (n - 2.0))
    }

    pub fn holder_exponents(&self) -> Result<HolderExponents> {
        let s = self.critical_exponent()?;
        let (a, b) = (self.alpha, self.beta);
        let gamma = (1.0 + a) * (s - 1.0 - b) / (s - 1.0 - a);
        Ok(HolderExponents {
            gamma,
            p: (1.0 + a) / gamma,
            q: s / (1.0 + b - gamma),
        })
    }

    /// Surface area `ω_{n-1}` of the unit sphere in `R^n` (2 for `n = 1`).
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    pub fn ball_volume(&self) -> f64 {
        self.sphere_area() * self.radius.powi(self.dim as i32) / self.dim as f64
    }
}

/// Alias of [`ParamSet::new`].
pub fn validate_params(alpha: f64, beta: f64, dim: usize, radius: f64) -> Result<ParamSet> {
    ParamSet::new(alpha, beta, dim, radius)
}

/// `ω_{n-1} = 2 π^{n/2} / Γ(n/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(n / 2.0) / gamma_half_integer(dim)
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half_integer(k: usize) -> f64 {
    let (mut x, mut g) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    let target = k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(ParamSet::new(0.2, 0.1, 4, 1.0), Err(LabError::InvalidExponents { .. })));
        assert!(matches!(ParamSet::new(0.1, 1.0, 3, 1.0), Err(LabError::InvalidExponents { .. })));
        assert!(matches!(ParamSet::new(0.0, 0.5, 3, 1.0), Err(LabError::InvalidExponents { .. })));
        assert!(matches!(ParamSet::new(0.1, 0.2, 0, 1.0), Err(LabError::InvalidDimension(0))));
        assert!(matches!(ParamSet::new(0.1, 0.2, 3, 0.0), Err(LabError::InvalidRadius(_))));
        assert!(ParamSet::new(0.1, 0.2, 4, 1.0).is_ok());
    }

    #[test]
    fn theta_values() {
        let p4 = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap();
        let p3 = ParamSet::new(0.1, 0.2, 3, 1.0).unwrap();
        assert!((p4.theta() + 0.24).abs() < 1e-12);
        assert!((p3.theta() - 0.48).abs() < 1e-12);
        let nc = p4.theta_critical_dimension();
        let (a, b) = (0.1, 0.2);
        assert!((2.0 * (1.0 + a) * (1.0 + b) - nc * (1.0 - a) * (1.0 - b)).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn critical_exponent_needs_dim_three() {
        let p = ParamSet::new(0.1, 0.2, 2, 1.0).unwrap();
        assert!(matches!(p.critical_exponent(), Err(LabError::DimensionTooLow { .. })));
        assert_eq!(ParamSet::new(0.1, 0.2, 4, 1.0).unwrap().critical_exponent().unwrap(), 4.0);
        assert_eq!(ParamSet::new(0.1, 0.2, 3, 1.0).unwrap().critical_exponent().unwrap(), 6.0);
    }

    #[test]
    fn fiber_constant_examples() {
        let (c0, c1) = ParamSet::new(0.5, 0.75, 4, 1.0).unwrap().fiber_constants();
        assert_eq!(c1, 2.0);
        assert!((c0 - 2.020_725_942_163_690).abs() < 1e-12);
        let (c0, c1) = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap().fiber_constants();
        assert!((c0 - 1.446_891_033).abs() < 1e-9);
        assert!((c1 - 1.417_411_181).abs() < 1e-9);
        assert!(c1 < c0);
    }

    #[test]
    fn holder_exponent_examples() {
        let h = ParamSet::new(0.1, 0.2, 4, 1.0).unwrap().holder_exponents().unwrap();
        assert!((h.gamma - 1.062_068_965_517_241).abs() < 1e-12);
        assert!((h.p - 29.0 / 28.0).abs() < 1e-12);
        assert!((h.q - 29.0).abs() < 1e-12);
        assert!(h.p > 1.0 && h.q > 1.0);
        assert!((1.0 / h.p + 1.0 / h.q - 1.0).abs() <= 1e-12);
        let p2 = ParamSet::new(0.1, 0.2, 2, 1.0).unwrap();
        assert!(matches!(p2.holder_exponents(), Err(LabError::DimensionTooLow { .. })));
    }
}
