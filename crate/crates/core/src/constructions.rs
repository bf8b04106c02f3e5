//! Constructions built on top of the variational solvers: the compacton
//! scaling family, the torsion function and super-solution bound, monotone
//! sub/super-solution iteration, and the exact one-dimensional compacton.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::functionals::{signed_pow, weak_residual as residual_norm};
use crate::grid::{Field, RadialGrid};
use crate::nehari::SolutionRecord;
use crate::params::ParamSet;
use crate::pohozaev::Classification;

pub use crate::functionals::weak_residual;

/// `λ σ^{2(β-α)/(1-α)}`.
pub fn scaled_lambda(lambda: f64, sigma: f64, params: &ParamSet) -> f64 {
    lambda * sigma.powf(2.0 * (params.beta() - params.alpha()) / (1.0 - params.alpha()))
}

/// `σ^{-2/(1-α)}`.
pub fn amplitude_factor(sigma: f64, params: &ParamSet) -> f64 {
    sigma.powf(-2.0 / (1.0 - params.alpha()))
}

/// `x ↦ σ^{-2/(1-α)} u(σx)`, zero for `σx >= R`, at `λ σ^{2(β-α)/(1-α)}`.
pub fn scale_compacton(record: &SolutionRecord, sigma: f64, tol_flux: f64) -> Result<SolutionRecord> {
    if !(sigma >= 1.0) || !sigma.is_finite() {
        return Err(LabError::Usage(format!("sigma must be >= 1, got {sigma}")));
    }
    let grid = record.field.grid();
    let threshold = tol_flux * record.vals.dirichlet / grid.radius();
    if record.classification != Classification::NonRegular || record.flux > threshold {
        return Err(LabError::NotCompacton { flux: record.flux, threshold });
    }
    if sigma == 1.0 {
        return Ok(record.clone());
    }
    let params = grid.params();
    let amp = amplitude_factor(sigma, params);
    let src = &record.field;
    let field = Field::from_fn(grid, |r| amp * src.interpolate(sigma * r))?;
    Ok(SolutionRecord::from_field(field, scaled_lambda(record.lambda, sigma, params), tol_flux))
}

/// Solution of `-Δe = 1`, `e(R) = 0`.
pub fn torsion_function(grid: &Arc<RadialGrid>) -> Field {
    grid.solve_shifted_poisson(&vec![1.0; grid.n_nodes()], 0.0)
        .expect("torsion problem is nonsingular")
}

/// `M = (λ e_max^β)^{1/(1-β)} (1 + 0.01)`, so that `M - λ M^β e_max^β > 0`.
/// Clamped below at the smallest normal float when the threshold underflows;
/// infinite when it overflows.
pub fn supersolution_bound(params: &ParamSet, lambda: f64, e_max: f64) -> f64 {
    let b = params.beta();
    ((lambda * e_max.powf(b)).powf(1.0 / (1.0 - b)) * 1.01).max(f64::MIN_POSITIVE)
}

/// `sup |f'(s)|` over `s ∈ [lo, hi]` for `f(s) = λs^β - s^α`.
pub fn derivative_bound(params: &ParamSet, lambda: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (params.alpha(), params.beta());
    let df = |s: f64| lambda * b * s.powf(b - 1.0) - a * s.powf(a - 1.0);
    let mut best = df(lo).abs().max(df(hi).abs());
    let crit = (a * (1.0 - a) / (lambda * b * (1.0 - b))).powf(1.0 / (b - a));
    if lo < crit && crit < hi {
        best = best.max(df(crit).abs());
    }
    best
}

#[derive(Debug, Clone)]
pub struct MonotoneOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Overrides the automatic shift.
    pub shift: Option<f64>,
    pub tol_flux: f64,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 2_000_000, shift: None, tol_flux: crate::pohozaev::DEFAULT_TOL_FLUX }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneOutcome {
    pub record: SolutionRecord,
    pub iterations: usize,
    pub shift: f64,
    pub supersolution_scale: f64,
    pub delta: f64,
    /// `min_i (w_i - sub_i)`; nonnegative up to `tol` when the ordering is preserved.
    pub min_margin_over_sub: f64,
    /// Largest pointwise increase seen between successive iterates.
    pub max_increase: f64,
    /// Absolute weak residual of the result.
    pub weak_residual: f64,
}

/// Iterates `u_{k+1} = (-Δ + K)^{-1}(f(u_k) + K u_k)` downward from `M e`.
///
/// `K` is the supremum of `|f'|` over `[δ, M‖e‖_∞]`, with `δ` the smallest
/// interior value of `sub` (floored at `1e-6 M‖e‖_∞`). Because `f` is not
/// Lipschitz at zero, monotonicity is checked at every step.
pub fn monotone_iterate(
    grid: &Arc<RadialGrid>,
    lambda: f64,
    sub: &Field,
    opts: &MonotoneOptions,
) -> Result<MonotoneOutcome> {
    let params = grid.params();
    let n = grid.n_nodes();
    let e = torsion_function(grid);
    let e_max = e.max_abs();
    let mut m = supersolution_bound(params, lambda, e_max);
    for i in 0..n - 1 {
        m = m.max(1.01 * sub.values()[i] / e.values()[i]);
    }
    let top = m * e_max;
    if !top.is_finite() {
        return Err(LabError::HypothesesUnmet(format!("super-solution scale overflows at lambda={lambda}")));
    }
    let interior_min = sub.values()[..n - 1].iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    let delta = interior_min.max(1e-6 * top);
    let shift = opts.shift.unwrap_or_else(|| derivative_bound(params, lambda, delta, top));

    let (a, b) = (params.alpha(), params.beta());
    let mut u: Vec<f64> = e.values().iter().map(|x| m * x).collect();
    let mut max_increase = f64::NEG_INFINITY;
    for it in 1..=opts.max_iter {
        let rhs: Vec<f64> = u
            .iter()
            .map(|&x| lambda * signed_pow(x, b) - signed_pow(x, a) + shift * x)
            .collect();
        let next = grid.solve_shifted_values(&rhs, shift)?;
        let (mut inc, mut node) = (f64::NEG_INFINITY, 0);
        let mut diff2 = 0.0;
        for i in 0..n {
            let d = next[i] - u[i];
            if d > inc {
                inc = d;
                node = i;
            }
            diff2 += grid.quad_weights()[i] * d * d;
        }
        max_increase = max_increase.max(inc);
        if inc > opts.tol {
            return Err(LabError::MonotonicityLost { iteration: it, max_violation: inc, node });
        }
        u = next;
        if diff2.sqrt() < opts.tol {
            let field = Field::new(grid, u.clone())?;
            let res = residual_norm(&field, lambda);
            if res <= opts.tol {
                let margin = field.values().iter().zip(sub.values()).fold(f64::INFINITY, |acc, (w, s)| acc.min(w - s));
                let mut record = SolutionRecord::from_field(field, lambda, opts.tol_flux);
                record.iterations = it;
                return Ok(MonotoneOutcome {
                    record,
                    iterations: it,
                    shift,
                    supersolution_scale: m,
                    delta,
                    min_margin_over_sub: margin,
                    max_increase,
                    weak_residual: res,
                });
            }
        }
    }
    let field = Field::new(grid, u)?;
    let mut best = SolutionRecord::from_field(field, lambda, opts.tol_flux);
    best.converged = false;
    Err(LabError::NotConverged {
        iterations: opts.max_iter,
        projected_gradient: f64::NAN,
        best: Some(Box::new(best)),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, 8 points.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Exact even compacton of `-u'' = λu^β - u^α` on the line, centred at 0.
///
/// From the zero-energy first integral `u'²/2 = u^{1+α}/(1+α) - λu^{1+β}/(1+β)`
/// the distance from the peak is `x(u) = 2C ∫_θ^{π/2} sin^m φ dφ` with
/// `sin²θ = (u/u_max)^{β-α}`, `m = (1-β)/(β-α)` and
/// `C = u_max^{(1-α)/2} ((1+α)/2)^{1/2} / (β-α)`; the integral is evaluated
/// with composite Gauss-Legendre panels (graded toward `θ = 0`) and inverted
/// by bisection.
#[derive(Debug, Clone)]
pub struct Profile1D {
    pub lambda: f64,
    pub u_max: f64,
    pub half_width: f64,
    pub profile: Vec<(f64, f64)>,
    alpha: f64,
    beta: f64,
    scale: f64,
    exponent: f64,
    /// Cumulative `∫_{θ_k}^{π/2} sin^m` at panel boundaries `θ_k = k π/(2P)`.
    tail: Vec<f64>,
}

pub const ORACLE_PANELS: usize = 512;

impl Profile1D {
    fn panel_width(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / (self.tail.len() - 1) as f64
    }

    fn gl(&self, lo: f64, hi: f64) -> f64 {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * (c + h * x).sin().powf(self.exponent))
            .sum::<f64>()
            * h
    }

    /// Gauss-Legendre on `[lo, hi]` split geometrically toward `lo`, for the
    /// `φ^m` behaviour of the integrand at zero.
    fn gl_graded(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        let mut b = hi;
        loop {
            let a = (0.5 * b).max(lo);
            total += self.gl(a, b);
            if a <= lo || a < hi * 1e-20 {
                return total;
            }
            b = a;
        }
    }

    /// `∫_θ^{π/2} sin^m φ dφ`.
    fn tail_integral(&self, theta: f64) -> f64 {
        let width = self.panel_width();
        let k = ((theta / width).floor() as usize).min(self.tail.len() - 2);
        let piece = if k == 0 { self.gl_graded(theta, width) } else { self.gl(theta, (k + 1) as f64 * width) };
        self.tail[k + 1] + piece
    }

    fn distance(&self, theta: f64) -> f64 {
        2.0 * self.scale * self.tail_integral(theta)
    }

    fn theta_at(&self, x: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.distance(mid) > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `u(x)` for any real `x` (even, zero outside `[-L, L]`).
    pub fn value_at(&self, x: f64) -> f64 {
        let x = x.abs();
        if x >= self.half_width {
            return 0.0;
        }
        let s = self.theta_at(x).sin();
        self.u_max * (s * s).powf(1.0 / (self.beta - self.alpha))
    }

    /// `u'(x) = -sign(x) (2G(u))^{1/2}`.
    pub fn derivative_at(&self, x: f64) -> f64 {
        let u = self.value_at(x);
        let (a, b) = (self.alpha, self.beta);
        let g = u.powf(1.0 + a) / (1.0 + a) - self.lambda * u.powf(1.0 + b) / (1.0 + b);
        -x.signum() * (2.0 * g.max(0.0)).sqrt()
    }

    /// Samples the profile on a radial grid (`n = 1`: the half-line `[0, R]`).
    pub fn on_grid(&self, grid: &Arc<RadialGrid>) -> Result<Field> {
        Field::from_fn(grid, |r| self.value_at(r))
    }
}

/// Exact one-dimensional compacton at `λ` with `samples` profile points on `[0, L]`.
pub fn oracle_1d(params: &ParamSet, lambda: f64, samples: usize) -> Result<Profile1D> {
    if !(lambda > 0.0) {
        return Err(LabError::Usage(format!("lambda must be positive, got {lambda}")));
    }
    let (a, b) = (params.alpha(), params.beta());
    let u_max = ((1.0 + b) / (lambda * (1.0 + a))).powf(1.0 / (b - a));
    let scale = u_max.powf((1.0 - a) / 2.0) * ((1.0 + a) / 2.0).sqrt() / (b - a);
    let mut prof = Profile1D {
        lambda,
        u_max,
        half_width: 0.0,
        profile: Vec::new(),
        alpha: a,
        beta: b,
        scale,
        exponent: (1.0 - b) / (b - a),
        tail: vec![0.0; ORACLE_PANELS + 1],
    };
    let width = prof.panel_width();
    for k in (1..ORACLE_PANELS).rev() {
        prof.tail[k] = prof.tail[k + 1] + prof.gl(k as f64 * width, (k + 1) as f64 * width);
    }
    prof.tail[0] = prof.tail[1] + prof.gl_graded(0.0, width);
    prof.half_width = 2.0 * scale * prof.tail[0];
    let count = samples.max(2);
    prof.profile = (0..count)
        .map(|i| {
            let x = prof.half_width * i as f64 / (count - 1) as f64;
            (x, prof.value_at(x))
        })
        .collect();
    Ok(prof)
}
