//! Pohozaev residuals, compacton classification, the set `Z = {λ : P_λ(u_λ) < 0}`
//! and the threshold `λ* = inf Z`.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::fiber::{minimize_spectral, SpectralOptions, SpectralResult};
use crate::functionals::FunctionalValues;
use crate::grid::{Field, RadialGrid};
use crate::nehari::{accept_best, continuation_scan, minimize_from_starts, NehariOptions, SolutionRecord};

pub const DEFAULT_TOL_FLUX: f64 = 1e-3;

/// Largest relative gradient residual for which a record counts as a solution.
pub const DEFAULT_SOLUTION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    NonRegular,
    Regular,
    Indeterminate,
    Infeasible,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::NonRegular => "NonRegular",
            Classification::Regular => "Regular",
            Classification::Indeterminate => "Indeterminate",
            Classification::Infeasible => "Infeasible",
        })
    }
}

/// Flux test `flux <= tol·T/R` (non-regular) against `flux >= 10·tol·T/R` (regular).
pub fn classify_values(vals: &FunctionalValues, flux: f64, radius: f64, tol_flux: f64) -> Classification {
    let unit = vals.dirichlet / radius;
    if flux <= tol_flux * unit {
        Classification::NonRegular
    } else if flux >= 10.0 * tol_flux * unit {
        Classification::Regular
    } else {
        Classification::Indeterminate
    }
}

pub fn classify(record: &SolutionRecord, tol_flux: f64) -> Classification {
    classify_values(&record.vals, record.flux, record.field.grid().radius(), tol_flux)
}

/// `P_λ(u) + (1/2n)|u'(R)|² R^n ω_{n-1}`, defined for (approximate) solutions only.
pub fn pohozaev_residual(record: &SolutionRecord, max_grad_residual: f64) -> Result<f64> {
    if record.grad_residual > max_grad_residual {
        return Err(LabError::NotASolution { grad_residual: record.grad_residual, threshold: max_grad_residual });
    }
    Ok(record.vals.pohozaev + record.flux)
}

/// One row of a `Z` scan; `record` is `None` when the point was infeasible.
#[derive(Debug, Clone)]
pub struct ZRow {
    pub lambda: f64,
    pub record: Option<SolutionRecord>,
}

impl ZRow {
    pub fn energy_hat(&self) -> f64 {
        self.record.as_ref().map_or(f64::NAN, |r| r.energy_hat)
    }

    pub fn pohozaev(&self) -> f64 {
        self.record.as_ref().map_or(f64::NAN, |r| r.vals.pohozaev)
    }

    pub fn flux(&self) -> f64 {
        self.record.as_ref().map_or(f64::NAN, |r| r.flux)
    }

    pub fn fiber_curvature(&self) -> f64 {
        self.record.as_ref().map_or(f64::NAN, |r| r.vals.fiber_curvature)
    }

    pub fn classification(&self) -> Classification {
        self.record.as_ref().map_or(Classification::Infeasible, |r| r.classification)
    }

    pub fn in_z(&self) -> bool {
        self.pohozaev() < 0.0
    }
}

#[derive(Debug, Clone)]
pub struct ZScan {
    pub rows: Vec<ZRow>,
    /// Adjacent row pairs `(λ_i, λ_{i+1})` across which `P` changes sign.
    pub sign_changes: Vec<(f64, f64)>,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn better(a: Option<SolutionRecord>, b: Option<SolutionRecord>) -> Option<SolutionRecord> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.energy_hat < x.energy_hat { y } else { x }),
        (x, y) => x.or(y),
    }
}

/// Continuation scan over explicit `λ` values (any order), keeping per point the
/// lower-energy result of an ascending and a descending warm-started sweep.
pub fn scan_lambdas(grid: &Arc<RadialGrid>, lambdas: &[f64], opts: &NehariOptions) -> ZScan {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let up = continuation_scan(grid, &sorted, opts);
    let rev: Vec<f64> = sorted.iter().rev().copied().collect();
    let mut down = continuation_scan(grid, &rev, opts);
    down.reverse();
    let rows: Vec<ZRow> = sorted
        .iter()
        .zip(up.into_iter().zip(down))
        .map(|(&lambda, (a, b))| ZRow { lambda, record: better(accept_best(a).ok(), accept_best(b).ok()) })
        .collect();
    let sign_changes = rows
        .windows(2)
        .filter(|w| w[0].record.is_some() && w[1].record.is_some() && w[0].in_z() != w[1].in_z())
        .map(|w| (w[0].lambda, w[1].lambda))
        .collect();
    ZScan { rows, sign_changes }
}

/// `steps` equally spaced values on `[lambda_min, lambda_max]`.
pub fn scan_z(grid: &Arc<RadialGrid>, lambda_min: f64, lambda_max: f64, steps: usize, opts: &NehariOptions) -> ZScan {
    scan_lambdas(grid, &linspace(lambda_min, lambda_max, steps), opts)
}

#[derive(Debug, Clone)]
pub struct BracketStep {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_mid: f64,
    pub p_mid: f64,
    pub energy_mid: f64,
    /// Number of distinct minimizers (by `P` sign) found at the midpoint.
    pub branches: usize,
}

#[derive(Debug, Clone)]
pub struct LambdaStarOptions {
    pub tol_lambda: f64,
    /// Relative offset of the lower bracket end above `Λ1`.
    pub epsilon: f64,
    pub spectral: SpectralOptions,
    pub nehari: NehariOptions,
}

impl Default for LambdaStarOptions {
    fn default() -> Self {
        Self {
            tol_lambda: 1e-6,
            epsilon: 1e-3,
            spectral: SpectralOptions::default(),
            nehari: NehariOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LambdaStarResult {
    pub lambda_star: f64,
    /// Global (lowest-energy) minimizer found at `lambda_star`.
    pub record_at_star: SolutionRecord,
    /// Every minimizer found at `lambda_star`, ranked by energy.
    pub branches: Vec<SolutionRecord>,
    /// Final bracket ends: best records with `P >= 0` and `P < 0`.
    pub record_below: SolutionRecord,
    pub record_above: SolutionRecord,
    pub bracket_history: Vec<BracketStep>,
    pub lambda1: f64,
    pub lambda0: f64,
    pub epsilon_used: f64,
    /// Declared tolerance on `|P|` at `λ*`, as a multiple of `T`.
    pub pohozaev_tolerance: f64,
    pub spectral: SpectralResult,
}

impl LambdaStarResult {
    pub fn pohozaev_within_tolerance(&self) -> bool {
        let v = &self.record_at_star.vals;
        v.pohozaev.abs() <= self.pohozaev_tolerance * v.dirichlet
    }
}

struct Side {
    lambda: f64,
    record: SolutionRecord,
}

fn solve_at(grid: &Arc<RadialGrid>, lambda: f64, starts: &[Field], opts: &NehariOptions) -> Result<Vec<SolutionRecord>> {
    minimize_from_starts(grid, lambda, starts, opts)
}

/// Bisection for the sign change of `g(λ) = P_λ(u_λ)` on `[Λ1(1+ε), Λ0]`.
///
/// Every midpoint is solved from the current minimizers at both bracket ends
/// and the lower-energy result decides the side, so a jump between minimizer
/// branches is followed rather than smoothed over.
pub fn find_lambda_star(grid: &Arc<RadialGrid>, opts: &LambdaStarOptions) -> Result<LambdaStarResult> {
    let params = grid.params();
    if params.dim() < 3 || params.theta() >= 0.0 {
        return Err(LabError::HypothesesUnmet(format!(
            "need dim >= 3 and theta < 0, got dim={} theta={}",
            params.dim(),
            params.theta()
        )));
    }
    let spectral = minimize_spectral(grid, &opts.spectral)?;
    let (l1, l0) = (spectral.lambda1, spectral.lambda0);
    let argmin = spectral.argmin_field.clone();
    let nopts = &opts.nehari;

    let hi_records = solve_at(grid, l0, &[Field::bump(grid), argmin.clone()], nopts)?;
    let hi_best = hi_records[0].clone();
    if hi_best.vals.pohozaev >= 0.0 {
        return Err(LabError::NoSignChange { lambda_lo: l0, lambda_hi: l0, p_lo: f64::NAN, p_hi: hi_best.vals.pohozaev });
    }

    let mut eps = opts.epsilon;
    let lo_best = loop {
        let lam = l1 * (1.0 + eps);
        let recs = solve_at(grid, lam, std::slice::from_ref(&argmin), nopts)?;
        let best = recs[0].clone();
        if best.vals.pohozaev > 0.0 {
            break best;
        }
        eps *= 0.1;
        if eps < 1e-9 {
            return Err(LabError::NoSignChange {
                lambda_lo: lam,
                lambda_hi: l0,
                p_lo: best.vals.pohozaev,
                p_hi: hi_best.vals.pohozaev,
            });
        }
    };
    let mut lo = Side { lambda: lo_best.lambda, record: lo_best };
    let mut hi = Side { lambda: l0, record: hi_best };
    let mut history = Vec::new();

    while hi.lambda - lo.lambda > opts.tol_lambda * l0 {
        let mid = 0.5 * (lo.lambda + hi.lambda);
        let recs = solve_at(grid, mid, &[lo.record.field.clone(), hi.record.field.clone()], nopts)?;
        let best = recs[0].clone();
        let signs = recs.iter().map(|r| r.vals.pohozaev < 0.0).collect::<Vec<_>>();
        let branches = if signs.iter().all(|&s| s == signs[0]) { 1 } else { 2 };
        history.push(BracketStep {
            lambda_lo: lo.lambda,
            lambda_hi: hi.lambda,
            lambda_mid: mid,
            p_mid: best.vals.pohozaev,
            energy_mid: best.energy_hat,
            branches,
        });
        if best.vals.pohozaev < 0.0 {
            hi = Side { lambda: mid, record: best };
        } else {
            lo = Side { lambda: mid, record: best };
        }
    }

    let lambda_star = 0.5 * (lo.lambda + hi.lambda);
    let branches = solve_at(grid, lambda_star, &[lo.record.field.clone(), hi.record.field.clone()], nopts)?;
    Ok(LambdaStarResult {
        lambda_star,
        record_at_star: branches[0].clone(),
        branches,
        record_below: lo.record,
        record_above: hi.record,
        bracket_history: history,
        lambda1: l1,
        lambda0: l0,
        epsilon_used: eps,
        pohozaev_tolerance: 1e-6,
        spectral,
    })
}
