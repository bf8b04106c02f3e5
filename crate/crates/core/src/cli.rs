//! Command-line front end.
//!
//! Configuration comes from an optional `key=value` file (`--config`) with
//! command-line flags taking precedence. Every run prints a sorted
//! `key=value` manifest on stdout; with `--output DIR` the manifest and the
//! command's CSV are also written to `DIR/<command>.manifest` and
//! `DIR/<command>.csv`. Exit status: 0 success, 1 solver error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::constructions::{
    amplitude_factor, derivative_bound, oracle_1d, scale_compacton, supersolution_bound, torsion_function,
};
use crate::error::{LabError, Result};
use crate::fiber::{fiber_roots, lambda0_of, lambda1_of, minimize_spectral, t_zero, SpectralOptions, TOL_ROOT};
use crate::functionals::{energy_gradient, evaluate, holder_check, pairing, FunctionalValues, Integrals};
use crate::grid::{Field, RadialGrid};
use crate::nehari::{minimize, project_to_nehari, NehariOptions, SolutionRecord};
use crate::params::ParamSet;
use crate::pohozaev::{find_lambda_star, scan_z, LambdaStarOptions, DEFAULT_TOL_FLUX};
use crate::random::FieldSampler;
use crate::shooting::UnitCompacton;

pub const THREADS_ENV: &str = "COMPACTON_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "compacton-lab", version, about = "Nehari, Pohozaev and compacton computations on the ball")]
struct Cli {
    /// key=value configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override, e.g. --tol pg_tol=1e-8 (repeatable)
    #[arg(long = "tol", value_name = "KEY=VALUE", global = true)]
    tol: Vec<String>,
    /// Directory receiving <command>.csv and <command>.manifest
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Spectral points Λ1, Λ0 and closed-form constants
    Spectral,
    /// Nehari minimizer at one λ
    Solve {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Continuation scan of (Ê, P, flux, L) over a λ range
    Scan {
        #[arg(long = "lambda-min")]
        lambda_min: Option<f64>,
        #[arg(long = "lambda-max")]
        lambda_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Bisection for λ* = inf Z
    LambdaStar,
    /// Scaled compacton family from the shooting compacton
    Family {
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Exact one-dimensional compacton profile
    Oracle1d {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Torsion function and super-solution bound
    Supersol {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Invariant checks on seeded random fields
    Verify {
        #[arg(long)]
        fields: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Spectral,
    Solve,
    Scan,
    LambdaStar,
    Family,
    Oracle1d,
    Supersol,
    Verify,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Spectral => "spectral",
            CommandKind::Solve => "solve",
            CommandKind::Scan => "scan",
            CommandKind::LambdaStar => "lambda-star",
            CommandKind::Family => "family",
            CommandKind::Oracle1d => "oracle1d",
            CommandKind::Supersol => "supersol",
            CommandKind::Verify => "verify",
        }
    }
}

/// Tolerance keys accepted by `--tol` and as `tol.<key>` in config files.
pub const TOLERANCE_KEYS: [&str; 8] = [
    "pg_tol",
    "rel_decrease_tol",
    "tol_flux",
    "tol_lambda",
    "epsilon",
    "spectral_pg_tol",
    "monotone_tol",
    "max_iter",
];

const FILE_KEYS: [&str; 13] = [
    "alpha",
    "beta",
    "dim",
    "radius",
    "grid_n",
    "seed",
    "output",
    "lambda",
    "lambda_min",
    "lambda_max",
    "steps",
    "sigmas",
    "fields",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub params: ParamSet,
    pub grid_n: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub lambda: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub steps: usize,
    pub sigmas: Vec<f64>,
    pub fields: usize,
    pub output: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| usage(format!("invalid value for {key}: {raw:?}")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').map(|s| parse_num(key, s)).collect()
}

fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value, got {line:?}", lineno + 1)))?;
        let k = k.trim().to_string();
        let known = FILE_KEYS.contains(&k.as_str())
            || k.strip_prefix("tol.").is_some_and(|t| TOLERANCE_KEYS.contains(&t));
        if !known {
            return Err(usage(format!("unknown config key {k:?}")));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

fn parse_tol(entry: &str) -> Result<(String, f64)> {
    let (k, v) = entry.split_once('=').ok_or_else(|| usage(format!("--tol expects KEY=VALUE, got {entry:?}")))?;
    let k = k.trim();
    if !TOLERANCE_KEYS.contains(&k) {
        return Err(usage(format!("unknown tolerance key {k:?}")));
    }
    Ok((k.to_string(), parse_num(k, v)?))
}

fn clap_error_to_usage(e: clap::Error) -> LabError {
    usage(e.to_string().trim_end().to_string())
}

/// Parses argv (including the program name) plus the optional config file.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(clap_error_to_usage)?;
    build_config(cli)
}

fn build_config(cli: Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_kv_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let get = |key: &str| file.get(key).map(String::as_str);
    fn pick<T: std::str::FromStr>(flag: Option<T>, key: &str, file: Option<&str>, default: T) -> Result<T> {
        match (flag, file) {
            (Some(v), _) => Ok(v),
            (None, Some(raw)) => parse_num(key, raw),
            (None, None) => Ok(default),
        }
    }
    fn pick_opt(flag: Option<f64>, key: &str, file: Option<&str>) -> Result<Option<f64>> {
        match (flag, file) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(raw)) => parse_num(key, raw).map(Some),
            (None, None) => Ok(None),
        }
    }

    let alpha = pick(cli.alpha, "alpha", get("alpha"), 0.1)?;
    let beta = pick(cli.beta, "beta", get("beta"), 0.2)?;
    let dim = pick(cli.dim, "dim", get("dim"), 4usize)?;
    let radius = pick(cli.radius, "radius", get("radius"), 1.0)?;
    let params = ParamSet::new(alpha, beta, dim, radius).map_err(|e| usage(e.to_string()))?;
    let grid_n = pick(cli.grid_n, "grid_n", get("grid_n"), 1024usize)?;
    if grid_n < crate::grid::MIN_NODES {
        return Err(usage(format!("grid_n must be at least {}, got {grid_n}", crate::grid::MIN_NODES)));
    }
    let seed = pick(cli.seed, "seed", get("seed"), 42u64)?;

    let mut tolerances = BTreeMap::new();
    for (k, v) in &file {
        if let Some(t) = k.strip_prefix("tol.") {
            tolerances.insert(t.to_string(), parse_num::<f64>(k, v)?);
        }
    }
    for entry in &cli.tol {
        let (k, v) = parse_tol(entry)?;
        tolerances.insert(k, v);
    }

    let output = cli.output.clone().or_else(|| get("output").map(PathBuf::from));
    let (command, lambda, lambda_min, lambda_max, steps, sigmas, fields) = match cli.command {
        Command::Spectral => (CommandKind::Spectral, None, None, None, None, None, None),
        Command::Solve { lambda } => (CommandKind::Solve, lambda, None, None, None, None, None),
        Command::Scan { lambda_min, lambda_max, steps } => {
            (CommandKind::Scan, None, lambda_min, lambda_max, steps, None, None)
        }
        Command::LambdaStar => (CommandKind::LambdaStar, None, None, None, None, None, None),
        Command::Family { sigmas } => (CommandKind::Family, None, None, None, None, sigmas, None),
        Command::Oracle1d { lambda } => (CommandKind::Oracle1d, lambda, None, None, None, None, None),
        Command::Supersol { lambda } => (CommandKind::Supersol, lambda, None, None, None, None, None),
        Command::Verify { fields } => (CommandKind::Verify, None, None, None, None, None, fields),
    };
    let lambda = pick_opt(lambda, "lambda", get("lambda"))?;
    let lambda_min = pick_opt(lambda_min, "lambda_min", get("lambda_min"))?;
    let lambda_max = pick_opt(lambda_max, "lambda_max", get("lambda_max"))?;
    let steps = pick(steps, "steps", get("steps"), 40usize)?;
    let sigmas = match (sigmas, get("sigmas")) {
        (Some(v), _) => v,
        (None, Some(raw)) => parse_list("sigmas", raw)?,
        (None, None) => vec![1.0, 2.0, 3.0, 6.0],
    };
    let fields = pick(fields, "fields", get("fields"), 100usize)?;

    let needs_lambda = matches!(command, CommandKind::Solve | CommandKind::Oracle1d | CommandKind::Supersol);
    match lambda {
        None if needs_lambda => return Err(usage(format!("{} requires --lambda", command.name()))),
        Some(l) if !(l > 0.0 && l.is_finite()) => return Err(usage(format!("--lambda must be positive, got {l}"))),
        _ => {}
    }
    if let (Some(lo), Some(hi)) = (lambda_min, lambda_max) {
        if !(lo < hi) {
            return Err(usage(format!("--lambda-min ({lo}) must be below --lambda-max ({hi})")));
        }
    }
    if command == CommandKind::Scan && steps < 1 {
        return Err(usage("--steps must be at least 1"));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 1.0)) {
        return Err(usage(format!("sigmas must be >= 1, got {s}")));
    }
    if command == CommandKind::Oracle1d && dim != 1 {
        return Err(usage(format!("oracle1d requires --dim 1, got {dim}")));
    }

    Ok(RunConfig {
        command,
        params,
        grid_n,
        seed,
        tolerances,
        lambda,
        lambda_min,
        lambda_max,
        steps,
        sigmas,
        fields,
        output,
    })
}

impl RunConfig {
    fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    pub fn nehari_options(&self) -> NehariOptions {
        let d = NehariOptions::default();
        NehariOptions {
            max_iter: self.tol("max_iter", d.max_iter as f64) as usize,
            window: d.window,
            rel_decrease_tol: self.tol("rel_decrease_tol", d.rel_decrease_tol),
            pg_tol: self.tol("pg_tol", d.pg_tol),
            tol_flux: self.tol("tol_flux", d.tol_flux),
        }
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions { seed: self.seed, pg_tol: self.tol("spectral_pg_tol", 1e-7), ..SpectralOptions::default() }
    }

    /// Ordered `key=value` description of the configuration.
    pub fn describe(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut out = vec![
            ("command".to_string(), self.command.name().to_string()),
            ("alpha".to_string(), num(p.alpha())),
            ("beta".to_string(), num(p.beta())),
            ("dim".to_string(), p.dim().to_string()),
            ("radius".to_string(), num(p.radius())),
            ("grid_n".to_string(), self.grid_n.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        let opt = |v: Option<f64>| v.map_or("none".to_string(), num);
        match self.command {
            CommandKind::Solve | CommandKind::Oracle1d | CommandKind::Supersol => {
                out.push(("lambda".into(), opt(self.lambda)));
            }
            CommandKind::Scan => {
                out.push(("lambda_min".into(), opt(self.lambda_min)));
                out.push(("lambda_max".into(), opt(self.lambda_max)));
                out.push(("steps".into(), self.steps.to_string()));
            }
            CommandKind::Family => {
                out.push(("sigmas".into(), self.sigmas.iter().map(|s| num(*s)).collect::<Vec<_>>().join(",")));
            }
            CommandKind::Verify => out.push(("fields".into(), self.fields.to_string())),
            _ => {}
        }
        for (k, v) in &self.tolerances {
            out.push((format!("tol.{k}"), num(*v)));
        }
        out
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub manifest: BTreeMap<String, String>,
    pub csv: Option<String>,
    /// Some checks failed (`verify`).
    pub failed: bool,
}

impl RunOutput {
    fn put(&mut self, key: &str, value: impl Into<String>) {
        self.manifest.insert(key.to_string(), value.into());
    }

    fn put_num(&mut self, key: &str, value: f64) {
        self.put(key, num(value));
    }

    pub fn manifest_text(&self) -> String {
        self.manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn csv_header(config: &RunConfig) -> String {
    config.describe().iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn profile_csv(config: &RunConfig, field: &Field) -> String {
    let mut s = csv_header(config);
    s.push_str("r,u,du_dr\n");
    let du = field.radial_derivative();
    for ((r, u), d) in field.grid().node_radii().iter().zip(field.values()).zip(&du) {
        let _ = writeln!(s, "{},{},{}", num(*r), num(*u), num(*d));
    }
    s
}

fn put_values(out: &mut RunOutput, prefix: &str, v: &FunctionalValues) {
    out.put_num(&format!("{prefix}T"), v.dirichlet);
    out.put_num(&format!("{prefix}A"), v.absorption);
    out.put_num(&format!("{prefix}B"), v.source);
    out.put_num(&format!("{prefix}E"), v.energy);
    out.put_num(&format!("{prefix}Q"), v.nehari);
    out.put_num(&format!("{prefix}L"), v.fiber_curvature);
    out.put_num(&format!("{prefix}P"), v.pohozaev);
}

fn put_record(out: &mut RunOutput, prefix: &str, r: &SolutionRecord) {
    out.put_num(&format!("{prefix}lambda"), r.lambda);
    out.put_num(&format!("{prefix}E_hat"), r.energy_hat);
    out.put_num(&format!("{prefix}flux"), r.flux);
    out.put_num(&format!("{prefix}du_dr_at_R"), r.field.boundary_derivative());
    out.put_num(&format!("{prefix}grad_residual"), r.grad_residual);
    out.put_num(&format!("{prefix}projected_gradient"), r.projected_gradient);
    out.put(&format!("{prefix}classification"), r.classification.to_string());
    out.put(&format!("{prefix}converged"), r.converged.to_string());
    out.put(&format!("{prefix}on_fold"), r.on_fold.to_string());
    out.put(&format!("{prefix}iterations"), r.iterations.to_string());
    put_values(out, prefix, &r.vals);
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let grid = RadialGrid::new(config.params, config.grid_n)?;
    let mut out = RunOutput::default();
    for (k, v) in config.describe() {
        out.put(&format!("config.{k}"), v);
    }
    let p = config.params;
    let (c0, c1) = p.fiber_constants();
    out.put_num("c0", c0);
    out.put_num("c1", c1);
    out.put_num("theta", p.theta());
    match config.command {
        CommandKind::Spectral => run_spectral(config, &grid, &mut out)?,
        CommandKind::Solve => run_solve(config, &grid, &mut out)?,
        CommandKind::Scan => run_scan(config, &grid, &mut out)?,
        CommandKind::LambdaStar => run_lambda_star(config, &grid, &mut out)?,
        CommandKind::Family => run_family(config, &grid, &mut out)?,
        CommandKind::Oracle1d => run_oracle(config, &grid, &mut out)?,
        CommandKind::Supersol => run_supersol(config, &grid, &mut out)?,
        CommandKind::Verify => run_verify(config, &grid, &mut out)?,
    }
    Ok(out)
}

fn run_spectral(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let s = minimize_spectral(grid, &config.spectral_options())?;
    out.put_num("inf_lambda", s.inf_lambda);
    out.put_num("Lambda0", s.lambda0);
    out.put_num("Lambda1", s.lambda1);
    out.put_num("Lambda1_over_Lambda0", s.lambda1 / s.lambda0);
    out.put("converged", s.converged.to_string());
    out.put("iterations", s.iterations.to_string());
    out.put("radial_only", s.radial_only.to_string());
    out.csv = Some(profile_csv(config, &s.argmin_field));
    Ok(())
}

fn run_solve(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let lambda = config.lambda.expect("validated");
    let rec = match minimize(grid, lambda, None, &config.nehari_options()) {
        Err(e @ LabError::NotConverged { .. }) => {
            let best = e.best_record().cloned().expect("carries best record");
            eprintln!("warning: {e}");
            best
        }
        r => r?,
    };
    put_record(out, "", &rec);
    out.csv = Some(profile_csv(config, &rec.field));
    Ok(())
}

fn scan_range(config: &RunConfig, grid: &Arc<RadialGrid>) -> Result<(f64, f64)> {
    match (config.lambda_min, config.lambda_max) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        (lo, hi) => {
            let s = minimize_spectral(grid, &config.spectral_options())?;
            Ok((lo.unwrap_or(1.05 * s.lambda1), hi.unwrap_or(1.5 * s.lambda0)))
        }
    }
}

fn run_scan(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let (lo, hi) = scan_range(config, grid)?;
    let scan = scan_z(grid, lo, hi, config.steps, &config.nehari_options());
    let mut s = csv_header(config);
    s.push_str("lambda,E_hat,P,flux,L,classification,in_Z\n");
    for row in &scan.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(row.lambda),
            num(row.energy_hat()),
            num(row.pohozaev()),
            num(row.flux()),
            num(row.fiber_curvature()),
            row.classification(),
            row.in_z()
        );
    }
    out.csv = Some(s);
    out.put("rows", scan.rows.len().to_string());
    out.put(
        "sign_changes",
        scan.sign_changes.iter().map(|(a, b)| format!("{}:{}", num(*a), num(*b))).collect::<Vec<_>>().join(";"),
    );
    Ok(())
}

fn run_lambda_star(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let d = LambdaStarOptions::default();
    let opts = LambdaStarOptions {
        tol_lambda: config.tol("tol_lambda", d.tol_lambda),
        epsilon: config.tol("epsilon", d.epsilon),
        spectral: config.spectral_options(),
        nehari: config.nehari_options(),
    };
    let res = find_lambda_star(grid, &opts)?;
    out.put_num("lambda_star", res.lambda_star);
    out.put_num("Lambda0", res.lambda0);
    out.put_num("Lambda1", res.lambda1);
    out.put_num("epsilon_used", res.epsilon_used);
    out.put("bisection_steps", res.bracket_history.len().to_string());
    out.put("branches_at_star", res.branches.len().to_string());
    out.put("pohozaev_within_tolerance", res.pohozaev_within_tolerance().to_string());
    out.put_num("pohozaev_tolerance", res.pohozaev_tolerance);
    put_record(out, "star.", &res.record_at_star);
    put_record(out, "below.", &res.record_below);
    put_record(out, "above.", &res.record_above);
    out.csv = Some(profile_csv(config, &res.record_at_star.field));
    Ok(())
}

fn run_family(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let p = grid.params();
    let tol_flux = config.tol("tol_flux", DEFAULT_TOL_FLUX);
    let unit = UnitCompacton::compute(p, shooting_step(p))?;
    let (field, lambda) = unit.on_grid(grid, grid.radius())?;
    let source = SolutionRecord::from_field(field, lambda, tol_flux);
    out.put("source", "shooting");
    put_record(out, "source.", &source);
    let mut s = csv_header(config);
    s.push_str("sigma,lambda,amplitude_factor,support_radius,max_u,weak_residual,classification\n");
    for &sigma in &config.sigmas {
        let rec = scale_compacton(&source, sigma, tol_flux)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(sigma),
            num(rec.lambda),
            num(amplitude_factor(sigma, p)),
            num(grid.radius() / sigma),
            num(rec.field.max_abs()),
            num(rec.weak_residual()),
            rec.classification
        );
    }
    out.csv = Some(s);
    Ok(())
}

/// RK4 step for the shooting compacton, fine relative to its support.
pub fn shooting_step(params: &ParamSet) -> f64 {
    2e-4 * (params.dim() as f64).max(1.0)
}

fn run_oracle(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let lambda = config.lambda.expect("validated");
    let prof = oracle_1d(grid.params(), lambda, config.grid_n)?;
    out.put_num("lambda", lambda);
    out.put_num("u_max", prof.u_max);
    out.put_num("half_width", prof.half_width);
    let mut s = csv_header(config);
    s.push_str("r,u,du_dr\n");
    for (x, u) in &prof.profile {
        let _ = writeln!(s, "{},{},{}", num(*x), num(*u), num(prof.derivative_at(*x)));
    }
    out.csv = Some(s);
    Ok(())
}

fn run_supersol(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let lambda = config.lambda.expect("validated");
    let p = grid.params();
    let e = torsion_function(grid);
    let e_max = e.max_abs();
    let m = supersolution_bound(p, lambda, e_max);
    out.put_num("lambda", lambda);
    out.put_num("e_max", e_max);
    out.put_num("M", m);
    out.put_num("supersolution_margin", m - lambda * m.powf(p.beta()) * e_max.powf(p.beta()));
    out.put_num("shift_K", derivative_bound(p, lambda, 1e-6 * m * e_max, m * e_max));
    out.csv = Some(profile_csv(config, &e.scaled(m)));
    Ok(())
}

struct Check {
    name: &'static str,
    worst: f64,
    limit: f64,
    cases: usize,
}

impl Check {
    fn new(name: &'static str, limit: f64) -> Self {
        Self { name, worst: 0.0, limit, cases: 0 }
    }

    fn record(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn passed(&self) -> bool {
        self.worst <= self.limit
    }
}

fn run_verify(config: &RunConfig, grid: &Arc<RadialGrid>, out: &mut RunOutput) -> Result<()> {
    let p = *grid.params();
    let sampler = FieldSampler::new(config.seed, 0);
    let fields = sampler.positive_fields(grid, config.fields);
    let signed = FieldSampler::new(config.seed, 2).signed_fields(grid, config.fields);
    let mut rng = FieldSampler::new(config.seed, 3).rng();

    let mut scaling = Check::new("scaling_laws", 1e-12);
    let mut pairing_q = Check::new("pairing_equals_Q", 1e-8);
    let mut fiber_e = Check::new("fiber_zero_energy", 1e-9);
    let mut fiber_q = Check::new("fiber_zero_nehari", 1e-9);
    let mut double = Check::new("double_root_at_lambda1", TOL_ROOT);
    let mut e_minus_p = Check::new("E_minus_P_is_T_over_n", 1e-12);
    let mut sign_flip = Check::new("sign_flip_symmetry", 1e-12);
    let mut holder = Check::new("holder_margin_negative_part", 1e-10);
    let mut curvature = Check::new("nonpositive_P_implies_positive_L", 0.0);

    for f in fields.iter().chain(&signed) {
        let v = f.values();
        let ints = Integrals::of(grid, v);
        let t = 0.5 + 1.5 * crate::random::uniform(&mut rng);
        let it = Integrals::of(grid, &f.scaled(t).into_values());
        let sc = ints.scaled(t, &p);
        scaling.record(((it.dirichlet - sc.dirichlet) / sc.dirichlet).abs());
        scaling.record(((it.absorption - sc.absorption) / sc.absorption).abs());
        scaling.record(((it.source - sc.source) / sc.source).abs());

        let lambda = 1.0 + crate::random::uniform(&mut rng);
        let vals = evaluate(f, lambda);
        let g = energy_gradient(f, lambda);
        pairing_q.record((pairing(grid, &g, v) - vals.nehari).abs() / vals.magnitude());
        e_minus_p.record((vals.energy - vals.pohozaev - vals.dirichlet / p.dim() as f64).abs() / vals.dirichlet);
        let vf = evaluate(&f.scaled(-1.0), lambda);
        sign_flip.record((vf.energy - vals.energy).abs() / vals.magnitude());
        sign_flip.record((vf.nehari - vals.nehari).abs() / vals.magnitude());

        let l0 = lambda0_of(&ints, &p)?;
        let t0 = t_zero(ints.dirichlet, ints.absorption, &p)?;
        let at = FunctionalValues::from_integrals(ints.scaled(t0, &p), l0, &p);
        fiber_e.record(at.energy.abs() / at.dirichlet);
        fiber_q.record(at.nehari.abs() / at.dirichlet);
        let l1 = lambda1_of(&ints, &p)?;
        let roots = fiber_roots(&ints, l1, &p)?;
        double.record(roots.psi_min.abs() / (ints.dirichlet + ints.absorption));

        if p.dim() >= 3 {
            holder.record((-holder_check(f)?).max(0.0));
        }
        if p.dim() >= 3 && p.theta() < 0.0 {
            let lam = l1 * (1.0 + 2.0 * crate::random::uniform(&mut rng));
            let roots = fiber_roots(&ints, lam, &p)?;
            for t in [roots.t1, roots.t2].into_iter().flatten() {
                let vt = FunctionalValues::from_integrals(ints.scaled(t, &p), lam, &p);
                if vt.pohozaev <= 0.0 {
                    curvature.record(if vt.fiber_curvature > 0.0 { 0.0 } else { 1.0 });
                }
            }
        }
    }
    if let Some(f) = fields.first() {
        let lam = 2.0 * lambda1_of(&Integrals::of(grid, f.values()), &p)?;
        let (u, _) = project_to_nehari(f, lam)?;
        let v = evaluate(&u, lam);
        let mut on_m = Check::new("projection_on_nehari_set", 1e-8);
        on_m.record(v.nehari.abs() / v.magnitude());
        finish_check(out, &on_m);
    }
    for c in [&scaling, &pairing_q, &fiber_e, &fiber_q, &double, &e_minus_p, &sign_flip, &holder, &curvature] {
        finish_check(out, c);
    }
    out.failed = out.manifest.iter().any(|(k, v)| k.starts_with("check.") && k.ends_with(".status") && v == "FAIL");
    out.put("status", if out.failed { "FAIL" } else { "PASS" });
    Ok(())
}

fn finish_check(out: &mut RunOutput, c: &Check) {
    let key = format!("check.{}", c.name);
    out.put(&format!("{key}.status"), if c.passed() { "PASS" } else { "FAIL" });
    out.put_num(&format!("{key}.worst"), c.worst);
    out.put_num(&format!("{key}.limit"), c.limit);
    out.put(&format!("{key}.cases"), c.cases.to_string());
}

/// Caps the global thread pool from `COMPACTON_LAB_THREADS` (0 or unset: automatic).
pub fn configure_threads() {
    let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn write_outputs(config: &RunConfig, out: &RunOutput) -> Result<()> {
    let Some(dir) = &config.output else {
        return Ok(());
    };
    let io = |e: std::io::Error| LabError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = config.command.name();
    std::fs::write(dir.join(format!("{name}.manifest")), out.manifest_text()).map_err(io)?;
    if let Some(csv) = &out.csv {
        std::fs::write(dir.join(format!("{name}.csv")), csv).map_err(io)?;
    }
    Ok(())
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    configure_threads();
    let result = run(&config).and_then(|out| write_outputs(&config, &out).map(|_| out));
    match result {
        Ok(out) => {
            print!("{}", out.manifest_text());
            i32::from(out.failed)
        }
        Err(e @ LabError::Usage(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
