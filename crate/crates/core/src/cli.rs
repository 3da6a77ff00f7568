//! Command-line front end. Every subcommand computes all of its outputs
//! before the first file is written, so a failed run leaves nothing behind.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::asymptotics::{direct_mu, sweep_j, sweep_l, SweepReport};
use crate::config::{parse_assignment, ExperimentConfig};
use crate::distance::{distance_field, eikonal_check};
use crate::error::{Error, Result};
use crate::exponents::{parse, ExponentField};
use crate::grid::{read_field_csv, write_field_csv, ScalarField, TriGrid, DEFAULT_TIE_TOL};
use crate::modular::{gradient_norm, luxemburg_norm, modular, NormVariant};
use crate::operators::{limit_residual, LimitResidual};
use crate::rayleigh::minimize_quotient;
use crate::report::{aggregate, sweep_csv, to_json, trace_csv, write_atomic, GridInfo, Report, SUMMARY_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "varexp", version, about = "Variable-exponent eigenvalue experiments on planar domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Luxemburg norms of a field and of its gradient
    Norm,
    /// First eigenvalue of the Rayleigh quotient
    Minimize,
    /// Eigenvalues for growing j against the sup-norm limit
    SweepJ,
    /// Sup-norm problems for growing l against 1/‖d‖∞
    SweepL,
    /// Boundary distance, its maximum and the ridge
    Distance,
    /// Residual of the limit equation against the distance baseline
    CheckLimit,
    /// Collect the JSON reports of the output directory
    Report,
}

impl Command {
    pub fn file_stem(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Minimize => "minimize",
            Command::SweepJ => "sweep_j",
            Command::SweepL => "sweep_l",
            Command::Distance => "distance",
            Command::CheckLimit => "check_limit",
            Command::Report => "summary",
        }
    }
}

/// Flags shared by all subcommands. Each one overrides a config key.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// JSON experiment configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set solver.seed=3` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub shape: Option<String>,
    #[arg(long, global = true)]
    pub w: Option<f64>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long = "r-in", global = true)]
    pub r_in: Option<f64>,
    #[arg(long = "r-out", global = true)]
    pub r_out: Option<f64>,
    #[arg(long = "notch-w", global = true)]
    pub notch_w: Option<f64>,
    #[arg(long = "notch-h", global = true)]
    pub notch_h: Option<f64>,
    /// Lattice resolution (nodes per unit length)
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Exponent p(x, y)
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Exponent q(x, y)
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    /// Flag overrides first, then `--set` in the order given.
    pub fn overrides(&self) -> Result<Vec<(String, Value)>> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Value| o.push((k.to_string(), v));
        if let Some(s) = &self.shape {
            put("domain.shape", Value::String(s.clone()));
        }
        for (key, v) in [
            ("domain.w", self.w),
            ("domain.h", self.h),
            ("domain.r", self.r),
            ("domain.a", self.a),
            ("domain.b", self.b),
            ("domain.r_in", self.r_in),
            ("domain.r_out", self.r_out),
            ("domain.notch_w", self.notch_w),
            ("domain.notch_h", self.notch_h),
        ] {
            if let Some(v) = v {
                put(key, serde_json::json!(v));
            }
        }
        if let Some(n) = self.n {
            put("domain.n", n.into());
        }
        if let Some(p) = &self.p {
            put("p_expr", Value::String(p.clone()));
        }
        if let Some(q) = &self.q {
            put("q_expr", Value::String(q.clone()));
        }
        if let Some(out) = &self.out {
            put("out_dir", Value::String(out.to_string_lossy().into_owned()));
        }
        for s in &self.set {
            o.push(parse_assignment(s)?);
        }
        Ok(o)
    }
}

/// Exit status for an error: 2 for anything the user can fix in the input.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Solver(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

/// Files produced by one run, plus whether a solver flagged non-convergence.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub converged: bool,
}

/// Parses nothing and writes nothing: computes the outputs of `command`.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    if command == Command::Report {
        let summary = aggregate(&cfg.resolve_out_dir())?;
        return Ok(Outcome { files: vec![(SUMMARY_FILE.into(), to_json(&summary)?)], converged: true });
    }
    let spec = cfg.domain.to_spec()?;
    let grid = TriGrid::build(&spec)?;
    let stem = command.file_stem();
    let report = |result: Value| to_json(&Report { command: stem, config: cfg, grid: GridInfo::of(&grid), result });
    let mut files = Vec::new();
    let mut converged = true;
    match command {
        Command::Norm => {
            let p = ExponentField::parse_and_sample(&cfg.p_expr, &grid, 1)?;
            let (u, source) = input_field(cfg, &grid)?;
            let variant = cfg.norm_variant;
            let norm = luxemburg_norm(&grid, &u, &p, variant);
            let grad = gradient_norm(&grid, &u, &p, variant);
            let (sup, _) = grid.sup_norm_and_argmax(&u, DEFAULT_TIE_TOL);
            let res = NormResult {
                variant,
                field: source,
                norm,
                gradient_norm: grad,
                modular_at_norm: if norm > 0.0 { modular(&grid, &u, &p, norm, variant).value() } else { 0.0 },
                sup_norm: sup,
                p_minus: p.p_minus,
                p_plus: p.p_plus,
            };
            files.push((format!("{stem}.json"), report(serde_json::to_value(&res)?)?));
        }
        Command::Minimize => {
            let p = ExponentField::parse_and_sample(&cfg.p_expr, &grid, 1)?;
            let q = ExponentField::parse_and_sample(&cfg.q_expr, &grid, 1)?;
            let r = minimize_quotient(&grid, &p, &q, &cfg.solver.minimize_options())?;
            converged = r.converged;
            let u = &r.minimizer;
            let classical = gradient_norm(&grid, u, &p, NormVariant::Classical)
                / luxemburg_norm(&grid, u, &q, NormVariant::Classical);
            let res = MinimizeReport { classical_quotient: classical, p_plus: p.p_plus, q_plus: q.p_plus, result: &r };
            files.push((format!("{stem}.json"), report(serde_json::to_value(&res)?)?));
            files.push((format!("{stem}_field.csv"), field_csv(u)?));
            files.push((format!("{stem}_trace.csv"), trace_csv(&r.trace)));
        }
        Command::SweepJ => {
            let p = ExponentField::parse_and_sample(&cfg.p_expr, &grid, 1)?;
            let q = ExponentField::parse_and_sample(&cfg.q_expr, &grid, 1)?;
            let r = sweep_j(&grid, cfg.l, &p, &q, &cfg.j_list, &cfg.solver.minimize_options(), &cfg.solver.mu_options())?;
            converged = r.rows.iter().all(|row| row.converged);
            push_sweep(&mut files, stem, &r, report(serde_json::to_value(&r)?)?)?;
        }
        Command::SweepL => {
            let p = ExponentField::parse_and_sample(&cfg.p_expr, &grid, 1)?;
            let r = sweep_l(&grid, &p, &cfg.l_list, &cfg.solver.mu_options())?;
            converged = r.rows.iter().all(|row| row.converged);
            push_sweep(&mut files, stem, &r, report(serde_json::to_value(&r)?)?)?;
        }
        Command::Distance => {
            let d = distance_field(&grid);
            let res = DistanceReport {
                d_max: d.d_max,
                lambda_inf: d.lambda_inf,
                ridge_singleton: d.ridge_is_singleton,
                ridge_node_count: d.ridge_nodes.len(),
                argmax: d.argmax_nodes.iter().map(|&i| grid.nodes[i]).collect(),
                eikonal_exclusion: 3.0 * grid.h,
                eikonal_deviation: eikonal_check(&grid, &d.d, &d.ridge_nodes, 3.0 * grid.h),
            };
            files.push((format!("{stem}.json"), report(serde_json::to_value(&res)?)?));
            files.push((format!("{stem}_field.csv"), field_csv(&d.d)?));
        }
        Command::CheckLimit => {
            let p = ExponentField::parse_and_sample(&cfg.p_expr, &grid, 1)?;
            let exclusion = cfg.limit.exclusion_radius.unwrap_or(3.0 * grid.h);
            let width = cfg.limit.smoothing_width.unwrap_or(2.0 * grid.h);
            let (w, mu) = match &cfg.field_csv {
                Some(path) => (read_field_csv(&grid, path)?, None),
                None => {
                    let lp = p.rescaled(&grid, cfg.l)?;
                    let r = direct_mu(&grid, &lp, &cfg.solver.mu_options())?;
                    converged = r.converged;
                    let mu = r.mu;
                    (r.w, Some(mu))
                }
            };
            let (sup, gamma) = grid.sup_norm_and_argmax(&w, DEFAULT_TIE_TOL);
            if sup == 0.0 {
                return Err(Error::ZeroField);
            }
            let w = w.scaled(1.0 / sup);
            let x_star = gamma[gamma.len() / 2];
            let dist = distance_field(&grid);
            let d_hat = dist.d.scaled(1.0 / dist.d_max);
            let field = limit_residual(&grid, &w, &p, x_star, exclusion, width)?;
            let baseline = limit_residual(&grid, &d_hat, &p, x_star, exclusion, width)?;
            let res = LimitReport {
                l: cfg.field_csv.is_none().then_some(cfg.l),
                mu,
                x_star: grid.nodes[x_star],
                median_ratio: field.median / baseline.median,
                field,
                baseline,
            };
            files.push((format!("{stem}.json"), report(serde_json::to_value(&res)?)?));
        }
        Command::Report => unreachable!("handled above"),
    }
    Ok(Outcome { files, converged })
}

fn push_sweep(files: &mut Vec<(String, Vec<u8>)>, stem: &str, r: &SweepReport, json: Vec<u8>) -> Result<()> {
    files.push((format!("{stem}.json"), json));
    files.push((format!("{stem}.csv"), sweep_csv(r)));
    if let Some(u) = &r.last_extremal {
        files.push((format!("{stem}_field.csv"), field_csv(u)?));
    }
    Ok(())
}

fn field_csv(u: &ScalarField) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_field_csv(u, &mut out)?;
    Ok(out)
}

fn input_field(cfg: &ExperimentConfig, grid: &TriGrid) -> Result<(ScalarField, String)> {
    match (&cfg.u_expr, &cfg.field_csv) {
        (Some(_), Some(_)) => Err(Error::Config("give at most one of u_expr and field_csv".into())),
        (Some(e), None) => {
            let ast = parse(e)?;
            Ok((grid.interpolate(|x, y| ast.eval(x, y), false), e.clone()))
        }
        (None, Some(path)) => Ok((read_field_csv(grid, path)?, path.display().to_string())),
        (None, None) => Ok((distance_field(grid).d, "distance".into())),
    }
}

#[derive(Serialize)]
struct NormResult {
    variant: NormVariant,
    field: String,
    norm: f64,
    gradient_norm: f64,
    modular_at_norm: f64,
    sup_norm: f64,
    p_minus: f64,
    p_plus: f64,
}

#[derive(Serialize)]
struct MinimizeReport<'a> {
    /// Quotient of the minimizer with both norms in the classical variant.
    classical_quotient: f64,
    p_plus: f64,
    q_plus: f64,
    #[serde(flatten)]
    result: &'a crate::rayleigh::MinimizeResult,
}

#[derive(Serialize)]
struct DistanceReport {
    d_max: f64,
    lambda_inf: f64,
    ridge_singleton: bool,
    ridge_node_count: usize,
    argmax: Vec<[f64; 2]>,
    eikonal_exclusion: f64,
    eikonal_deviation: f64,
}

#[derive(Serialize)]
struct LimitReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    x_star: [f64; 2],
    median_ratio: f64,
    field: LimitResidual,
    baseline: LimitResidual,
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32> {
    let cfg = ExperimentConfig::load(cli.common.config.as_deref(), &cli.common.overrides()?)?;
    let outcome = execute(cli.command, &cfg)?;
    let dir = cfg.resolve_out_dir();
    for (name, bytes) in &outcome.files {
        let path = write_atomic(&dir, name, bytes)?;
        println!("{}", path.display());
    }
    if outcome.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: the solver stopped before meeting its tolerances");
        Ok(EXIT_NOT_CONVERGED)
    }
}
