//! Command-line front end.
//!
//! Exit status is 0 on success, 1 when an evaluation or verification fails
//! and 2 for usage errors (bad flags, bad configuration). Every failure is
//! reported as a single line on stderr.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::warn;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{self, compose_adaptive, grid_eval, Cell, GridSpec};
use crate::expr;
use crate::kernels::{Kernel, ScaleMode, SchroederKernel};
use crate::render;
use crate::solver::{self, BranchStrategy, InverseBranch, RunReport, Sector};
use crate::verify::{self, SweepSpec, Verdict, VerifyError};

#[derive(Debug, Parser)]
#[command(name = "infcomp", version, about = "Infinite compositions for modified Schröder and Abel equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "REAL")]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_name = "INT")]
    pub nmax: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for sweep sampling.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Replace every verdict threshold in `verify`.
    #[arg(long, global = true, value_name = "REAL")]
    pub threshold: Option<f64>,
    /// Override a configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Evaluate the composition at `points`.
    Eval,
    /// Randomized identity and basepoint sweep.
    Verify,
    /// Schröder function at infinity and asymptotic slope fits.
    Schroeder,
    /// Domain-colouring PPM and CSV of a grid.
    Render,
    /// Taylor coefficients at 0 and the recurrence check.
    Taylor,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn failure(msg: impl std::fmt::Display) -> CliError {
    CliError::Failure(msg.to_string())
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> CliError {
    failure(format!("{}: {e}", path.display()))
}

/// Parse arguments, run, and return the exit status; diagnostics go to `stderr`.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{line}");
            return 2;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let text = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {text}");
            e.exit_code()
        }
    }
}

/// Numeric settings shared by all subcommands.
#[derive(Debug, Clone)]
struct Settings {
    tol: f64,
    n_max: usize,
    z0: Complex64,
    seed: u64,
    threshold: Option<f64>,
    out: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(t) = cli.tol {
        cfg.set("tol", &t.to_string());
    }
    if let Some(n) = cli.nmax {
        cfg.set("nmax", &n.to_string());
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string());
    }
    if let Some(t) = cli.threshold {
        cfg.set("threshold", &t.to_string());
    }
    if let Some(o) = &cli.out {
        cfg.set("out", &o.to_string_lossy());
    }
    Ok(cfg)
}

fn settings(cfg: &RunConfig) -> Result<Settings, CliError> {
    let tol = cfg.f64_or("tol", engine::DEFAULT_TOL)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage(format!("tol must be positive, got {tol}")));
    }
    let n_max = cfg.usize_or("nmax", engine::DEFAULT_N_MAX)?;
    if n_max == 0 {
        return Err(usage("nmax must be at least 1"));
    }
    let threshold = match cfg.get("threshold") {
        Some(_) => Some(cfg.f64_or("threshold", 0.0)?),
        None => None,
    };
    Ok(Settings {
        tol,
        n_max,
        z0: cfg.complex_or("z0", Complex64::new(0.0, 0.0))?,
        seed: cfg.u64_or("seed", 0)?,
        threshold,
        out: cfg.get("out").map(PathBuf::from),
    })
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let s = settings(&cfg)?;
    let kernel = cfg.kernel()?;
    let result = match cli.command {
        Command::Eval => cmd_eval(&cfg, &s, &kernel, stdout),
        Command::Verify => cmd_verify(&cfg, &s, &kernel, stdout),
        Command::Schroeder => cmd_schroeder(&cfg, &s, &kernel, stdout),
        Command::Render => cmd_render(&cfg, &s, &kernel, stdout),
        Command::Taylor => cmd_taylor(&cfg, &kernel, stdout),
    };
    stdout.flush().map_err(failure)?;
    result
}

fn fmt_c(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn emit(stdout: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(stdout, "{line}").map_err(failure)
}

fn cmd_eval(cfg: &RunConfig, s: &Settings, k: &Kernel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let points = cfg.complex_list("points")?;
    if points.is_empty() {
        return Err(usage("eval needs 'points' (a ';'-separated list)"));
    }
    for x in points {
        let t = compose_adaptive(k, x, s.z0, s.tol, s.n_max)
            .map_err(|e| failure(format!("evaluation at {} failed: {e}", fmt_c(x))))?;
        emit(
            stdout,
            format_args!(
                "x={} value={} depth={} increment={:e} tail={:e}",
                fmt_c(x),
                fmt_c(t.value),
                t.depth,
                t.last_increment,
                t.tail
            ),
        )?;
    }
    Ok(())
}

fn cmd_verify(cfg: &RunConfig, s: &Settings, k: &Kernel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = SweepSpec {
        draws: cfg.usize_or("draws", 50)?,
        seed: s.seed,
        tol: s.tol,
        n_max: s.n_max,
        threshold: s.threshold,
    };
    let mut verdicts = verify::sweep(k, &spec);
    if let Kernel::Schroeder(sk) = k {
        if sk.mode() == ScaleMode::Contracting {
            let order = cfg.usize_or("order", 8)?;
            let depth = cfg.usize_or("depth", 40)?;
            let v = match verify::check_taylor_recurrence(sk, order, depth) {
                Ok(v) => v,
                Err(VerifyError::Capacity { order, max }) => {
                    return Err(usage(format!("order {order} exceeds the jet capacity {max}")));
                }
                Err(e) => Verdict::new("taylor_recurrence_error", f64::INFINITY, 0.0).with("error", format!("{e:?}")),
            };
            verdicts.push(match s.threshold {
                Some(t) => v.rethreshold(t),
                None => v,
            });
        }
    }
    for v in &verdicts {
        emit(stdout, v)?;
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    emit(stdout, format_args!("{} of {} checks passed", verdicts.len() - failed, verdicts.len()))?;
    if failed > 0 {
        return Err(failure(format!("{failed} of {} checks failed", verdicts.len())));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SlopeReport {
    form: &'static str,
    path: Vec<[f64; 2]>,
    residuals: Vec<f64>,
    slope: f64,
}

#[derive(Debug, Serialize)]
struct SchroederReport {
    runs: Vec<RunReport>,
    slope: Option<SlopeReport>,
}

fn inverse_branch(cfg: &RunConfig, f: &expr::FuncExpr) -> Result<InverseBranch, CliError> {
    let finv = expr::parse(cfg.get("finv").unwrap_or("log(z)"), "z").map_err(|e| usage(format!("key 'finv': {e}")))?;
    let strategy = match cfg.get("branch").unwrap_or("nearest") {
        "nearest" => BranchStrategy::NearestToPrevious,
        "principal" => BranchStrategy::Principal,
        other => return Err(usage(format!("key 'branch': unknown strategy '{other}'"))),
    };
    let default = Sector::right_half_plane();
    let region = Sector {
        anchor: cfg.complex_or("region_anchor", default.anchor)?,
        direction: cfg.f64_or("region_direction", default.direction)?,
        opening: cfg.f64_or("region_opening", default.opening)?,
    };
    if !(region.opening > 0.0 && region.opening <= PI) {
        return Err(usage("region_opening must lie in (0, π]"));
    }
    let mut inv = InverseBranch::new(f, finv, strategy, &region).map_err(failure)?;
    if let Some(period) = cfg.complex("branch_period")? {
        inv = inv.with_period(period);
    }
    Ok(inv)
}

fn geometric_path(cfg: &RunConfig, default_ratio: f64) -> Result<Option<Vec<Complex64>>, CliError> {
    let Some(start) = cfg.complex("path_start")? else {
        return Ok(None);
    };
    let ratio = cfg.complex_or("path_ratio", Complex64::new(default_ratio, 0.0))?;
    let len = cfg.usize_or("path_len", 10)?;
    Ok(Some((0..len).map(|m| start * ratio.powi(m as i32)).collect()))
}

fn cmd_schroeder(cfg: &RunConfig, s: &Settings, k: &Kernel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let inv = inverse_branch(cfg, k.f())?;
    let points = cfg.complex_list("points")?;
    let mut report = SchroederReport {
        runs: Vec::new(),
        slope: None,
    };
    match k {
        Kernel::Schroeder(sk) => {
            if !points.is_empty() && sk.mode() != ScaleMode::Expanding {
                return Err(usage("solving for Φ needs mode = expanding"));
            }
            for &w in &points {
                let mut run = solver::solve_phi(sk, &inv, w, s.tol, s.n_max)
                    .map_err(|e| failure(format!("w = {}: {e}", fmt_c(w))))?;
                let lw = sk.lambda() * w;
                match solver::solve_phi(sk, &inv, lw, s.tol, s.n_max) {
                    Ok(lower) => solver::attach_residual(sk, &mut run, &lower).map_err(failure)?,
                    Err(e) => warn!("no residual at w = {}: Φ({}) unavailable: {e}", fmt_c(w), fmt_c(lw)),
                }
                if !run.converged {
                    return Err(failure(format!(
                        "w = {}: no convergence within {} iterations",
                        fmt_c(w),
                        s.n_max
                    )));
                }
                report.runs.push(run.to_report());
            }
            if let Some(path) = geometric_path(cfg, 0.5)? {
                report.slope = Some(schroeder_slope(sk, &inv, path, s)?);
            }
        }
        Kernel::Abel(ak) => {
            if !points.is_empty() {
                return Err(usage("'points' needs a Schröder kernel; Abel kernels support slope fits only"));
            }
            if let Some(start) = cfg.complex("path_start")? {
                let step = cfg.f64_or("path_step", 0.5)?;
                let len = cfg.usize_or("path_len", 8)?;
                let path: Vec<Complex64> = (0..len).map(|m| start + step * m as f64).collect();
                let residuals = solver::abel_residuals(ak, &inv, &path, s.tol, s.n_max).map_err(failure)?;
                let xs: Vec<f64> = path.iter().map(|z| z.re).collect();
                let slope = solver::slope_of_residuals(&xs, &residuals).map_err(failure)?;
                report.slope = Some(SlopeReport {
                    form: "abel",
                    path: path.iter().map(|z| [z.re, z.im]).collect(),
                    residuals,
                    slope,
                });
            }
        }
    }
    if report.runs.is_empty() && report.slope.is_none() {
        return Err(usage("nothing to do: set 'points' and/or 'path_start'"));
    }
    let json = serde_json::to_string_pretty(&report).map_err(failure)?;
    match &s.out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(|e| io_failure(path, e))?;
            for run in &report.runs {
                emit(
                    stdout,
                    format_args!(
                        "w={}+{}i converged={} mean_ratio={:e} residual={:e}",
                        run.w[0],
                        run.w[1],
                        run.converged,
                        run.geometric_mean_ratio.unwrap_or(f64::NAN),
                        run.residual.unwrap_or(f64::NAN)
                    ),
                )?;
            }
            if let Some(slope) = &report.slope {
                emit(stdout, format_args!("slope({})={}", slope.form, slope.slope))?;
            }
        }
        None => emit(stdout, json)?,
    }
    Ok(())
}

fn schroeder_slope(
    k: &SchroederKernel,
    inv: &InverseBranch,
    path: Vec<Complex64>,
    s: &Settings,
) -> Result<SlopeReport, CliError> {
    let residuals = solver::schroeder_residuals(k, inv, &path, s.tol, s.n_max).map_err(failure)?;
    let xs: Vec<f64> = path.iter().map(|w| w.norm().ln()).collect();
    let slope = solver::slope_of_residuals(&xs, &residuals).map_err(failure)?;
    Ok(SlopeReport {
        form: match k.mode() {
            ScaleMode::Expanding => "schroeder_expanding",
            ScaleMode::Contracting => "schroeder_contracting",
        },
        path: path.iter().map(|w| [w.re, w.im]).collect(),
        residuals,
        slope,
    })
}

fn cmd_render(cfg: &RunConfig, s: &Settings, k: &Kernel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let half_width = cfg.f64_or("half_width", 1.0)?;
    let spec = GridSpec {
        center: cfg.complex_or("center", Complex64::new(0.0, 0.0))?,
        half_width,
        half_height: cfg.f64_or("half_height", half_width)?,
        cols: cfg.usize_or("cols", 64)?,
        rows: cfg.usize_or("rows", 64)?,
        exclusion_radius: cfg.f64_or("exclusion_radius", 0.0)?,
    };
    spec.validate().map_err(usage)?;
    let ppm_path = s.out.clone().ok_or_else(|| usage("render needs an output path (--out or 'out')"))?;
    let csv_path = ppm_path.with_extension("csv");
    let grid = grid_eval(k, &spec, s.z0, s.tol, s.n_max).map_err(failure)?;

    let file = File::create(&ppm_path).map_err(|e| io_failure(&ppm_path, e))?;
    let mut writer = BufWriter::new(file);
    render::write_ppm(&grid, &mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| io_failure(&ppm_path, e))?;
    let file = File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
    render::write_csv(&grid, file).map_err(|e| io_failure(&csv_path, e))?;

    let masked = grid.cells.iter().filter(|c| matches!(c, Cell::Masked)).count();
    let failed = grid.cells.iter().filter(|c| matches!(c, Cell::Failed(_))).count();
    emit(
        stdout,
        format_args!(
            "wrote {} and {} ({}x{}, masked {masked}, failed {failed})",
            ppm_path.display(),
            csv_path.display(),
            spec.cols,
            spec.rows
        ),
    )
}

fn cmd_taylor(cfg: &RunConfig, k: &Kernel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let Kernel::Schroeder(sk) = k else {
        return Err(usage("taylor needs a Schröder kernel"));
    };
    if sk.mode() != ScaleMode::Contracting {
        return Err(usage("taylor needs mode = contracting"));
    }
    let order = cfg.usize_or("order", 8)?;
    let depth = cfg.usize_or("depth", 40)?;
    let classify = |e: VerifyError| match e {
        VerifyError::Capacity { .. } | VerifyError::Unsupported(_) => usage(e),
        other => failure(other),
    };
    let jet = verify::taylor_coeffs(sk, order, depth).map_err(classify)?;
    for (i, c) in jet.coeffs().iter().enumerate() {
        emit(stdout, format_args!("c{i} = {}", fmt_c(*c)))?;
    }
    let verdict = verify::check_taylor_recurrence(sk, order, depth).map_err(classify)?;
    emit(stdout, &verdict)?;
    if !verdict.pass {
        return Err(failure(format!("taylor recurrence mismatch {:e}", verdict.measured)));
    }
    Ok(())
}
