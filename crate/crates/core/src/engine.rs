//! Truncated evaluation of infinite compositions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{self, EvalError};
use crate::kernels::{tail_estimate, Kernel, KernelError, ScaleMode, SchroederKernel};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_N_MAX: usize = 512;

const LOCAL_SAMPLE_RADIUS: f64 = 1e-2;
const LOCAL_SAMPLE_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("non-finite intermediate value at step {index}")]
    Overflow { index: usize },
    #[error("no convergence by depth {depth}: last increment {last_increment:e}, tail {tail:e}")]
    NoConvergence {
        depth: usize,
        last_increment: f64,
        tail: f64,
    },
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl EngineError {
    pub fn is_pole(&self) -> bool {
        matches!(self, EngineError::Kernel(e) if e.is_pole())
    }
}

fn lift(err: KernelError) -> EngineError {
    match err {
        KernelError::Eval {
            index,
            source: EvalError::NonFinite,
        } => EngineError::Overflow { index },
        other => EngineError::Kernel(other),
    }
}

/// A truncated composition value with the evidence for its depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub value: Complex64,
    pub depth: usize,
    /// `|value(depth) - value(depth - 1)|`, with `value(0) = z0`.
    pub last_increment: f64,
    pub tail: f64,
}

/// `H_1(x, H_2(x, ... H_n(x, z0)))`, evaluated innermost first.
pub fn compose(k: &Kernel, n: usize, x: Complex64, z0: Complex64) -> Result<Complex64, EngineError> {
    let mut z = z0;
    for j in (1..=n).rev() {
        z = k.step(j, x, z).map_err(lift)?;
        if !z.is_finite() {
            return Err(EngineError::Overflow { index: j });
        }
    }
    Ok(z)
}

/// The point `(x, z0)` plus eight neighbours on a circle of radius `1e-2`
/// in both coordinates. The `x` radius shrinks near known singular points.
pub fn local_sample(k: &Kernel, x: Complex64, z0: Complex64, n: usize) -> Vec<(Complex64, Complex64)> {
    let clearance = k.lattice_distance(x, n);
    let x_radius = LOCAL_SAMPLE_RADIUS.min(0.25 * clearance);
    let mut sample = Vec::with_capacity(LOCAL_SAMPLE_COUNT + 1);
    sample.push((x, z0));
    for i in 0..LOCAL_SAMPLE_COUNT {
        let angle = 2.0 * PI * i as f64 / LOCAL_SAMPLE_COUNT as f64;
        let step = Complex64::from_polar(1.0, angle);
        sample.push((x + step * x_radius, z0 + step * LOCAL_SAMPLE_RADIUS));
    }
    sample
}

/// Smallest depth `n <= n_max` at which both the last increment and the
/// tail estimate are below `tol`.
///
/// The increment is compared against `tol * max(1, |value|)`; the tail is
/// compared against `tol` directly.
pub fn compose_adaptive(
    k: &Kernel,
    x: Complex64,
    z0: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<Truncation, EngineError> {
    if !(tol > 0.0) {
        return Err(EngineError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if n_max == 0 {
        return Err(EngineError::InvalidArgument("n_max must be positive".into()));
    }
    let sample = local_sample(k, x, z0, n_max);
    let mut previous = z0;
    let mut last_increment = f64::INFINITY;
    for n in 1..=n_max {
        let value = match compose(k, n, x, z0) {
            Ok(v) => v,
            Err(EngineError::Overflow { index }) => {
                // An exploding orbit of a non-summable family is a convergence
                // failure; a pole further in is reported as the pole.
                return match tail_estimate(k, n, &sample) {
                    Err(KernelError::Divergent { .. }) => Err(EngineError::NoConvergence {
                        depth: n,
                        last_increment,
                        tail: f64::INFINITY,
                    }),
                    Err(e) if e.is_pole() => Err(EngineError::Kernel(e)),
                    _ => Err(EngineError::Overflow { index }),
                };
            }
            Err(e) => return Err(e),
        };
        last_increment = (value - previous).norm();
        previous = value;
        if last_increment < tol * value.norm().max(1.0) {
            let tail = match tail_estimate(k, n, &sample) {
                Ok(t) => t,
                Err(KernelError::Divergent { .. }) => {
                    return Err(EngineError::NoConvergence {
                        depth: n,
                        last_increment,
                        tail: f64::INFINITY,
                    })
                }
                Err(e) => return Err(lift(e)),
            };
            if tail < tol {
                return Ok(Truncation {
                    value,
                    depth: n,
                    last_increment,
                    tail,
                });
            }
        }
    }
    let tail = tail_estimate(k, n_max, &sample).unwrap_or(f64::INFINITY);
    Err(EngineError::NoConvergence {
        depth: n_max,
        last_increment,
        tail,
    })
}

/// First derivative of a contracting Schröder composition.
///
/// Each step of the differentiated composition is affine in `z`,
/// `a_j + b_j z` with `a_j = λ^j p'(λ^j x) f(P(λ^j x))` and
/// `b_j = p(λ^j x) f'(P(λ^j x))`, so the derivative is `Σ_j a_j Π_{i<j} b_i`.
pub fn derivative_series(
    k: &SchroederKernel,
    x: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<Complex64, EngineError> {
    if k.mode() != ScaleMode::Contracting {
        return Err(EngineError::Unsupported(
            "derivative series is defined for contracting kernels",
        ));
    }
    let kernel = Kernel::Schroeder(k.clone());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut product = Complex64::new(1.0, 0.0);
    let mut last_term = f64::INFINITY;
    for j in 1..=n_max {
        let scale = k.lambda().powi(j as i32);
        let arg = scale * x;
        let inner = compose_adaptive(&kernel, arg, Complex64::new(0.0, 0.0), tol, n_max)?.value;
        let (p, dp) = expr::eval_d1(k.p(), arg).map_err(|source| {
            EngineError::Kernel(KernelError::Eval { index: j, source })
        })?;
        let (f, df) = expr::eval_d1(k.f(), inner).map_err(|source| {
            EngineError::Kernel(KernelError::Eval { index: j, source })
        })?;
        let term = scale * dp * f * product;
        sum += term;
        last_term = term.norm();
        product *= p * df;
        if last_term < tol * sum.norm().max(1.0) && product.norm() < 1.0 {
            return Ok(sum);
        }
    }
    Err(EngineError::NoConvergence {
        depth: n_max,
        last_increment: last_term,
        tail: f64::NAN,
    })
}

/// Rectangular sampling of the complex plane; row 0 is the top edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub center: Complex64,
    pub half_width: f64,
    pub half_height: f64,
    pub cols: usize,
    pub rows: usize,
    pub exclusion_radius: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.cols == 0 || self.rows == 0 {
            return Err(EngineError::InvalidArgument("grid needs at least one cell".into()));
        }
        if !(self.half_width > 0.0 && self.half_height > 0.0) {
            return Err(EngineError::InvalidArgument("grid extents must be positive".into()));
        }
        if !(self.exclusion_radius >= 0.0) {
            return Err(EngineError::InvalidArgument("exclusion radius must be non-negative".into()));
        }
        Ok(())
    }

    pub fn node(&self, row: usize, col: usize) -> Complex64 {
        let fraction = |i: usize, n: usize| {
            if n == 1 {
                0.0
            } else {
                2.0 * i as f64 / (n - 1) as f64 - 1.0
            }
        };
        Complex64::new(
            self.center.re + self.half_width * fraction(col, self.cols),
            self.center.im - self.half_height * fraction(row, self.rows),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(Truncation),
    Masked,
    Failed(String),
}

impl Cell {
    pub fn status(&self) -> &str {
        match self {
            Cell::Value(_) => "ok",
            Cell::Masked => "masked",
            Cell::Failed(_) => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub spec: GridSpec,
    /// Row-major, `rows * cols` entries.
    pub cells: Vec<Cell>,
}

impl GridResult {
    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.spec.cols + col]
    }
}

/// Evaluate every grid node; rows are processed in parallel and collected in order.
pub fn grid_eval(
    k: &Kernel,
    g: &GridSpec,
    z0: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<GridResult, EngineError> {
    g.validate()?;
    let cells: Vec<Cell> = (0..g.rows)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..g.cols).map(move |col| {
                let x = g.node(row, col);
                if g.exclusion_radius > 0.0 && k.lattice_distance(x, n_max) <= g.exclusion_radius {
                    return Cell::Masked;
                }
                match compose_adaptive(k, x, z0, tol, n_max) {
                    Ok(t) => Cell::Value(t),
                    Err(e) => Cell::Failed(e.to_string()),
                }
            })
        })
        .collect();
    Ok(GridResult { spec: *g, cells })
}
