//! Step families `H_j(x, z)` of an infinite composition.
//!
//! A Schröder-type kernel steps with `p(λ^{±j} w) · f(z)`, an Abel-type kernel
//! with `u(s - j) · f(z)`. The tail estimate is sampled and geometrically
//! extrapolated; it is evidence of summability, not a rigorous bound.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{self, BinaryOp, EvalError, Expr, FuncExpr, UnaryOp};

/// `|p(0)|` below this counts as `p(0) = 0`.
pub const ZERO_CONVERGENT_TOL: f64 = 1e-12;

// Step arguments within this distance of a catalog pole are reported as poles.
const RATIONAL_POLE_TOL: f64 = 1e-12;
const LOGISTIC_POLE_TOL: f64 = 1e-10;

const TAIL_STALL_LIMIT: usize = 64;
const TAIL_MAX_TERMS: usize = 1 << 16;
const TAIL_RELATIVE_STOP: f64 = 1e-3;
const TAIL_FAR_OFFSET: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("multiplier |lambda| = {modulus} is outside (0, 1)")]
    InvalidMultiplier { modulus: f64 },
    #[error("contracting kernels need p(0) = 0, got |p(0)| = {modulus}")]
    ConvergentNotZero { modulus: f64 },
    #[error("pole of the convergent at step {index}, argument {argument}")]
    Pole { index: usize, argument: Complex64 },
    #[error("evaluation failed at step {index}: {source}")]
    Eval { index: usize, source: EvalError },
    #[error("step family is not summable: terms stopped decreasing by index {index} (last term {last_term:e})")]
    Divergent { index: usize, last_term: f64 },
    #[error("empty sample region")]
    EmptyRegion,
}

impl KernelError {
    pub fn is_pole(&self) -> bool {
        matches!(self, KernelError::Pole { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Step argument `λ^j · w`.
    Contracting,
    /// Step argument `λ^{-j} · w`.
    Expanding,
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleMode::Contracting => f.write_str("contracting"),
            ScaleMode::Expanding => f.write_str("expanding"),
        }
    }
}

/// Catalog identification of a convergent, used for pole detection and lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergent {
    /// `w / (1 + w)`
    Rational,
    /// `1 / (w + 1)`
    Reciprocal,
    /// `exp(β s)`
    Exponential { beta: Complex64 },
    /// `1 / (exp(-β s) + 1)`
    Logistic { beta: Complex64 },
    Custom,
}

fn var_times(c: Complex64) -> Expr {
    Expr::binary(BinaryOp::Mul, Expr::constant(c), Expr::Var)
}

impl Convergent {
    pub fn rational() -> FuncExpr {
        FuncExpr::new(
            Expr::binary(
                BinaryOp::Div,
                Expr::Var,
                Expr::binary(BinaryOp::Add, Expr::constant(1.0), Expr::Var),
            ),
            "w",
        )
    }

    pub fn reciprocal() -> FuncExpr {
        FuncExpr::new(
            Expr::binary(
                BinaryOp::Div,
                Expr::constant(1.0),
                Expr::binary(BinaryOp::Add, Expr::Var, Expr::constant(1.0)),
            ),
            "w",
        )
    }

    pub fn exponential(beta: Complex64) -> FuncExpr {
        FuncExpr::new(Expr::unary(UnaryOp::Exp, var_times(beta)), "s")
    }

    pub fn logistic(beta: Complex64) -> FuncExpr {
        let denom = Expr::binary(
            BinaryOp::Add,
            Expr::unary(UnaryOp::Exp, var_times(-beta)),
            Expr::constant(1.0),
        );
        FuncExpr::new(
            Expr::binary(BinaryOp::Div, Expr::constant(1.0), denom),
            "s",
        )
    }

    /// Build a catalog convergent by name: `rational`, `reciprocal`,
    /// `exponential` or `logistic` (the last two take `beta`).
    pub fn by_name(name: &str, beta: Option<Complex64>) -> Option<FuncExpr> {
        let beta = beta.unwrap_or(Complex64::new(1.0, 0.0));
        match name {
            "rational" => Some(Self::rational()),
            "reciprocal" => Some(Self::reciprocal()),
            "exponential" => Some(Self::exponential(beta)),
            "logistic" => Some(Self::logistic(beta)),
            _ => None,
        }
    }

    /// Identify a parsed convergent by comparing it with catalog members on fixed samples.
    pub fn recognize(expr: &FuncExpr) -> Convergent {
        if agrees(expr, &Self::rational()) {
            return Convergent::Rational;
        }
        if agrees(expr, &Self::reciprocal()) {
            return Convergent::Reciprocal;
        }
        if let Ok((u0, du0)) = expr::eval_d1(expr, Complex64::new(0.0, 0.0)) {
            if (u0 - Complex64::new(1.0, 0.0)).norm() < 1e-12 {
                let beta = du0 / u0;
                if agrees(expr, &Self::exponential(beta)) {
                    return Convergent::Exponential { beta };
                }
            }
            if (u0 - Complex64::new(0.5, 0.0)).norm() < 1e-12 {
                let beta = du0 * 4.0;
                if beta.norm() > 0.0 && agrees(expr, &Self::logistic(beta)) {
                    return Convergent::Logistic { beta };
                }
            }
        }
        Convergent::Custom
    }

    /// Argument values at which this convergent is singular, if it has a single one.
    fn simple_pole(&self) -> Option<Complex64> {
        match self {
            Convergent::Rational | Convergent::Reciprocal => Some(Complex64::new(-1.0, 0.0)),
            _ => None,
        }
    }

    fn near_pole(&self, arg: Complex64) -> bool {
        match self {
            Convergent::Rational | Convergent::Reciprocal => {
                (arg + 1.0).norm() <= RATIONAL_POLE_TOL
            }
            Convergent::Logistic { beta } => {
                let (t, k) = logistic_pole_coordinate(*beta, arg);
                (t - k).norm() <= LOGISTIC_POLE_TOL * k.abs().max(1.0)
            }
            _ => false,
        }
    }
}

// For the logistic convergent the poles are `β a = (2k+1) π i`. Returns the
// scaled coordinate `t = β a / (π i)` and the nearest odd integer.
fn logistic_pole_coordinate(beta: Complex64, arg: Complex64) -> (Complex64, f64) {
    let t = beta * arg / Complex64::new(0.0, PI);
    let k = 2.0 * ((t.re - 1.0) / 2.0).round() + 1.0;
    (t, k)
}

const RECOGNITION_SAMPLES: [(f64, f64); 5] =
    [(0.3, 0.1), (-0.2, 0.45), (0.7, -0.3), (1.3, 0.8), (-2.1, -0.4)];

fn agrees(a: &FuncExpr, b: &FuncExpr) -> bool {
    RECOGNITION_SAMPLES.iter().all(|&(re, im)| {
        let x = Complex64::new(re, im);
        match (expr::eval(a, x), expr::eval(b, x)) {
            (Ok(u), Ok(v)) => (u - v).norm() <= 1e-12 * v.norm().max(1.0),
            _ => false,
        }
    })
}

fn convergent_value(
    g: &FuncExpr,
    kind: &Convergent,
    index: usize,
    argument: Complex64,
) -> Result<Complex64, KernelError> {
    if kind.near_pole(argument) {
        return Err(KernelError::Pole { index, argument });
    }
    match expr::eval(g, argument) {
        Ok(v) => Ok(v),
        Err(EvalError::DivisionByZero) | Err(EvalError::LogOfZero) => {
            Err(KernelError::Pole { index, argument })
        }
        Err(source) => Err(KernelError::Eval { index, source }),
    }
}

fn apply_f(f: &FuncExpr, index: usize, z: Complex64) -> Result<Complex64, KernelError> {
    expr::eval(f, z).map_err(|source| KernelError::Eval { index, source })
}

/// Steps `p(λ^{±j} w) · f(z)`.
#[derive(Debug, Clone)]
pub struct SchroederKernel {
    p: FuncExpr,
    f: FuncExpr,
    lambda: Complex64,
    mode: ScaleMode,
    convergent: Convergent,
}

impl SchroederKernel {
    pub fn new(
        p: FuncExpr,
        f: FuncExpr,
        lambda: Complex64,
        mode: ScaleMode,
    ) -> Result<Self, KernelError> {
        let modulus = lambda.norm();
        if !(modulus > 0.0 && modulus < 1.0) {
            return Err(KernelError::InvalidMultiplier { modulus });
        }
        if mode == ScaleMode::Contracting {
            let p0 = expr::eval(&p, Complex64::new(0.0, 0.0))
                .map_err(|source| KernelError::Eval { index: 0, source })?;
            if p0.norm() > ZERO_CONVERGENT_TOL {
                return Err(KernelError::ConvergentNotZero { modulus: p0.norm() });
            }
        }
        let convergent = Convergent::recognize(&p);
        Ok(SchroederKernel {
            p,
            f,
            lambda,
            mode,
            convergent,
        })
    }

    pub fn p(&self) -> &FuncExpr {
        &self.p
    }

    pub fn f(&self) -> &FuncExpr {
        &self.f
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn mode(&self) -> ScaleMode {
        self.mode
    }

    pub fn convergent(&self) -> Convergent {
        self.convergent
    }

    /// `λ^j w` or `λ^{-j} w` depending on the mode.
    pub fn step_argument(&self, j: usize, w: Complex64) -> Complex64 {
        let j = j as i32;
        match self.mode {
            ScaleMode::Contracting => self.lambda.powi(j) * w,
            ScaleMode::Expanding => self.lambda.powi(-j) * w,
        }
    }

    /// Point whose composition satisfies `P(shift(w)) = p(w) f(P(w))`:
    /// `w/λ` when contracting, `λw` when expanding.
    pub fn shift(&self, w: Complex64) -> Complex64 {
        match self.mode {
            ScaleMode::Contracting => w / self.lambda,
            ScaleMode::Expanding => self.lambda * w,
        }
    }

    /// `p(w)` with pole detection; `index` only labels the error.
    pub fn convergent_at(&self, index: usize, w: Complex64) -> Result<Complex64, KernelError> {
        convergent_value(&self.p, &self.convergent, index, w)
    }

    fn diverges_at_origin(&self) -> bool {
        self.mode == ScaleMode::Expanding
            && expr::eval(&self.p, Complex64::new(0.0, 0.0))
                .map(|v| v.norm() > ZERO_CONVERGENT_TOL)
                .unwrap_or(true)
    }

    /// One composition step `p(λ^{±j} w) · f(z)`.
    pub fn step(&self, j: usize, w: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        if w == Complex64::new(0.0, 0.0) && self.diverges_at_origin() {
            return Err(KernelError::Pole {
                index: 0,
                argument: w,
            });
        }
        let arg = self.step_argument(j, w);
        if !arg.is_finite() {
            return Err(KernelError::Eval {
                index: j,
                source: EvalError::NonFinite,
            });
        }
        let factor = self.convergent_at(j, arg)?;
        if factor == Complex64::new(0.0, 0.0) {
            return Ok(factor);
        }
        Ok(factor * apply_f(&self.f, j, z)?)
    }

    /// Excluded points up to truncation depth `n`.
    pub fn singularity_lattice(&self, n: usize) -> SingularityLattice {
        let Some(pole) = self.convergent.simple_pole() else {
            return SingularityLattice {
                points: Vec::new(),
                rule: "unknown".to_string(),
            };
        };
        let mut points = Vec::with_capacity(n + 1);
        let rule;
        if self.diverges_at_origin() {
            points.push(LatticePoint {
                index: 0,
                w: Complex64::new(0.0, 0.0),
            });
        }
        match self.mode {
            ScaleMode::Contracting => {
                rule = "w = -lambda^-j".to_string();
                for j in 1..=n {
                    points.push(LatticePoint {
                        index: j,
                        w: pole * self.lambda.powi(-(j as i32)),
                    });
                }
            }
            ScaleMode::Expanding => {
                rule = if points.is_empty() {
                    "w = -lambda^j".to_string()
                } else {
                    "w = -lambda^j and w = 0".to_string()
                };
                for j in 1..=n {
                    points.push(LatticePoint {
                        index: j,
                        w: pole * self.lambda.powi(j as i32),
                    });
                }
            }
        }
        SingularityLattice { points, rule }
    }

    /// Change variables `w = λ^{-s}`: the Abel kernel with `u(s) = p(λ^{-s})`,
    /// whose steps `u(s - j)` equal the contracting steps `p(λ^j w)`.
    pub fn to_abel(&self) -> Option<AbelKernel> {
        if self.mode != ScaleMode::Contracting {
            return None;
        }
        let log_lambda = self.lambda.ln();
        let inner = FuncExpr::new(Expr::unary(UnaryOp::Exp, var_times(-log_lambda)), "s");
        let u = match self.convergent {
            // w/(1+w) at w = λ^{-s} is the logistic map with β = -log λ.
            Convergent::Rational => Convergent::logistic(-log_lambda),
            _ => self.p.compose(&inner),
        };
        Some(AbelKernel::new(u, self.f.clone()))
    }
}

/// Steps `u(s - j) · f(z)`.
#[derive(Debug, Clone)]
pub struct AbelKernel {
    u: FuncExpr,
    f: FuncExpr,
    convergent: Convergent,
}

impl AbelKernel {
    pub fn new(u: FuncExpr, f: FuncExpr) -> Self {
        let convergent = Convergent::recognize(&u);
        AbelKernel { u, f, convergent }
    }

    pub fn u(&self) -> &FuncExpr {
        &self.u
    }

    pub fn f(&self) -> &FuncExpr {
        &self.f
    }

    pub fn convergent(&self) -> Convergent {
        self.convergent
    }

    pub fn convergent_at(&self, index: usize, s: Complex64) -> Result<Complex64, KernelError> {
        convergent_value(&self.u, &self.convergent, index, s)
    }

    pub fn step(&self, j: usize, s: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        let factor = self.convergent_at(j, s - j as f64)?;
        if factor == Complex64::new(0.0, 0.0) {
            return Ok(factor);
        }
        Ok(factor * apply_f(&self.f, j, z)?)
    }

    /// Distance from `s` to the nearest step pole of index `1..=n`, or infinity.
    pub fn pole_distance(&self, s: Complex64, n: usize) -> f64 {
        match self.convergent {
            Convergent::Logistic { beta } => (1..=n)
                .map(|j| {
                    let (t, k) = logistic_pole_coordinate(beta, s - j as f64);
                    (t - k).norm() * PI / beta.norm()
                })
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    /// Step index whose argument is singular; 0 marks the accumulation point.
    pub index: usize,
    pub w: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityLattice {
    pub points: Vec<LatticePoint>,
    pub rule: String,
}

impl SingularityLattice {
    pub fn distance(&self, w: Complex64) -> f64 {
        self.points
            .iter()
            .map(|p| (p.w - w).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub enum Kernel {
    Schroeder(SchroederKernel),
    Abel(AbelKernel),
}

impl From<SchroederKernel> for Kernel {
    fn from(k: SchroederKernel) -> Self {
        Kernel::Schroeder(k)
    }
}

impl From<AbelKernel> for Kernel {
    fn from(k: AbelKernel) -> Self {
        Kernel::Abel(k)
    }
}

impl Kernel {
    pub fn step(&self, j: usize, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        match self {
            Kernel::Schroeder(k) => k.step(j, x, z),
            Kernel::Abel(k) => k.step(j, x, z),
        }
    }

    pub fn f(&self) -> &FuncExpr {
        match self {
            Kernel::Schroeder(k) => k.f(),
            Kernel::Abel(k) => k.f(),
        }
    }

    /// Convergent value at the un-shifted coordinate, i.e. the factor in
    /// `P(shift(x)) = g(x) f(P(x))`.
    pub fn convergent_at(&self, x: Complex64) -> Result<Complex64, KernelError> {
        match self {
            Kernel::Schroeder(k) => k.convergent_at(0, x),
            Kernel::Abel(k) => k.convergent_at(0, x),
        }
    }

    /// The point `x'` with `P(x') = g(x) f(P(x))`.
    pub fn shift(&self, x: Complex64) -> Complex64 {
        match self {
            Kernel::Schroeder(k) => k.shift(x),
            Kernel::Abel(_) => x + 1.0,
        }
    }

    /// True when the steps are known to tend to zero (`p(0) = 0` with contracting scaling).
    pub fn center_is_zero(&self) -> bool {
        matches!(self, Kernel::Schroeder(k) if k.mode() == ScaleMode::Contracting)
    }

    /// Distance to the nearest excluded point with index `<= n`.
    pub fn lattice_distance(&self, x: Complex64, n: usize) -> f64 {
        match self {
            Kernel::Schroeder(k) => k.singularity_lattice(n).distance(x),
            Kernel::Abel(k) => k.pole_distance(x, n),
        }
    }
}

/// Estimate `Σ_{j>n} sup_region |H_j - A|`.
///
/// `A = 0` for contracting Schröder kernels; otherwise `A` is the step value
/// far out the index range at the first sample. Terms are summed until one
/// falls below `1e-3` of the running sum, then closed with a geometric tail.
pub fn tail_estimate(
    k: &Kernel,
    n: usize,
    region: &[(Complex64, Complex64)],
) -> Result<f64, KernelError> {
    let Some(&(x0, z0)) = region.first() else {
        return Err(KernelError::EmptyRegion);
    };
    let center = if k.center_is_zero() {
        Complex64::new(0.0, 0.0)
    } else {
        match k.step(n + TAIL_FAR_OFFSET, x0, z0) {
            Ok(v) => v,
            Err(KernelError::Pole { .. }) | Err(KernelError::Eval { .. }) => {
                Complex64::new(0.0, 0.0)
            }
            Err(e) => return Err(e),
        }
    };

    let mut sum = 0.0;
    let mut previous: Option<f64> = None;
    let mut stalled = 0;
    for j in n + 1..=n + TAIL_MAX_TERMS {
        let mut term: f64 = 0.0;
        for &(x, z) in region {
            match k.step(j, x, z) {
                Ok(h) => term = term.max((h - center).norm()),
                Err(KernelError::Eval {
                    source: EvalError::NonFinite,
                    ..
                }) => {
                    return Err(KernelError::Divergent {
                        index: j,
                        last_term: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        if !term.is_finite() {
            return Err(KernelError::Divergent {
                index: j,
                last_term: term,
            });
        }
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if let Some(prev) = previous {
            if term >= prev {
                stalled += 1;
                if stalled >= TAIL_STALL_LIMIT {
                    return Err(KernelError::Divergent {
                        index: j,
                        last_term: term,
                    });
                }
            } else {
                stalled = 0;
                if term < TAIL_RELATIVE_STOP * sum {
                    let ratio = term / prev;
                    return Ok(sum + term * ratio / (1.0 - ratio));
                }
            }
        }
        previous = Some(term);
    }
    Err(KernelError::Divergent {
        index: n + TAIL_MAX_TERMS,
        last_term: previous.unwrap_or(f64::NAN),
    })
}

/// `w = λ^{-s}`.
pub fn abel_to_schroeder(s: Complex64, lambda: Complex64) -> Complex64 {
    (-s * lambda.ln()).exp()
}

/// `s = -log(w) / log(λ)` on the principal branch.
pub fn schroeder_to_abel(w: Complex64, lambda: Complex64) -> Complex64 {
    -w.ln() / lambda.ln()
}
