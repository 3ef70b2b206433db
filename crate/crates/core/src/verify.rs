//! Numerical verdicts for the functional equations.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{compose, compose_adaptive, EngineError};
use crate::expr::{self, EvalError, Jet, MAX_JET_ORDER};
use crate::kernels::{AbelKernel, Kernel, KernelError, ScaleMode, SchroederKernel};

pub const IDENTITY_THRESHOLD: f64 = 1e-12;
pub const TAYLOR_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("jet evaluation failed at step {index}: {source}")]
    Jet { index: usize, source: EvalError },
    #[error("jet order {order} exceeds the supported maximum {max}")]
    Capacity { order: usize, max: usize },
    #[error("{0}")]
    Unsupported(&'static str),
}

impl From<KernelError> for VerifyError {
    fn from(e: KernelError) -> Self {
        VerifyError::Engine(e.into())
    }
}

impl VerifyError {
    pub fn is_pole(&self) -> bool {
        matches!(self, VerifyError::Engine(e) if e.is_pole())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub context: Vec<(String, String)>,
}

impl Verdict {
    pub fn new(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            measured,
            threshold,
            pass: measured < threshold,
            context: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.context.push((key.to_string(), value.to_string()));
        self
    }

    /// Replace the threshold and recompute `pass`.
    pub fn rethreshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = self.measured < threshold;
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.3e} {:.3e} {}",
            self.name,
            self.measured,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        for (k, v) in &self.context {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn relative(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(1.0)
}

/// `P_{n+1}(shift(w))` against `p(w) f(P_n(w))`, where `shift` is `w/λ` for a
/// contracting kernel and `λw` for an expanding one.
pub fn check_schroeder_identity(
    k: &SchroederKernel,
    w: Complex64,
    z0: Complex64,
    n: usize,
) -> Result<Verdict, VerifyError> {
    let kernel = Kernel::Schroeder(k.clone());
    let lhs = compose(&kernel, n + 1, k.shift(w), z0)?;
    let inner = compose(&kernel, n, w, z0)?;
    let rhs = k.convergent_at(0, w)? * apply(k.f(), inner)?;
    Ok(Verdict::new("schroeder_identity", relative(lhs, rhs), IDENTITY_THRESHOLD)
        .with("w", w)
        .with("z0", z0)
        .with("n", n)
        .with("lambda", k.lambda()))
}

/// `F_{n+1}(s+1)` against `u(s) f(F_n(s))`.
pub fn check_abel_identity(
    k: &AbelKernel,
    s: Complex64,
    z0: Complex64,
    n: usize,
) -> Result<Verdict, VerifyError> {
    let kernel = Kernel::Abel(k.clone());
    let lhs = compose(&kernel, n + 1, s + 1.0, z0)?;
    let inner = compose(&kernel, n, s, z0)?;
    let rhs = k.convergent_at(0, s)? * apply(k.f(), inner)?;
    Ok(Verdict::new("abel_identity", relative(lhs, rhs), IDENTITY_THRESHOLD)
        .with("s", s)
        .with("z0", z0)
        .with("n", n))
}

fn apply(f: &crate::expr::FuncExpr, z: Complex64) -> Result<Complex64, VerifyError> {
    expr::eval(f, z).map_err(|source| VerifyError::from(KernelError::Eval { index: 0, source }))
}

/// The adaptive limit from two different starting values.
pub fn check_basepoint(
    k: &Kernel,
    x: Complex64,
    z0: Complex64,
    z1: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<Verdict, VerifyError> {
    let a = compose_adaptive(k, x, z0, tol, n_max)?;
    let b = compose_adaptive(k, x, z1, tol, n_max)?;
    Ok(Verdict::new("basepoint", (a.value - b.value).norm(), 10.0 * tol)
        .with("x", x)
        .with("z0", z0)
        .with("z1", z1))
}

/// Taylor coefficients at `w = 0` of the depth-`n` truncation started at
/// `z0 = 0`, by pushing jets through the nested steps.
pub fn taylor_coeffs(k: &SchroederKernel, order: usize, n: usize) -> Result<Jet, VerifyError> {
    if k.mode() != ScaleMode::Contracting {
        return Err(VerifyError::Unsupported("Taylor coefficients at 0 need a contracting kernel"));
    }
    if order > MAX_JET_ORDER {
        return Err(VerifyError::Capacity {
            order,
            max: MAX_JET_ORDER,
        });
    }
    let w = Jet::variable(zero(), order);
    let mut z = Jet::constant(zero(), order);
    for j in (1..=n).rev() {
        let arg = w.scale(k.lambda().powi(j as i32));
        let p = expr::eval_on_jet(k.p(), &arg).map_err(|source| VerifyError::Jet { index: j, source })?;
        let fz = expr::eval_on_jet(k.f(), &z).map_err(|source| VerifyError::Jet { index: j, source })?;
        z = &p * &fz;
    }
    z.coeffs_mut()[0] = zero();
    Ok(z)
}

/// Coefficients of `w ↦ P(w/λ)` against those of `w ↦ p(w) f(P(w))`; the
/// left side uses one more level so the comparison is exact in exact
/// arithmetic.
pub fn check_taylor_recurrence(k: &SchroederKernel, order: usize, n: usize) -> Result<Verdict, VerifyError> {
    let deeper = taylor_coeffs(k, order, n + 1)?;
    let lhs = deeper.rescale_argument(k.lambda().inv());
    let current = taylor_coeffs(k, order, n)?;
    let p = expr::eval_jet(k.p(), zero(), order).map_err(|source| VerifyError::Jet { index: 0, source })?;
    let fp = expr::eval_on_jet(k.f(), &current).map_err(|source| VerifyError::Jet { index: 0, source })?;
    let rhs = &p * &fp;
    let mismatch = lhs
        .coeffs()
        .iter()
        .zip(rhs.coeffs())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(Verdict::new("taylor_recurrence", mismatch, TAYLOR_THRESHOLD)
        .with("order", order)
        .with("n", n)
        .with("lambda", k.lambda()))
}

/// Parameters of a randomized sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub draws: usize,
    pub seed: u64,
    pub tol: f64,
    pub n_max: usize,
    /// Replaces every verdict's own threshold when set.
    pub threshold: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            draws: 50,
            seed: 0,
            tol: crate::engine::DEFAULT_TOL,
            n_max: crate::engine::DEFAULT_N_MAX,
            threshold: None,
        }
    }
}

fn random_disc(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Randomized identity and basepoint checks.
///
/// Schröder draws take `|w| < 0.4`; Abel draws take `Re s ∈ [-2, 2]`,
/// `Im s ∈ [-1, 1]`. Starting values lie in the unit disc and depths in
/// `[5, 40]`. A failing evaluation is reported as a failing verdict.
pub fn sweep(k: &Kernel, spec: &SweepSpec) -> Vec<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(2 * spec.draws);
    for _ in 0..spec.draws {
        let z0 = random_disc(&mut rng, 1.0);
        let z1 = random_disc(&mut rng, 1.0);
        let n = rng.gen_range(5..=40);
        let (x, identity) = match k {
            Kernel::Schroeder(sk) => {
                let w = random_disc(&mut rng, 0.4);
                (w, check_schroeder_identity(sk, w, z0, n))
            }
            Kernel::Abel(ak) => {
                let s = Complex64::new(rng.gen_range(-2.0..=2.0), rng.gen_range(-1.0..=1.0));
                (s, check_abel_identity(ak, s, z0, n))
            }
        };
        let basepoint = check_basepoint(k, x, z0, z1, spec.tol, spec.n_max);
        for (name, result) in [("identity", identity), ("basepoint", basepoint)] {
            let verdict = match result {
                Ok(v) => v,
                Err(e) => Verdict::new(format!("{name}_error"), f64::INFINITY, 0.0)
                    .with("x", x)
                    .with("error", format!("{e:?}")),
            };
            out.push(match spec.threshold {
                Some(t) => verdict.rethreshold(t),
                None => verdict,
            });
        }
    }
    out
}
