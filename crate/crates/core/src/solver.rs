//! Schröder function at infinity from inverse orbits.
//!
//! For an expanding kernel, `P(λw) = p(w) f(P(w))` with `p(w) -> 1` as
//! `w -> 0`, so `P` nearly solves `Φ(λw) = f(Φ(w))`. The correction
//! `v_n(w) = f^{-n}(P(λ^n w)) - P(w)` is iterated until it settles and
//! `Φ = P + v`.
//!
//! For fast-growing `f` the values `P(λ^n w)` leave floating-point range
//! after a few levels. The inverse orbit from such a level is damped by the
//! product of `(f^{-1})'` along the representable part of the orbit; when that
//! first-order bound is below the tolerance the remaining increments are
//! reported as that bound instead of being computed.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{compose_adaptive, EngineError};
use crate::expr::{self, EvalError, FuncExpr};
use crate::kernels::{AbelKernel, Kernel, ScaleMode, SchroederKernel};

/// Largest admissible distance between an inverse-orbit point and the orbit
/// point of `P` it shadows.
pub const BRANCH_ESCAPE_RADIUS: f64 = 1.0;

const SANITY_TOL: f64 = 1e-9;
const NON_CONTRACTION_RUN: usize = 3;
const MIN_PATH_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("inverse branch failed the round-trip check: |f(g(z)) - z| = {error:e} at {point}")]
    SanityCheck { point: Complex64, error: f64 },
    #[error("inverse evaluation failed at {point}: {source}")]
    Inverse { point: Complex64, source: EvalError },
    #[error("inverse orbit escaped at level {level}: distance {distance:e} from the shadowed orbit point")]
    BranchEscape { level: usize, distance: f64 },
    #[error("orbit leaves floating-point range at level {level} and the neglected tail bound {bound:e} is not below tolerance")]
    OrbitOverflow { level: usize, bound: f64 },
    #[error("iteration is not contracting: ratios {ratios:?}")]
    NonContraction { ratios: Vec<f64> },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStrategy {
    Principal,
    NearestToPrevious,
}

/// Sector `{anchor + r e^{iθ} : |θ - direction| <= opening}`; an opening of
/// `π/2` is a half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub anchor: Complex64,
    pub direction: f64,
    pub opening: f64,
}

impl Sector {
    /// The half-plane `Re z >= 1`.
    pub fn right_half_plane() -> Self {
        Sector {
            anchor: Complex64::new(1.0, 0.0),
            direction: 0.0,
            opening: PI / 2.0,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let d = z - self.anchor;
        if d.norm() == 0.0 {
            return true;
        }
        (d * Complex64::from_polar(1.0, -self.direction)).arg().abs() <= self.opening
    }

    /// Sixteen interior points, four radii by four angles.
    pub fn samples(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(16);
        for radius in [0.5, 2.0, 8.0, 32.0] {
            for fraction in [-0.75, -0.25, 0.25, 0.75] {
                let angle = self.direction + fraction * self.opening;
                out.push(self.anchor + Complex64::from_polar(radius, angle));
            }
        }
        out
    }
}

/// A user-supplied branch of `f^{-1}` with its selection strategy.
#[derive(Debug, Clone)]
pub struct InverseBranch {
    expr: FuncExpr,
    strategy: BranchStrategy,
    period: Option<Complex64>,
}

impl InverseBranch {
    /// Checks `|f(g(z)) - z| < 1e-9` on sixteen points of `region`.
    pub fn new(
        f: &FuncExpr,
        inverse: FuncExpr,
        strategy: BranchStrategy,
        region: &Sector,
    ) -> Result<Self, SolverError> {
        for point in region.samples() {
            let error = expr::eval(&inverse, point)
                .and_then(|g| expr::eval(f, g))
                .map(|back| (back - point).norm())
                .unwrap_or(f64::INFINITY);
            if !(error < SANITY_TOL) {
                return Err(SolverError::SanityCheck { point, error });
            }
        }
        let log = expr::parse("log(z)", "z").expect("static expression");
        let is_log = region.samples().iter().all(|&z| {
            match (expr::eval(&inverse, z), expr::eval(&log, z)) {
                (Ok(a), Ok(b)) => (a - b).norm() < 1e-12,
                _ => false,
            }
        });
        let period = is_log.then(|| Complex64::new(0.0, 2.0 * PI));
        Ok(InverseBranch {
            expr: inverse,
            strategy,
            period,
        })
    }

    /// Override the spacing of the branch lattice (`2πi` is detected for `log`).
    pub fn with_period(mut self, period: Complex64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn period(&self) -> Option<Complex64> {
        self.period
    }

    pub fn strategy(&self) -> BranchStrategy {
        self.strategy
    }

    pub fn expr(&self) -> &FuncExpr {
        &self.expr
    }

    fn principal(&self, y: Complex64) -> Result<Complex64, SolverError> {
        expr::eval(&self.expr, y).map_err(|source| SolverError::Inverse { point: y, source })
    }

    /// Apply the branch to `y`, choosing the candidate that shadows `reference`.
    pub fn apply(&self, y: Complex64, reference: Complex64, level: usize) -> Result<Complex64, SolverError> {
        let mut x = self.principal(y)?;
        if let (BranchStrategy::NearestToPrevious, Some(period)) = (self.strategy, self.period) {
            let shift = ((reference - x) / period).re.round();
            x += period * shift;
        }
        let distance = (x - reference).norm();
        if !(distance <= BRANCH_ESCAPE_RADIUS) {
            return Err(SolverError::BranchEscape { level, distance });
        }
        Ok(x)
    }

    pub fn derivative(&self, y: Complex64) -> Result<Complex64, SolverError> {
        expr::eval_d1(&self.expr, y)
            .map(|(_, d)| d)
            .map_err(|source| SolverError::Inverse { point: y, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Correction {
    Exact(Complex64),
    /// Value at the deepest representable level, with a first-order bound on
    /// the change from all deeper levels.
    Bounded { value: Complex64, bound: f64 },
}

/// Values of `P` along the orbit `λ^m w`, computed on demand.
struct Orbit<'a> {
    kernel: Kernel,
    inverse: &'a InverseBranch,
    points: Vec<Complex64>,
    references: Vec<Complex64>,
    overflow_level: Option<usize>,
    tol: f64,
    n_max: usize,
    lambda: Complex64,
}

impl<'a> Orbit<'a> {
    fn new(
        k: &SchroederKernel,
        inverse: &'a InverseBranch,
        w: Complex64,
        tol: f64,
        n_max: usize,
    ) -> Result<Self, SolverError> {
        if k.mode() != ScaleMode::Expanding {
            return Err(SolverError::InvalidArgument(
                "inverse-orbit iteration needs an expanding kernel".into(),
            ));
        }
        Ok(Orbit {
            kernel: Kernel::Schroeder(k.clone()),
            inverse,
            points: vec![w],
            references: Vec::new(),
            overflow_level: None,
            tol,
            n_max,
            lambda: k.lambda(),
        })
    }

    /// Fill references up to `level`; returns the number that are representable.
    fn extend(&mut self, level: usize) -> Result<usize, SolverError> {
        while self.references.len() <= level && self.overflow_level.is_none() {
            let m = self.references.len();
            while self.points.len() <= m {
                let last = *self.points.last().expect("orbit starts with w");
                self.points.push(self.lambda * last);
            }
            match compose_adaptive(&self.kernel, self.points[m], Complex64::new(0.0, 0.0), self.tol, self.n_max) {
                Ok(t) => self.references.push(t.value),
                Err(EngineError::Overflow { .. }) => self.overflow_level = Some(m),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(self.references.len())
    }

    fn p_at_w(&mut self) -> Result<Complex64, SolverError> {
        if self.extend(0)? == 0 {
            return Err(SolverError::OrbitOverflow {
                level: 0,
                bound: f64::INFINITY,
            });
        }
        Ok(self.references[0])
    }

    /// Inverse orbit from level `top` down to 0; returns the final point and
    /// the product of `|(f^{-1})'|` along the way.
    fn descend(&self, top: usize) -> Result<(Complex64, f64), SolverError> {
        let mut y = self.references[top];
        let mut damping = 1.0;
        for m in (1..=top).rev() {
            damping *= self.inverse.derivative(y)?.norm();
            y = self.inverse.apply(y, self.references[m - 1], m - 1)?;
        }
        Ok((y, damping))
    }

    fn correction(&mut self, n: usize) -> Result<Correction, SolverError> {
        if n == 0 {
            return Ok(Correction::Exact(Complex64::new(0.0, 0.0)));
        }
        let available = self.extend(n)?;
        let base = self.p_at_w()?;
        if available > n {
            let (y, _) = self.descend(n)?;
            return Ok(Correction::Exact(y - base));
        }
        let top = available - 1;
        let (y, damping) = self.descend(top)?;
        let bound = damping * BRANCH_ESCAPE_RADIUS;
        if bound < self.tol {
            Ok(Correction::Bounded {
                value: y - base,
                bound,
            })
        } else {
            Err(SolverError::OrbitOverflow {
                level: available,
                bound,
            })
        }
    }
}

/// `v_n(w) = f^{-n}(P(λ^n w)) - P(w)` for an expanding kernel.
///
/// Levels beyond floating-point range are handled as described in the module
/// docs; the result then carries an error below `tol`.
pub fn v_iterate(
    k: &SchroederKernel,
    inverse: &InverseBranch,
    w: Complex64,
    n: usize,
    tol: f64,
    n_max: usize,
) -> Result<Complex64, SolverError> {
    let mut orbit = Orbit::new(k, inverse, w, tol, n_max)?;
    match orbit.correction(n)? {
        Correction::Exact(v) | Correction::Bounded { value: v, .. } => Ok(v),
    }
}

/// State of the iteration `v_0 = 0, v_1, v_2, ...` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchroederRun {
    pub w: Complex64,
    pub tol: f64,
    pub iterates: Vec<Complex64>,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// `P(w)`.
    pub base: Complex64,
    /// `P(w) + v(w)` once converged.
    pub phi: Option<Complex64>,
    /// `|Φ(λw) - f(Φ(w))|`, set by [`solve_pair`].
    pub residual: Option<f64>,
    /// The same residual divided by `max(1, |Φ(λw)|)`.
    pub relative_residual: Option<f64>,
    /// Iteration index from which increments are first-order bounds.
    pub bounded_from: Option<usize>,
}

impl SchroederRun {
    pub fn geometric_mean_ratio(&self) -> Option<f64> {
        if self.ratios.is_empty() {
            return None;
        }
        if self.ratios.contains(&0.0) {
            return Some(0.0);
        }
        let mean_log = self.ratios.iter().map(|r| r.ln()).sum::<f64>() / self.ratios.len() as f64;
        Some(mean_log.exp())
    }

    pub fn to_report(&self) -> RunReport {
        let pair = |c: Complex64| [c.re, c.im];
        RunReport {
            w: pair(self.w),
            tol: self.tol,
            iterates: self.iterates.iter().copied().map(pair).collect(),
            increments: self.increments.clone(),
            ratios: self.ratios.clone(),
            geometric_mean_ratio: self.geometric_mean_ratio(),
            converged: self.converged,
            base: pair(self.base),
            phi: self.phi.map(pair),
            residual: self.residual,
            relative_residual: self.relative_residual,
            bounded_from: self.bounded_from,
        }
    }
}

/// Serializable form of a [`SchroederRun`]; complex numbers are `[re, im]`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub w: [f64; 2],
    pub tol: f64,
    pub iterates: Vec<[f64; 2]>,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub geometric_mean_ratio: Option<f64>,
    pub converged: bool,
    pub base: [f64; 2],
    pub phi: Option<[f64; 2]>,
    pub residual: Option<f64>,
    pub relative_residual: Option<f64>,
    pub bounded_from: Option<usize>,
}

fn ratio(current: f64, previous: f64) -> f64 {
    if current == 0.0 {
        0.0
    } else if previous == 0.0 {
        f64::INFINITY
    } else {
        current / previous
    }
}

/// Iterate `v_n(w)` until an increment falls below `tol` or `n_max` is reached.
pub fn solve_phi(
    k: &SchroederKernel,
    inverse: &InverseBranch,
    w: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<SchroederRun, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if n_max == 0 {
        return Err(SolverError::InvalidArgument("n_max must be positive".into()));
    }
    let mut orbit = Orbit::new(k, inverse, w, tol, n_max)?;
    let base = orbit.p_at_w()?;
    let mut run = SchroederRun {
        w,
        tol,
        iterates: vec![Complex64::new(0.0, 0.0)],
        increments: Vec::new(),
        ratios: Vec::new(),
        converged: false,
        base,
        phi: None,
        residual: None,
        relative_residual: None,
        bounded_from: None,
    };
    for n in 1..=n_max {
        let previous = *run.iterates.last().expect("seeded with v_0");
        let (value, increment, bounded) = match orbit.correction(n)? {
            Correction::Exact(v) => (v, (v - previous).norm(), false),
            Correction::Bounded { value, bound } => (value, bound, true),
        };
        run.iterates.push(value);
        if let Some(&last) = run.increments.last() {
            run.ratios.push(ratio(increment, last));
        }
        run.increments.push(increment);
        if bounded && run.bounded_from.is_none() {
            run.bounded_from = Some(n);
        }
        let tail = &run.ratios[run.ratios.len().saturating_sub(NON_CONTRACTION_RUN)..];
        if tail.len() == NON_CONTRACTION_RUN && tail.iter().all(|&r| r > 1.0) {
            return Err(SolverError::NonContraction {
                ratios: run.ratios.clone(),
            });
        }
        if increment < tol && !run.ratios.is_empty() {
            run.converged = true;
            break;
        }
        if bounded {
            // Deeper levels cannot change the value any further.
            break;
        }
    }
    if run.converged {
        run.phi = Some(base + run.iterates.last().expect("non-empty"));
    }
    Ok(run)
}

/// Solve at `w` and `λw` and record `|Φ(λw) - f(Φ(w))|` on the first run.
pub fn solve_pair(
    k: &SchroederKernel,
    inverse: &InverseBranch,
    w: Complex64,
    tol: f64,
    n_max: usize,
) -> Result<(SchroederRun, SchroederRun), SolverError> {
    let mut at_w = solve_phi(k, inverse, w, tol, n_max)?;
    let at_lw = solve_phi(k, inverse, k.lambda() * w, tol, n_max)?;
    attach_residual(k, &mut at_w, &at_lw)?;
    Ok((at_w, at_lw))
}

/// Record `|Φ(λw) - f(Φ(w))|` on `at_w`, given a converged run at `λw`.
pub fn attach_residual(k: &SchroederKernel, at_w: &mut SchroederRun, at_lw: &SchroederRun) -> Result<(), SolverError> {
    if (at_lw.w - k.lambda() * at_w.w).norm() > 1e-15 * at_w.w.norm() {
        return Err(SolverError::InvalidArgument(format!(
            "{} is not λ times {}",
            at_lw.w, at_w.w
        )));
    }
    if let (Some(phi_w), Some(phi_lw)) = (at_w.phi, at_lw.phi) {
        let image = expr::eval(k.f(), phi_w).map_err(|source| SolverError::Inverse {
            point: phi_w,
            source,
        })?;
        let residual = (phi_lw - image).norm();
        at_w.residual = Some(residual);
        at_w.relative_residual = Some(residual / phi_lw.norm().max(1.0));
    }
    Ok(())
}

/// Least-squares slope of `log(residual)` against `abscissa`.
pub fn slope_of_residuals(abscissae: &[f64], residuals: &[f64]) -> Result<f64, SolverError> {
    if abscissae.len() != residuals.len() || abscissae.len() < 2 {
        return Err(SolverError::DegenerateFit("need at least two matched points".into()));
    }
    if let Some(r) = residuals.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(SolverError::DegenerateFit(format!("residual {r} has no logarithm")));
    }
    let n = abscissae.len() as f64;
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let mean_x = abscissae.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = abscissae.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SolverError::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = abscissae
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    Ok(sxy / sxx)
}

fn log_growth_ratio(f: &FuncExpr, at: Complex64) {
    if let Ok((v, d)) = expr::eval_d1(f, at) {
        debug!("|f/f'| at {at} = {:e}", v.norm() / d.norm());
    }
}

/// Residuals `f^{-1}(P(shift(w))) - P(w)` along `path`.
///
/// A path descending towards 0 uses the expanding form (`shift(w) = λw`,
/// residual `O(w)`); a path growing towards infinity uses the contracting
/// form (`shift(w) = w/λ`, residual `O(1/w)`).
pub fn schroeder_residuals(
    k: &SchroederKernel,
    inverse: &InverseBranch,
    path: &[Complex64],
    tol: f64,
    n_max: usize,
) -> Result<Vec<f64>, SolverError> {
    if path.len() < MIN_PATH_POINTS {
        return Err(SolverError::InvalidPath(format!(
            "need at least {MIN_PATH_POINTS} points, got {}",
            path.len()
        )));
    }
    let descending = path.windows(2).all(|p| p[1].norm() < p[0].norm());
    let ascending = path.windows(2).all(|p| p[1].norm() > p[0].norm());
    let expected = match (descending, ascending) {
        (true, _) => ScaleMode::Expanding,
        (_, true) => ScaleMode::Contracting,
        _ => return Err(SolverError::InvalidPath("moduli must be strictly monotone".into())),
    };
    if k.mode() != expected {
        return Err(SolverError::InvalidPath(format!(
            "path direction needs a {expected} kernel, got {}",
            k.mode()
        )));
    }
    let kernel = Kernel::Schroeder(k.clone());
    let zero = Complex64::new(0.0, 0.0);
    path.iter()
        .enumerate()
        .map(|(i, &w)| {
            let base = compose_adaptive(&kernel, w, zero, tol, n_max)?.value;
            let forward = compose_adaptive(&kernel, k.shift(w), zero, tol, n_max)?.value;
            log_growth_ratio(k.f(), base);
            let back = inverse.apply(forward, base, i)?;
            Ok((back - base).norm())
        })
        .collect()
}

/// Slope of `log|f^{-1}(P(shift(w))) - P(w)|` against `log|w|`; see
/// [`schroeder_residuals`] for how the form is selected.
pub fn asymptotic_slope_schroeder(
    k: &SchroederKernel,
    inverse: &InverseBranch,
    path: &[Complex64],
    tol: f64,
    n_max: usize,
) -> Result<f64, SolverError> {
    let residuals = schroeder_residuals(k, inverse, path, tol, n_max)?;
    let xs: Vec<f64> = path.iter().map(|w| w.norm().ln()).collect();
    slope_of_residuals(&xs, &residuals)
}

/// Residuals `f^{-1}(F(s+1)) - F(s)` along `path`.
pub fn abel_residuals(
    k: &AbelKernel,
    inverse: &InverseBranch,
    path: &[Complex64],
    tol: f64,
    n_max: usize,
) -> Result<Vec<f64>, SolverError> {
    if path.len() < MIN_PATH_POINTS {
        return Err(SolverError::InvalidPath(format!(
            "need at least {MIN_PATH_POINTS} points, got {}",
            path.len()
        )));
    }
    if !path.windows(2).all(|p| p[1].re > p[0].re) {
        return Err(SolverError::InvalidPath("Re(s) must be strictly increasing".into()));
    }
    let kernel = Kernel::Abel(k.clone());
    let zero = Complex64::new(0.0, 0.0);
    path.iter()
        .enumerate()
        .map(|(i, &s)| {
            let base = compose_adaptive(&kernel, s, zero, tol, n_max)?.value;
            let forward = compose_adaptive(&kernel, s + 1.0, zero, tol, n_max)?.value;
            log_growth_ratio(k.f(), base);
            let back = inverse.apply(forward, base, i)?;
            Ok((back - base).norm())
        })
        .collect()
}

/// Slope of `log|f^{-1}(F(s+1)) - F(s)|` against `Re(s)`; about `-Re β` for
/// the logistic convergent.
pub fn asymptotic_slope_abel(
    k: &AbelKernel,
    inverse: &InverseBranch,
    path: &[Complex64],
    tol: f64,
    n_max: usize,
) -> Result<f64, SolverError> {
    let residuals = abel_residuals(k, inverse, path, tol, n_max)?;
    let xs: Vec<f64> = path.iter().map(|s| s.re).collect();
    slope_of_residuals(&xs, &residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{compose_adaptive, DEFAULT_N_MAX, DEFAULT_TOL};
    use crate::expr::parse;
    use crate::kernels::Convergent;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn exp_f() -> FuncExpr {
        parse("exp(z)", "z").unwrap()
    }

    fn log_branch(strategy: BranchStrategy) -> InverseBranch {
        InverseBranch::new(
            &exp_f(),
            parse("log(z)", "z").unwrap(),
            strategy,
            &Sector::right_half_plane(),
        )
        .unwrap()
    }

    fn expanding(lambda: f64) -> SchroederKernel {
        SchroederKernel::new(Convergent::reciprocal(), exp_f(), r(lambda), ScaleMode::Expanding).unwrap()
    }

    fn p_at(k: &SchroederKernel, w: Complex64) -> Complex64 {
        compose_adaptive(&Kernel::Schroeder(k.clone()), w, r(0.0), DEFAULT_TOL, DEFAULT_N_MAX)
            .unwrap()
            .value
    }

    #[test]
    fn sanity_check_rejects_wrong_inverse() {
        let err = InverseBranch::new(
            &exp_f(),
            parse("log(z)+0.1", "z").unwrap(),
            BranchStrategy::Principal,
            &Sector::right_half_plane(),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::SanityCheck { .. }));
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        assert_eq!(inv.period(), Some(Complex64::new(0.0, 2.0 * PI)));
    }

    #[test]
    fn sector_membership() {
        let s = Sector::right_half_plane();
        assert!(s.contains(r(5.0)));
        assert!(s.contains(Complex64::new(1.0, 3.0)));
        assert!(!s.contains(r(0.5)));
        assert!(s.samples().iter().all(|&z| s.contains(z)));
    }

    #[test]
    fn nearest_branch_follows_reference() {
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let y = Complex64::from_polar(20.0, 3.0);
        let reference = Complex64::new(3.0, 3.0 + 2.0 * PI);
        let x = inv.apply(y, reference, 0).unwrap();
        assert!((x - reference).norm() < 1.0);
        assert!((x.exp() - y).norm() < 1e-12);
        let principal = log_branch(BranchStrategy::Principal);
        assert!(matches!(
            principal.apply(y, reference, 0),
            Err(SolverError::BranchEscape { .. })
        ));
    }

    #[test]
    fn v_zero_and_v_one() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let w = r(0.05);
        assert_eq!(v_iterate(&k, &inv, w, 0, 1e-12, 512).unwrap(), r(0.0));
        let v1 = v_iterate(&k, &inv, w, 1, 1e-12, 512).unwrap();
        let direct = p_at(&k, r(0.4) * w).ln() - p_at(&k, w);
        assert!((v1 - direct).norm() < 1e-12, "{v1} vs {direct}");
    }

    #[test]
    fn increments_shrink() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let w = r(0.3);
        let vs: Vec<Complex64> = (1..=8)
            .map(|n| v_iterate(&k, &inv, w, n, 1e-12, 512).unwrap())
            .collect();
        let increments: Vec<f64> = vs.windows(2).map(|p| (p[1] - p[0]).norm()).collect();
        for pair in increments.windows(2) {
            assert!(pair[1] <= pair[0], "{increments:?}");
            if pair[1] > 0.0 {
                assert!(pair[1] < pair[0], "{increments:?}");
            }
        }
        assert!(increments[0] > 0.0);
    }

    #[test]
    fn telescoping_identity() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let w = r(0.3);
        let lw = r(0.4) * w;
        for n in 0..3 {
            let lhs = v_iterate(&k, &inv, w, n + 1, 1e-12, 512).unwrap();
            let inner = v_iterate(&k, &inv, lw, n, 1e-12, 512).unwrap();
            let p_w = p_at(&k, w);
            let rhs = inv.apply(p_at(&k, lw) + inner, p_w, 0).unwrap() - p_w;
            assert!((lhs - rhs).norm() < 1e-10, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn converged_run_and_residual() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let (run, lower) = solve_pair(&k, &inv, r(0.05), 1e-12, 512).unwrap();
        assert!(run.converged && lower.converged);
        assert!(run.ratios.iter().all(|&q| q < 1.0), "{:?}", run.ratios);
        assert_eq!(run.increments.len() + 1, run.iterates.len());
        assert_eq!(run.ratios.len() + 1, run.increments.len());
        assert!(run.residual.unwrap() < 1e-8);
        assert!(run.relative_residual.unwrap() < 100.0 * 1e-12);
        assert!(*run.increments.last().unwrap() < run.tol);
    }

    #[test]
    fn far_point_fails() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        assert!(solve_phi(&k, &inv, r(5.0), 1e-12, 512).is_err());
    }

    #[test]
    fn contracting_kernel_rejected() {
        let k = SchroederKernel::new(
            Convergent::rational(),
            exp_f(),
            r(0.4),
            ScaleMode::Contracting,
        )
        .unwrap();
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        assert!(matches!(
            solve_phi(&k, &inv, r(0.05), 1e-12, 16),
            Err(SolverError::InvalidArgument(_))
        ));
    }

    #[test]
    fn slope_fit_sanity() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let constant = vec![0.3; 10];
        assert!(slope_of_residuals(&xs, &constant).unwrap().abs() < 1e-12);
        let line: Vec<f64> = xs.iter().map(|x| (-2.0 * x).exp()).collect();
        assert!((slope_of_residuals(&xs, &line).unwrap() + 2.0).abs() < 1e-12);
        assert!(matches!(
            slope_of_residuals(&xs, &[0.0; 10]),
            Err(SolverError::DegenerateFit(_))
        ));
    }

    #[test]
    fn contracting_form_slope() {
        let k = SchroederKernel::new(Convergent::rational(), exp_f(), r(0.01), ScaleMode::Contracting).unwrap();
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let path: Vec<Complex64> = (0..10).map(|m| r(5.0 * 2f64.powi(m))).collect();
        let slope = asymptotic_slope_schroeder(&k, &inv, &path, 1e-12, 512).unwrap();
        assert!((-1.3..=-0.7).contains(&slope), "{slope}");
    }

    #[test]
    fn path_validation() {
        let k = expanding(0.4);
        let inv = log_branch(BranchStrategy::NearestToPrevious);
        let short: Vec<Complex64> = (0..4).map(|m| r(0.2 / 2f64.powi(m))).collect();
        assert!(matches!(
            asymptotic_slope_schroeder(&k, &inv, &short, 1e-12, 512),
            Err(SolverError::InvalidPath(_))
        ));
        let up: Vec<Complex64> = (0..8).map(|m| r(5.0 * 2f64.powi(m))).collect();
        assert!(matches!(
            asymptotic_slope_schroeder(&k, &inv, &up, 1e-12, 512),
            Err(SolverError::InvalidPath(_))
        ));
    }
}
