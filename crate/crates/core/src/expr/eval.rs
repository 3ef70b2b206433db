use num_complex::Complex64;
use thiserror::Error;

use super::ast::{BinaryOp, Expr, FuncExpr, UnaryOp};
use super::jet::{Jet, MAX_JET_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("non-finite result")]
    NonFinite,
    #[error("jet order {order} exceeds the maximum {max}")]
    OrderTooLarge { order: usize, max: usize },
}

// Integer exponents beyond this use the exp/log route.
const MAX_INTEGER_POWER: f64 = 1024.0;

/// Values the tree walker can compute with. Scalars and jets share one walker
/// so that the leading jet coefficient is computed by exactly the same
/// floating-point operations as the scalar value.
trait Algebra: Clone {
    fn lift(&self, c: Complex64) -> Self;
    fn leading(&self) -> Complex64;
    fn finite(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
}

impl Algebra for Complex64 {
    fn lift(&self, c: Complex64) -> Self {
        c
    }
    fn leading(&self) -> Complex64 {
        *self
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        super::jet::principal_ln(*self)
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
}

impl Algebra for Jet {
    fn lift(&self, c: Complex64) -> Self {
        Jet::constant(c, self.order())
    }
    fn leading(&self) -> Complex64 {
        self.value()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        Jet::div(self, rhs)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn sin(&self) -> Self {
        self.sin_cos().0
    }
    fn cos(&self) -> Self {
        self.sin_cos().1
    }
}

fn walk<T: Algebra>(node: &Expr, x: &T) -> Result<T, EvalError> {
    let out = match node {
        Expr::Const(c) => x.lift(*c),
        Expr::Var => x.clone(),
        Expr::Unary(op, a) => {
            let a = walk(a, x)?;
            match op {
                UnaryOp::Neg => a.neg(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => {
                    if a.leading() == Complex64::new(0.0, 0.0) {
                        return Err(EvalError::LogOfZero);
                    }
                    a.ln()
                }
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
            }
        }
        Expr::Binary(BinaryOp::Pow, base, exponent) => {
            let b = walk(base, x)?;
            if exponent.is_constant() {
                let e = walk(exponent, &Complex64::new(0.0, 0.0))?;
                if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() <= MAX_INTEGER_POWER {
                    integer_power(&b, e.re as i32)?
                } else {
                    general_power(&b, &b.lift(e))?
                }
            } else {
                let e = walk(exponent, x)?;
                general_power(&b, &e)?
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let a = walk(lhs, x)?;
            let b = walk(rhs, x)?;
            match op {
                BinaryOp::Add => a.add(&b),
                BinaryOp::Sub => a.sub(&b),
                BinaryOp::Mul => a.mul(&b),
                BinaryOp::Div => {
                    if b.leading() == Complex64::new(0.0, 0.0) {
                        return Err(EvalError::DivisionByZero);
                    }
                    a.div(&b)
                }
                BinaryOp::Pow => unreachable!("handled above"),
            }
        }
    };
    if out.finite() {
        Ok(out)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn integer_power<T: Algebra>(base: &T, n: i32) -> Result<T, EvalError> {
    let mut result = base.lift(Complex64::new(1.0, 0.0));
    let mut square = base.clone();
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            result = result.mul(&square);
        }
        k >>= 1;
        if k > 0 {
            square = square.mul(&square);
        }
    }
    if n < 0 {
        if result.leading() == Complex64::new(0.0, 0.0) {
            return Err(EvalError::DivisionByZero);
        }
        result = base.lift(Complex64::new(1.0, 0.0)).div(&result);
    }
    Ok(result)
}

fn general_power<T: Algebra>(base: &T, exponent: &T) -> Result<T, EvalError> {
    if base.leading() == Complex64::new(0.0, 0.0) {
        return Err(EvalError::LogOfZero);
    }
    Ok(exponent.mul(&base.ln()).exp())
}

/// Value of `f` at `point`; principal branch for `log` and non-integer powers.
pub fn eval(f: &FuncExpr, point: Complex64) -> Result<Complex64, EvalError> {
    if !point.is_finite() {
        return Err(EvalError::NonFinite);
    }
    walk(f.root(), &point)
}

/// Value and first derivative at `point`.
pub fn eval_d1(f: &FuncExpr, point: Complex64) -> Result<(Complex64, Complex64), EvalError> {
    let jet = eval_jet(f, point, 1)?;
    Ok((jet.coeffs()[0], jet.coeffs()[1]))
}

/// Taylor coefficients `f^(k)(center)/k!` for `k = 0..=order`.
pub fn eval_jet(f: &FuncExpr, center: Complex64, order: usize) -> Result<Jet, EvalError> {
    if order > MAX_JET_ORDER {
        return Err(EvalError::OrderTooLarge {
            order,
            max: MAX_JET_ORDER,
        });
    }
    eval_on_jet(f, &Jet::variable(center, order))
}

/// Compose `f` with a jet: the expansion of `f(g(center + h))` given that of `g`.
pub fn eval_on_jet(f: &FuncExpr, input: &Jet) -> Result<Jet, EvalError> {
    if input.order() > MAX_JET_ORDER {
        return Err(EvalError::OrderTooLarge {
            order: input.order(),
            max: MAX_JET_ORDER,
        });
    }
    if !input.is_finite() {
        return Err(EvalError::NonFinite);
    }
    walk(f.root(), input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exp_at_zero() {
        let f = parse("exp(z)", "z").unwrap();
        assert_eq!(eval(&f, r(0.0)).unwrap(), r(1.0));
    }

    #[test]
    fn rational_convergent_values() {
        let p = parse("w/(1+w)", "w").unwrap();
        assert_eq!(eval(&p, r(1.0)).unwrap(), r(0.5));
        assert_eq!(eval(&p, r(-1.0)), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn log_branch_and_zero() {
        let f = parse("log(z)", "z").unwrap();
        assert_eq!(eval(&f, r(0.0)), Err(EvalError::LogOfZero));
        let v = eval(&f, r(-1.0)).unwrap();
        assert!((v.im - std::f64::consts::PI).abs() < 1e-15);
        let below = eval(&f, Complex64::new(-1.0, -0.0)).unwrap();
        assert!(below.im <= std::f64::consts::PI && below.im > -std::f64::consts::PI);
    }

    #[test]
    fn overflow_is_non_finite() {
        let f = parse("exp(z)", "z").unwrap();
        assert_eq!(eval(&f, r(1000.0)), Err(EvalError::NonFinite));
        assert_eq!(eval(&f, r(f64::INFINITY)), Err(EvalError::NonFinite));
    }

    #[test]
    fn powers() {
        let f = parse("z^3 - z^-2", "z").unwrap();
        let v = eval(&f, r(2.0)).unwrap();
        assert!((v - r(7.75)).norm() < 1e-15);
        let g = parse("z^0.5", "z").unwrap();
        assert!((eval(&g, r(-4.0)).unwrap() - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        assert_eq!(eval(&g, r(0.0)), Err(EvalError::LogOfZero));
        let h = parse("z^-1", "z").unwrap();
        assert_eq!(eval(&h, r(0.0)), Err(EvalError::DivisionByZero));
        let k = parse("2^z", "z").unwrap();
        assert!((eval(&k, r(3.0)).unwrap() - r(8.0)).norm() < 1e-14);
    }

    #[test]
    fn exponential_jet() {
        let f = parse("exp(z)", "z").unwrap();
        let jet = eval_jet(&f, r(0.0), 3).unwrap();
        let expected = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (c, e) in jet.coeffs().iter().zip(expected) {
            assert!((c - r(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn geometric_jet() {
        let p = parse("w/(1+w)", "w").unwrap();
        let jet = eval_jet(&p, r(0.0), 2).unwrap();
        assert_eq!(jet.coeffs(), &[r(0.0), r(1.0), r(-1.0)]);
    }

    #[test]
    fn jet_order_capacity() {
        let f = parse("z", "z").unwrap();
        assert!(eval_jet(&f, r(0.0), MAX_JET_ORDER).is_ok());
        assert_eq!(
            eval_jet(&f, r(0.0), MAX_JET_ORDER + 1),
            Err(EvalError::OrderTooLarge {
                order: MAX_JET_ORDER + 1,
                max: MAX_JET_ORDER
            })
        );
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        let sources = [
            "exp(z)*sin(z)",
            "z/(1+z^2)",
            "log(2+z)*cos(z)",
            "(1+z)^(0.3+0.1i)",
            "z^z",
        ];
        let h = 1e-6;
        let c = Complex64::new(0.4, 0.2);
        for src in sources {
            let f = parse(src, "z").unwrap();
            let (_, d) = eval_d1(&f, c).unwrap();
            let fd = (eval(&f, c + h).unwrap() - eval(&f, c - h).unwrap()) / (2.0 * h);
            assert!((d - fd).norm() / d.norm() < 1e-6, "{src}: {d} vs {fd}");
        }
    }
}
