use std::fmt;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Exp,
    Log,
    Sin,
    Cos,
    Neg,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Neg => "-",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Node of a one-variable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(c: impl Into<Complex64>) -> Self {
        Expr::Const(c.into())
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// True when the subtree does not mention the variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Replace every occurrence of the variable with `with`.
    pub fn substitute(&self, with: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var => with.clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(with)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(with), b.substitute(with)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    fn write(&self, var: &str, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_const(*c, out),
            Expr::Var => out.write_str(var),
            Expr::Unary(UnaryOp::Neg, a) => {
                out.write_str("(-")?;
                a.write(var, out)?;
                out.write_str(")")
            }
            Expr::Unary(op, a) => {
                write!(out, "{}(", op.name())?;
                a.write(var, out)?;
                out.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                out.write_str("(")?;
                a.write(var, out)?;
                write!(out, "{}", op.symbol())?;
                b.write(var, out)?;
                out.write_str(")")
            }
        }
    }
}

// Debug formatting of f64 is the shortest string that parses back to the same bits.
fn write_const(c: Complex64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(out, "({:?})", c.re)
    } else if c.re == 0.0 {
        write!(out, "({:?}*i)", c.im)
    } else {
        write!(out, "({:?}+{:?}*i)", c.re, c.im)
    }
}

/// A parsed function of one complex variable.
///
/// Immutable after construction; evaluation borrows it and is safe to share
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncExpr {
    root: Expr,
    var: String,
}

impl FuncExpr {
    pub fn new(root: Expr, var: impl Into<String>) -> Self {
        FuncExpr {
            root,
            var: var.into(),
        }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    /// Compose with an inner expression given in its own variable: `self(inner(x))`.
    pub fn compose(&self, inner: &FuncExpr) -> FuncExpr {
        FuncExpr::new(self.root.substitute(&inner.root), inner.var.clone())
    }
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(&self.var, f)
    }
}
