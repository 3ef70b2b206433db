//! Function definitions: parsing, evaluation and truncated power series.

mod ast;
mod eval;
mod jet;
mod parse;

pub use ast::{BinaryOp, Expr, FuncExpr, UnaryOp};
pub use eval::{eval, eval_d1, eval_jet, eval_on_jet, EvalError};
pub use jet::{Jet, MAX_JET_ORDER};
pub use parse::{parse, parse_complex, ParseError};
