//! Scalar expressions, their parser, and truncated Taylor (jet) arithmetic.

mod ast;
mod jet;
mod parser;
mod profile;

pub use ast::{Expr, Func, Params};
pub use jet::{Jet, JetSpace};
pub use parser::{parse_scalar_expr, SymbolTable};
pub use profile::{CubicSpline, Profile};

use crate::error::Result;

/// Taylor coefficients of `expr` at `point` through total degree `order`.
pub fn jet_lift(expr: &Expr, point: &[f64], params: &Params, order: usize) -> Result<Jet> {
    expr.lift(point, params, order)
}
