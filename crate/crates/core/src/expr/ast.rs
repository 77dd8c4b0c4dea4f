use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::jet::Jet;
use super::profile::Profile;
use crate::error::{Error, Result};

/// Named real parameter values.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Exp, Func::Ln, Func::Sin, Func::Cos, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Scalar expression over coordinates and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord { index: usize, name: String },
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// `shift`-th derivative of a tabulated profile, applied to `arg`.
    Profile {
        profile: Arc<Profile>,
        shift: usize,
        arg: Box<Expr>,
    },
}

// Smart constructors with the handful of identities that keep derivatives small.
impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn coord(index: usize, name: impl Into<String>) -> Expr {
        Expr::Coord {
            index,
            name: name.into(),
        }
    }

    pub fn param(name: impl Into<String>) -> Expr {
        Expr::Param(name.into())
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x - y),
            (_, Some(y)) if y == 0.0 => a,
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), _) if x == 0.0 => Expr::Num(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match b.as_num() {
            Some(y) if y == 1.0 => a,
            Some(y) if y == 0.0 => Expr::Num(1.0),
            _ => Expr::Pow(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(v) if v == 0.0 => Expr::Num(0.0),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    /// True if the expression mentions coordinate `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        match self {
            Expr::Coord { index: i, .. } => *i == index,
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(index),
            Expr::Profile { arg, .. } => arg.depends_on(index),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(index) || b.depends_on(index)
            }
        }
    }

    pub fn has_coords(&self) -> bool {
        match self {
            Expr::Coord { .. } => true,
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_coords(),
            Expr::Profile { arg, .. } => arg.has_coords(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.has_coords() || b.has_coords()
            }
        }
    }

    /// Parameter names appearing in the expression, sorted and deduplicated.
    pub fn params(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Param(p) => out.push(p.clone()),
                Expr::Num(_) | Expr::Coord { .. } => {}
                Expr::Neg(a) | Expr::Call(_, a) => walk(a, out),
                Expr::Profile { arg, .. } => walk(arg, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Replace coordinates by expressions; `None` entries leave a coordinate alone.
    pub fn substitute(&self, replacements: &[Option<Expr>]) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute(replacements));
        match self {
            Expr::Coord { index, .. } => match replacements.get(*index) {
                Some(Some(r)) => r.clone(),
                _ => self.clone(),
            },
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
            Expr::Profile { profile, shift, arg } => Expr::Profile {
                profile: profile.clone(),
                shift: *shift,
                arg: rec(arg),
            },
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, b) => Expr::Pow(rec(a), rec(b)),
        }
    }

    /// Replace parameters by numbers.
    pub fn bind(&self, params: &Params) -> Expr {
        let rec = |e: &Expr| Box::new(e.bind(params));
        match self {
            Expr::Param(p) => params.get(p).map_or_else(|| self.clone(), |v| Expr::Num(*v)),
            Expr::Num(_) | Expr::Coord { .. } => self.clone(),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
            Expr::Profile { profile, shift, arg } => Expr::Profile {
                profile: profile.clone(),
                shift: *shift,
                arg: rec(arg),
            },
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, b) => Expr::Pow(rec(a), rec(b)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `index`.
    pub fn diff(&self, index: usize) -> Expr {
        if !self.depends_on(index) {
            return Expr::Num(0.0);
        }
        match self {
            Expr::Coord { .. } => Expr::Num(1.0),
            Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
            Expr::Neg(a) => Expr::neg(a.diff(index)),
            Expr::Add(a, b) => Expr::add(a.diff(index), b.diff(index)),
            Expr::Sub(a, b) => Expr::sub(a.diff(index), b.diff(index)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(index), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(index)),
            ),
            Expr::Div(a, b) => Expr::sub(
                Expr::div(a.diff(index), (**b).clone()),
                Expr::div(
                    Expr::mul((**a).clone(), b.diff(index)),
                    Expr::pow((**b).clone(), Expr::Num(2.0)),
                ),
            ),
            Expr::Pow(a, b) => {
                if !b.has_coords() {
                    // p * a^(p-1) * a'
                    Expr::mul(
                        Expr::mul(
                            (**b).clone(),
                            Expr::pow((**a).clone(), Expr::sub((**b).clone(), Expr::Num(1.0))),
                        ),
                        a.diff(index),
                    )
                } else {
                    // a^b * (b' ln a + b a'/a)
                    Expr::mul(
                        self.clone(),
                        Expr::add(
                            Expr::mul(b.diff(index), Expr::call(Func::Ln, (**a).clone())),
                            Expr::div(Expr::mul((**b).clone(), a.diff(index)), (**a).clone()),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = a.diff(index);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Ln => Expr::div(Expr::Num(1.0), (**a).clone()),
                    Func::Sin => Expr::call(Func::Cos, (**a).clone()),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, (**a).clone())),
                    Func::Sqrt => Expr::div(Expr::Num(0.5), self.clone()),
                };
                Expr::mul(outer, inner)
            }
            Expr::Profile { profile, shift, arg } => Expr::mul(
                Expr::Profile {
                    profile: profile.clone(),
                    shift: shift + 1,
                    arg: arg.clone(),
                },
                arg.diff(index),
            ),
        }
    }

    /// Point value.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<f64> {
        Ok(self.lift(point, params, 0)?.value())
    }

    /// Taylor expansion of the expression about `point` through total degree `order`.
    pub fn lift(&self, point: &[f64], params: &Params, order: usize) -> Result<Jet> {
        let nvars = point.len();
        let domain = |reason: &str| Error::Domain {
            expr: self.to_string(),
            reason: reason.to_string(),
        };
        Ok(match self {
            Expr::Num(v) => Jet::constant(*v, nvars, order),
            Expr::Coord { index, name } => {
                let v = *point.get(*index).ok_or_else(|| {
                    Error::DimensionMismatch(format!(
                        "coordinate `{name}` has index {index} but the point has {nvars} entries"
                    ))
                })?;
                Jet::variable(v, *index, nvars, order)
            }
            Expr::Param(p) => {
                let v = params
                    .get(p)
                    .ok_or_else(|| Error::UnboundParameter(p.clone()))?;
                Jet::constant(*v, nvars, order)
            }
            Expr::Neg(a) => -&a.lift(point, params, order)?,
            Expr::Add(a, b) => &a.lift(point, params, order)? + &b.lift(point, params, order)?,
            Expr::Sub(a, b) => &a.lift(point, params, order)? - &b.lift(point, params, order)?,
            Expr::Mul(a, b) => &a.lift(point, params, order)? * &b.lift(point, params, order)?,
            Expr::Div(a, b) => {
                let num = a.lift(point, params, order)?;
                let den = b.lift(point, params, order)?;
                let inv = den.recip().ok_or_else(|| domain("division by zero"))?;
                &num * &inv
            }
            Expr::Pow(a, b) => {
                let base = a.lift(point, params, order)?;
                if b.has_coords() {
                    let exponent = b.lift(point, params, order)?;
                    let ln = base
                        .ln()
                        .ok_or_else(|| domain("variable exponent needs a positive base"))?;
                    (&exponent * &ln).exp()
                } else {
                    let p = b.eval(point, params)?;
                    if p.fract() == 0.0 && p.abs() < 1e9 {
                        base.powi(p as i64)
                            .ok_or_else(|| domain("negative power of zero"))?
                    } else {
                        base.powf(p)
                            .ok_or_else(|| domain("fractional power needs a positive base"))?
                    }
                }
            }
            Expr::Call(f, a) => {
                let u = a.lift(point, params, order)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Ln => u.ln().ok_or_else(|| domain("logarithm of a nonpositive value"))?,
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Sqrt => u.sqrt().ok_or_else(|| domain("square root needs a positive value"))?,
                }
            }
            Expr::Profile { profile, shift, arg } => {
                let u = arg.lift(point, params, order)?;
                let u0 = u.value();
                if !profile.contains(u0) {
                    let (lo, hi) = profile.domain();
                    return Err(domain(&format!(
                        "profile `{}` evaluated at {u0} outside its grid [{lo}, {hi}]",
                        profile.name()
                    )));
                }
                let mut fact = 1.0;
                let series: Vec<f64> = (0..=order)
                    .map(|n| {
                        if n > 0 {
                            fact *= n as f64;
                        }
                        profile.derivative(u0, shift + n) / fact
                    })
                    .collect();
                u.compose(&series)
            }
        })
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_ATOM: u8 = 4;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
            Expr::Mul(..) | Expr::Div(..) => PREC_PRODUCT,
            Expr::Pow(..) | Expr::Neg(..) => 3,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => PREC_ATOM,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Coord { name, .. } => f.write_str(name)?,
            Expr::Param(p) => f.write_str(p)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 3)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_prec(f, PREC_SUM)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                b.write_prec(f, PREC_PRODUCT)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_prec(f, PREC_PRODUCT)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write_prec(f, 3)?;
            }
            Expr::Pow(a, b) => {
                a.write_prec(f, PREC_ATOM)?;
                f.write_str("^")?;
                let signed = match b.as_ref() {
                    Expr::Neg(inner) => inner.precedence() == PREC_ATOM,
                    Expr::Num(v) => *v < 0.0,
                    _ => false,
                };
                b.write_prec(f, if signed { 3 } else { PREC_ATOM })?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Profile { profile, shift, arg } => {
                write!(f, "{}{}(", profile.name(), "'".repeat(*shift))?;
                arg.write_prec(f, 0)?;
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Canonical printer; its output parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}
