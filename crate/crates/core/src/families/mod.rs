//! Metric families: warped products over homogeneous bases and 3-dimensional
//! Walker metrics, plus the named catalog shared by the CLI and tests.

mod catalog;
mod varch;

pub use catalog::{family, Family, FamilySpec, CatalogEntry, CATALOG};
pub use varch::{variable_ch_profile, ProfileGrid, VariableCHProfile};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_scalar_expr, Expr, Func, SymbolTable};
use crate::metric::{MetricField, Signature};

/// Coordinate names of a Walker chart; `xt` is the null coordinate.
pub const WALKER_COORDS: [&str; 3] = ["x", "y", "xt"];

/// Homogeneous base of a warped product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Flat,
    Sphere,
    Hyperbolic,
}

impl Base {
    /// Scalar curvature of the unit-curvature base of dimension `n`.
    pub fn scalar_curvature(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Base::Flat => 0.0,
            Base::Sphere => n * (n - 1.0),
            Base::Hyperbolic => -n * (n - 1.0),
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::Flat => "flat",
            Base::Sphere => "sphere",
            Base::Hyperbolic => "hyperbolic",
        })
    }
}

impl FromStr for Base {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Base::Flat),
            "sphere" => Ok(Base::Sphere),
            "hyperbolic" => Ok(Base::Hyperbolic),
            other => Err(Error::InvalidArgument(format!("unsupported base `{other}`"))),
        }
    }
}

/// Coordinates `x, y1, ..., y{m-1}` of a warped product.
pub fn warped_coords(m: usize) -> Vec<String> {
    std::iter::once("x".to_string())
        .chain((1..m).map(|i| format!("y{i}")))
        .collect()
}

/// `e^{tx}(dx^2 + g_N)` with `g_N` flat, or the unit sphere / hyperbolic space
/// in stereographic (Poincaré ball) coordinates.
pub fn warped_product(t: f64, base: Base, m: usize) -> Result<MetricField> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!("warped products need m >= 3, got {m}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("warp rate t must be finite".into()));
    }
    let coords = warped_coords(m);
    let warp = Expr::call(Func::Exp, Expr::mul(Expr::num(t), Expr::coord(0, "x")));
    let radius_sq = (1..m).fold(Expr::num(0.0), |acc, i| {
        Expr::add(acc, Expr::pow(Expr::coord(i, coords[i].clone()), Expr::num(2.0)))
    });
    let conformal = match base {
        Base::Flat => Expr::num(1.0),
        Base::Sphere => Expr::div(Expr::num(4.0), Expr::pow(Expr::add(Expr::num(1.0), radius_sq), Expr::num(2.0))),
        Base::Hyperbolic => {
            Expr::div(Expr::num(4.0), Expr::pow(Expr::sub(Expr::num(1.0), radius_sq), Expr::num(2.0)))
        }
    };
    let fiber = Expr::mul(warp.clone(), conformal);
    let upper = std::iter::once(((0, 0), warp)).chain((1..m).map(|i| ((i, i), fiber.clone())));
    MetricField::from_upper(coords, upper, Signature::riemannian(m))
}

/// Walker metric with `g(∂x,∂x) = -2f`, `g(∂x,∂xt) = g(∂y,∂y) = 1`, signature (1,2).
pub fn walker(f: Expr) -> Result<MetricField> {
    if f.depends_on(2) {
        return Err(Error::InvalidArgument(
            "the Walker function f must not depend on the null coordinate xt".into(),
        ));
    }
    MetricField::from_upper(
        WALKER_COORDS.iter().map(|s| s.to_string()).collect(),
        [
            ((0, 0), Expr::mul(Expr::num(-2.0), f)),
            ((0, 2), Expr::num(1.0)),
            ((1, 1), Expr::num(1.0)),
        ],
        Signature::new(1, 2),
    )
}

/// Parse a Walker function `f(x, y)` with the given parameter names.
pub fn parse_walker_f<P>(text: &str, params: P) -> Result<Expr>
where
    P: IntoIterator,
    P::Item: Into<String>,
{
    let f = parse_scalar_expr(text, &SymbolTable::new(WALKER_COORDS, params))?;
    if f.depends_on(2) {
        return Err(Error::InvalidArgument(
            "the Walker function f must not depend on the null coordinate xt".into(),
        ));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{christoffel, curvature_tensor, scalar_invariants};
    use crate::expr::Params;

    #[test]
    fn warped_flat_metric_value() {
        let g = warped_product(1.0, Base::Flat, 3).unwrap();
        let m = g.eval(&[1.0, 0.2, 0.3], &Params::new()).unwrap();
        assert!((m[(0, 0)] - std::f64::consts::E).abs() < 1e-14);
        assert!(warped_product(1.0, Base::Flat, 2).is_err());
    }

    #[test]
    fn product_with_round_sphere() {
        let g = warped_product(0.0, Base::Sphere, 3).unwrap();
        for p in [[0.0, 0.1, 0.2], [2.0, -1.5, 0.7]] {
            let tau = scalar_invariants(&g, &p, &Params::new()).unwrap().tau;
            assert!((tau - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn warped_scalar_curvature_formula() {
        for base in [Base::Flat, Base::Sphere, Base::Hyperbolic] {
            for m in [3, 4] {
                let t = 0.7;
                let g = warped_product(t, base, m).unwrap();
                let mut p = vec![0.4; m];
                p[0] = -0.3;
                let tau = scalar_invariants(&g, &p, &Params::new()).unwrap().tau;
                let tau_n = base.scalar_curvature(m - 1);
                let want = (-t * p[0]).exp() * (tau_n - ((m - 1) * (m - 2)) as f64 * t * t / 4.0);
                assert!((tau - want).abs() < 1e-10, "{base} m={m}: {tau} vs {want}");
            }
        }
    }

    #[test]
    fn walker_rejects_null_coordinate() {
        assert!(parse_walker_f("xt*y", Vec::<String>::new()).is_err());
        let f = parse_walker_f("y^eps", ["eps"]).unwrap();
        let params: Params = [("eps".to_string(), 4.0)].into();
        let r = curvature_tensor(&walker(f).unwrap(), &[0.0, 1.0, 0.0], &params).unwrap();
        assert!((r.get(&[0, 1, 1, 0]) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn walker_value_and_domain() {
        let g = walker(parse_walker_f("0.5*exp(x)*y^2", Vec::<String>::new()).unwrap()).unwrap();
        assert_eq!(g.eval(&[0.0, 1.0, 5.0], &Params::new()).unwrap()[(0, 0)], -1.0);
        let log = walker(parse_walker_f("ln(y)", Vec::<String>::new()).unwrap()).unwrap();
        assert!(matches!(
            christoffel(&log, &[0.0, -1.0, 0.0], &Params::new()),
            Err(Error::Domain { .. })
        ));
    }
}
