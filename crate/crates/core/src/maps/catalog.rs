use serde::Serialize;

use super::HomothetyMap;
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::families::{family, walker, Family};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Family the map acts on, and the family parameters it reads.
    pub family: &'static str,
    pub family_params: &'static [(&'static str, f64)],
    pub params: &'static [(&'static str, f64)],
}

pub const MAP_CATALOG: &[MapEntry] = &[
    MapEntry {
        name: "map:warped_translate",
        summary: "(x, y) -> (x + a, y) on e^{tx}(dx^2 + g_N); scales the metric by e^{ta}",
        family: "warped:sphere",
        family_params: &[("t", 1.0), ("m", 3.0)],
        params: &[("a", 1.0)],
    },
    MapEntry {
        name: "map:caseI_iso",
        summary: "(s e^{-a y0/2} x + x0, y + y0, s e^{a y0/2} xt + xt0), an isometry of f = e^{ay}",
        family: "walker:exp_ay",
        family_params: &[("a", 1.0)],
        params: &[("x0", 0.5), ("y0", 2.0), ("xt0", -1.0), ("s", 1.0)],
    },
    MapEntry {
        name: "map:caseIIa_log",
        summary: "(lambda x + x0, lambda y, lambda xt + xt0 + lambda ln(lambda) x) on f = ln y",
        family: "walker:log",
        family_params: &[],
        params: &[("lambda", 3.0), ("x0", 0.5), ("xt0", -1.0)],
    },
    MapEntry {
        name: "map:caseIIb_pow",
        summary: "(lambda^{(2-eps)/2} x + x0, lambda y, lambda^{(2+eps)/2} xt + xt0) on f = y^eps",
        family: "walker:pow_eps",
        family_params: &[("eps", 4.0)],
        params: &[("lambda", 2.0), ("x0", 0.5), ("xt0", -1.0)],
    },
    MapEntry {
        name: "map:beta_shift",
        summary: "(x, y - beta(x), xt + y beta'(x)) with beta = b0 + b1 x + b2 x^2",
        family: "walker:exp_ay",
        family_params: &[("a", 1.0)],
        params: &[("b0", 0.3), ("b1", -0.2), ("b2", 0.1)],
    },
    MapEntry {
        name: "map:const_absorb",
        summary: "(x, y, xt + w(x)) with w' = v = v0 + v1 x; removes v from f",
        family: "walker:exp_ay",
        family_params: &[("a", 1.0)],
        params: &[("v0", 0.4), ("v1", -0.3)],
    },
];

#[derive(Debug, Clone)]
pub enum MapExpectation {
    /// `T*g = λ²g` on the family metric.
    Homothety { lambda_sq: f64 },
    /// `T*target = source`, a change of variables between two Walker metrics.
    Pullback { target: MetricField, source: MetricField },
}

#[derive(Debug, Clone)]
pub struct CatalogMap {
    pub map: HomothetyMap,
    pub family: Family,
    pub expectation: MapExpectation,
}

fn x() -> Expr {
    Expr::coord(0, "x")
}

fn y() -> Expr {
    Expr::coord(1, "y")
}

fn xt() -> Expr {
    Expr::coord(2, "xt")
}

fn n(v: f64) -> Expr {
    Expr::num(v)
}

fn affine(scale: f64, var: Expr, shift: f64) -> Expr {
    Expr::add(Expr::mul(n(scale), var), n(shift))
}

/// Build a catalog map with parameters from `overrides`, which may also set the
/// family parameters listed in the entry.
pub fn catalog_map(name: &str, overrides: &Params) -> Result<CatalogMap> {
    let entry = MAP_CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown map `{name}`")))?;
    let mut p: Params = entry.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let mut fp: Params = entry.family_params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter {k} must be finite")));
        }
        if let Some(slot) = p.get_mut(k) {
            *slot = *v;
        } else if let Some(slot) = fp.get_mut(k) {
            *slot = *v;
        } else {
            return Err(Error::InvalidArgument(format!("map `{name}` has no parameter `{k}`")));
        }
    }
    let fam = family(entry.family, &fp)?;
    let coords = fam.metric.coords().to_vec();
    let positive = |key: &str| -> Result<f64> {
        let v = p[key];
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("map parameter {key} must be positive, got {v}")))
        }
    };
    let (components, expectation) = match entry.name {
        "map:warped_translate" => {
            let a = p["a"];
            let t = fam.params["t"];
            let mut comps: Vec<Expr> = coords.iter().enumerate().map(|(i, c)| Expr::coord(i, c.clone())).collect();
            comps[0] = affine(1.0, x(), a);
            (comps, MapExpectation::Homothety { lambda_sq: (t * a).exp() })
        }
        "map:caseI_iso" => {
            let a = fam.params["a"];
            let (x0, y0, xt0, s) = (p["x0"], p["y0"], p["xt0"], p["s"]);
            if s != 1.0 && s != -1.0 {
                return Err(Error::InvalidArgument(format!("sign s must be 1 or -1, got {s}")));
            }
            let e = (a * y0 / 2.0).exp();
            (
                vec![affine(s / e, x(), x0), affine(1.0, y(), y0), affine(s * e, xt(), xt0)],
                MapExpectation::Homothety { lambda_sq: 1.0 },
            )
        }
        "map:caseIIa_log" => {
            let l = positive("lambda")?;
            let (x0, xt0) = (p["x0"], p["xt0"]);
            (
                vec![
                    affine(l, x(), x0),
                    Expr::mul(n(l), y()),
                    Expr::add(affine(l, xt(), xt0), Expr::mul(n(l * l.ln()), x())),
                ],
                MapExpectation::Homothety { lambda_sq: l * l },
            )
        }
        "map:caseIIb_pow" => {
            let l = positive("lambda")?;
            let c = fam.params["eps"];
            let (x0, xt0) = (p["x0"], p["xt0"]);
            (
                vec![
                    affine(l.powf((2.0 - c) / 2.0), x(), x0),
                    Expr::mul(n(l), y()),
                    affine(l.powf((2.0 + c) / 2.0), xt(), xt0),
                ],
                MapExpectation::Homothety { lambda_sq: l * l },
            )
        }
        "map:beta_shift" => {
            let (b0, b1, b2) = (p["b0"], p["b1"], p["b2"]);
            let beta = Expr::add(n(b0), Expr::add(Expr::mul(n(b1), x()), Expr::mul(n(b2), Expr::pow(x(), n(2.0)))));
            let beta_x = Expr::add(n(b1), Expr::mul(n(2.0 * b2), x()));
            let beta_xx = n(2.0 * b2);
            let f = fam.walker_f().expect("walker family").clone();
            // T*g_f = g_f̃ with f̃ = f(x, y - β) - ½β_x² - yβ_xx.
            let shifted = f.substitute(&[None, Some(Expr::sub(y(), beta.clone()))]);
            let source_f = Expr::sub(
                shifted,
                Expr::add(
                    Expr::mul(n(0.5), Expr::pow(beta_x.clone(), n(2.0))),
                    Expr::mul(y(), beta_xx),
                ),
            );
            (
                vec![x(), Expr::sub(y(), beta), Expr::add(xt(), Expr::mul(y(), beta_x))],
                MapExpectation::Pullback {
                    target: fam.metric.clone(),
                    source: walker(source_f)?,
                },
            )
        }
        "map:const_absorb" => {
            let (v0, v1) = (p["v0"], p["v1"]);
            let v = affine(v1, x(), v0);
            let w = Expr::add(Expr::mul(n(v0), x()), Expr::mul(n(v1 / 2.0), Expr::pow(x(), n(2.0))));
            let f = fam.walker_f().expect("walker family").clone();
            (
                vec![x(), y(), Expr::add(xt(), w)],
                MapExpectation::Pullback {
                    target: walker(Expr::add(f, v))?,
                    source: fam.metric.clone(),
                },
            )
        }
        _ => unreachable!("catalog entry without a builder"),
    };
    let map = HomothetyMap::new(entry.name, coords, components, p)?;
    Ok(CatalogMap {
        map,
        family: fam,
        expectation,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{compare_pullback, homothety_factor, pullback_metric};
    use super::*;
    use rand::SeedableRng;

    fn samples(fam: &Family, n: usize) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        (0..n).map(|_| fam.sample_point(&mut rng)).collect()
    }

    #[test]
    fn every_map_meets_its_expectation() {
        for entry in MAP_CATALOG {
            let cm = catalog_map(entry.name, &Params::new()).unwrap();
            let pts = samples(&cm.family, 12);
            let check = match &cm.expectation {
                MapExpectation::Homothety { lambda_sq } => {
                    let c = homothety_factor(&cm.map, &cm.family.metric, &pts, &Params::new(), 1e-10).unwrap();
                    let got = c.lambda_sq().unwrap_or_else(|| panic!("{}: {c:?}", entry.name));
                    assert!((got - lambda_sq).abs() < 1e-10 * lambda_sq, "{}: {got} vs {lambda_sq}", entry.name);
                    c
                }
                MapExpectation::Pullback { target, source } => {
                    let c = compare_pullback(&cm.map, target, source, &pts, &Params::new(), 1e-10).unwrap();
                    assert!((c.lambda_sq().unwrap_or(0.0) - 1.0).abs() < 1e-10, "{}: {c:?}", entry.name);
                    c
                }
            };
            assert!(check.lambda_sq().is_some(), "{}: {check:?}", entry.name);
        }
    }

    #[test]
    fn case_one_component_check() {
        let cm = catalog_map("map:caseI_iso", &Params::new()).unwrap();
        let p = [0.1, -0.3, 0.4];
        let pulled = pullback_metric(&cm.map, &cm.family.metric, &p, &Params::new()).unwrap();
        assert!((pulled[(0, 0)] + 2.0 * (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn negative_sign_and_bad_params() {
        let p: Params = [("s".to_string(), -1.0)].into();
        let cm = catalog_map("map:caseI_iso", &p).unwrap();
        let pts = samples(&cm.family, 8);
        let c = homothety_factor(&cm.map, &cm.family.metric, &pts, &Params::new(), 1e-10).unwrap();
        assert!((c.lambda_sq().unwrap() - 1.0).abs() < 1e-12);
        let bad: Params = [("lambda".to_string(), -2.0)].into();
        assert!(catalog_map("map:caseIIa_log", &bad).is_err());
        let unknown: Params = [("q".to_string(), 1.0)].into();
        assert!(catalog_map("map:caseIIa_log", &unknown).is_err());
    }
}
