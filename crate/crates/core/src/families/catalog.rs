use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::Serialize;

use super::{parse_walker_f, walker, warped_product, variable_ch_profile, Base, ProfileGrid, VariableCHProfile};
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Parameter names with their default values.
    pub params: &'static [(&'static str, f64)],
    /// Walker function text, for Walker entries other than `walker:varch_k`.
    pub walker_f: Option<&'static str>,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "warped:flat",
        summary: "e^{tx}(dx^2 + flat metric), dimension m",
        params: &[("t", 1.0), ("m", 3.0)],
        walker_f: None,
    },
    CatalogEntry {
        name: "warped:sphere",
        summary: "e^{tx}(dx^2 + unit round sphere), dimension m",
        params: &[("t", 1.0), ("m", 3.0)],
        walker_f: None,
    },
    CatalogEntry {
        name: "warped:hyperbolic",
        summary: "e^{tx}(dx^2 + unit hyperbolic space), dimension m",
        params: &[("t", 1.0), ("m", 3.0)],
        walker_f: None,
    },
    CatalogEntry {
        name: "walker:exp_ay",
        summary: "Walker f = e^{ay}",
        params: &[("a", 1.0)],
        walker_f: Some("exp(a*y)"),
    },
    CatalogEntry {
        name: "walker:log",
        summary: "Walker f = ln y, y > 0",
        params: &[],
        walker_f: Some("ln(y)"),
    },
    CatalogEntry {
        name: "walker:pow_eps",
        summary: "Walker f = y^eps, y > 0",
        params: &[("eps", 4.0)],
        walker_f: Some("y^eps"),
    },
    CatalogEntry {
        name: "walker:sym_ay2",
        summary: "Walker f = a y^2 (symmetric)",
        params: &[("a", 3.0)],
        walker_f: Some("a*y^2"),
    },
    CatalogEntry {
        name: "walker:inv_sq",
        summary: "Walker f = a (x - x0)^-2 y^2",
        params: &[("a", 5.0), ("x0", 1.0)],
        walker_f: Some("a*(x - x0)^(-2)*y^2"),
    },
    CatalogEntry {
        name: "walker:half_ex_y2",
        summary: "Walker f = e^x y^2 / 2",
        params: &[],
        walker_f: Some("0.5*exp(x)*y^2"),
    },
    CatalogEntry {
        name: "walker:varch_k",
        summary: "Walker f = alpha(x) y^2 / 2 with alpha^(k) = e^{-x^2}",
        params: &[("k", 2.0)],
        walker_f: None,
    },
];

#[derive(Debug, Clone)]
pub enum FamilySpec {
    Warped { t: f64, base: Base, m: usize },
    Walker { f: Expr },
}

/// A catalog family with its parameters bound.
#[derive(Debug, Clone)]
pub struct Family {
    pub name: String,
    pub params: Params,
    pub spec: FamilySpec,
    pub metric: MetricField,
    pub profile: Option<Arc<VariableCHProfile>>,
}

impl Family {
    /// Walker family of a user formula `f(x, y)` over the parameters in `params`.
    pub fn custom_walker(text: &str, params: &Params) -> Result<Family> {
        let f = parse_walker_f(text, params.keys().cloned())?.bind(params);
        let metric = walker(f.clone())?;
        Ok(Family {
            name: "walker".into(),
            params: params.clone(),
            spec: FamilySpec::Walker { f },
            metric,
            profile: None,
        })
    }

    pub fn walker_f(&self) -> Option<&Expr> {
        match &self.spec {
            FamilySpec::Walker { f } => Some(f),
            FamilySpec::Warped { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// A point inside the domain of every catalog member.
    pub fn default_point(&self) -> Vec<f64> {
        match &self.spec {
            FamilySpec::Warped { m, .. } => {
                let mut p = vec![0.25; *m];
                p[0] = 0.0;
                p
            }
            FamilySpec::Walker { .. } => vec![0.0, 1.0, 0.0],
        }
    }

    /// A random point in a box inside the domain of every catalog member.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.spec {
            FamilySpec::Warped { m, .. } => {
                let mut p: Vec<f64> = (0..*m).map(|_| rng.gen_range(-0.4..0.4)).collect();
                p[0] = rng.gen_range(-1.0..1.0);
                p
            }
            FamilySpec::Walker { .. } => vec![
                rng.gen_range(-0.8..0.8),
                rng.gen_range(0.5..2.0),
                rng.gen_range(-1.0..1.0),
            ],
        }
    }
}

fn profile_cache() -> &'static Mutex<HashMap<usize, Arc<VariableCHProfile>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<VariableCHProfile>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Profile for `walker:varch_k` on the default grid, computed once per `k`.
pub(crate) fn cached_profile(k: usize) -> Result<Arc<VariableCHProfile>> {
    if let Some(p) = profile_cache().lock().expect("profile cache").get(&k) {
        return Ok(p.clone());
    }
    let p = Arc::new(variable_ch_profile(k, ProfileGrid::default())?);
    profile_cache().lock().expect("profile cache").insert(k, p.clone());
    Ok(p)
}

fn positive_integer(name: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 || v > 64.0 {
        return Err(Error::InvalidArgument(format!("parameter {name} must be a small nonnegative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Look up `name` and bind its parameters, overriding defaults with `overrides`.
pub fn family(name: &str, overrides: &Params) -> Result<Family> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown family `{name}`")))?;
    let mut params: Params = entry.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::InvalidArgument(format!("family `{name}` has no parameter `{k}`")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter {k} must be finite")));
        }
        params.insert(k.clone(), *v);
    }
    let (spec, profile) = if let Some(base) = name.strip_prefix("warped:") {
        let base: Base = base.parse()?;
        let m = positive_integer("m", params["m"])?;
        (
            FamilySpec::Warped {
                t: params["t"],
                base,
                m,
            },
            None,
        )
    } else if name == "walker:varch_k" {
        let k = positive_integer("k", params["k"])?;
        let p = cached_profile(k)?;
        (FamilySpec::Walker { f: p.f.clone() }, Some(p))
    } else {
        let text = entry.walker_f.expect("walker entries carry f");
        let f = parse_walker_f(text, entry.params.iter().map(|(k, _)| *k))?.bind(&params);
        (FamilySpec::Walker { f }, None)
    };
    let metric = match &spec {
        FamilySpec::Warped { t, base, m } => warped_product(*t, *base, *m)?,
        FamilySpec::Walker { f } => walker(f.clone())?,
    };
    Ok(Family {
        name: name.to_string(),
        params,
        spec,
        metric,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::evaluate;

    #[test]
    fn every_entry_builds_and_evaluates() {
        for entry in CATALOG {
            let fam = family(entry.name, &Params::new()).unwrap();
            let p = fam.default_point();
            evaluate(&fam.metric, &p, &Params::new(), 1).unwrap();
        }
    }

    #[test]
    fn overrides_are_checked() {
        let p: Params = [("zz".to_string(), 1.0)].into();
        assert!(matches!(family("walker:log", &p), Err(Error::InvalidArgument(_))));
        assert!(family("walker:nope", &Params::new()).is_err());
        let m2: Params = [("m".to_string(), 2.0)].into();
        assert!(family("warped:flat", &m2).is_err());
    }
}
