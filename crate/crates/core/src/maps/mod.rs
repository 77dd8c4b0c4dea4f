//! Coordinate maps, metric pullbacks, homothety factors and the function
//! `μ = |R|²(P₀) / |R|²`.

mod catalog;

pub use catalog::{catalog_map, CatalogMap, MapEntry, MapExpectation, MAP_CATALOG};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{curvature_tensor, riemann_norm_sq_jet};
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::metric::MetricField;

/// `x ↦ (T¹(x), ..., T^m(x))` with parameters already bound.
#[derive(Debug, Clone)]
pub struct HomothetyMap {
    pub name: String,
    pub coords: Vec<String>,
    pub components: Vec<Expr>,
    /// Values the components were built with, for reporting.
    pub params: Params,
}

impl HomothetyMap {
    pub fn new(name: impl Into<String>, coords: Vec<String>, components: Vec<Expr>, params: Params) -> Result<Self> {
        if coords.len() != components.len() {
            return Err(Error::DimensionMismatch(format!(
                "map has {} components over {} coordinates",
                components.len(),
                coords.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            coords,
            components,
            params,
        })
    }

    pub fn identity(coords: Vec<String>) -> Self {
        let components = coords.iter().enumerate().map(|(i, c)| Expr::coord(i, c.clone())).collect();
        Self {
            name: "identity".into(),
            coords,
            components,
            params: Params::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn apply(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check(point)?;
        self.components.iter().map(|c| c.eval(point, &Params::new())).collect()
    }

    /// `J[(w, u)] = ∂T^w/∂x^u`.
    pub fn jacobian(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.check(point)?;
        let m = self.dim();
        let mut j = DMatrix::zeros(m, m);
        for (w, c) in self.components.iter().enumerate() {
            let grad = c.lift(point, &Params::new(), 1)?.gradient();
            for (u, v) in grad.into_iter().enumerate() {
                j[(w, u)] = v;
            }
        }
        Ok(j)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &HomothetyMap) -> Result<HomothetyMap> {
        if self.dim() != inner.dim() {
            return Err(Error::DimensionMismatch("composed maps differ in dimension".into()));
        }
        let subs: Vec<Option<Expr>> = inner.components.iter().cloned().map(Some).collect();
        Ok(HomothetyMap {
            name: format!("{}∘{}", self.name, inner.name),
            coords: self.coords.clone(),
            components: self.components.iter().map(|c| c.substitute(&subs)).collect(),
            params: Params::new(),
        })
    }

    fn check(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, map has {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// `(T*g)_{uv}(P) = g_{wz}(T(P)) ∂_u T^w ∂_v T^z`.
pub fn pullback_metric(t: &HomothetyMap, g: &MetricField, point: &[f64], params: &Params) -> Result<DMatrix<f64>> {
    if t.dim() != g.dim() {
        return Err(Error::DimensionMismatch("map and metric differ in dimension".into()));
    }
    let image = t.apply(point)?;
    let gt = g.eval(&image, params)?;
    if gt.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { point: image });
    }
    let j = t.jacobian(point)?;
    Ok(j.transpose() * gt * j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum HomothetyCheck {
    Homothety {
        lambda_sq: f64,
        /// Largest relative deviation from `λ² g` over the samples.
        max_deviation: f64,
        samples: usize,
    },
    NotHomothety {
        point: Vec<f64>,
        deviation: f64,
        /// Median ratio the samples were compared against.
        ratio: f64,
    },
}

impl HomothetyCheck {
    pub fn lambda_sq(&self) -> Option<f64> {
        match self {
            HomothetyCheck::Homothety { lambda_sq, .. } => Some(*lambda_sq),
            HomothetyCheck::NotHomothety { .. } => None,
        }
    }
}

pub const MIN_SAMPLES: usize = 8;

/// Decide whether `T*g = λ²g` with one constant `λ² > 0` on all samples.
pub fn homothety_factor(
    t: &HomothetyMap,
    g: &MetricField,
    samples: &[Vec<f64>],
    params: &Params,
    tol: f64,
) -> Result<HomothetyCheck> {
    compare_pullback(t, g, g, samples, params, tol)
}

/// Decide whether `T*target = λ² source` with one constant `λ² > 0` on all samples.
pub fn compare_pullback(
    t: &HomothetyMap,
    target: &MetricField,
    source: &MetricField,
    samples: &[Vec<f64>],
    params: &Params,
    tol: f64,
) -> Result<HomothetyCheck> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "homothety checks need at least {MIN_SAMPLES} sample points, got {}",
            samples.len()
        )));
    }
    let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = samples
        .par_iter()
        .map(|p| {
            let base = source.eval(p, params)?;
            source.validate(&base)?;
            Ok((pullback_metric(t, target, p, params)?, base))
        })
        .collect::<Result<_>>()?;
    let mut ratios: Vec<f64> = pairs
        .iter()
        .flat_map(|(pulled, base)| {
            let scale = base.amax();
            pulled
                .iter()
                .zip(base.iter())
                .filter(move |(_, b)| b.abs() > 1e-12 * scale)
                .map(|(a, b)| a / b)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let ratio = ratios[ratios.len() / 2];
    let mut worst = (0.0, 0);
    for (i, (pulled, base)) in pairs.iter().enumerate() {
        let scale = base.amax().max(pulled.amax());
        let dev = (pulled - base * ratio).amax() / scale;
        if dev > worst.0 || dev.is_nan() {
            worst = (if dev.is_nan() { f64::INFINITY } else { dev }, i);
        }
    }
    if worst.0 > tol || ratio <= 0.0 {
        return Ok(HomothetyCheck::NotHomothety {
            point: samples[worst.1].clone(),
            deviation: worst.0,
            ratio,
        });
    }
    Ok(HomothetyCheck::Homothety {
        lambda_sq: ratio,
        max_deviation: worst.0,
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuEvaluation {
    pub base: Vec<f64>,
    pub point: Vec<f64>,
    pub mu: f64,
    pub gradient: Vec<f64>,
}

/// `|R|²` at `point`, rejecting values indistinguishable from zero.
fn norm_sq_checked(g: &MetricField, point: &[f64], params: &Params) -> Result<crate::expr::Jet> {
    let jet = riemann_norm_sq_jet(g, point, params, 1)?;
    let r = curvature_tensor(g, point, params)?;
    let inv = g.validate(&g.eval(point, params)?)?;
    let abs_r = crate::tensor::Tensor::from_vec(r.dim(), r.rank(), r.data().iter().map(|v| v.abs()).collect());
    let magnitude = abs_r.norm_sq(&inv.map(f64::abs));
    if magnitude == 0.0 || jet.value().abs() <= 1e-12 * magnitude {
        return Err(Error::VanishingNorm { point: point.to_vec() });
    }
    Ok(jet)
}

/// `μ(P) = |R|²(P₀) / |R|²(P)` and its differential at `P`.
pub fn mu(g: &MetricField, base: &[f64], point: &[f64], params: &Params) -> Result<MuEvaluation> {
    let n0 = norm_sq_checked(g, base, params)?.value();
    let n = norm_sq_checked(g, point, params)?;
    let v = n.value();
    Ok(MuEvaluation {
        base: base.to_vec(),
        point: point.to_vec(),
        mu: n0 / v,
        gradient: n.gradient().into_iter().map(|d| -n0 * d / (v * v)).collect(),
    })
}
