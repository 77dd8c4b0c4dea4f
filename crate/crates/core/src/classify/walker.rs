use serde::Serialize;

use rayon::prelude::*;

use super::{constancy_test, Constancy, Region};
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WalkerClass {
    /// `f_yy` constant: symmetric, outside the KV analysis.
    Symmetric,
    /// `f_yyy` never zero, so KV 1-curvature homogeneous, but the constant
    /// 2-invariants match no KV 2 normal form.
    #[serde(rename = "KV1_Generic")]
    Kv1Generic,
    #[serde(rename = "KV1_InverseSquare")]
    Kv1InverseSquare,
    #[serde(rename = "NotKV1")]
    NotKv1,
    #[serde(rename = "KV2_ExpHomogeneous")]
    Kv2ExpHomogeneous,
    #[serde(rename = "KV2_LogHomothety")]
    Kv2LogHomothety,
    #[serde(rename = "KV2_PowerHomothety")]
    Kv2PowerHomothety,
    /// KV 1 (from `f_yyy ≠ 0`) but some 2-invariant varies.
    #[serde(rename = "NotKV2")]
    NotKv2,
    Flat,
}

impl WalkerClass {
    pub fn label(self) -> &'static str {
        match self {
            WalkerClass::Symmetric => "Symmetric",
            WalkerClass::Kv1Generic => "KV1_Generic",
            WalkerClass::Kv1InverseSquare => "KV1_InverseSquare",
            WalkerClass::NotKv1 => "NotKV1",
            WalkerClass::Kv2ExpHomogeneous => "KV2_ExpHomogeneous",
            WalkerClass::Kv2LogHomothety => "KV2_LogHomothety",
            WalkerClass::Kv2PowerHomothety => "KV2_PowerHomothety",
            WalkerClass::NotKv2 => "NotKV2",
            WalkerClass::Flat => "Flat",
        }
    }

    /// KV 1-curvature homogeneous on the region.
    pub fn is_kv1(self) -> bool {
        !matches!(self, WalkerClass::NotKv1)
    }

    /// KV 2-curvature homogeneous on the region.
    pub fn is_kv2(self) -> bool {
        matches!(
            self,
            WalkerClass::Symmetric
                | WalkerClass::Flat
                | WalkerClass::Kv1InverseSquare
                | WalkerClass::Kv2ExpHomogeneous
                | WalkerClass::Kv2LogHomothety
                | WalkerClass::Kv2PowerHomothety
        )
    }
}

/// Fitted constants; only those meaningful for the class are set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassConstants {
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub c11: Option<f64>,
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub field: String,
    pub result: Constancy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkerClassification {
    pub class: WalkerClass,
    pub constants: ClassConstants,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

impl WalkerClassification {
    pub fn label(&self) -> &'static str {
        self.class.label()
    }

    pub fn evidence(&self, field: &str) -> Option<&Constancy> {
        self.evidence.iter().find(|e| e.field == field).map(|e| &e.result)
    }
}

/// `∂_x^i ∂_y^j f` for the derivatives the classifier reads.
#[derive(Debug, Clone, Copy)]
struct Derivs {
    f: f64,
    fy: f64,
    fyy: f64,
    fyyy: f64,
    fyyyy: f64,
    fxyy: f64,
    fxyyy: f64,
    fxxyy: f64,
}

fn derivs(f: &Expr, params: &Params, x: f64, y: f64) -> Result<Derivs> {
    let j = f.lift(&[x, y, 0.0], params, 4)?;
    let d = |nx: u8, ny: u8| j.derivative(&[nx, ny, 0]);
    let out = Derivs {
        f: d(0, 0),
        fy: d(0, 1),
        fyy: d(0, 2),
        fyyy: d(0, 3),
        fyyyy: d(0, 4),
        fxyy: d(1, 2),
        fxyyy: d(1, 3),
        fxxyy: d(2, 2),
    };
    let all = [out.f, out.fy, out.fyy, out.fyyy, out.fyyyy, out.fxyy, out.fxyyy, out.fxxyy];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { point: vec![x, y, 0.0] });
    }
    Ok(out)
}

struct Grid {
    points: Vec<Vec<f64>>,
    d: Vec<Derivs>,
}

impl Grid {
    fn field(&self, g: impl Fn(&Derivs) -> f64) -> Vec<(Vec<f64>, f64)> {
        self.points.iter().cloned().zip(self.d.iter().map(g)).collect()
    }
}

/// Sign pattern of a sampled field: identically zero, one strict sign, or neither.
#[derive(Debug, PartialEq)]
enum SignPattern {
    Zero,
    Definite(f64),
    Mixed,
}

fn sign_pattern(values: impl Iterator<Item = f64> + Clone, scale: f64) -> SignPattern {
    let tiny = 1e-9 * scale.max(f64::MIN_POSITIVE);
    if values.clone().all(|v| v.abs() <= tiny) {
        return SignPattern::Zero;
    }
    if values.clone().all(|v| v > tiny) {
        return SignPattern::Definite(1.0);
    }
    if values.clone().all(|v| v < -tiny) {
        return SignPattern::Definite(-1.0);
    }
    SignPattern::Mixed
}

/// Classify the Walker manifold of `f` by testing the invariants of the
/// KV normal form for constancy on `region`.
pub fn classify_walker_kv(f: &Expr, params: &Params, region: &Region, tol: f64) -> Result<WalkerClassification> {
    if f.depends_on(2) {
        return Err(Error::InvalidArgument("f must not depend on xt".into()));
    }
    let nodes = region.grid();
    let d: Vec<Derivs> = nodes
        .par_iter()
        .map(|&[x, y]| derivs(f, params, x, y))
        .collect::<Result<_>>()?;
    let grid = Grid {
        points: nodes.iter().map(|p| p.to_vec()).collect(),
        d,
    };
    let mut evidence = Vec::new();
    let mut notes = Vec::new();
    let mut constants = ClassConstants::default();
    let record = |name: &str, values: Vec<(Vec<f64>, f64)>, evidence: &mut Vec<Evidence>| -> Result<Constancy> {
        let c = constancy_test(&values, tol)?;
        evidence.push(Evidence {
            field: name.into(),
            result: c.clone(),
        });
        Ok(c)
    };

    let scale = grid.d.iter().map(|d| d.fyy.abs()).fold(0.0, f64::max);
    match sign_pattern(grid.d.iter().map(|d| d.fyy), scale.max(1.0)) {
        SignPattern::Zero => {
            record("f_yy", grid.field(|d| d.fyy), &mut evidence)?;
            return Ok(WalkerClassification {
                class: WalkerClass::Flat,
                constants,
                evidence,
                notes: vec!["f_yy vanishes identically: the metric is flat".into()],
            });
        }
        SignPattern::Mixed => {
            return Err(Error::Classification(
                "f_yy vanishes or changes sign on the region".into(),
            ))
        }
        SignPattern::Definite(_) => {}
    }
    let fyy = record("f_yy", grid.field(|d| d.fyy), &mut evidence)?;
    if let Some(v) = fyy.value() {
        constants.a = Some(v / 2.0);
        notes.push("f_yy is constant: symmetric space, outside the KV classification".into());
        return Ok(WalkerClassification {
            class: WalkerClass::Symmetric,
            constants,
            evidence,
            notes,
        });
    }

    match sign_pattern(grid.d.iter().map(|d| d.fyyy), scale) {
        SignPattern::Mixed => Err(Error::Classification(
            "f_yyy vanishes somewhere on the region without vanishing identically".into(),
        )),
        SignPattern::Zero => {
            // f_yy = α(x); KV 1 iff α³/α_x² is constant.
            if !matches!(sign_pattern(grid.d.iter().map(|d| d.fxyy), scale), SignPattern::Definite(_)) {
                return Err(Error::Classification("alpha_x vanishes on the region".into()));
            }
            let ratio = record(
                "alpha^3/alpha_x^2",
                grid.field(|d| d.fyy.powi(3) / (d.fxyy * d.fxyy)),
                &mut evidence,
            )?;
            let Some(r) = ratio.value() else {
                return Ok(WalkerClassification {
                    class: WalkerClass::NotKv1,
                    constants,
                    evidence,
                    notes,
                });
            };
            // α = 2a(x - x0)^{-2}: α³/α_x² = a/2 and x0 = x + 2α/α_x.
            constants.a = Some(2.0 * r);
            let x0 = record(
                "x0",
                grid.points
                    .iter()
                    .cloned()
                    .zip(grid.points.iter().zip(&grid.d).map(|(p, d)| p[0] + 2.0 * d.fyy / d.fxyy))
                    .collect(),
                &mut evidence,
            )?;
            constants.x0 = x0.value();
            if x0.value().is_none() {
                notes.push("alpha^3/alpha_x^2 is constant but x0 drifts".into());
            }
            Ok(WalkerClassification {
                class: WalkerClass::Kv1InverseSquare,
                constants,
                evidence,
                notes,
            })
        }
        SignPattern::Definite(_) => {
            let c11 = record(
                "c11",
                grid.field(|d| d.fyy * d.fyyyy / (d.fyyy * d.fyyy)),
                &mut evidence,
            )?;
            // Frame quantities of the normal form.
            let frame = |d: &Derivs| {
                let lambda = d.fyyy / d.fyy;
                let a11 = lambda.abs() / d.fyy.abs().sqrt();
                let a12 = -d.fxyy / d.fyyy;
                (lambda, a11, a12)
            };
            let c12 = record(
                "c12",
                grid.field(|d| {
                    let (lambda, a11, a12) = frame(d);
                    d.fyy.signum() * a11.powi(3) * (d.fxyyy + a12 * d.fyyyy) / lambda.powi(4)
                }),
                &mut evidence,
            )?;
            let c_first = record(
                "c_first",
                grid.field(|d| {
                    let (lambda, a11, a12) = frame(d);
                    a11.powi(4) * (d.fxxyy + 2.0 * a12 * d.fxyyy + a12 * a12 * d.fyyyy - d.fy * d.fyyy)
                        / lambda.powi(4)
                }),
                &mut evidence,
            )?;
            constants.c11 = c11.value();
            let (Some(c11v), Some(c12v), Some(cfv)) = (c11.value(), c12.value(), c_first.value()) else {
                notes.push("a 2-model invariant varies over the region".into());
                return Ok(WalkerClassification {
                    class: WalkerClass::NotKv2,
                    constants,
                    evidence,
                    notes,
                });
            };
            let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
            if !close(c12v, 0.0) {
                notes.push(format!("c12 = {c12v} is constant but nonzero; no KV 2 normal form has this"));
                return Ok(WalkerClassification {
                    class: WalkerClass::Kv1Generic,
                    constants,
                    evidence,
                    notes,
                });
            }
            let (class, expected_first) = if close(c11v, 1.0) {
                let lambda = record("lambda", grid.field(|d| d.fyyy / d.fyy), &mut evidence)?;
                match lambda.value() {
                    Some(a) => {
                        constants.a = Some(a);
                        (WalkerClass::Kv2ExpHomogeneous, -1.0)
                    }
                    None => {
                        notes.push("c11 = 1 but f_yyy/f_yy is not constant (alpha_x != 0)".into());
                        (WalkerClass::Kv1Generic, f64::NAN)
                    }
                }
            } else if close(c11v, 1.5) {
                constants.eps = Some(0.0);
                constants.c = Some(-2.0);
                (WalkerClass::Kv2LogHomothety, -2.0)
            } else {
                let eps = (2.0 * c11v - 3.0) / (c11v - 1.0);
                constants.eps = Some(eps);
                constants.c = Some(eps - 2.0);
                (WalkerClass::Kv2PowerHomothety, -(eps - 2.0) / (eps - 1.0))
            };
            if class != WalkerClass::Kv1Generic && !close(cfv, expected_first) {
                notes.push(format!(
                    "c_first = {cfv} but the normal form requires {expected_first}; the u(x) y term does not vanish"
                ));
                return Ok(WalkerClassification {
                    class: WalkerClass::Kv1Generic,
                    constants,
                    evidence,
                    notes,
                });
            }
            Ok(WalkerClassification {
                class,
                constants,
                evidence,
                notes,
            })
        }
    }
}
