use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Region;
use crate::curvature::evaluate;
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::families::Family;
use crate::metric::MetricField;
use crate::models::{extract_model, kv_equivalent, CurvatureModel, EquivalenceConfig, EquivalenceVerdict, Mode};

pub const MIN_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableMode {
    /// A separate isometry per level.
    Plain,
    /// A separate isometry and scale per level.
    Kv,
}

impl VariableMode {
    fn equivalence_mode(self) -> Mode {
        match self {
            VariableMode::Plain => Mode::Isometry,
            VariableMode::Kv => Mode::Homothety,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelVerdict {
    pub ell: usize,
    pub status: LevelStatus,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableCHReport {
    pub mode: VariableMode,
    pub k: usize,
    /// `walker_profile` for `f_yyy ≡ 0`, otherwise `model_comparison`.
    pub method: String,
    pub samples: usize,
    pub levels: Vec<LevelVerdict>,
    /// Largest `ℓ` such that every level up to `ℓ` holds.
    pub max_ell: Option<usize>,
}

impl VariableCHReport {
    pub fn holds_through(&self, ell: usize) -> Option<bool> {
        let mut out = Some(true);
        for v in self.levels.iter().take(ell + 1) {
            match v.status {
                LevelStatus::Fails => return Some(false),
                LevelStatus::Undetermined => out = None,
                LevelStatus::Holds => {}
            }
        }
        out
    }
}

fn max_ell(levels: &[LevelVerdict]) -> Option<usize> {
    levels
        .iter()
        .take_while(|v| v.status == LevelStatus::Holds)
        .last()
        .map(|v| v.ell)
}

fn fyyy_vanishes(f: &Expr, params: &Params, points: &[Vec<f64>]) -> Result<bool> {
    let pairs: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let j = f.lift(p, params, 3)?;
            Ok((j.derivative(&[0, 2, 0]), j.derivative(&[0, 3, 0])))
        })
        .collect::<Result<_>>()?;
    let scale = pairs.iter().map(|(a, _)| a.abs()).fold(1.0, f64::max);
    Ok(pairs.iter().all(|(_, b)| b.abs() <= 1e-9 * scale))
}

/// For `f_yyy ≡ 0` the level `∇^ℓR` is carried by `∇^ℓR(x,y,y,x;x,...,x)`, and a
/// null boost normalizes it iff it has one strict sign on the region.
fn profile_levels(g: &MetricField, params: &Params, points: &[Vec<f64>], k: usize) -> Result<Vec<LevelVerdict>> {
    let slots: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let data = evaluate(g, p, params, k)?;
            Ok(data
                .chain
                .iter()
                .enumerate()
                .map(|(ell, t)| {
                    let mut idx = vec![0, 1, 1, 0];
                    idx.extend(std::iter::repeat_n(0, ell));
                    t.get(&idx)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let scale = slots.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok((0..=k)
        .map(|ell| {
            let vals: Vec<f64> = slots.iter().map(|s| s[ell]).collect();
            let tiny = 1e-12 * scale;
            let (imin, _) = vals
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("nonempty region");
            let tail = if ell == 0 { String::new() } else { format!(";{}", vec!["x"; ell].join(",")) };
            let label = format!("nabla^{ell} R(x,y,y,x{tail})");
            if vals.iter().all(|v| v.abs() <= tiny) {
                LevelVerdict {
                    ell,
                    status: LevelStatus::Holds,
                    witness: None,
                    detail: format!("{label} vanishes on the region"),
                }
            } else if vals.iter().all(|v| *v > tiny) || vals.iter().all(|v| *v < -tiny) {
                LevelVerdict {
                    ell,
                    status: LevelStatus::Holds,
                    witness: None,
                    detail: format!("{label} has constant sign; smallest |value| {:.3e}", vals[imin].abs()),
                }
            } else {
                LevelVerdict {
                    ell,
                    status: LevelStatus::Fails,
                    witness: Some(points[imin].clone()),
                    detail: format!("{label} vanishes or changes sign; value {:.3e} at the witness", vals[imin]),
                }
            }
        })
        .collect())
}

fn compare_at(base: &CurvatureModel, other: &CurvatureModel, ell: usize, mode: Mode, cfg: &EquivalenceConfig) -> Result<EquivalenceVerdict> {
    // A witness for the truncated model is also one for the single level.
    let v = kv_equivalent(&base.truncate(ell), &other.truncate(ell), mode, cfg)?;
    if v.is_equivalent() {
        return Ok(v);
    }
    let (Some(a), Some(b)) = (base.single_level(ell), other.single_level(ell)) else {
        return Err(Error::InvalidArgument(format!("model has no level {ell}")));
    };
    kv_equivalent(&a, &b, mode, cfg)
}

fn comparison_levels(
    g: &MetricField,
    params: &Params,
    points: &[Vec<f64>],
    k: usize,
    mode: VariableMode,
    cfg: &EquivalenceConfig,
) -> Result<Vec<LevelVerdict>> {
    let models: Vec<CurvatureModel> = points
        .par_iter()
        .map(|p| extract_model(g, p, params, k))
        .collect::<Result<_>>()?;
    let base_idx = points.len() / 2;
    let base = &models[base_idx];
    let eq_mode = mode.equivalence_mode();
    (0..=k)
        .map(|ell| {
            let verdicts: Vec<EquivalenceVerdict> = models
                .par_iter()
                .map(|m| compare_at(base, m, ell, eq_mode, cfg))
                .collect::<Result<_>>()?;
            let failed = verdicts.iter().position(|v| v.is_not_equivalent());
            let unknown = verdicts.iter().position(|v| !v.is_equivalent());
            Ok(match (failed, unknown) {
                (Some(i), _) => LevelVerdict {
                    ell,
                    status: LevelStatus::Fails,
                    witness: Some(points[i].clone()),
                    detail: match &verdicts[i] {
                        EquivalenceVerdict::NotEquivalent { invariant } => invariant.clone(),
                        _ => unreachable!(),
                    },
                },
                (None, Some(i)) => LevelVerdict {
                    ell,
                    status: LevelStatus::Undetermined,
                    witness: Some(points[i].clone()),
                    detail: match &verdicts[i] {
                        EquivalenceVerdict::Unknown { reason } => reason.clone(),
                        _ => unreachable!(),
                    },
                },
                (None, None) => LevelVerdict {
                    ell,
                    status: LevelStatus::Holds,
                    witness: None,
                    detail: format!("all {} samples match the base point", points.len()),
                },
            })
        })
        .collect()
}

/// Per-level verdicts of variable (KV) curvature homogeneity on `region`.
///
/// When `walker_f` is given and `f_yyy ≡ 0` on the region, the sign test on
/// `∇^ℓR(x,y,y,x;x,...,x)` decides each level; otherwise single-level models are
/// compared with the one at the middle grid node.
pub fn variable_kv_check(
    g: &MetricField,
    walker_f: Option<&Expr>,
    params: &Params,
    k: usize,
    region: &Region,
    mode: VariableMode,
    cfg: &EquivalenceConfig,
) -> Result<VariableCHReport> {
    if region.len() < MIN_POINTS {
        return Err(Error::InvalidArgument(format!(
            "variable curvature checks need at least {MIN_POINTS} sample points, got {}",
            region.len()
        )));
    }
    let points = region.points(g.dim());
    let profile = match walker_f {
        Some(f) => fyyy_vanishes(f, params, &points)?,
        None => false,
    };
    let (method, levels) = if profile {
        ("walker_profile", profile_levels(g, params, &points, k)?)
    } else {
        ("model_comparison", comparison_levels(g, params, &points, k, mode, cfg)?)
    };
    Ok(VariableCHReport {
        mode,
        k,
        method: method.into(),
        samples: points.len(),
        max_ell: max_ell(&levels),
        levels,
    })
}

/// The four homogeneity notions at order `k` for one family on one region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeRow {
    pub family: String,
    pub k: usize,
    /// `k`-curvature homogeneous.
    pub ch: Option<bool>,
    /// KV `k`-curvature homogeneous.
    pub kv: Option<bool>,
    /// Variable `k`-curvature homogeneous.
    pub var_ch: Option<bool>,
    /// Variable KV `k`-curvature homogeneous.
    pub var_kv: Option<bool>,
}

impl LatticeRow {
    /// Implications this row contradicts, if any.
    pub fn violations(&self) -> Vec<&'static str> {
        let pairs = [
            ("(1a) => (1b)", self.ch, self.kv),
            ("(1b) => (2b)", self.kv, self.var_kv),
            ("(1a) => (2a)", self.ch, self.var_ch),
            ("(2a) => (2b)", self.var_ch, self.var_kv),
        ];
        pairs
            .into_iter()
            .filter(|(_, a, b)| *a == Some(true) && *b == Some(false))
            .map(|(name, _, _)| name)
            .collect()
    }
}

fn static_check(models: &[CurvatureModel], mode: Mode, cfg: &EquivalenceConfig) -> Result<Option<bool>> {
    let base = &models[models.len() / 2];
    let verdicts: Vec<EquivalenceVerdict> = models
        .par_iter()
        .map(|m| kv_equivalent(base, m, mode, cfg))
        .collect::<Result<_>>()?;
    if verdicts.iter().any(|v| v.is_not_equivalent()) {
        Ok(Some(false))
    } else if verdicts.iter().all(|v| v.is_equivalent()) {
        Ok(Some(true))
    } else {
        Ok(None)
    }
}

pub fn lattice_row(fam: &Family, k: usize, region: &Region, cfg: &EquivalenceConfig) -> Result<LatticeRow> {
    let params = Params::new();
    let points = region.points(fam.dim());
    let models: Vec<CurvatureModel> = points
        .par_iter()
        .map(|p| extract_model(&fam.metric, p, &params, k))
        .collect::<Result<_>>()?;
    let ch = static_check(&models, Mode::Isometry, cfg)?;
    let kv = static_check(&models, Mode::Homothety, cfg)?;
    let var = |mode| variable_kv_check(&fam.metric, fam.walker_f(), &params, k, region, mode, cfg);
    Ok(LatticeRow {
        family: fam.name.clone(),
        k,
        ch,
        kv,
        var_ch: var(VariableMode::Plain)?.holds_through(k),
        var_kv: var(VariableMode::Kv)?.holds_through(k),
    })
}
