//! Curvature models `(V, ε, A⁰, ..., A^k)` at a point and what can be decided
//! about them: homothety equivalence, the Walker canonical frame, and the
//! stabilizer filtration.

mod equivalence;
mod stabilizer;
mod walker_frame;

pub use equivalence::{kv_equivalent, EquivalenceConfig, EquivalenceVerdict, Mode};
pub use stabilizer::{ho_basis, ho_action, stabilizer_filtration, StabilizerFiltration};
pub use walker_frame::{walker_canonical_frame, WalkerBranch, WalkerFrameConstants};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::curvature::evaluate;
use crate::error::{Error, Result};
use crate::expr::Params;
use crate::metric::{MetricField, Signature};
use crate::tensor::Tensor;

/// Inner product `ε` and curvature arrays; a level of rank `r` is `∇^{r-4}R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureModel {
    pub epsilon: Tensor,
    pub signature: Signature,
    pub levels: Vec<Tensor>,
}

/// Derivative order carried by a level tensor.
pub fn level_order(t: &Tensor) -> usize {
    t.rank() - 4
}

impl CurvatureModel {
    pub fn new(epsilon: DMatrix<f64>, levels: Vec<Tensor>) -> Result<Self> {
        let m = epsilon.nrows();
        if epsilon.ncols() != m {
            return Err(Error::DimensionMismatch("inner product must be square".into()));
        }
        let scale = epsilon.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if (&epsilon - epsilon.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::InvalidArgument("inner product is not symmetric".into()));
        }
        let signature = Signature::of_matrix(&epsilon).ok_or(Error::DegenerateMetric {
            det: epsilon.determinant(),
        })?;
        let mut last = None;
        for t in &levels {
            if t.dim() != m || t.rank() < 4 {
                return Err(Error::DimensionMismatch(format!(
                    "level of rank {} over dimension {} in a {m}-dimensional model",
                    t.rank(),
                    t.dim()
                )));
            }
            if last.is_some_and(|r| r >= t.rank()) {
                return Err(Error::InvalidArgument("model levels must have increasing rank".into()));
            }
            last = Some(t.rank());
        }
        Ok(Self {
            epsilon: Tensor::from_matrix(&epsilon),
            signature,
            levels,
        })
    }

    pub fn dim(&self) -> usize {
        self.epsilon.dim()
    }

    pub fn epsilon_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, self.epsilon.data())
    }

    pub fn orders(&self) -> Vec<usize> {
        self.levels.iter().map(level_order).collect()
    }

    /// Highest derivative order present.
    pub fn k(&self) -> usize {
        self.levels.last().map_or(0, level_order)
    }

    pub fn level(&self, ell: usize) -> Option<&Tensor> {
        self.levels.iter().find(|t| level_order(t) == ell)
    }

    /// The model keeping only `∇^ℓR`.
    pub fn single_level(&self, ell: usize) -> Option<CurvatureModel> {
        self.level(ell).map(|t| CurvatureModel {
            epsilon: self.epsilon.clone(),
            signature: self.signature,
            levels: vec![t.clone()],
        })
    }

    /// The model keeping levels of order at most `k`.
    pub fn truncate(&self, k: usize) -> CurvatureModel {
        CurvatureModel {
            epsilon: self.epsilon.clone(),
            signature: self.signature,
            levels: self.levels.iter().filter(|t| level_order(t) <= k).cloned().collect(),
        }
    }

    /// Express the model in a new basis whose vectors are the columns of `phi`.
    pub fn pullback(&self, phi: &DMatrix<f64>) -> CurvatureModel {
        let eps = phi.transpose() * self.epsilon_matrix() * phi;
        CurvatureModel {
            epsilon: Tensor::from_matrix(&eps),
            signature: self.signature,
            levels: self.levels.iter().map(|t| t.pullback(phi)).collect(),
        }
    }

    /// `max_ℓ |A^ℓ|^{1/(ℓ+2)}`, a length⁻¹ scale; zero for a flat model.
    pub fn natural_scale(&self) -> f64 {
        self.levels
            .iter()
            .map(|t| t.max_abs().powf(1.0 / (level_order(t) as f64 + 2.0)))
            .fold(0.0, f64::max)
    }

    /// Whether the level is negligible relative to the model's own scale.
    pub fn level_is_zero(&self, t: &Tensor, zero_tol: f64) -> bool {
        let s = self.natural_scale();
        t.max_abs() <= zero_tol * s.powi(level_order(t) as i32 + 2)
    }
}

/// `ε = g(P)` in the coordinate frame and `A^ℓ = ∇^ℓR(P)` for `ℓ = 0..=k`.
pub fn extract_model(g: &MetricField, point: &[f64], params: &Params, k: usize) -> Result<CurvatureModel> {
    let data = evaluate(g, point, params, k)?;
    Ok(CurvatureModel {
        epsilon: data.metric,
        signature: g.signature(),
        levels: data.chain,
    })
}

/// `A^ℓ ↦ λ^{-ℓ-2} A^ℓ`, `ε` unchanged.
pub fn homothety_rescale(model: &CurvatureModel, lambda: f64) -> Result<CurvatureModel> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("homothety scale must be finite and nonzero, got {lambda}")));
    }
    Ok(CurvatureModel {
        epsilon: model.epsilon.clone(),
        signature: model.signature,
        levels: model
            .levels
            .iter()
            .map(|t| t.scaled(lambda.powi(-(level_order(t) as i32) - 2)))
            .collect(),
    })
}

/// Residuals of a claimed witness: `Φᵀ ε₂ Φ = ε₁` and `Φ*A₂^ℓ = λ^{-ℓ-2} A₁^ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub metric_residual: f64,
    /// Relative residual per level.
    pub level_residuals: Vec<f64>,
    pub ok: bool,
}

impl WitnessCheck {
    pub fn max_residual(&self) -> f64 {
        self.level_residuals.iter().copied().fold(self.metric_residual, f64::max)
    }
}

/// Check a witness by direct pullback, independent of how it was found.
pub fn verify_witness(
    m1: &CurvatureModel,
    m2: &CurvatureModel,
    phi: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
) -> Result<WitnessCheck> {
    if m1.dim() != m2.dim() || phi.nrows() != m1.dim() || phi.ncols() != m1.dim() {
        return Err(Error::DimensionMismatch("witness and models disagree in dimension".into()));
    }
    if m1.orders() != m2.orders() {
        return Err(Error::DimensionMismatch("models carry different derivative levels".into()));
    }
    let e1 = m1.epsilon_matrix();
    let e2 = phi.transpose() * m2.epsilon_matrix() * phi;
    let metric_residual = (&e2 - &e1).amax() / e1.amax();
    let target = homothety_rescale(m1, lambda)?;
    let level_residuals: Vec<f64> = m2
        .levels
        .iter()
        .zip(&target.levels)
        .map(|(a2, want)| {
            let got = a2.pullback(phi);
            let scale = want.max_abs().max(got.max_abs());
            if scale == 0.0 {
                0.0
            } else {
                got.max_diff(want) / scale
            }
        })
        .collect();
    let ok = metric_residual <= tol && level_residuals.iter().all(|r| *r <= tol);
    Ok(WitnessCheck {
        metric_residual,
        level_residuals,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{family, Base, warped_product};

    #[test]
    fn rescale_examples() {
        let mut a0 = Tensor::zeros(2, 4);
        a0.set(&[0, 1, 1, 0], 1.0);
        let mut a1 = Tensor::zeros(2, 5);
        a1.set(&[0, 1, 1, 0, 0], 1.0);
        let m = CurvatureModel::new(DMatrix::identity(2, 2), vec![a0, a1]).unwrap();
        let r = homothety_rescale(&m, 2.0).unwrap();
        assert_eq!(r.levels[0].get(&[0, 1, 1, 0]), 0.25);
        assert_eq!(r.levels[1].get(&[0, 1, 1, 0, 0]), 0.125);
        assert_eq!(homothety_rescale(&m, 1.0).unwrap(), m);
        assert!(homothety_rescale(&m, 0.0).is_err());
        let twice = homothety_rescale(&homothety_rescale(&m, 0.5).unwrap(), 4.0).unwrap();
        assert_eq!(twice, r);
    }

    #[test]
    fn extract_examples() {
        let fam = family("walker:half_ex_y2", &Params::new()).unwrap();
        let m = extract_model(&fam.metric, &[0.0, 1.0, 0.0], &Params::new(), 0).unwrap();
        assert_eq!(m.signature, Signature::new(1, 2));
        assert!((m.levels[0].get(&[0, 1, 1, 0]) - 1.0).abs() < 1e-13);
        let w = warped_product(2.0, Base::Flat, 3).unwrap();
        let m = extract_model(&w, &[0.0, 0.0, 0.0], &Params::new(), 0).unwrap();
        assert!((m.levels[0].get(&[1, 2, 2, 1]) + 1.0).abs() < 1e-13);
        let flat = warped_product(0.0, Base::Flat, 3).unwrap();
        let m = extract_model(&flat, &[0.3, 0.1, 0.2], &Params::new(), 3).unwrap();
        assert_eq!(m.k(), 3);
        assert!(m.levels.iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn model_validation() {
        assert!(CurvatureModel::new(DMatrix::zeros(2, 2), vec![]).is_err());
        let bad = vec![Tensor::zeros(2, 5), Tensor::zeros(2, 4)];
        assert!(CurvatureModel::new(DMatrix::identity(2, 2), bad).is_err());
    }
}
