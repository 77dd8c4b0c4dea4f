use nalgebra::DMatrix;
use serde::Serialize;

use super::CurvatureModel;
use crate::error::{Error, Result};
use crate::expr::{Expr, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkerBranch {
    /// `f_yyy(P) ≠ 0`.
    Cubic,
    /// `f_yyy(P) = 0`, `f_xyy(P) ≠ 0`.
    Quadratic,
}

/// Normalized null frame at `P` and the constants read off in it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkerFrameConstants {
    pub branch: WalkerBranch,
    pub lambda: f64,
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a23: f64,
    pub a33: f64,
    /// Sign of `f_yy`, carried by `ξ₂`.
    pub sigma: f64,
    /// `ξ₁, ξ₂, ξ₃` in coordinates `(x, y, x̃)`, one per row.
    pub frame: Vec<Vec<f64>>,
    pub c1: f64,
    pub c2: f64,
    /// `f_yy f_yyyy / f_yyy²`; cubic branch only.
    pub c11: Option<f64>,
    pub c12: Option<f64>,
    /// `∇²R(ξ₁,ξ₂,ξ₂,ξ₁;ξ₁,ξ₁) / λ⁴`; cubic branch only.
    pub c_first: Option<f64>,
    /// `R(ξ₁,ξ₂,ξ₂,ξ₁)` evaluated from the model.
    pub r0: f64,
    /// `∇R(ξ₁,ξ₂,ξ₂,ξ₁;ξ₁)` and `∇R(ξ₁,ξ₂,ξ₂,ξ₁;ξ₂)` from the model, when it has `∇R`.
    pub r1: Option<[f64; 2]>,
    /// `sign(f_yy) ∇²R(ξ₁,ξ₂,ξ₂,ξ₁;ξ₂,ξ₂) / λ⁴` from the model, when it has `∇²R`.
    pub c11_from_model: Option<f64>,
}

impl WalkerFrameConstants {
    pub fn frame_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| self.frame[j][i])
    }
}

/// Partial derivatives `∂_x^i ∂_y^j f` at `P`.
struct FJets {
    jet: crate::expr::Jet,
}

impl FJets {
    fn d(&self, nx: u8, ny: u8) -> f64 {
        self.jet.derivative(&[nx, ny, 0])
    }
}

fn tiny(v: f64, scale: f64) -> bool {
    v.abs() <= 1e-12 * scale.max(1.0)
}

/// Build the frame of the Walker normal form and its constants.
///
/// `model` must be the curvature model of the Walker metric of `f` at `point`.
pub fn walker_canonical_frame(
    model: &CurvatureModel,
    f: &Expr,
    point: &[f64],
    params: &Params,
) -> Result<WalkerFrameConstants> {
    if point.len() != 3 || model.dim() != 3 {
        return Err(Error::DimensionMismatch("Walker frames live in dimension 3".into()));
    }
    let jet = f.lift(point, params, 4)?;
    let j = FJets { jet };
    let f0 = j.d(0, 0);
    let (fy, fyy, fyyy, fyyyy) = (j.d(0, 1), j.d(0, 2), j.d(0, 3), j.d(0, 4));
    let (fxyy, fxyyy, fxxyy) = (j.d(1, 2), j.d(1, 3), j.d(2, 2));
    let scale = j.jet.max_abs();
    if tiny(fyy, scale) {
        return Err(Error::WalkerFrame(format!("f_yy vanishes at {point:?}; the model is flat")));
    }
    let sigma = fyy.signum();
    let (branch, lambda, a11, a12) = if !tiny(fyyy, scale) {
        let lambda = fyyy / fyy;
        (WalkerBranch::Cubic, lambda, lambda.abs() / fyy.abs().sqrt(), -fxyy / fyyy)
    } else if !tiny(fxyy, scale) {
        (WalkerBranch::Quadratic, 1.0, 1.0 / fyy.abs().sqrt(), 0.0)
    } else {
        return Err(Error::WalkerFrame(format!(
            "f_yyy and f_xyy both vanish at {point:?}; no normalization applies"
        )));
    };
    let a13 = -a12 * a12 / 2.0;
    let a23 = -a12;
    let a33 = 1.0 / a11;
    let frame = vec![
        vec![a11, a11 * a12, a11 * (f0 + a13)],
        vec![0.0, sigma, sigma * a23],
        vec![0.0, 0.0, a33],
    ];
    let (c1, c2, c11, c12, c_first) = match branch {
        WalkerBranch::Cubic => {
            let l4 = lambda.powi(4);
            (
                0.0,
                lambda,
                Some(fyy * fyyyy / (fyyy * fyyy)),
                Some(sigma * a11.powi(3) * (fxyyy + a12 * fyyyy) / l4),
                Some(a11.powi(4) * (fxxyy + 2.0 * a12 * fxyyy + a12 * a12 * fyyyy - fy * fyyy) / l4),
            )
        }
        WalkerBranch::Quadratic => (fxyy / fyy.abs().powf(1.5), 0.0, None, None, None),
    };

    let mut out = WalkerFrameConstants {
        branch,
        lambda,
        a11,
        a12,
        a13,
        a23,
        a33,
        sigma,
        frame,
        c1,
        c2,
        c11,
        c12,
        c_first,
        r0: 0.0,
        r1: None,
        c11_from_model: None,
    };
    let adapted = model.pullback(&out.frame_matrix());
    let a0 = adapted
        .level(0)
        .ok_or_else(|| Error::InvalidArgument("model carries no curvature level".into()))?;
    out.r0 = a0.get(&[0, 1, 1, 0]);
    out.r1 = adapted
        .level(1)
        .map(|t| [t.get(&[0, 1, 1, 0, 0]), t.get(&[0, 1, 1, 0, 1])]);
    if branch == WalkerBranch::Cubic {
        out.c11_from_model = adapted
            .level(2)
            .map(|t| sigma * t.get(&[0, 1, 1, 0, 1, 1]) / lambda.powi(4));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{parse_walker_f, walker};
    use crate::models::extract_model;

    fn constants(text: &str, params: &[(&str, f64)], point: [f64; 3]) -> WalkerFrameConstants {
        let p: Params = params.iter().map(|(a, b)| (a.to_string(), *b)).collect();
        let f = parse_walker_f(text, params.iter().map(|(a, _)| *a)).unwrap().bind(&p);
        let g = walker(f.clone()).unwrap();
        let m = extract_model(&g, &point, &Params::new(), 2).unwrap();
        walker_canonical_frame(&m, &f, &point, &Params::new()).unwrap()
    }

    fn assert_frame_normalized(c: &WalkerFrameConstants) {
        let [r1_1, r1_2] = c.r1.unwrap();
        let l3 = c.lambda.powi(3);
        assert!(r1_1.abs() < 1e-9 * l3.abs().max(1.0), "{c:?}");
        assert!((r1_2 - l3).abs() < 1e-9 * l3.abs().max(1.0), "{c:?}");
        assert!((c.r0 - c.sigma * c.lambda * c.lambda).abs() < 1e-9 * c.lambda.powi(2));
        let diff = (c.c11.unwrap() - c.c11_from_model.unwrap()).abs();
        assert!(diff < 1e-10, "{c:?}");
    }

    #[test]
    fn exponential() {
        let c = constants("exp(a*y)", &[("a", 2.0)], [0.3, -0.4, 1.0]);
        assert_eq!(c.branch, WalkerBranch::Cubic);
        assert!((c.lambda - 2.0).abs() < 1e-12);
        assert!(c.a12.abs() < 1e-12);
        assert!((c.c11.unwrap() - 1.0).abs() < 1e-12);
        assert_frame_normalized(&c);
    }

    #[test]
    fn logarithm() {
        let c = constants("ln(y)", &[], [0.0, 2.0, 0.0]);
        assert!((c.lambda + 1.0).abs() < 1e-12);
        assert!((c.c11.unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(c.sigma, -1.0);
        assert_frame_normalized(&c);
    }

    #[test]
    fn power() {
        let c = constants("y^4", &[], [0.0, 1.0, 0.0]);
        assert!((c.lambda - 2.0).abs() < 1e-12);
        assert!((c.c11.unwrap() - 0.5).abs() < 1e-12);
        assert_frame_normalized(&c);
        let c = constants("y^eps", &[("eps", 2.5)], [0.7, 1.3, 0.0]);
        assert!((c.c11.unwrap() + 1.0).abs() < 1e-12);
        assert_frame_normalized(&c);
    }

    #[test]
    fn mixed_dependence() {
        let c = constants("exp(y + x*y) + x^2*y^3", &[], [0.2, 0.5, 0.0]);
        assert!(c.a12 != 0.0);
        assert_frame_normalized(&c);
        assert!(c.frame_matrix().determinant().abs() > 0.0);
    }

    #[test]
    fn frame_is_null() {
        let c = constants("exp(y + x*y)", &[], [0.2, 0.5, 0.0]);
        let f0 = (0.5f64 + 0.1).exp();
        let g = DMatrix::from_row_slice(3, 3, &[-2.0 * f0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let e = c.frame_matrix();
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((e.transpose() * g * e - want).amax() < 1e-12);
    }

    #[test]
    fn quadratic_branch() {
        let c = constants("0.5*exp(x)*y^2", &[], [0.0, 1.0, 0.0]);
        assert_eq!(c.branch, WalkerBranch::Quadratic);
        assert!((c.c1 - 1.0).abs() < 1e-12);
        let [r1_1, r1_2] = c.r1.unwrap();
        assert!((r1_1 - c.c1).abs() < 1e-10 && r1_2.abs() < 1e-10, "{c:?}");
        assert!(c.c11.is_none());
    }

    #[test]
    fn degenerate_points() {
        let f = parse_walker_f("y^3", std::iter::empty::<&str>()).unwrap();
        let g = walker(f.clone()).unwrap();
        let m = extract_model(&g, &[0.0, 1.0, 0.0], &Params::new(), 1).unwrap();
        assert!(walker_canonical_frame(&m, &f, &[0.0, 0.0, 0.0], &Params::new()).is_err());
        let f = parse_walker_f("3*y^2", std::iter::empty::<&str>()).unwrap();
        assert!(walker_canonical_frame(&m, &f, &[0.0, 1.0, 0.0], &Params::new()).is_err());
    }
}
