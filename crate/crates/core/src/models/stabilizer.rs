use nalgebra::DMatrix;
use serde::Serialize;

use super::CurvatureModel;
use crate::tensor::Tensor;

/// Slot carrying the raised index of the operator form `𝔯(x, y)z`.
const RAISED_SLOT: usize = 3;
const KERNEL_TOL: f64 = 1e-8;
/// Levels below this fraction of the model's natural scale are treated as zero.
const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizerFiltration {
    /// `½m(m-1) + 1`.
    pub ambient: usize,
    /// `dims[s]` is the dimension of the stabilizer of `∇⁰R, ..., ∇^sR`.
    pub dims: Vec<usize>,
    /// First `s` with `dims[s+1] == dims[s]`.
    pub singer: Option<usize>,
    /// `bases[s]`: a basis of the stabilizer at level `s`, each element as matrix rows.
    pub bases: Vec<Vec<Vec<Vec<f64>>>>,
}

/// `ε⁻¹(E_ij - E_ji)` for `i < j`, then the identity.
pub fn ho_basis(epsilon: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let m = epsilon.nrows();
    let inv = epsilon.clone().try_inverse().expect("nondegenerate inner product");
    let mut out = Vec::with_capacity(m * (m - 1) / 2 + 1);
    for i in 0..m {
        for j in i + 1..m {
            let mut s = DMatrix::zeros(m, m);
            s[(i, j)] = 1.0;
            s[(j, i)] = -1.0;
            out.push(&inv * s);
        }
    }
    out.push(DMatrix::identity(m, m));
    out
}

/// Derivation action of `a` on the operator form of a level: the raised slot
/// transforms with `a`, every covariant slot with `-aᵀ`.
pub fn ho_action(a: &DMatrix<f64>, operator: &Tensor) -> Tensor {
    let mut out = operator.transform_slot(RAISED_SLOT, &a.transpose());
    for slot in (0..operator.rank()).filter(|&s| s != RAISED_SLOT) {
        let term = operator.transform_slot(slot, a);
        out = Tensor::from_vec(
            out.dim(),
            out.rank(),
            out.data().iter().zip(term.data()).map(|(x, y)| x - y).collect(),
        );
    }
    out
}

fn kernel(stack: &DMatrix<f64>) -> Vec<nalgebra::DVector<f64>> {
    let n = stack.ncols();
    let rows = stack.nrows().max(n);
    let padded = DMatrix::from_fn(rows, n, |i, j| if i < stack.nrows() { stack[(i, j)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= KERNEL_TOL * smax)
        .map(|i| v_t.row(i).transpose())
        .collect()
}

/// Dimensions of the decreasing stabilizer subalgebras of `𝔥𝔬` for every level.
pub fn stabilizer_filtration(model: &CurvatureModel) -> StabilizerFiltration {
    let eps = model.epsilon_matrix();
    let inv = eps.clone().try_inverse().expect("nondegenerate inner product");
    let basis = ho_basis(&eps);
    let ambient = basis.len();
    let mut stack = DMatrix::<f64>::zeros(0, ambient);
    let mut dims = Vec::new();
    let mut bases = Vec::new();
    for level in &model.levels {
        let operator = level.transform_slot(RAISED_SLOT, &inv);
        let scale = operator.max_abs();
        if !model.level_is_zero(level, ZERO_TOL) {
            let cols: Vec<Tensor> = basis.iter().map(|a| ho_action(a, &operator)).collect();
            let n = operator.len();
            let old = stack.nrows();
            stack = stack.resize_vertically(old + n, 0.0);
            for (j, c) in cols.iter().enumerate() {
                for (i, v) in c.data().iter().enumerate() {
                    stack[(old + i, j)] = v / scale;
                }
            }
        }
        let ker = if stack.nrows() == 0 {
            (0..ambient).map(|i| nalgebra::DVector::from_fn(ambient, |r, _| f64::from(r == i))).collect()
        } else {
            kernel(&stack)
        };
        dims.push(ker.len());
        bases.push(
            ker.iter()
                .map(|coef| {
                    let a = basis
                        .iter()
                        .zip(coef.iter())
                        .fold(DMatrix::zeros(eps.nrows(), eps.nrows()), |acc, (b, c)| acc + b * *c);
                    (0..a.nrows()).map(|r| a.row(r).iter().copied().collect()).collect()
                })
                .collect(),
        );
    }
    let singer = dims.windows(2).position(|w| w[1] == w[0]);
    StabilizerFiltration {
        ambient,
        dims,
        singer,
        bases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::families::{family, warped_product, Base};
    use crate::models::extract_model;

    #[test]
    fn basis_preserves_inner_product() {
        let eps = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -0.4]);
        for a in ho_basis(&eps).iter().take(3) {
            assert!((a.transpose() * &eps + &eps * a).amax() < 1e-14);
        }
    }

    #[test]
    fn identity_acts_with_weight() {
        let fam = family("warped:sphere", &Params::new()).unwrap();
        let m = extract_model(&fam.metric, &fam.default_point(), &Params::new(), 1).unwrap();
        let inv = m.epsilon_matrix().try_inverse().unwrap();
        for (ell, level) in m.levels.iter().enumerate() {
            let op = level.transform_slot(RAISED_SLOT, &inv);
            let acted = ho_action(&DMatrix::identity(3, 3), &op);
            assert!(acted.max_diff(&op.scaled(-(ell as f64) - 2.0)) < 1e-12);
        }
    }

    #[test]
    fn flat_model_is_fixed_by_everything() {
        let g = warped_product(0.0, Base::Flat, 3).unwrap();
        let m = extract_model(&g, &[0.0, 0.0, 0.0], &Params::new(), 2).unwrap();
        let f = stabilizer_filtration(&m);
        assert_eq!(f.dims, vec![4, 4, 4]);
        assert_eq!(f.singer, Some(0));
    }

    #[test]
    fn constant_curvature_and_walker() {
        // Sphere base with t = 0 is a product R x S², not constant curvature.
        let fam = family("warped:sphere", &[("t".to_string(), 0.0)].into()).unwrap();
        let m = extract_model(&fam.metric, &[0.0, 0.3, 0.2], &Params::new(), 1).unwrap();
        let f = stabilizer_filtration(&m);
        assert_eq!(f.dims, vec![1, 1]);
        let fam = family("walker:sym_ay2", &Params::new()).unwrap();
        let m = extract_model(&fam.metric, &[0.0, 1.0, 0.0], &Params::new(), 2).unwrap();
        let f = stabilizer_filtration(&m);
        assert_eq!(f.singer, Some(0));
        assert!(f.dims.windows(2).all(|w| w[1] == w[0]));
    }

    #[test]
    fn weakly_decreasing() {
        for name in ["warped:flat", "walker:exp_ay", "walker:half_ex_y2", "walker:pow_eps"] {
            let fam = family(name, &Params::new()).unwrap();
            let m = extract_model(&fam.metric, &fam.default_point(), &Params::new(), 2).unwrap();
            let f = stabilizer_filtration(&m);
            assert!(f.dims.windows(2).all(|w| w[1] <= w[0]), "{name}: {:?}", f.dims);
            assert!(f.dims[0] <= f.ambient);
            for (s, basis) in f.bases.iter().enumerate() {
                assert_eq!(basis.len(), f.dims[s]);
            }
        }
    }
}
