//! Christoffel symbols, the curvature tensor and its covariant derivatives,
//! computed with every component carried as a jet at the evaluation point.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Jet, Params};
use crate::metric::MetricField;
use crate::tensor::Tensor;

/// Covariant tensor whose components are jets at a common point.
#[derive(Debug, Clone)]
pub struct JetTensor {
    dim: usize,
    rank: usize,
    data: Vec<Jet>,
}

impl JetTensor {
    fn offset(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, index: &[usize]) -> &Jet {
        &self.data[self.offset(index)]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.data.first().map_or(0, Jet::order)
    }

    pub fn values(&self) -> Tensor {
        Tensor::from_vec(self.dim, self.rank, self.data.iter().map(Jet::value).collect())
    }

    /// Covariant derivative, new index appended last:
    /// `∇T[i.., v] = ∂_v T[i..] − Σ_s Γ_{v i_s}^z T[.., z, ..]`.
    pub fn covariant_derivative(&self, gamma: &JetTensor) -> Result<JetTensor> {
        let order = self.order();
        if order == 0 {
            return Err(Error::InvalidArgument(
                "jet order exhausted before the requested derivative level".into(),
            ));
        }
        let m = self.dim;
        let n = self.rank;
        let nvars = self.data[0].nvars();
        let partials: Vec<Vec<Jet>> = self
            .data
            .iter()
            .map(|t| (0..m).map(|v| t.partial(v)).collect())
            .collect();
        let gamma = gamma.truncated(order - 1);
        let body = self.truncated(order - 1);
        let total = m.pow(n as u32 + 1);
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for o in 0..total {
            let v = o % m;
            let base = o / m;
            let mut rest = base;
            for slot in (0..n).rev() {
                idx[slot] = rest % m;
                rest /= m;
            }
            let mut acc = partials[base][v].clone();
            let mut correction = Jet::zero(nvars, order - 1);
            for slot in 0..n {
                let stride = m.pow((n - 1 - slot) as u32);
                let i = idx[slot];
                let without = base - i * stride;
                for z in 0..m {
                    let g = gamma.get(&[v, i, z]);
                    if g.max_abs() == 0.0 {
                        continue;
                    }
                    correction.add_product(g, &body.data[without + z * stride]);
                }
            }
            acc = &acc - &correction;
            data.push(acc);
        }
        Ok(JetTensor {
            dim: m,
            rank: n + 1,
            data,
        })
    }

    fn truncated(&self, order: usize) -> JetTensor {
        JetTensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    /// Contract slot `slot` with a jet matrix `mat[(j, i)]`, as in [`Tensor::transform_slot`].
    fn transform_slot(&self, slot: usize, mat: &[Jet]) -> JetTensor {
        let m = self.dim;
        let stride = m.pow((self.rank - 1 - slot) as u32);
        let order = self.order().min(mat[0].order());
        let nvars = self.data[0].nvars();
        let data = (0..self.data.len())
            .map(|o| {
                let i = (o / stride) % m;
                let base = o - i * stride;
                let mut acc = Jet::zero(nvars, order);
                for j in 0..m {
                    acc.add_product(&mat[j * m + i], &self.data[base + j * stride]);
                }
                acc
            })
            .collect();
        JetTensor {
            dim: m,
            rank: self.rank,
            data,
        }
    }

    /// Full contraction of `self` with itself using the inverse metric jets.
    fn norm_sq(&self, inverse: &[Jet]) -> Jet {
        let raised = (0..self.rank).fold(self.clone(), |t, s| t.transform_slot(s, inverse));
        let order = raised.order();
        let nvars = self.data[0].nvars();
        let mut acc = Jet::zero(nvars, order);
        for (a, b) in raised.data.iter().zip(&self.data) {
            acc.add_product(a, b);
        }
        acc
    }
}

/// Metric, inverse metric and Christoffel symbols as jets.
struct MetricJets {
    dim: usize,
    g: Vec<Jet>,
    inverse: Vec<Jet>,
    g0: DMatrix<f64>,
    inverse0: DMatrix<f64>,
}

impl MetricJets {
    fn new(metric: &MetricField, point: &[f64], params: &Params, order: usize) -> Result<Self> {
        metric.check_point(point)?;
        let m = metric.dim();
        let mut g: Vec<Option<Jet>> = vec![None; m * m];
        for i in 0..m {
            for j in i..m {
                let jet = metric.component(i, j).lift(point, params, order)?;
                g[j * m + i] = Some(jet.clone());
                g[i * m + j] = Some(jet);
            }
        }
        let g: Vec<Jet> = g.into_iter().map(|j| j.expect("filled")).collect();
        let g0 = DMatrix::from_fn(m, m, |i, j| g[i * m + j].value());
        let inverse0 = metric.validate(&g0)?;
        // Neumann series: (G0 + H)^{-1} = Σ_n (−G0^{-1} H)^n G0^{-1}, H nilpotent to `order`.
        let nvars = m;
        let c = |v: f64| Jet::constant(v, nvars, order);
        let ginv0: Vec<Jet> = (0..m * m).map(|k| c(inverse0[(k / m, k % m)])).collect();
        let h: Vec<Jet> = g.iter().map(|j| j.add_scalar(-j.value())).collect();
        let matmul = |a: &[Jet], b: &[Jet]| -> Vec<Jet> {
            let mut out = vec![Jet::zero(nvars, order); m * m];
            for i in 0..m {
                for k in 0..m {
                    let aik = &a[i * m + k];
                    if aik.max_abs() == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        out[i * m + j].add_product(aik, &b[k * m + j]);
                    }
                }
            }
            out
        };
        let neg_ginv0: Vec<Jet> = ginv0.iter().map(|j| j.scale(-1.0)).collect();
        let step = matmul(&neg_ginv0, &h);
        let mut term = ginv0.clone();
        let mut inverse = ginv0;
        for _ in 0..order {
            term = matmul(&step, &term);
            for (acc, t) in inverse.iter_mut().zip(&term) {
                *acc = &*acc + t;
            }
        }
        Ok(Self {
            dim: m,
            g,
            inverse,
            g0,
            inverse0,
        })
    }

    fn order(&self) -> usize {
        self.g[0].order()
    }

    /// (first kind, second kind) with `[u][v][w]` layout: `Γ_{uvw}` and `Γ_{uv}^w`.
    fn christoffel(&self) -> (JetTensor, JetTensor) {
        let m = self.dim;
        let order = self.order();
        assert!(order >= 1, "Christoffel symbols need metric jets of order >= 1");
        let dg: Vec<Vec<Jet>> = (0..m)
            .map(|w| self.g.iter().map(|j| j.partial(w)).collect())
            .collect();
        let nvars = m;
        let mut lower = Vec::with_capacity(m * m * m);
        for u in 0..m {
            for v in 0..m {
                for w in 0..m {
                    let s = &(&dg[u][v * m + w] + &dg[v][u * m + w]) - &dg[w][u * m + v];
                    lower.push(s.scale(0.5));
                }
            }
        }
        let inverse: Vec<Jet> = self.inverse.iter().map(|j| j.truncate(order - 1)).collect();
        let mut upper = Vec::with_capacity(m * m * m);
        for u in 0..m {
            for v in 0..m {
                for w in 0..m {
                    let mut acc = Jet::zero(nvars, order - 1);
                    for z in 0..m {
                        acc.add_product(&inverse[w * m + z], &lower[(u * m + v) * m + z]);
                    }
                    upper.push(acc);
                }
            }
        }
        let mk = |data| JetTensor { dim: m, rank: 3, data };
        (mk(lower), mk(upper))
    }

    /// `R_{uvwz}` from Christoffel symbols of the second kind.
    fn riemann(&self, gamma: &JetTensor) -> JetTensor {
        let m = self.dim;
        let order = gamma.order();
        assert!(order >= 1, "curvature needs metric jets of order >= 2");
        let nvars = m;
        let dgamma: Vec<Vec<Jet>> = (0..m)
            .map(|a| gamma.data.iter().map(|j| j.partial(a)).collect())
            .collect();
        let gam = gamma.truncated(order - 1);
        let gi = |u: usize, v: usize, w: usize| &gam.data[(u * m + v) * m + w];
        let mut mixed = vec![Jet::zero(nvars, order - 1); m * m * m * m];
        for u in 0..m {
            for v in 0..m {
                for w in 0..m {
                    for z in 0..m {
                        let mut acc = &dgamma[u][(v * m + w) * m + z] - &dgamma[v][(u * m + w) * m + z];
                        for y in 0..m {
                            acc.add_product(gi(u, y, z), gi(v, w, y));
                            acc = &acc - &gi(v, y, z).mul_jet(gi(u, w, y));
                        }
                        mixed[((u * m + v) * m + w) * m + z] = acc;
                    }
                }
            }
        }
        let g: Vec<Jet> = self.g.iter().map(|j| j.truncate(order - 1)).collect();
        let mut data = Vec::with_capacity(m.pow(4));
        for uvw in 0..m * m * m {
            for z in 0..m {
                let mut acc = Jet::zero(nvars, order - 1);
                for y in 0..m {
                    acc.add_product(&mixed[uvw * m + y], &g[y * m + z]);
                }
                data.push(acc);
            }
        }
        JetTensor { dim: m, rank: 4, data }
    }
}

/// Everything the engine computes at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureData {
    pub point: Vec<f64>,
    pub metric: Tensor,
    pub inverse: Tensor,
    /// `Γ_{uvw}`, layout `[u][v][w]`.
    pub christoffel_lower: Tensor,
    /// `Γ_{uv}^w`, layout `[u][v][w]`.
    pub christoffel: Tensor,
    /// `chain[ℓ]` holds `∇^ℓ R` (rank `ℓ + 4`).
    pub chain: Vec<Tensor>,
}

impl CurvatureData {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, self.inverse.data())
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, self.metric.data())
    }

    pub fn invariants(&self) -> ScalarInvariants {
        invariants_from(&self.chain[0], &self.inverse_matrix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarInvariants {
    pub tau: f64,
    pub ricci_norm_sq: f64,
    pub riemann_norm_sq: f64,
}

/// Ricci tensor `ρ_{vw} = g^{uz} R_{uvwz}`.
pub fn ricci(r: &Tensor, inverse: &DMatrix<f64>) -> Tensor {
    let m = r.dim();
    let mut out = Tensor::zeros(m, 2);
    for v in 0..m {
        for w in 0..m {
            let mut acc = 0.0;
            for u in 0..m {
                for z in 0..m {
                    acc += inverse[(u, z)] * r.get(&[u, v, w, z]);
                }
            }
            out.set(&[v, w], acc);
        }
    }
    out
}

fn invariants_from(r: &Tensor, inverse: &DMatrix<f64>) -> ScalarInvariants {
    let rho = ricci(r, inverse);
    let m = r.dim();
    let mut tau = 0.0;
    for v in 0..m {
        for w in 0..m {
            tau += inverse[(v, w)] * rho.get(&[v, w]);
        }
    }
    ScalarInvariants {
        tau,
        ricci_norm_sq: rho.norm_sq(inverse),
        riemann_norm_sq: r.norm_sq(inverse),
    }
}

/// Evaluate metric, Christoffel symbols and `∇^ℓR` for `ℓ = 0..=k` at `point`.
pub fn evaluate(metric: &MetricField, point: &[f64], params: &Params, k: usize) -> Result<CurvatureData> {
    let jets = MetricJets::new(metric, point, params, k + 2)?;
    let (lower, gamma) = jets.christoffel();
    let mut current = jets.riemann(&gamma);
    let mut chain = vec![current.values()];
    for _ in 0..k {
        current = current.covariant_derivative(&gamma)?;
        chain.push(current.values());
    }
    Ok(CurvatureData {
        point: point.to_vec(),
        metric: Tensor::from_matrix(&jets.g0),
        inverse: Tensor::from_matrix(&jets.inverse0),
        christoffel_lower: lower.values(),
        christoffel: gamma.values(),
        chain,
    })
}

/// `(Γ_{uvw}, Γ_{uv}^w)` at `point`.
pub fn christoffel(metric: &MetricField, point: &[f64], params: &Params) -> Result<(Tensor, Tensor)> {
    let jets = MetricJets::new(metric, point, params, 1)?;
    let (lower, upper) = jets.christoffel();
    Ok((lower.values(), upper.values()))
}

/// `R_{uvwz}` at `point`, with `R_{xyyx} = f_yy` for Walker metrics.
pub fn curvature_tensor(metric: &MetricField, point: &[f64], params: &Params) -> Result<Tensor> {
    Ok(evaluate(metric, point, params, 0)?.chain.remove(0))
}

/// `[∇^0 R, ..., ∇^k R]` at `point`.
pub fn covariant_derivative_chain(
    metric: &MetricField,
    point: &[f64],
    params: &Params,
    k: usize,
) -> Result<Vec<Tensor>> {
    Ok(evaluate(metric, point, params, k)?.chain)
}

pub fn scalar_invariants(metric: &MetricField, point: &[f64], params: &Params) -> Result<ScalarInvariants> {
    Ok(evaluate(metric, point, params, 0)?.invariants())
}

/// `∇g` as a rank-3 tensor; zero for the Levi-Civita connection.
pub fn metric_covariant_derivative(metric: &MetricField, point: &[f64], params: &Params) -> Result<Tensor> {
    let jets = MetricJets::new(metric, point, params, 1)?;
    let (_, gamma) = jets.christoffel();
    let g = JetTensor {
        dim: jets.dim,
        rank: 2,
        data: jets.g.clone(),
    };
    Ok(g.covariant_derivative(&gamma)?.values())
}

/// Jet of the field `|R|^2` at `point` through total degree `order`.
pub fn riemann_norm_sq_jet(metric: &MetricField, point: &[f64], params: &Params, order: usize) -> Result<Jet> {
    let jets = MetricJets::new(metric, point, params, order + 2)?;
    let (_, gamma) = jets.christoffel();
    let r = jets.riemann(&gamma);
    Ok(r.norm_sq(&jets.inverse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_scalar_expr, Expr, Func, SymbolTable};
    use crate::metric::Signature;

    fn walker(f: &str) -> MetricField {
        let syms = SymbolTable::new(["x", "y", "xt"], Vec::<String>::new());
        let f = parse_scalar_expr(f, &syms).unwrap();
        MetricField::from_upper(
            vec!["x".into(), "y".into(), "xt".into()],
            [
                ((0, 0), Expr::mul(Expr::num(-2.0), f)),
                ((0, 2), Expr::num(1.0)),
                ((1, 1), Expr::num(1.0)),
            ],
            Signature::new(1, 2),
        )
        .unwrap()
    }

    fn warped_flat(t: f64, m: usize) -> MetricField {
        let coords: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        let w = Expr::call(Func::Exp, Expr::mul(Expr::num(t), Expr::coord(0, "x0")));
        MetricField::from_upper(coords, (0..m).map(|i| ((i, i), w.clone())), Signature::riemannian(m)).unwrap()
    }

    #[test]
    fn warped_flat_christoffel_table() {
        let g = warped_flat(2.0, 3);
        let (_, gam) = christoffel(&g, &[0.3, -0.2, 0.5], &Params::new()).unwrap();
        assert!((gam.get(&[0, 0, 0]) - 1.0).abs() < 1e-14);
        for i in 1..3 {
            for j in 1..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((gam.get(&[0, i, j]) - d).abs() < 1e-14);
                assert!((gam.get(&[i, j, 0]) + d).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn warped_flat_curvature_and_tau() {
        let g = warped_flat(2.0, 3);
        let data = evaluate(&g, &[0.0, 0.0, 0.0], &Params::new(), 0).unwrap();
        assert!((data.chain[0].get(&[1, 2, 2, 1]) + 1.0).abs() < 1e-13);
        assert!((data.invariants().tau + 2.0).abs() < 1e-12);
    }

    #[test]
    fn walker_components() {
        let g = walker("0.5*exp(x)*y^2");
        let p = Params::new();
        let data = evaluate(&g, &[0.0, 1.0, 0.0], &p, 2).unwrap();
        let r = &data.chain[0];
        assert!((r.get(&[0, 1, 1, 0]) - 1.0).abs() < 1e-13);
        // ∇_{∂x}∂x = Γ_{00}^w ∂_w
        assert!((data.christoffel.get(&[0, 0, 2]) + 0.5).abs() < 1e-13);
        assert!((data.christoffel.get(&[0, 0, 1]) - 1.0).abs() < 1e-13);
        assert!((data.chain[2].get(&[0, 1, 1, 0, 0, 0]) - 1.0).abs() < 1e-12);
        let inv = data.invariants();
        assert!(inv.tau.abs() < 1e-13 && inv.ricci_norm_sq.abs() < 1e-13 && inv.riemann_norm_sq.abs() < 1e-13);
    }

    #[test]
    fn walker_quartic_first_derivative() {
        let g = walker("y^4");
        let chain = covariant_derivative_chain(&g, &[0.2, 1.0, 0.0], &Params::new(), 1).unwrap();
        assert!((chain[0].get(&[0, 1, 1, 0]) - 12.0).abs() < 1e-12);
        assert!((chain[1].get(&[0, 1, 1, 0, 1]) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_walker_has_parallel_curvature() {
        let g = walker("3*y^2");
        let chain = covariant_derivative_chain(&g, &[0.4, -0.7, 1.0], &Params::new(), 3).unwrap();
        assert!((chain[0].get(&[0, 1, 1, 0]) - 6.0).abs() < 1e-12);
        for t in &chain[1..] {
            assert!(t.max_abs() < 1e-11);
        }
    }

    #[test]
    fn round_sphere_product_scalar_curvature() {
        // R x S^2 with the sphere in stereographic coordinates
        let coords: Vec<String> = ["x", "u", "v"].iter().map(|s| s.to_string()).collect();
        let syms = SymbolTable::new(coords.clone(), Vec::<String>::new());
        let c = parse_scalar_expr("4/(1 + u^2 + v^2)^2", &syms).unwrap();
        let g = MetricField::from_upper(
            coords,
            [((0, 0), Expr::num(1.0)), ((1, 1), c.clone()), ((2, 2), c)],
            Signature::riemannian(3),
        )
        .unwrap();
        for p in [[0.0, 0.0, 0.0], [1.0, 0.3, -1.2]] {
            let inv = scalar_invariants(&g, &p, &Params::new()).unwrap();
            assert!((inv.tau - 2.0).abs() < 1e-11, "{}", inv.tau);
        }
    }

    #[test]
    fn metric_is_parallel() {
        let g = walker("sin(x)*y^3 + exp(y)");
        let dg = metric_covariant_derivative(&g, &[0.3, 0.8, -1.0], &Params::new()).unwrap();
        assert!(dg.max_abs() < 1e-12);
    }

    #[test]
    fn norm_jet_matches_values() {
        let g = warped_flat(1.0, 3);
        let j = riemann_norm_sq_jet(&g, &[0.5, 0.0, 0.0], &Params::new(), 1).unwrap();
        let inv = scalar_invariants(&g, &[0.5, 0.0, 0.0], &Params::new()).unwrap();
        assert!((j.value() - inv.riemann_norm_sq).abs() < 1e-12);
        // |R|^2 ∝ e^{-2x}
        assert!((j.gradient()[0] + 2.0 * j.value()).abs() < 1e-11);
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let g = walker("y");
        let zero = MetricField::from_upper(
            g.coords().to_vec(),
            [((0, 0), Expr::num(1.0)), ((1, 1), Expr::num(1.0))],
            Signature::riemannian(3),
        )
        .unwrap();
        assert!(matches!(
            evaluate(&zero, &[0.0; 3], &Params::new(), 0),
            Err(Error::DegenerateMetric { .. })
        ));
    }
}
