//! Metric fields given by symbolic components in a single chart.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Params};

/// Counts of negative and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub negative: usize,
    pub positive: usize,
}

impl Signature {
    pub fn new(negative: usize, positive: usize) -> Self {
        Self { negative, positive }
    }

    pub fn riemannian(dim: usize) -> Self {
        Self::new(0, dim)
    }

    pub fn dim(&self) -> usize {
        self.negative + self.positive
    }

    pub fn is_definite(&self) -> bool {
        self.negative == 0 || self.positive == 0
    }

    /// Signature of a symmetric matrix, or `None` if it has a (near) zero eigenvalue.
    pub fn of_matrix(m: &DMatrix<f64>) -> Option<Self> {
        let eig = m.clone().symmetric_eigenvalues();
        let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut sig = Self::new(0, 0);
        for &v in eig.iter() {
            if v.abs() <= 1e-12 * scale || scale == 0.0 {
                return None;
            }
            if v < 0.0 {
                sig.negative += 1;
            } else {
                sig.positive += 1;
            }
        }
        Some(sig)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.negative, self.positive)
    }
}

/// Symmetric matrix of scalar expressions `g_{uv}` over named coordinates.
#[derive(Debug, Clone)]
pub struct MetricField {
    coords: Vec<String>,
    entries: Vec<Expr>,
    signature: Signature,
}

impl MetricField {
    /// `entries` is the full row-major `m × m` matrix; it must be symmetric.
    pub fn new(coords: Vec<String>, entries: Vec<Expr>, signature: Signature) -> Result<Self> {
        let m = coords.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!("metric dimension must be at least 2, got {m}")));
        }
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "{} metric entries for {m} coordinates",
                entries.len()
            )));
        }
        if signature.dim() != m {
            return Err(Error::DimensionMismatch(format!(
                "signature {signature} does not fit dimension {m}"
            )));
        }
        for i in 0..m {
            for j in 0..i {
                if entries[i * m + j] != entries[j * m + i] {
                    return Err(Error::InvalidArgument(format!(
                        "metric is not symmetric in ({}, {})",
                        coords[i], coords[j]
                    )));
                }
            }
        }
        Ok(Self {
            coords,
            entries,
            signature,
        })
    }

    /// Build from the upper triangle; missing entries are zero.
    pub fn from_upper<I>(coords: Vec<String>, upper: I, signature: Signature) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), Expr)>,
    {
        let m = coords.len();
        let mut entries = vec![Expr::num(0.0); m * m];
        for ((i, j), e) in upper {
            if i >= m || j >= m {
                return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside {m}x{m}")));
            }
            entries[i * m + j] = e.clone();
            entries[j * m + i] = e;
        }
        Self::new(coords, entries, signature)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim() + j]
    }

    /// Parameter names referenced by any component, sorted and deduplicated.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().flat_map(|e| e.params()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Substitute parameter values into every component.
    pub fn bind(&self, params: &Params) -> MetricField {
        Self {
            coords: self.coords.clone(),
            entries: self.entries.iter().map(|e| e.bind(params)).collect(),
            signature: self.signature,
        }
    }

    /// Components at `point`, without nondegeneracy checks.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<DMatrix<f64>> {
        self.check_point(point)?;
        let m = self.dim();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.component(i, j).eval(point, params)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, metric has {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Check that `g` (the value at some point) is nondegenerate with the declared signature
    /// and return its inverse.
    pub fn validate(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let det = g.determinant();
        if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale.powi(m as i32) {
            return Err(Error::DegenerateMetric { det });
        }
        let found = Signature::of_matrix(g).ok_or(Error::DegenerateMetric { det })?;
        if found != self.signature {
            return Err(Error::SignatureMismatch {
                expected_neg: self.signature.negative,
                expected_pos: self.signature.positive,
                found_neg: found.negative,
                found_pos: found.positive,
            });
        }
        g.clone().try_inverse().ok_or(Error::DegenerateMetric { det })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn rejects_asymmetric_and_wrong_sizes() {
        let e = vec![Expr::num(1.0), Expr::num(2.0), Expr::num(3.0), Expr::num(1.0)];
        assert!(matches!(
            MetricField::new(coords(2), e, Signature::riemannian(2)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(MetricField::new(coords(2), vec![Expr::num(1.0)], Signature::riemannian(2)).is_err());
    }

    #[test]
    fn detects_degeneracy_and_signature() {
        let g = MetricField::from_upper(
            coords(2),
            [((0, 0), Expr::coord(0, "x0")), ((1, 1), Expr::num(1.0))],
            Signature::riemannian(2),
        )
        .unwrap();
        let p = Params::new();
        let at = |x: f64| g.eval(&[x, 0.0], &p).and_then(|m| g.validate(&m));
        assert!(at(2.0).is_ok());
        assert!(matches!(at(0.0), Err(Error::DegenerateMetric { .. })));
        assert!(matches!(at(-1.0), Err(Error::SignatureMismatch { found_neg: 1, .. })));
    }
}
