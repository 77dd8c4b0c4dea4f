//! Dense covariant tensors over a single `dim`-dimensional vector space.

use nalgebra::DMatrix;
use serde::Serialize;

/// Components `T[i_1, ..., i_r]` stored row-major (first index slowest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor {
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Self {
            dim,
            rank,
            data: vec![0.0; dim.pow(rank as u32)],
        }
    }

    /// # Panics
    /// If `data.len() != dim^rank`.
    pub fn from_vec(dim: usize, rank: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim.pow(rank as u32), "tensor data length");
        Self { dim, rank, data }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let data = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect();
        Self { dim, rank: 2, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.rank);
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn multi_index(&self, mut offset: usize) -> Vec<usize> {
        let mut idx = vec![0; self.rank];
        for slot in (0..self.rank).rev() {
            idx[slot] = offset % self.dim;
            offset /= self.dim;
        }
        idx
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Tensor {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Largest componentwise difference.
    pub fn max_diff(&self, other: &Tensor) -> f64 {
        assert_eq!((self.dim, self.rank), (other.dim, other.rank));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Contract slot `slot` with a matrix: `out[.., i, ..] = Σ_j m[(j, i)] T[.., j, ..]`.
    pub fn transform_slot(&self, slot: usize, m: &DMatrix<f64>) -> Tensor {
        assert!(slot < self.rank);
        let dim = self.dim;
        let stride = dim.pow((self.rank - 1 - slot) as u32);
        let mut out = vec![0.0; self.data.len()];
        for (o, value) in out.iter_mut().enumerate() {
            let i = (o / stride) % dim;
            let base = o - i * stride;
            let mut acc = 0.0;
            for j in 0..dim {
                acc += m[(j, i)] * self.data[base + j * stride];
            }
            *value = acc;
        }
        Tensor {
            dim,
            rank: self.rank,
            data: out,
        }
    }

    /// Pullback by a linear map whose columns are the images of the basis vectors:
    /// `(Φ*T)[i..] = T(Φ e_i, ...)`.
    pub fn pullback(&self, phi: &DMatrix<f64>) -> Tensor {
        (0..self.rank).fold(self.clone(), |t, s| t.transform_slot(s, phi))
    }

    /// Raise every index with the inverse metric and contract against `self`.
    pub fn norm_sq(&self, inverse: &DMatrix<f64>) -> f64 {
        let raised = (0..self.rank).fold(self.clone(), |t, s| t.transform_slot(s, inverse));
        raised.data.iter().zip(&self.data).map(|(a, b)| a * b).sum()
    }

    /// Matrix with rows indexed by slot `slot` and columns by the remaining indices.
    pub fn unfold(&self, slot: usize) -> DMatrix<f64> {
        let dim = self.dim;
        let cols = dim.pow(self.rank as u32 - 1);
        let mut m = DMatrix::zeros(dim, cols);
        for (o, v) in self.data.iter().enumerate() {
            let idx = self.multi_index(o);
            let row = idx[slot];
            let col = idx
                .iter()
                .enumerate()
                .filter(|(s, _)| *s != slot)
                .fold(0, |acc, (_, &i)| acc * dim + i);
            m[(row, col)] = *v;
        }
        m
    }
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_roundtrip() {
        let t = Tensor::zeros(3, 4);
        for o in [0, 5, 40, 80] {
            assert_eq!(t.offset(&t.multi_index(o)), o);
        }
    }

    #[test]
    fn pullback_by_identity_and_scaling() {
        let mut t = Tensor::zeros(2, 3);
        t.set(&[0, 1, 1], 2.0);
        t.set(&[1, 0, 1], -1.0);
        assert_eq!(t.pullback(&DMatrix::identity(2, 2)), t);
        let s = t.pullback(&(DMatrix::identity(2, 2) * 2.0));
        assert_eq!(s, t.scaled(8.0));
    }

    #[test]
    fn pullback_matches_direct_definition() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let t = Tensor::from_vec(2, 2, vec![1.0, 4.0, -2.0, 0.5]);
        let p = t.pullback(&phi);
        for i in 0..2 {
            for j in 0..2 {
                let mut direct = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        direct += t.get(&[a, b]) * phi[(a, i)] * phi[(b, j)];
                    }
                }
                assert!((p.get(&[i, j]) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_of_unfolding() {
        let mut t = Tensor::zeros(3, 3);
        t.set(&[0, 1, 2], 1.0);
        t.set(&[1, 1, 0], 2.0);
        assert_eq!(numerical_rank(&t.unfold(0), 1e-8), 2);
        assert_eq!(numerical_rank(&t.unfold(1), 1e-8), 1);
        assert_eq!(numerical_rank(&Tensor::zeros(3, 2).unfold(0), 1e-8), 0);
    }
}
