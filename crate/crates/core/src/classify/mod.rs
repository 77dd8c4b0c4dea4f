//! Invariant-constancy tests over sample regions, the Walker classifier, and
//! variable curvature homogeneity checks.

mod variable;
mod walker;

pub use variable::{
    lattice_row, variable_kv_check, LatticeRow, LevelStatus, LevelVerdict, VariableCHReport, VariableMode,
};
pub use walker::{classify_walker_kv, ClassConstants, Evidence, WalkerClass, WalkerClassification};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{Family, FamilySpec};

pub const DEFAULT_TOL: f64 = 1e-7;

/// Axis-aligned box in `(x, y)` with an `nx × ny` grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Region {
    pub fn new(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ok(x) || !ok(y) || nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "region x={x:?} y={y:?} with grid {nx}x{ny} is not usable"
            )));
        }
        Ok(Self { x, y, nx, ny })
    }

    /// A 32×32 box inside the domain of the family.
    pub fn for_family(fam: &Family) -> Self {
        let (x, y) = match &fam.spec {
            FamilySpec::Warped { .. } => ([-1.0, 1.0], [-0.3, 0.3]),
            FamilySpec::Walker { .. } if fam.name == "walker:inv_sq" => {
                let x0 = fam.params["x0"];
                ([x0 + 1.0, x0 + 2.0], [0.5, 2.0])
            }
            FamilySpec::Walker { .. } => ([-1.0, 1.0], [0.5, 2.0]),
        };
        Self { x, y, nx: 32, ny: 32 }
    }

    pub fn with_grid(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx.max(1);
        self.ny = ny.max(1);
        self
    }

    fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![(range[0] + range[1]) / 2.0];
        }
        (0..n)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Grid nodes `(x, y)`, `y` fastest.
    pub fn grid(&self) -> Vec<[f64; 2]> {
        let ys = Self::axis(self.y, self.ny);
        Self::axis(self.x, self.nx)
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| [x, y]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid nodes as points of an `m`-dimensional chart, remaining coordinates zero.
    pub fn points(&self, m: usize) -> Vec<Vec<f64>> {
        self.grid()
            .into_iter()
            .map(|[x, y]| {
                let mut p = vec![0.0; m];
                p[0] = x;
                if m > 1 {
                    p[1] = y;
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Constancy {
    Constant { value: f64, spread: f64 },
    NonConstant { spread: f64, min_at: Vec<f64>, max_at: Vec<f64> },
}

impl Constancy {
    pub fn is_constant(&self) -> bool {
        matches!(self, Constancy::Constant { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Constancy::Constant { value, .. } => Some(*value),
            Constancy::NonConstant { .. } => None,
        }
    }

    pub fn spread(&self) -> f64 {
        match self {
            Constancy::Constant { spread, .. } | Constancy::NonConstant { spread, .. } => *spread,
        }
    }
}

/// Constant iff `max - min <= tol · max(1, |median|)`; the value reported is the median.
pub fn constancy_test(samples: &[(Vec<f64>, f64)], tol: f64) -> Result<Constancy> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("constancy test needs at least one sample".into()));
    }
    if let Some((p, _)) = samples.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { point: p.clone() });
    }
    let (mut lo, mut hi) = (0, 0);
    for (i, (_, v)) in samples.iter().enumerate() {
        if *v < samples[lo].1 {
            lo = i;
        }
        if *v > samples[hi].1 {
            hi = i;
        }
    }
    let mut values: Vec<f64> = samples.iter().map(|(_, v)| *v).collect();
    values.sort_by(f64::total_cmp);
    let median = values[values.len() / 2];
    let spread = samples[hi].1 - samples[lo].1;
    if spread <= tol * median.abs().max(1.0) {
        Ok(Constancy::Constant { value: median, spread })
    } else {
        Ok(Constancy::NonConstant {
            spread,
            min_at: samples[lo].0.clone(),
            max_at: samples[hi].0.clone(),
        })
    }
}

/// Evaluate `field` at every grid node in parallel, keeping grid order.
pub fn sample_field<F>(region: &Region, field: F) -> Result<Vec<(Vec<f64>, f64)>>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    region
        .grid()
        .par_iter()
        .map(|&[x, y]| Ok((vec![x, y], field(x, y)?)))
        .collect()
}
