//! The profile `α` with `α^{(k)} = e^{-x²}` and each lower derivative the
//! integral of the next one from `-∞`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{CubicSpline, Expr, Profile};
use crate::quadrature::integrate;

/// Left end of the truncated integration range.
const LOWER_LIMIT: f64 = -30.0;
/// Bound on the discarded tail: every level is below `e^x` for `x <= -1`.
const TAIL_BOUND: f64 = 9.357_622_968_840_175e-14; // e^{-30}
const MAX_ERROR: f64 = 1e-9;
/// Levels tabulated above `k`, so jets of `f` have enough derivatives for `∇^{k+1}R`.
const EXTRA_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self {
            lo: -8.0,
            hi: 8.0,
            step: 0.01,
        }
    }
}

impl ProfileGrid {
    pub fn nodes(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableCHProfile {
    pub k: usize,
    pub grid: ProfileGrid,
    /// `levels[ℓ][i]` is `α^{(ℓ)}` at node `i`, for `ℓ = 0..=k+4`.
    pub levels: Vec<Vec<f64>>,
    /// Largest quadrature error estimate over all nodes, tail bound included.
    pub error_estimate: f64,
    #[serde(skip)]
    pub profile: Arc<Profile>,
    /// `½ α(x) y²` over the Walker coordinates.
    #[serde(skip)]
    pub f: Expr,
}

/// `d^n/dx^n e^{-x²} = (-1)^n H_n(x) e^{-x²}` with physicists' Hermite polynomials.
fn gaussian_derivative(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    let h = match n {
        0 => h0,
        _ => {
            for j in 1..n {
                let h2 = 2.0 * x * h1 - 2.0 * j as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * h * (-x * x).exp()
}

/// `α^{(k-n)}(x) = ∫_{-∞}^x (x-t)^{n-1}/(n-1)! e^{-t²} dt` for `n >= 1`.
fn repeated_integral(n: usize, x: f64) -> (f64, f64) {
    let fact: f64 = (1..n).map(|i| i as f64).product();
    let q = integrate(
        |t: f64| (x - t).powi(n as i32 - 1) / fact * (-t * t).exp(),
        LOWER_LIMIT,
        x,
        1e-14,
        1e-13,
    );
    (q.value, q.error + TAIL_BOUND)
}

/// Tabulate `α^{(0)}, ..., α^{(k+4)}` on `grid` and build `f = ½ α(x) y²`.
pub fn variable_ch_profile(k: usize, grid: ProfileGrid) -> Result<VariableCHProfile> {
    if k == 0 {
        return Err(Error::InvalidArgument("profile order k must be at least 1".into()));
    }
    if !(grid.step > 0.0 && grid.hi > grid.lo && grid.lo > LOWER_LIMIT) {
        return Err(Error::InvalidArgument(format!(
            "profile grid [{}, {}] with step {} is not usable",
            grid.lo, grid.hi, grid.step
        )));
    }
    let nodes = grid.nodes();
    let mut levels = Vec::with_capacity(k + EXTRA_LEVELS + 1);
    let mut error_estimate: f64 = 0.0;
    for ell in 0..k {
        let (vals, errs): (Vec<f64>, Vec<f64>) = nodes.par_iter().map(|&x| repeated_integral(k - ell, x)).unzip();
        error_estimate = errs.into_iter().fold(error_estimate, f64::max);
        levels.push(vals);
    }
    for n in 0..=EXTRA_LEVELS {
        levels.push(nodes.iter().map(|&x| gaussian_derivative(n, x)).collect());
    }
    if error_estimate > MAX_ERROR {
        return Err(Error::Quadrature {
            estimate: error_estimate,
        });
    }
    // Each level's end slopes are the next level's end values; the top level
    // gets its slope from the Hermite formula.
    let last = nodes.len() - 1;
    let splines = (0..levels.len())
        .map(|ell| {
            let slope = |i: usize| match levels.get(ell + 1) {
                Some(next) => next[i],
                None => gaussian_derivative(ell + 1 - k, nodes[i]),
            };
            CubicSpline::clamped(grid.lo, grid.step, levels[ell].clone(), (slope(0), slope(last)))
        })
        .collect();
    let profile = Arc::new(Profile::new("alpha", splines));
    let f = Expr::mul(
        Expr::num(0.5),
        Expr::mul(
            Expr::Profile {
                profile: profile.clone(),
                shift: 0,
                arg: Box::new(Expr::coord(0, "x")),
            },
            Expr::pow(Expr::coord(1, "y"), Expr::num(2.0)),
        ),
    );
    Ok(VariableCHProfile {
        k,
        grid,
        levels,
        error_estimate,
        profile,
        f,
    })
}
