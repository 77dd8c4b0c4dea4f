//! Levenberg–Marquardt least squares with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop once the cost falls below this value.
    pub target_cost: f64,
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            target_cost: 1e-26,
            fd_step: 1e-7,
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], n_res: usize, h: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(n_res, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let plus = f(&xp);
        xp[j] = x[j] - step;
        let minus = f(&xp);
        xp[j] = x[j];
        for i in 0..n_res {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    jac
}

/// Minimize `Σ f(x)_i²` starting from `x0`.
pub fn levenberg_marquardt(f: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], cfg: LmConfig) -> Fit {
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut cost = cost_of(&r);
    let mut damping = 1e-3;
    let mut iterations = 0;
    if x.is_empty() {
        return Fit { x, cost, iterations };
    }
    while iterations < cfg.max_iterations && cost > cfg.target_cost && cost.is_finite() {
        iterations += 1;
        let jac = jacobian(&f, &x, r.len(), cfg.fd_step);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        for _ in 0..12 {
            let mut lhs = jtj.clone();
            for i in 0..x.len() {
                lhs[(i, i)] += damping * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = lhs.lu().solve(&(-&grad)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let r_trial = f(&trial);
            let c_trial = cost_of(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let small = delta.norm() <= 1e-15 * (1.0 + DVector::from_column_slice(&x).norm());
                x = trial;
                r = r_trial;
                cost = c_trial;
                damping = (damping * 0.3).max(1e-12);
                improved = !small;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Fit { x, cost, iterations }
}
