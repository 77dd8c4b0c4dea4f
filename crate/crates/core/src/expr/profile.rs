//! Tabulated one-variable profiles used inside expressions.

/// Natural cubic spline on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x0: f64,
    step: f64,
    values: Vec<f64>,
    /// Second derivatives at the nodes.
    curvature: Vec<f64>,
}

impl CubicSpline {
    /// # Panics
    /// If fewer than two nodes are given or the step is not positive.
    pub fn natural(x0: f64, step: f64, values: Vec<f64>) -> Self {
        Self::build(x0, step, values, None)
    }

    /// Spline whose end slopes are `slopes.0` and `slopes.1`.
    ///
    /// # Panics
    /// As for [`CubicSpline::natural`].
    pub fn clamped(x0: f64, step: f64, values: Vec<f64>, slopes: (f64, f64)) -> Self {
        Self::build(x0, step, values, Some(slopes))
    }

    fn build(x0: f64, step: f64, values: Vec<f64>, slopes: Option<(f64, f64)>) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs at least two nodes");
        assert!(step > 0.0, "spline step must be positive");
        let h = step;
        let mut sub = vec![1.0; n];
        let mut diag = vec![4.0; n];
        let mut sup = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        }
        match slopes {
            None => {
                diag[0] = 1.0;
                sup[0] = 0.0;
                diag[n - 1] = 1.0;
                sub[n - 1] = 0.0;
            }
            Some((d0, dn)) => {
                diag[0] = 2.0;
                rhs[0] = 6.0 / h * ((values[1] - values[0]) / h - d0);
                diag[n - 1] = 2.0;
                rhs[n - 1] = 6.0 / h * (dn - (values[n - 1] - values[n - 2]) / h);
            }
        }
        let curvature = solve_tridiagonal(&sub, &diag, &sup, rhs);
        Self {
            x0,
            step,
            values,
            curvature,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.step * (self.values.len() - 1) as f64)
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * self.step;
        x >= lo - slack && x <= hi + slack
    }

    /// Value of the `order`-th derivative of the interpolant at `x` (zero above order 3).
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        let n = self.values.len();
        let h = self.step;
        let t = (x - self.x0) / h;
        let i = (t.floor().max(0.0) as usize).min(n - 2);
        let a = self.x0 + i as f64 * h;
        let b = a + h;
        let (ya, yb) = (self.values[i], self.values[i + 1]);
        let (ma, mb) = (self.curvature[i], self.curvature[i + 1]);
        let (da, db) = (b - x, x - a);
        match order {
            0 => {
                ma * da.powi(3) / (6.0 * h)
                    + mb * db.powi(3) / (6.0 * h)
                    + (ya / h - ma * h / 6.0) * da
                    + (yb / h - mb * h / 6.0) * db
            }
            1 => {
                -ma * da * da / (2.0 * h) + mb * db * db / (2.0 * h) + (yb - ya) / h
                    - (mb - ma) * h / 6.0
            }
            2 => (ma * da + mb * db) / h,
            3 => (mb - ma) / h,
            _ => 0.0,
        }
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }
}

/// Thomas algorithm; `sub[0]` and `sup[n - 1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = sup[0] / b;
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / b;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    rhs
}

/// A function known through tabulated derivative levels: `levels[j]`
/// interpolates the `j`-th derivative. Derivatives above the last level come
/// from differentiating the last interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    name: String,
    levels: Vec<CubicSpline>,
}

impl Profile {
    /// # Panics
    /// If `levels` is empty or the splines do not share a grid.
    pub fn new(name: impl Into<String>, levels: Vec<CubicSpline>) -> Self {
        assert!(!levels.is_empty(), "profile needs at least one level");
        let dom = levels[0].domain();
        assert!(
            levels.iter().all(|l| l.domain() == dom),
            "profile levels must share a grid"
        );
        Self {
            name: name.into(),
            levels,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[CubicSpline] {
        &self.levels
    }

    pub fn domain(&self) -> (f64, f64) {
        self.levels[0].domain()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.levels[0].contains(x)
    }

    /// `n`-th derivative at `x`.
    pub fn derivative(&self, x: f64, n: usize) -> f64 {
        let last = self.levels.len() - 1;
        if n <= last {
            self.levels[n].eval(x, 0)
        } else {
            self.levels[last].eval(x, n - last)
        }
    }
}
