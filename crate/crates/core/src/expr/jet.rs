//! Truncated multivariate Taylor expansions ("jets").
//!
//! A jet of order `d` in `m` variables stores the coefficients `∂^α f / α!` for
//! every multi-index `α` with `|α| ≤ d`, densely, in graded-lexicographic
//! order. Because the ordering is graded, the coefficients of a lower-order
//! truncation are a prefix of the full table.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial layout and product table for one `(nvars, order)` pair.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `degree_start[k]` is the index of the first monomial of total degree `k`.
    degree_start: Vec<usize>,
    /// `(i, j, k)` with `mono[i] + mono[j] = mono[k]`, `|mono[k]| <= order`.
    products: Vec<(u32, u32, u32)>,
    /// `raise[v][i]` = index of `mono[i] + e_v` when that is within the order.
    raise: Vec<Vec<Option<u32>>>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent vectors of total degree `deg` in `nvars` variables, lexicographically
/// descending (first variable highest).
fn monomials_of_degree(nvars: usize, deg: usize) -> Vec<Vec<u8>> {
    if nvars == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    if nvars == 1 {
        return vec![vec![deg as u8]];
    }
    let mut out = Vec::new();
    for first in (0..=deg).rev() {
        for mut tail in monomials_of_degree(nvars - 1, deg - first) {
            tail.insert(0, first as u8);
            out.push(tail);
        }
    }
    out
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for deg in 0..=order {
            degree_start.push(monomials.len());
            monomials.extend(monomials_of_degree(nvars, deg));
        }
        degree_start.push(monomials.len());
        debug_assert_eq!(monomials.len(), binomial(nvars + order, order));
        let lookup: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degree = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let da = degree(a);
            for (j, b) in monomials.iter().enumerate() {
                if da + degree(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        let raise = (0..nvars)
            .map(|v| {
                monomials
                    .iter()
                    .map(|m| {
                        let mut up = m.clone();
                        up[v] += 1;
                        lookup.get(&up).map(|&k| k as u32)
                    })
                    .collect()
            })
            .collect();
        Self {
            nvars,
            order,
            monomials,
            lookup,
            degree_start,
            products,
            raise,
        }
    }

    /// Shared, cached layout for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, multi_index: &[u8]) -> Option<usize> {
        self.lookup.get(multi_index).copied()
    }

    /// Number of coefficients with total degree `<= order`.
    fn prefix_len(&self, order: usize) -> usize {
        self.degree_start[order.min(self.order) + 1]
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.nvars == other.space.nvars
            && self.space.order == other.space.order
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(value: f64, nvars: usize, order: usize) -> Self {
        let space = JetSpace::get(nvars, order);
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Self { space, coeffs }
    }

    pub fn zero(nvars: usize, order: usize) -> Self {
        Self::constant(0.0, nvars, order)
    }

    /// The coordinate function `x_var` expanded about a point where it equals `value`.
    pub fn variable(value: f64, var: usize, nvars: usize, order: usize) -> Self {
        let mut jet = Self::constant(value, nvars, order);
        if order >= 1 {
            let mut mi = vec![0u8; nvars];
            mi[var] = 1;
            let idx = jet.space.index_of(&mi).expect("degree-one monomial");
            jet.coeffs[idx] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Self {
        let space = JetSpace::get(nvars, order);
        assert_eq!(coeffs.len(), space.len(), "coefficient table size");
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient `∂^α f / α!`; zero for multi-indices beyond the order.
    pub fn coeff(&self, multi_index: &[u8]) -> f64 {
        self.space
            .index_of(multi_index)
            .map_or(0.0, |i| self.coeffs[i])
    }

    /// The partial derivative `∂^α f` at the expansion point.
    pub fn derivative(&self, multi_index: &[u8]) -> f64 {
        let factorial: f64 = multi_index
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product();
        self.coeff(multi_index) * factorial
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars())
            .map(|v| {
                let mut mi = vec![0u8; self.nvars()];
                mi[v] = 1;
                self.coeff(&mi)
            })
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let space = JetSpace::get(self.nvars(), order);
        let n = space.len();
        Jet {
            space,
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    /// `∂_var` of the expansion; the result has order one less.
    ///
    /// # Panics
    /// If the jet has order zero.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        let space = JetSpace::get(self.nvars(), self.order() - 1);
        let coeffs = space
            .monomials
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let up = self.space.raise[var][i].expect("raised index within order");
                (m[var] as f64 + 1.0) * self.coeffs[up as usize]
            })
            .collect();
        Jet { space, coeffs }
    }

    fn common_order(&self, other: &Jet) -> usize {
        assert_eq!(self.nvars(), other.nvars(), "jets over different variable sets");
        self.order().min(other.order())
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Truncated Cauchy product.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.common_order(other);
        let space = JetSpace::get(self.nvars(), order);
        let mut coeffs = vec![0.0; space.len()];
        for &(i, j, k) in &space.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet { space, coeffs }
    }

    /// Accumulate `self += a * b` in place (orders must not exceed `self`'s).
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order().min(a.order()).min(b.order());
        if order < self.order() {
            *self = self.truncate(order);
        }
        for &(i, j, k) in &self.space.products {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    /// Substitute `self` into the univariate series `Σ series[n] (u - u0)^n`.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let order = self.order();
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let top = series.len().min(order + 1);
        let mut acc = Jet::constant(*series.get(top.saturating_sub(1)).unwrap_or(&0.0), self.nvars(), order);
        for n in (0..top.saturating_sub(1)).rev() {
            acc = acc.mul_jet(&h).add_scalar(series[n]);
        }
        acc
    }

    pub fn recip(&self) -> Option<Jet> {
        let u0 = self.value();
        if u0 == 0.0 || !u0.is_finite() {
            return None;
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|n| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                s / u0.powi(n as i32 + 1)
            })
            .collect();
        Some(self.compose(&series))
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for n in 0..=self.order() {
            if n > 0 {
                fact *= n as f64;
            }
            series.push(e0 / fact);
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Option<Jet> {
        let u0 = self.value();
        if u0 <= 0.0 || !u0.is_finite() {
            return None;
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|n| match n {
                0 => u0.ln(),
                _ => {
                    let s = if n % 2 == 1 { 1.0 } else { -1.0 };
                    s / (n as f64 * u0.powi(n as i32))
                }
            })
            .collect();
        Some(self.compose(&series))
    }

    fn trig(&self, phase: usize) -> Jet {
        let u0 = self.value();
        let cycle = [u0.sin(), u0.cos(), -u0.sin(), -u0.cos()];
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|n| {
                if n > 0 {
                    fact *= n as f64;
                }
                cycle[(n + phase) % 4] / fact
            })
            .collect();
        self.compose(&series)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    /// Real power `u^p`, requires `u > 0` at the expansion point.
    pub fn powf(&self, p: f64) -> Option<Jet> {
        let u0 = self.value();
        if u0 <= 0.0 || !u0.is_finite() {
            return None;
        }
        let mut binom = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|n| {
                if n > 0 {
                    binom *= (p - (n as f64 - 1.0)) / n as f64;
                }
                binom * u0.powf(p - n as f64)
            })
            .collect();
        Some(self.compose(&series))
    }

    pub fn sqrt(&self) -> Option<Jet> {
        self.powf(0.5)
    }

    /// Integer power by repeated squaring; negative exponents need a nonzero value.
    pub fn powi(&self, n: i64) -> Option<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(1.0, self.nvars(), self.order());
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Some(result)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.common_order(other);
        let space = JetSpace::get(self.nvars(), order);
        let n = space.prefix_len(order);
        let coeffs = self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| f(*a, *b))
            .collect();
        Jet { space, coeffs }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
