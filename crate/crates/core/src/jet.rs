//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function of `nvars`
//! variables around a fixed point, truncated at some total degree. Arithmetic
//! on jets propagates every partial derivative up to that degree exactly (up to
//! rounding), which is what the curvature formulas need: third derivatives of
//! the metric for the covariant derivative of the Riemann tensor, and second
//! derivatives of the metric of the bundle for its Riemann tensor.
//!
//! Monomials are stored in graded order so that truncating to a lower degree is
//! a prefix of the coefficient vector.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial layout and multiplication tables shared by all jets of one shape.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    /// `deg_end[d]` = number of monomials of degree `<= d`.
    deg_end: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `x^i * x^j = x^k`, sorted by the degree of `k`.
    products: Vec<(u32, u32, u32)>,
    /// `prod_end[d]` = number of products whose result has degree `<= d`.
    prod_end: Vec<usize>,
    /// Per variable: `(src, dst, factor)` for the partial derivative.
    derivs: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    pub fn new(nvars: usize, order: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut deg_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let mut cur = vec![0u8; nvars];
            enumerate_degree(nvars, d, 0, &mut cur, &mut exps);
            deg_end.push(exps.len());
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut products = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        products.sort_by_key(|&(_, _, k)| degree[k as usize]);
        let mut prod_end = vec![0; order + 1];
        for d in 0..=order {
            prod_end[d] = products
                .iter()
                .take_while(|&&(_, _, k)| degree[k as usize] <= d)
                .count();
        }

        let mut derivs = vec![Vec::new(); nvars];
        for (src, e) in exps.iter().enumerate() {
            for (v, table) in derivs.iter_mut().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                table.push((src as u32, index[&lowered] as u32, e[v] as f64));
            }
        }

        JetSpace {
            nvars,
            order,
            exps,
            degree,
            deg_end,
            index,
            products,
            prod_end,
            derivs,
        }
    }

    /// Process-wide cached space of the given shape.
    pub fn shared(nvars: usize, order: usize) -> Arc<JetSpace> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::new(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }

    pub fn monomial_degree(&self, k: usize) -> usize {
        self.degree[k]
    }

    pub fn monomial_index(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

fn enumerate_degree(nvars: usize, remaining: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u8;
        enumerate_degree(nvars, remaining - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Truncated Taylor expansion of a scalar function around a point.
///
/// `c[k]` is the Taylor coefficient of monomial `k`, i.e. the partial
/// derivative divided by the product of factorials of its exponents.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        Jet {
            space: space.clone(),
            order: space.order,
            c,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            j.c[space.index[&e]] = 1.0;
        }
        j
    }

    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet::constant(space, 0.0)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Highest total degree that is still exact.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.space.deg_end[self.order]]
    }

    /// Mixed partial derivative; `vars` lists the differentiation variables
    /// with repetition, in any order.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        if vars.len() > self.order {
            return f64::NAN;
        }
        let mut e = vec![0u8; self.space.nvars];
        for &v in vars {
            e[v] += 1;
        }
        let k = self.space.index[&e];
        let fact: f64 = e.iter().map(|&m| factorial(m as usize)).product();
        self.c[k] * fact
    }

    /// Partial derivative as a jet; the result is exact to one degree less.
    pub fn derivative(&self, var: usize) -> Jet {
        let order = self
            .order
            .checked_sub(1)
            .expect("cannot differentiate a degree-0 jet");
        let mut c = vec![0.0; self.space.len()];
        let limit = self.space.deg_end[self.order];
        for &(src, dst, factor) in &self.space.derivs[var] {
            if (src as usize) < limit {
                c[dst as usize] += factor * self.c[src as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let mut c = self.c.clone();
        for v in c.iter_mut().skip(self.space.deg_end[order]) {
            *v = 0.0;
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        let order = self.order.min(other.order);
        let mut c = vec![0.0; self.space.len()];
        for &(i, j, k) in &self.space.products[..self.space.prod_end[order]] {
            let a = self.c[i as usize];
            if a != 0.0 {
                c[k as usize] += a * other.c[j as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    /// Composition `g(self)` where `derivs[k]` is the k-th derivative of `g`
    /// at the constant term of `self`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut out = Jet::constant(&self.space, derivs[0]);
        out.order = self.order;
        let mut power = Jet::constant(&self.space, 1.0);
        power.order = self.order;
        for (k, d) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            power = power.mul_impl(&h);
            let coef = d / factorial(k);
            if coef != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += coef * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let derivs: Vec<f64> = (0..=self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(k) / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&derivs)
    }

    pub fn powi(&self, e: i32) -> Jet {
        if e < 0 {
            return self.recip().powi(-e);
        }
        let mut out = Jet::constant(&self.space, 1.0);
        out.order = self.order;
        let mut base = self.clone();
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul_impl(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_impl(&base);
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let v = self.value().exp();
        self.compose(&vec![v; self.order + 1])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    /// Natural logarithm; the constant term must be positive.
    pub fn ln(&self) -> Jet {
        let a = self.value();
        let d: Vec<f64> = (0..=self.order)
            .map(|k| {
                if k == 0 {
                    a.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(k - 1) / a.powi(k as i32)
                }
            })
            .collect();
        self.compose(&d)
    }

    /// Square root; the constant term must be positive when order > 0.
    pub fn sqrt(&self) -> Jet {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            d.push(coef * a.powf(0.5 - k as f64));
            coef *= 0.5 - k as f64;
        }
        self.compose(&d)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = self.truncate(order);
        let end = self.space.deg_end[order];
        for (o, r) in out.c[..end].iter_mut().zip(&rhs.c[..end]) {
            *o += r;
        }
        out
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = self.truncate(order);
        let end = self.space.deg_end[order];
        for (o, r) in out.c[..end].iter_mut().zip(&rhs.c[..end]) {
            *o -= r;
        }
        out
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_impl(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        let order = self.order.min(rhs.order);
        if order < self.order {
            *self = self.truncate(order);
        }
        let end = self.space.deg_end[order];
        for (o, r) in self.c[..end].iter_mut().zip(&rhs.c[..end]) {
            *o += r;
        }
    }
}

/// Inverse of a square matrix of jets (row-major), by Gauss-Jordan with
/// partial pivoting on the constant terms. `None` if singular at the point.
pub fn invert_matrix(m: &[Jet], n: usize) -> Option<Vec<Jet>> {
    assert_eq!(m.len(), n * n);
    let space = m[0].space().clone();
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(&space, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[r2 * n + col].value().abs())
            })
            .unwrap();
        if a[pivot * n + col].value().abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let r = a[col * n + col].recip();
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &r;
            inv[col * n + k] = &inv[col * n + k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            if factor.coeffs().iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..n {
                let da = &factor * &a[col * n + k];
                a[row * n + k] = &a[row * n + k] - &da;
                let di = &factor * &inv[col * n + k];
                inv[row * n + k] = &inv[row * n + k] - &di;
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        let s = JetSpace::new(3, 4);
        // C(3 + 4, 4)
        assert_eq!(s.len(), 35);
        let s = JetSpace::new(6, 3);
        assert_eq!(s.len(), 84);
    }

    #[test]
    fn product_rule_and_partials() {
        let s = JetSpace::shared(2, 3);
        let x = Jet::variable(&s, 0, 2.0);
        let y = Jet::variable(&s, 1, 5.0);
        let p = &(&x * &x) * &y; // x^2 y
        assert_eq!(p.value(), 20.0);
        assert_eq!(p.partial(&[0]), 20.0);
        assert_eq!(p.partial(&[1]), 4.0);
        assert_eq!(p.partial(&[0, 0]), 10.0);
        assert_eq!(p.partial(&[0, 1]), 4.0);
        assert_eq!(p.partial(&[1, 0]), 4.0);
        assert_eq!(p.partial(&[0, 0, 1]), 2.0);
        assert_eq!(p.partial(&[1, 1]), 0.0);
    }

    #[test]
    fn elementary_functions_at_known_points() {
        let s = JetSpace::shared(1, 4);
        let x = Jet::variable(&s, 0, 0.0);
        let e = x.exp();
        for k in 0..=4 {
            let vars = vec![0; k];
            assert!((e.partial(&vars) - 1.0).abs() < 1e-15);
        }
        let sn = x.sin();
        assert!((sn.partial(&[0]) - 1.0).abs() < 1e-15);
        assert!((sn.partial(&[0, 0, 0]) + 1.0).abs() < 1e-15);
        let x1 = Jet::variable(&s, 0, 1.0);
        let l = x1.ln();
        // d^k/dx^k ln x at 1 = (-1)^(k-1) (k-1)!
        assert!((l.partial(&[0, 0, 0, 0]) + 6.0).abs() < 1e-12);
        let r = x1.sqrt();
        assert!((r.partial(&[0, 0]) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn derivative_lowers_order() {
        let s = JetSpace::shared(2, 3);
        let x = Jet::variable(&s, 0, 1.5);
        let y = Jet::variable(&s, 1, -0.5);
        let f = (&x * &y).sin();
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        assert!((fx.partial(&[1]) - f.partial(&[0, 1])).abs() < 1e-14);
        assert!((fx.partial(&[0, 1]) - f.partial(&[0, 0, 1])).abs() < 1e-14);
    }

    #[test]
    fn matrix_inverse_matches_inverse_derivative() {
        let s = JetSpace::shared(1, 2);
        let x = Jet::variable(&s, 0, 0.3);
        let one = Jet::constant(&s, 1.0);
        // [[1, x], [x, 2]]
        let m = vec![one.clone(), x.clone(), x.clone(), one.scale(2.0)];
        let inv = invert_matrix(&m, 2).unwrap();
        // det = 2 - x^2; inv00 = 2/det
        let det = |x: f64| 2.0 - x * x;
        let inv00 = |x: f64| 2.0 / det(x);
        let h = 1e-5;
        let fd = (inv00(0.3 + h) - inv00(0.3 - h)) / (2.0 * h);
        assert!((inv[0].value() - inv00(0.3)).abs() < 1e-14);
        assert!((inv[0].partial(&[0]) - fd).abs() < 1e-8);
    }
}
