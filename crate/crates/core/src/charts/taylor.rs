//! Truncated Taylor polynomials in three variables.
//!
//! A [`Taylor`] value of order `n` stores the normalized coefficients
//! `c_α = ∂^α f(p) / α!` for every multi-index with `|α| ≤ n`. Arithmetic on
//! these values is exact up to round-off, so evaluating an expression tree on
//! Taylor variables delivers its partial derivatives without finite
//! differences. Binary operations truncate to the smaller operand order.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 4;
/// Number of monomials of degree `<= MAX_ORDER` in three variables.
pub const MAX_TERMS: usize = 35;

/// Number of monomials of degree `<= order` in three variables.
pub const fn n_terms(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

struct Tables {
    monomials: Vec<[u8; 3]>,
    index: [[[u16; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    factorial: Vec<f64>,
    // products (i, j, k): c[k] += a[i] * b[j], grouped by result order
    products: Vec<Vec<(u16, u16, u16)>>,
    // derivative[var] = list of (target, source, factor)
    derivative: [Vec<(u16, u16, f64)>; 3],
}

const NONE: u16 = u16::MAX;

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut monomials = Vec::with_capacity(MAX_TERMS);
        for deg in 0..=MAX_ORDER {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    let c = deg - a - b;
                    monomials.push([a as u8, b as u8, c as u8]);
                }
            }
        }
        debug_assert_eq!(monomials.len(), MAX_TERMS);
        let mut index = [[[NONE; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        for (i, m) in monomials.iter().enumerate() {
            index[m[0] as usize][m[1] as usize][m[2] as usize] = i as u16;
        }
        let fact = |n: u8| (1..=n as u64).product::<u64>() as f64;
        let factorial = monomials
            .iter()
            .map(|m| fact(m[0]) * fact(m[1]) * fact(m[2]))
            .collect();
        let deg = |m: &[u8; 3]| (m[0] + m[1] + m[2]) as usize;
        let mut products = Vec::with_capacity(MAX_ORDER + 1);
        for order in 0..=MAX_ORDER {
            let n = n_terms(order);
            let mut list = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (monomials[i], monomials[j]);
                    if deg(&a) + deg(&b) > order {
                        continue;
                    }
                    let k = index[(a[0] + b[0]) as usize][(a[1] + b[1]) as usize]
                        [(a[2] + b[2]) as usize];
                    list.push((i as u16, j as u16, k));
                }
            }
            products.push(list);
        }
        let derivative = std::array::from_fn(|var| {
            let mut list = Vec::new();
            for (t, m) in monomials.iter().enumerate() {
                let mut src = *m;
                src[var] += 1;
                if deg(&src) > MAX_ORDER {
                    continue;
                }
                let s = index[src[0] as usize][src[1] as usize][src[2] as usize];
                list.push((t as u16, s, src[var] as f64));
            }
            list
        });
        Tables {
            monomials,
            index,
            factorial,
            products,
            derivative,
        }
    })
}

/// Coefficient index of the monomial `x^a y^b z^c`.
pub fn monomial_index(exponents: [usize; 3]) -> usize {
    let t = tables();
    let [a, b, c] = exponents;
    assert!(a + b + c <= MAX_ORDER, "monomial degree exceeds MAX_ORDER");
    t.index[a][b][c] as usize
}

/// Exponents of the monomial stored at `index`.
pub fn monomial(index: usize) -> [usize; 3] {
    let m = tables().monomials[index];
    [m[0] as usize, m[1] as usize, m[2] as usize]
}

#[derive(Clone, Copy)]
pub struct Taylor {
    order: u8,
    c: [f64; MAX_TERMS],
}

impl std::fmt::Debug for Taylor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Taylor")
            .field("order", &self.order)
            .field("coeffs", &self.coeffs())
            .finish()
    }
}

impl PartialEq for Taylor {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.coeffs() == other.coeffs()
    }
}

impl Taylor {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "Taylor order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; MAX_TERMS];
        c[0] = value;
        Taylor {
            order: order as u8,
            c,
        }
    }

    /// The coordinate function `x_var` expanded about `value`.
    pub fn variable(var: usize, value: f64, order: usize) -> Self {
        let mut t = Self::constant(value, order);
        if order >= 1 {
            t.c[1 + var] = 1.0;
        }
        t
    }

    /// The three coordinate functions expanded about `p`.
    pub fn variables(p: [f64; 3], order: usize) -> [Self; 3] {
        std::array::from_fn(|i| Self::variable(i, p[i], order))
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    pub fn from_coeffs(coeffs: &[f64], order: usize) -> Self {
        assert_eq!(coeffs.len(), n_terms(order));
        let mut t = Self::constant(0.0, order);
        t.c[..coeffs.len()].copy_from_slice(coeffs);
        t
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..n_terms(self.order())]
    }

    /// Normalized coefficient of `x^a y^b z^c`.
    pub fn coeff(&self, exponents: [usize; 3]) -> f64 {
        let deg: usize = exponents.iter().sum();
        assert!(deg <= self.order(), "coefficient beyond truncation order");
        self.c[monomial_index(exponents)]
    }

    /// The partial derivative `∂^α f(p)`.
    pub fn partial(&self, exponents: [usize; 3]) -> f64 {
        let idx = monomial_index(exponents);
        assert!(idx < n_terms(self.order()), "partial beyond truncation order");
        self.c[idx] * tables().factorial[idx]
    }

    pub fn gradient(&self) -> [f64; 3] {
        [
            self.partial([1, 0, 0]),
            self.partial([0, 1, 0]),
            self.partial([0, 0, 1]),
        ]
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order(), "cannot raise truncation order");
        let mut t = *self;
        t.order = order as u8;
        for v in &mut t.c[n_terms(order)..] {
            *v = 0.0;
        }
        t
    }

    /// Raises the truncation order, filling the new coefficients with zeros.
    pub fn extend(&self, order: usize) -> Self {
        assert!(order >= self.order() && order <= MAX_ORDER);
        let mut t = *self;
        t.order = order as u8;
        t
    }

    /// Coefficients of the homogeneous part of degree `degree`.
    pub fn homogeneous(&self, degree: usize) -> &[f64] {
        assert!(degree <= self.order());
        let lo = if degree == 0 { 0 } else { n_terms(degree - 1) };
        &self.c[lo..n_terms(degree)]
    }

    /// Overwrites the homogeneous part of degree `degree`.
    pub fn set_homogeneous(&mut self, degree: usize, coeffs: &[f64]) {
        assert!(degree <= self.order());
        let lo = if degree == 0 { 0 } else { n_terms(degree - 1) };
        self.c[lo..n_terms(degree)].copy_from_slice(coeffs);
    }

    /// Partial derivative in `var`; the result has one order less.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.order >= 1, "derivative of an order-0 Taylor value");
        let order = self.order() - 1;
        let n = n_terms(order);
        let mut out = Self::zero(order);
        for &(t, s, factor) in &tables().derivative[var] {
            if (t as usize) < n {
                out.c[t as usize] = factor * self.c[s as usize];
            }
        }
        out
    }

    /// Evaluates the truncated polynomial at the displacement `d` from the
    /// expansion point.
    pub fn eval_displacement(&self, d: [f64; 3]) -> f64 {
        let t = tables();
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let m = t.monomials[i];
                c * d[0].powi(m[0] as i32) * d[1].powi(m[1] as i32) * d[2].powi(m[2] as i32)
            })
            .sum()
    }

    /// Composes a univariate series `Σ coeffs[k] (x - x0)^k`, where `x0` is
    /// the value of `self`, with `self`.
    pub fn compose(&self, coeffs: &[f64]) -> Self {
        let order = self.order();
        assert!(coeffs.len() > order);
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(coeffs[0], order);
        let mut power = delta;
        for (k, &ck) in coeffs.iter().enumerate().skip(1).take(order) {
            if ck != 0.0 {
                out += power * ck;
            }
            if k < order {
                power = power * delta;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|c| c.is_finite())
    }

    pub fn recip(&self) -> Self {
        let x0 = self.value();
        let n = self.order();
        let coeffs: Vec<f64> = (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / x0.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&coeffs)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut coeffs = vec![e; self.order() + 1];
        let mut fact = 1.0;
        for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *c = e / fact;
        }
        self.compose(&coeffs)
    }

    pub fn ln(&self) -> Self {
        let x0 = self.value();
        let coeffs: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k == 0 {
                    x0.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * x0.powi(k as i32))
                }
            })
            .collect();
        self.compose(&coeffs)
    }

    /// Real power `x^r` via the binomial series.
    pub fn powf(&self, r: f64) -> Self {
        let x0 = self.value();
        let mut coeffs = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            coeffs.push(binom * x0.powf(r - k as f64));
        }
        self.compose(&coeffs)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::constant(1.0, self.order()),
            n if n < 0 => self.powi(-n).recip(),
            n => {
                let mut out = *self;
                for _ in 1..n {
                    out = out * *self;
                }
                out
            }
        }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    fn cyclic(&self, derivs: [f64; 4]) -> Self {
        let mut fact = 1.0;
        let coeffs: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                derivs[k % 4] / fact
            })
            .collect();
        self.compose(&coeffs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.cyclic([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.cyclic([c, -s, -c, s])
    }

    pub fn tan(&self) -> Self {
        self.sin() / self.cos()
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.cyclic([s, c, s, c])
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.cyclic([c, s, c, s])
    }

    pub fn atan(&self) -> Self {
        // d/dt atan(x0 + t) = 1 / (q0 + q1 t + t^2) with q0 = 1 + x0^2, q1 = 2 x0
        let x0 = self.value();
        let n = self.order();
        let q = [1.0 + x0 * x0, 2.0 * x0, 1.0];
        let mut d = vec![0.0; n.max(1)];
        for k in 0..d.len() {
            let mut acc = if k == 0 { 1.0 } else { 0.0 };
            for j in 1..=k.min(2) {
                acc -= q[j] * d[k - j];
            }
            d[k] = acc / q[0];
        }
        let mut coeffs = vec![x0.atan()];
        for k in 1..=n {
            coeffs.push(d[k - 1] / k as f64);
        }
        self.compose(&coeffs)
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, rhs: Taylor) -> Taylor {
        let order = self.order.min(rhs.order);
        let mut out = Taylor::zero(order as usize);
        for i in 0..n_terms(order as usize) {
            out.c[i] = self.c[i] + rhs.c[i];
        }
        out
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, rhs: Taylor) -> Taylor {
        let order = self.order.min(rhs.order);
        let mut out = Taylor::zero(order as usize);
        for i in 0..n_terms(order as usize) {
            out.c[i] = self.c[i] - rhs.c[i];
        }
        out
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        let order = self.order.min(rhs.order) as usize;
        let mut out = Taylor::zero(order);
        for &(i, j, k) in &tables().products[order] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }
}

impl Div for Taylor {
    type Output = Taylor;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Taylor) -> Taylor {
        self * rhs.recip()
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(mut self) -> Taylor {
        for v in &mut self.c {
            *v = -*v;
        }
        self
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(mut self, rhs: f64) -> Taylor {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Taylor {
    type Output = Taylor;
    fn sub(mut self, rhs: f64) -> Taylor {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(mut self, rhs: f64) -> Taylor {
        for v in &mut self.c {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Taylor {
    type Output = Taylor;
    fn div(self, rhs: f64) -> Taylor {
        self * (1.0 / rhs)
    }
}

impl Mul<Taylor> for f64 {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        rhs * self
    }
}

impl AddAssign for Taylor {
    fn add_assign(&mut self, rhs: Taylor) {
        *self = *self + rhs;
    }
}

impl SubAssign for Taylor {
    fn sub_assign(&mut self, rhs: Taylor) {
        *self = *self - rhs;
    }
}

impl MulAssign<f64> for Taylor {
    fn mul_assign(&mut self, rhs: f64) {
        *self = *self * rhs;
    }
}

/// Numeric types an expression tree can be evaluated on.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same truncation as `self`.
    fn lift(&self, value: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn atan(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, value: f64) -> Self {
        value
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

impl Scalar for Taylor {
    fn lift(&self, value: f64) -> Self {
        Taylor::constant(value, self.order())
    }
    fn exp(&self) -> Self {
        Taylor::exp(self)
    }
    fn ln(&self) -> Self {
        Taylor::ln(self)
    }
    fn sqrt(&self) -> Self {
        Taylor::sqrt(self)
    }
    fn sin(&self) -> Self {
        Taylor::sin(self)
    }
    fn cos(&self) -> Self {
        Taylor::cos(self)
    }
    fn tan(&self) -> Self {
        Taylor::tan(self)
    }
    fn sinh(&self) -> Self {
        Taylor::sinh(self)
    }
    fn cosh(&self) -> Self {
        Taylor::cosh(self)
    }
    fn atan(&self) -> Self {
        Taylor::atan(self)
    }
    fn powi(&self, n: i32) -> Self {
        Taylor::powi(self, n)
    }
}
