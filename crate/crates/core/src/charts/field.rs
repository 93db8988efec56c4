//! Scalar fields and their 3-jets.
//!
//! Catalog fields are differentiated exactly by evaluating their expression
//! tree on [`Taylor`] variables. User expressions default to central finite
//! differences: 5-point stencils for first and second derivatives and nested
//! 5-point first differences of the Hessian for third derivatives.

use serde::Serialize;

use super::expr::Expr;
use super::taylor::{monomial_index, n_terms, Taylor};
use super::{Chart, Point};
use crate::error::{Error, Result};

/// Default finite-difference step, scaled by `max(1, |x_i|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Differentiation {
    /// Exact Taylor-mode differentiation of the expression tree.
    Analytic,
    /// Central differences with the given base step.
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub expr: Expr,
    pub mode: Differentiation,
    /// Catalog name for built-in fields, `None` for user expressions.
    pub label: Option<String>,
}

impl ScalarField {
    /// A built-in field with analytic partials.
    pub fn builtin(label: &str, expr: Expr) -> Self {
        ScalarField {
            expr,
            mode: Differentiation::Analytic,
            label: Some(label.to_string()),
        }
    }

    /// A user expression, differentiated by finite differences.
    pub fn user(expr: Expr) -> Self {
        ScalarField {
            expr,
            mode: Differentiation::FiniteDifference {
                step: DEFAULT_FD_STEP,
            },
            label: None,
        }
    }

    pub fn parse(text: &str, chart: &Chart) -> Result<Self> {
        Ok(Self::user(chart.parse(text)?))
    }

    pub fn with_mode(mut self, mode: Differentiation) -> Self {
        self.mode = mode;
        self
    }

    pub fn value(&self, p: Point) -> f64 {
        self.expr.eval(&p)
    }

    /// Highest jet order this field can deliver.
    pub fn max_order(&self) -> usize {
        match self.mode {
            Differentiation::Analytic => super::taylor::MAX_ORDER,
            Differentiation::FiniteDifference { .. } => 3,
        }
    }

    /// Taylor expansion of order `order` about `p` (no domain check).
    pub fn jet(&self, p: Point, order: usize) -> Result<Taylor> {
        if order > self.max_order() {
            return Err(Error::InsufficientOrder {
                needed: order,
                available: self.max_order(),
            });
        }
        let t = match self.mode {
            Differentiation::Analytic => self.expr.eval(&Taylor::variables(p, order)),
            Differentiation::FiniteDifference { step } => {
                let f = |q: Point| self.expr.eval(&q);
                match order {
                    0 => Taylor::constant(f(p), 0),
                    1 | 2 => {
                        let h = steps(p, step);
                        let hess = if order == 2 {
                            fd_hessian(&f, p, h)
                        } else {
                            [[0.0; 3]; 3]
                        };
                        let jet = Jet3 {
                            value: f(p),
                            grad: fd_gradient(&f, p, step),
                            hess,
                            third: [[[0.0; 3]; 3]; 3],
                        };
                        jet.to_taylor().truncate(order)
                    }
                    _ => fd_jet3(f, p, step).to_taylor(),
                }
            }
        };
        if !t.is_finite() {
            return Err(Error::NonFinite {
                what: self.describe(),
                point: p,
            });
        }
        Ok(t)
    }

    fn describe(&self) -> String {
        match &self.label {
            Some(l) => format!("field `{l}`"),
            None => "user field".to_string(),
        }
    }
}

/// Value, gradient, Hessian and third derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet3 {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub third: [[[f64; 3]; 3]; 3],
}

impl Jet3 {
    pub fn from_taylor(t: &Taylor) -> Self {
        assert!(t.order() >= 3);
        let e = |i: usize| {
            let mut m = [0; 3];
            m[i] += 1;
            m
        };
        let mut jet = Jet3 {
            value: t.value(),
            grad: [0.0; 3],
            hess: [[0.0; 3]; 3],
            third: [[[0.0; 3]; 3]; 3],
        };
        for i in 0..3 {
            jet.grad[i] = t.partial(e(i));
            for j in 0..3 {
                let mut m = e(i);
                m[j] += 1;
                jet.hess[i][j] = t.partial(m);
                for k in 0..3 {
                    let mut mk = m;
                    mk[k] += 1;
                    jet.third[i][j][k] = t.partial(mk);
                }
            }
        }
        jet
    }

    pub fn to_taylor(&self) -> Taylor {
        let mut c = vec![0.0; n_terms(3)];
        c[0] = self.value;
        for i in 0..3 {
            let mut m = [0usize; 3];
            m[i] = 1;
            c[monomial_index(m)] = self.grad[i];
        }
        for idx in 4..n_terms(3) {
            let m = super::taylor::monomial(idx);
            let mut list = Vec::new();
            for (v, &count) in m.iter().enumerate() {
                list.extend(std::iter::repeat_n(v, count));
            }
            let fact: f64 = m.iter().map(|&k| (1..=k).product::<usize>() as f64).product();
            let d = match list.len() {
                2 => self.hess[list[0]][list[1]],
                3 => self.third[list[0]][list[1]][list[2]],
                _ => unreachable!(),
            };
            c[idx] = d / fact;
        }
        Taylor::from_coeffs(&c, 3)
    }

    /// Largest absolute difference between corresponding entries, split by
    /// derivative order: `[value, grad, hess, third]`.
    pub fn max_difference(&self, other: &Jet3) -> [f64; 4] {
        let mut out = [(self.value - other.value).abs(), 0.0, 0.0, 0.0];
        for i in 0..3 {
            out[1] = out[1].max((self.grad[i] - other.grad[i]).abs());
            for j in 0..3 {
                out[2] = out[2].max((self.hess[i][j] - other.hess[i][j]).abs());
                for k in 0..3 {
                    out[3] = out[3].max((self.third[i][j][k] - other.third[i][j][k]).abs());
                }
            }
        }
        out
    }
}

const FIRST: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];
const SECOND: [(f64, f64); 5] = [
    (-2.0, -1.0 / 12.0),
    (-1.0, 16.0 / 12.0),
    (0.0, -30.0 / 12.0),
    (1.0, 16.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

fn shifted(p: Point, i: usize, d: f64) -> Point {
    let mut q = p;
    q[i] += d;
    q
}

fn steps(p: Point, step: f64) -> [f64; 3] {
    p.map(|x| step * x.abs().max(1.0))
}

/// Fourth-order central gradient.
pub fn fd_gradient<F: Fn(Point) -> f64>(f: &F, p: Point, step: f64) -> [f64; 3] {
    let h = steps(p, step);
    std::array::from_fn(|i| {
        FIRST
            .iter()
            .map(|&(s, w)| w * f(shifted(p, i, s * h[i])))
            .sum::<f64>()
            / h[i]
    })
}

fn fd_hessian<F: Fn(Point) -> f64>(f: &F, p: Point, h: [f64; 3]) -> [[f64; 3]; 3] {
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        hess[i][i] = SECOND
            .iter()
            .map(|&(s, w)| w * f(shifted(p, i, s * h[i])))
            .sum::<f64>()
            / (h[i] * h[i]);
        for j in 0..i {
            let mut acc = 0.0;
            for &(si, wi) in &FIRST {
                for &(sj, wj) in &FIRST {
                    acc += wi * wj * f(shifted(shifted(p, i, si * h[i]), j, sj * h[j]));
                }
            }
            hess[i][j] = acc / (h[i] * h[j]);
            hess[j][i] = hess[i][j];
        }
    }
    hess
}

/// Finite-difference 3-jet of `f` at `p`.
pub fn fd_jet3<F: Fn(Point) -> f64>(f: F, p: Point, step: f64) -> Jet3 {
    let h = steps(p, step);
    let grad = fd_gradient(&f, p, step);
    let hess = fd_hessian(&f, p, h);
    // d_k H_ij by a 5-point first difference of the Hessian in direction k
    let mut dh = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        let mut acc = [[0.0; 3]; 3];
        for &(s, w) in &FIRST {
            let hk = fd_hessian(&f, shifted(p, k, s * h[k]), h);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += w * hk[i][j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                dh[k][i][j] = acc[i][j] / h[k];
            }
        }
    }
    let mut third = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                third[i][j][k] = (dh[k][i][j] + dh[i][j][k] + dh[j][k][i]) / 3.0;
            }
        }
    }
    Jet3 {
        value: f(p),
        grad,
        hess,
        third,
    }
}

/// 3-jet of `field` at a margin-safe point of `chart`.
pub fn eval_jet(field: &ScalarField, chart: &Chart, p: Point) -> Result<Jet3> {
    chart.check(p)?;
    Ok(Jet3::from_taylor(&field.jet(p, 3)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConvergenceOrder {
    Order(f64),
    /// The finite-difference error is already at the round-off floor.
    Saturated,
}

/// Base step for the convergence study; the second run halves it.
pub const CONVERGENCE_STEP: f64 = 0.05;

/// Empirical order of the first-derivative stencil at `p`, from the errors at
/// steps `h` and `h/2` measured against the exact Taylor-mode gradient.
pub fn convergence_order(field: &ScalarField, chart: &Chart, p: Point) -> Result<ConvergenceOrder> {
    chart.check(p)?;
    let reference = field.expr.eval(&Taylor::variables(p, 1));
    if !reference.is_finite() {
        return Err(Error::NonFinite {
            what: "convergence reference".into(),
            point: p,
        });
    }
    let exact = reference.gradient();
    let f = |q: Point| field.expr.eval(&q);
    let err = |h: f64| {
        let g = fd_gradient(&f, p, h);
        (0..3).map(|i| (g[i] - exact[i]).abs()).fold(0.0, f64::max)
    };
    let scale = 1.0 + exact.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let coarse = err(CONVERGENCE_STEP);
    let fine = err(CONVERGENCE_STEP / 2.0);
    if fine < 1e-11 * scale || coarse < 1e-11 * scale {
        return Ok(ConvergenceOrder::Saturated);
    }
    Ok(ConvergenceOrder::Order((coarse / fine).log2()))
}
