//! Axially symmetric harmonic profiles and Ward's Einstein-Weyl spaces.

pub mod catalog;

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::charts::expr::{Expr, Func};
use crate::charts::{Chart, Point, ScalarField, Taylor};
use crate::error::{Error, Result};
use crate::toda::TodaStructureField;
use crate::weylgeom::{gauge_transform, LocalWeyl, WeylSource, WeylStructure};

pub use catalog::{
    berger_lambda, catalog, closed_form_crosscheck, s2h2_quotient_check, CatalogEntry, ChartMap,
    QuotientResidual, LABELS,
};

/// Nodes per segment in [`lw_height`].
const HEIGHT_NODES: usize = 24;

/// An axially symmetric solution of `(ρ V_ρ)_ρ + ρ V_ηη = 0` on an
/// `(rho, eta, psi)` chart.
#[derive(Debug, Clone)]
pub struct HarmonicProfile {
    pub label: String,
    pub params: Vec<(String, f64)>,
    pub v: ScalarField,
    pub chart: Chart,
}

impl HarmonicProfile {
    pub fn new(label: &str, params: &[(&str, f64)], text: &str, chart: Chart) -> Result<Self> {
        let expr = chart.parse(text)?;
        Ok(HarmonicProfile {
            label: label.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            v: ScalarField::builtin(label, expr),
            chart,
        })
    }

    /// `V + k log ρ`.
    pub fn with_log_rho(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.v.expr = self.v.expr.clone() + Expr::call(Func::Log, Expr::var(0)) * k;
        out.params.push(("k".into(), k));
        out
    }

    /// `s A + t B` on the chart of `a`.
    pub fn combine(s: f64, a: &HarmonicProfile, t: f64, b: &HarmonicProfile) -> Self {
        let expr = a.v.expr.clone() * s + b.v.expr.clone() * t;
        let label = format!("{s}*{}+{t}*{}", a.label, b.label);
        HarmonicProfile {
            v: ScalarField::builtin(&label, expr),
            label,
            params: Vec::new(),
            chart: a.chart.clone(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    fn jet(&self, p: Point, order: usize) -> Result<Taylor> {
        self.chart.check(p)?;
        self.v.jet(p, order)
    }
}

/// `(ρ V_ρ)_ρ + ρ V_ηη`.
pub fn harmonic_residual(profile: &HarmonicProfile, p: Point) -> Result<f64> {
    let j = profile.jet(p, 2)?;
    let rho = p[0];
    Ok(j.partial([1, 0, 0]) + rho * (j.partial([2, 0, 0]) + j.partial([0, 2, 0])))
}

/// `v_ρρ + v_ηη + ρ^{-2} v / 4` with `v = ρ^{1/2} V`.
pub fn eigenfunction_residual(profile: &HarmonicProfile, p: Point) -> Result<f64> {
    let j = profile.jet(p, 2)?;
    let rho = Taylor::variable(0, p[0], 2);
    let v = rho.sqrt() * j;
    Ok(v.partial([2, 0, 0]) + v.partial([0, 2, 0]) + 0.25 * v.value() / (p[0] * p[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JoyceResidual {
    /// `max |g - (φ₁² + φ₂²)(dρ² + dη²)/ρ² - dψ²|`.
    pub metric: f64,
    /// `max |ω - ω_Φ|`.
    pub omega: f64,
}

/// Compares Ward's structure with its form in terms of `φ₁ = ρ V_η`,
/// `φ₂ = -ρ V_ρ`.
pub fn joyce_consistency(profile: &HarmonicProfile, p: Point) -> Result<JoyceResidual> {
    let j = profile.jet(p, 1)?;
    let rho = p[0];
    let [vr, ve, _] = j.gradient();
    let (f1, f2) = (rho * ve, -rho * vr);
    let n = f1 * f1 + f2 * f2;
    if !(n.sqrt() > profile.chart.singular_margin * rho) {
        return Err(Error::Degenerate(format!("|Φ| vanishes at {p:?}")));
    }
    let w = ward_build(profile)?;
    let local = w.local(p, 1)?;
    let g = local.metric();
    let om = local.one_form();
    let conf = n / (rho * rho);
    let mut metric = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let model = match (a, b) {
                (0, 0) | (1, 1) => conf,
                (2, 2) => 1.0,
                _ => 0.0,
            };
            metric = metric.max((g[(a, b)] - model).abs());
        }
    }
    let model = [
        -(f1 * f1 - f2 * f2) / (rho * n),
        -2.0 * f1 * f2 / (rho * n),
        0.0,
    ];
    let omega = (0..3).map(|i| (om[i] - model[i]).abs()).fold(0.0, f64::max);
    Ok(JoyceResidual { metric, omega })
}

/// `((V_ρ² + V_η²)(dρ² + dη²) + dψ², ((V_ρ² - V_η²) dρ + 2 V_ρ V_η dη)/(ρ(V_ρ² + V_η²)))`.
#[derive(Debug, Clone)]
pub struct WardSource {
    pub v: ScalarField,
}

impl WeylSource for WardSource {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        let n = order.max(1);
        let v = self.v.jet(p, n + 1)?;
        let (vr, ve) = (v.derivative(0), v.derivative(1));
        let s = vr * vr + ve * ve;
        let zero = Taylor::zero(n);
        let one = Taylor::constant(1.0, n);
        let g = [[s, zero, zero], [zero, s, zero], [zero, zero, one]];
        let rho = Taylor::variable(0, p[0], n);
        let denom = (rho * s).recip();
        let omega = [
            ((vr * vr - ve * ve) * denom).truncate(n - 1),
            (vr * ve * denom * 2.0).truncate(n - 1),
            Taylor::zero(n - 1),
        ];
        Ok(LocalWeyl { g, omega })
    }

    fn max_order(&self) -> usize {
        self.v.max_order() - 1
    }
}

/// Ward's Einstein-Weyl structure of a profile on its chart.
pub fn ward_build(profile: &HarmonicProfile) -> Result<WeylStructure> {
    if !profile.v.expr.uses_var(0) && !profile.v.expr.uses_var(1) {
        return Err(Error::Degenerate(format!(
            "profile `{}` is constant in (rho, eta)",
            profile.label
        )));
    }
    let source = WardSource {
        v: profile.v.clone(),
    };
    Ok(WeylStructure::new(
        profile.chart.clone(),
        Arc::new(source),
        &profile.label,
    ))
}

/// The LeBrun-Ward gauge: rescale by `ρ²`.
pub fn lw_gauge(w: &WeylStructure) -> WeylStructure {
    let f = ScalarField::builtin("log(rho)", Expr::call(Func::Log, Expr::var(0)));
    gauge_transform(w, f)
}

/// Integral of `ρ V_η dρ - ρ V_ρ dη` along a polyline, that is
/// `z(end) - z(start)` for the height coordinate of the LeBrun-Ward gauge.
pub fn lw_height(profile: &HarmonicProfile, path: &[Point]) -> Result<f64> {
    for &p in path {
        profile.chart.check(p)?;
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(HEIGHT_NODES).expect("nonzero"));
    let mut total = 0.0;
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let mut err = None;
        total += rule.integrate(0.0, 1.0, |t| {
            let q = [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]];
            match profile.v.jet(q, 1) {
                Ok(j) => {
                    let [vr, ve, _] = j.gradient();
                    q[0] * (ve * d[0] - vr * d[1])
                }
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(total)
}

/// The Toda structure of the LeBrun-Ward gauge at `p`, in the Ward gauge:
/// `𝒳 = ρ^{1/2} g_LW^{-1} dz`, `σ = ρ^{1/2} ω_LW(g_LW^{-1} dz)/2`.
pub fn ward_toda_structure(profile: &HarmonicProfile, p: Point) -> Result<TodaStructureField> {
    let j = profile.jet(p, 1)?;
    let [vr, ve, _] = j.gradient();
    let rho = p[0];
    let s = vr * vr + ve * ve;
    let root = rho.sqrt();
    Ok(TodaStructureField {
        base: p,
        x: [root * ve / (rho * s), -root * vr / (rho * s), 0.0],
        sigma: -root * ve / (rho * rho * s),
    })
}
