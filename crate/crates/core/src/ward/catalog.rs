//! Named Einstein-Weyl spaces with their closed forms and chart maps.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::{lw_gauge, ward_build, HarmonicProfile};
use crate::charts::expr::Expr;
use crate::charts::{Chart, Point, ScalarField, Taylor};
use crate::error::{Error, Result};
use crate::toda::build_toda;
use crate::weylgeom::geometry::max_abs;
use crate::weylgeom::{flat_with_one_form, LocalWeyl, WeylSource, WeylStructure};

pub const LABELS: [&str; 11] = [
    "flat",
    "hyperbolic",
    "round-sphere",
    "berger",
    "ward-logrho",
    "ward-eta",
    "ward-monopole",
    "taubnut",
    "eguchi-hanson-1",
    "eguchi-hanson-2",
    "s2h2-quotient",
];

/// Map from an entry's own chart to the `(rho, eta, psi)` chart.
#[derive(Debug, Clone)]
pub struct ChartMap {
    pub exprs: [Expr; 3],
}

impl ChartMap {
    fn parse(chart: &Chart, texts: [&str; 3]) -> Result<Self> {
        Ok(ChartMap {
            exprs: [chart.parse(texts[0])?, chart.parse(texts[1])?, chart.parse(texts[2])?],
        })
    }

    /// Image point and Jacobian `∂(ρ, η, ψ)/∂q`.
    pub fn apply(&self, q: Point) -> (Point, Matrix3<f64>) {
        let vars = Taylor::variables(q, 1);
        let img: [Taylor; 3] = std::array::from_fn(|i| self.exprs[i].eval(&vars));
        let jac = Matrix3::from_fn(|i, j| img[i].gradient()[j]);
        (img.map(|t| t.value()), jac)
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub label: String,
    pub params: Vec<(String, f64)>,
    pub profile: Option<HarmonicProfile>,
    /// The structure used by the checks.
    pub structure: WeylStructure,
    pub closed_form: Option<WeylStructure>,
    pub chart_map: Option<ChartMap>,
    /// Coordinate index of an axial Killing field `∂_axis`.
    pub axis: Option<usize>,
}

impl CatalogEntry {
    /// Replaces `V` with `V + k log ρ`; the closed form no longer applies.
    pub fn with_log_rho(&self, k: f64) -> Result<Self> {
        let profile = self
            .profile
            .as_ref()
            .ok_or_else(|| Error::InvalidParams(format!("`{}` has no harmonic profile", self.label)))?
            .with_log_rho(k);
        let mut out = self.clone();
        out.structure = ward_build(&profile)?;
        out.profile = Some(profile);
        out.closed_form = None;
        out.chart_map = None;
        out.params.push(("k".into(), k));
        Ok(out)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

struct Params<'a> {
    label: &'a str,
    given: &'a [(String, f64)],
    known: Vec<(&'static str, f64)>,
}

impl<'a> Params<'a> {
    fn new(label: &'a str, given: &'a [(String, f64)]) -> Result<Self> {
        for (k, v) in given {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("`{label}`: parameter {k} = {v}")));
            }
        }
        Ok(Params {
            label,
            given,
            known: Vec::new(),
        })
    }

    fn get(&mut self, name: &'static str, default: f64) -> f64 {
        let v = self
            .given
            .iter()
            .rev()
            .find(|(k, _)| k == name)
            .map_or(default, |(_, v)| *v);
        self.known.push((name, v));
        v
    }

    /// Rejects unknown names and returns the resolved list.
    fn finish(self) -> Result<Vec<(String, f64)>> {
        for (k, _) in self.given {
            if k != "k" && !self.known.iter().any(|(n, _)| n == k) {
                return Err(Error::InvalidParams(format!(
                    "`{}` has no parameter `{k}`",
                    self.label
                )));
            }
        }
        Ok(self.known.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

fn num(x: f64) -> String {
    format!("({x:?})")
}

fn builtin(chart: &Chart, label: &str, text: &str) -> Result<ScalarField> {
    Ok(ScalarField::builtin(label, chart.parse(text)?))
}

/// Diagonal metric and 1-form from expressions.
fn diagonal(chart: &Chart, label: &str, g: [&str; 3], omega: [&str; 3]) -> Result<WeylStructure> {
    let zero = builtin(chart, label, "0")?;
    let mut fields: [[ScalarField; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| zero.clone()));
    for i in 0..3 {
        fields[i][i] = builtin(chart, label, g[i])?;
    }
    let omega = [
        builtin(chart, label, omega[0])?,
        builtin(chart, label, omega[1])?,
        builtin(chart, label, omega[2])?,
    ];
    Ok(WeylStructure::from_components(chart.clone(), fields, omega, label))
}

fn axial_chart(eta: (f64, f64)) -> Result<Chart> {
    Chart::axial((0.2, 3.0), eta)
}

fn tn_chart() -> Result<Chart> {
    Chart::new("taubnut", ["r", "theta", "psi"], [(0.3, 3.0), (-1.2, 1.2), (0.0, 2.0 * PI)])?
        .with_locus("cos(theta)=0", "cos(theta)")
}

fn eh_chart(r: (f64, f64), eps2: f64) -> Result<Chart> {
    let chart = Chart::new(
        "eguchi-hanson",
        ["R", "theta", "psi"],
        [r, (0.2, PI - 0.2), (0.0, 2.0 * PI)],
    )?
    .with_locus("sin(theta)=0", "sin(theta)")?;
    if eps2 > 0.0 {
        chart.with_locus("R=1", "R - 1")
    } else {
        Ok(chart)
    }
}

fn taubnut_profile(a: f64, b: f64, c: f64) -> Result<HarmonicProfile> {
    let text = format!(
        "{}*log(rho) + {}*eta + {}*log((eta + sqrt(rho^2 + eta^2))/rho)",
        num(a),
        num(b),
        num(c)
    );
    HarmonicProfile::new("taubnut", &[("a", a), ("b", b), ("c", c)], &text, axial_chart((-2.0, 2.0))?)
}

/// Real form of the circle-of-charge potential in `(ρ, η)` through
/// `ρ = √(R² + 1) sin θ`, `η = R cos θ`.
fn eh1_profile(a: f64, b: f64, c: f64) -> Result<HarmonicProfile> {
    let s = "(rho^2 + eta^2 - 1)";
    let r2 = format!("(({s} + sqrt({s}^2 + 4*eta^2))/2)");
    let r = format!("sqrt({r2})");
    let cos = format!("(eta/{r})");
    let sin = format!("(rho/sqrt({r2} + 1))");
    let text = format!(
        "{}*log(rho) + {}*log((1 + {cos})/{sin}) - {}*atan(1/{r})",
        num(a),
        num(b),
        num(c)
    );
    HarmonicProfile::new("eguchi-hanson-1", &[("a", a), ("b", b), ("c", c)], &text, axial_chart((0.2, 2.5))?)
}

fn eh2_profile(a: f64, b: f64, c: f64) -> Result<HarmonicProfile> {
    let text = format!(
        "{}*log(rho) + {}*log((eta - 1 + sqrt(rho^2 + (eta - 1)^2))/rho) \
         + {}*log((eta + 1 + sqrt(rho^2 + (eta + 1)^2))/rho)",
        num(a),
        num(0.5 * (b + c)),
        num(0.5 * (b - c))
    );
    HarmonicProfile::new("eguchi-hanson-2", &[("a", a), ("b", b), ("c", c)], &text, axial_chart((-2.0, 2.0))?)
}

fn taubnut_closed(a: f64, b: f64, c: f64) -> Result<WeylStructure> {
    let chart = tn_chart()?;
    let (a, b, c) = (num(a), num(b), num(c));
    let q = format!("(({b}*r + {c})^2*cos(theta)^2 + ({a} - {c}*sin(theta))^2)");
    let k = format!("(-2*({b}*r + {c})/(r*{q}))");
    diagonal(
        &chart,
        "taubnut",
        [&q, &format!("r^2*{q}"), "r^2*cos(theta)^2"],
        [
            &format!("{k}*(-{a}*sin(theta) + {b}*r*cos(theta)^2 + {c})"),
            &format!("{k}*(-{a}*r*cos(theta) - {b}*r^2*cos(theta)*sin(theta))"),
            "0",
        ],
    )
}

fn eh_closed(label: &str, a: f64, b: f64, c: f64, eps2: f64, r: (f64, f64)) -> Result<WeylStructure> {
    let chart = eh_chart(r, eps2)?;
    let (a, b, c, e) = (num(a), num(b), num(c), num(eps2));
    let q = format!("(({a}*cos(theta) - {b})^2*(R^2 - {e}) + ({a}*R + {c})^2*sin(theta)^2)");
    let k = format!("(-2*({b}*R + {c}*cos(theta))/{q})");
    diagonal(
        &chart,
        label,
        [&format!("{q}/(R^2 - {e})"), &q, &format!("(R^2 - {e})*sin(theta)^2")],
        [
            &format!("{k}*(-{a}*cos(theta) + {b})"),
            &format!("{k}*({a}*R*sin(theta) + {c}*sin(theta))"),
            "0",
        ],
    )
}

fn berger_structure(chart: &Chart, a: f64, lambda: f64) -> Result<WeylStructure> {
    let label = "berger";
    let zero = builtin(chart, label, "0")?;
    let a2 = num(a * a);
    let mut g: [[ScalarField; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| zero.clone()));
    g[0][0] = builtin(chart, label, &a2)?;
    g[1][1] = builtin(chart, label, &format!("{a2}*sin(theta)^2 + cos(theta)^2"))?;
    g[1][2] = builtin(chart, label, "cos(theta)")?;
    g[2][1] = g[1][2].clone();
    g[2][2] = builtin(chart, label, "1")?;
    let l = num(lambda);
    let omega = [
        zero.clone(),
        builtin(chart, label, &format!("{l}*cos(theta)"))?,
        builtin(chart, label, &l)?,
    ];
    Ok(WeylStructure::from_components(chart.clone(), g, omega, label))
}

fn ew_norm(w: &WeylStructure, probes: &[Point]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &p in probes {
        worst = worst.max(max_abs(&w.geometry(p, 2)?.ew_residual()));
    }
    Ok(worst)
}

/// `λ ≥ 0` making `σ₁² + a²(σ₂² + σ₃²)` with `ω = λσ₁` Einstein-Weyl, found by
/// golden-section minimization of the sampled residual.
pub fn berger_lambda(a: f64) -> Result<f64> {
    if !(a >= 1.0) {
        return Err(Error::InvalidParams(format!(
            "berger: a = {a} must be at least 1 (no Einstein-Weyl ω = λσ₁ otherwise)"
        )));
    }
    let chart = Chart::euler()?;
    let probes = chart.sample_points(4, 0)?;
    let f = |l: f64| -> Result<f64> { ew_norm(&berger_structure(&chart, a, l)?, &probes) };
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv * (hi - lo);
    let mut x2 = lo + inv * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > 1e-14 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quotient of `dR²/(R²+1) + (R²+1) ds² + dθ² + sin²θ dφ²` by
/// `K = b ∂_s + c ∂_φ`: metric `h = (g - K♭²/|K|²)/|K|²` and
/// `ω = -*_h d(K♭/|K|²)` in coordinates `(R, θ, ψ)`, `ψ = bφ - cs`.
#[derive(Debug, Clone, Copy)]
pub struct QuotientSource {
    pub b: f64,
    pub c: f64,
}

impl WeylSource for QuotientSource {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        let n = order.max(1);
        let (b, c) = (self.b, self.c);
        let d = b * b + c * c;
        let [r, th, _] = Taylor::variables(p, n);
        let gss = r * r + 1.0;
        let gpp = th.sin() * th.sin();
        // ∂_ψ = (-c ∂_s + b ∂_φ)/d
        let kk = gss * (b * b) + gpp * (c * c);
        let kpsi = (gss * (-b * c) + gpp * (b * c)) / d;
        let psipsi = (gss * (c * c) + gpp * (b * b)) / (d * d);
        let quot = psipsi - kpsi * kpsi / kk;
        let theta = kpsi / kk;
        let inv = kk.recip();
        let zero = Taylor::zero(n);
        let h = [
            [gss.recip() * inv, zero, zero],
            [zero, inv, zero],
            [zero, zero, quot * inv],
        ];
        // dΘ = Θ_R dR∧dψ + Θ_θ dθ∧dψ
        let m = n - 1;
        let hm = h.map(|row| row.map(|t| t.truncate(m)));
        let det = hm[0][0] * hm[1][1] * hm[2][2];
        let root = det.sqrt();
        let up = [theta.derivative(1) / root, -theta.derivative(0) / root];
        let omega = [-(hm[0][0] * up[0]), -(hm[1][1] * up[1]), Taylor::zero(m)];
        Ok(LocalWeyl { g: h, omega })
    }

    fn max_order(&self) -> usize {
        crate::charts::taylor::MAX_ORDER
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotientResidual {
    /// Trace-free part of `h^{-1} g_LW`, relative to its trace.
    pub conformal: f64,
    /// `|ω_LW - (ω_h - d log λ / 2)|` with `g_LW = λ h`.
    pub omega: f64,
}

/// Compares the quotient structure with the Eguchi-Hanson I (`a = 0`)
/// closed form at `p = (R, θ, ψ)`.
pub fn s2h2_quotient_check(b: f64, c: f64, p: Point) -> Result<QuotientResidual> {
    if b == 0.0 && c == 0.0 {
        return Err(Error::InvalidParams("s2h2-quotient: b = c = 0".into()));
    }
    let quotient = QuotientSource { b, c };
    let eh = eh_closed("eguchi-hanson-1", 0.0, b, c, -1.0, (0.2, 3.0))?;
    let lw = eh.local(p, 2)?;
    let h = quotient.local(p, 2)?;
    let hv = h.metric();
    let ratio = hv.try_inverse().ok_or_else(|| Error::Degenerate("quotient metric".into()))? * lw.metric();
    let lambda = ratio.trace() / 3.0;
    let conformal = max_abs(&(ratio - Matrix3::identity() * lambda)) / lambda.abs();
    // λ as a jet from the (0,0) components
    let lam = lw.g[0][0] / h.g[0][0];
    let dlog = Vector3::from_fn(|i, _| lam.derivative(i).value() / lam.value());
    let model = h.one_form() - dlog * 0.5;
    let omega = (lw.one_form() - model).amax();
    Ok(QuotientResidual { conformal, omega })
}

/// Pushes Ward's structure through the chart map and the LeBrun-Ward gauge
/// and compares it with the closed form at `p` (a point of the entry chart).
pub fn closed_form_crosscheck(entry: &CatalogEntry, p: Point) -> Result<f64> {
    let (profile, closed, map) = match (&entry.profile, &entry.closed_form, &entry.chart_map) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::Precondition(format!(
                "`{}` lacks a profile, closed form or chart map",
                entry.label
            )))
        }
    };
    let (q, jac) = map.apply(p);
    if !(jac.determinant().abs() > 1e-12) {
        return Err(Error::Degenerate(format!("chart map Jacobian is singular at {p:?}")));
    }
    let mut wide = profile.clone();
    wide.chart = Chart::axial((1e-6, 1e6), (-1e6, 1e6))?.with_margin(1e-6)?;
    let lw = lw_gauge(&ward_build(&wide)?);
    let pushed = lw.local(q, 1)?;
    let g = jac.transpose() * pushed.metric() * jac;
    let omega = jac.transpose() * pushed.one_form();
    let own = closed.local(p, 1)?;
    Ok(max_abs(&(g - own.metric())).max((omega - own.one_form()).amax()))
}

/// Builds a catalog entry. Unknown labels and parameters are rejected; a
/// parameter `k` on profile entries adds `k log ρ` to the potential.
pub fn catalog(label: &str, params: &[(String, f64)]) -> Result<CatalogEntry> {
    let mut ps = Params::new(label, params)?;
    let plain = |structure: WeylStructure, axis| CatalogEntry {
        label: label.to_string(),
        params: Vec::new(),
        profile: None,
        structure,
        closed_form: None,
        chart_map: None,
        axis,
    };
    let mut entry = match label {
        "flat" => {
            let profile = HarmonicProfile::new("flat", &[], "log(rho)", axial_chart((-2.0, 2.0))?)?;
            let cyl = axial_chart((-2.0, 2.0))?;
            let closed = diagonal(&cyl, "flat", ["1", "1", "rho^2"], ["0", "0", "0"])?;
            let structure = flat_with_one_form(Chart::cartesian([(-1.0, 1.0); 3])?, ["0", "0", "0"])?;
            CatalogEntry {
                chart_map: Some(ChartMap::parse(&cyl, ["rho", "eta", "psi"])?),
                profile: Some(profile),
                closed_form: Some(closed),
                ..plain(structure, None)
            }
        }
        "hyperbolic" => {
            let chart = Chart::cartesian([(-1.0, 1.0), (-1.0, 1.0), (0.5, 2.0)])?;
            let u = builtin(&chart, "hyperbolic", "log(z)")?;
            plain(build_toda(chart, u), None)
        }
        "round-sphere" => plain(berger_structure(&Chart::euler()?, 1.0, 0.0)?, None),
        "berger" => {
            let a = ps.get("a", 1.5);
            let lambda = berger_lambda(a)?;
            let mut e = plain(berger_structure(&Chart::euler()?, a, lambda)?, None);
            e.params.push(("lambda".into(), lambda));
            e
        }
        "ward-logrho" | "ward-eta" | "ward-monopole" => {
            let chart = axial_chart((-2.0, 2.0))?;
            let (text, params) = match label {
                "ward-logrho" => ("log(rho)".to_string(), vec![]),
                "ward-eta" => {
                    let b = ps.get("b", 1.0);
                    (format!("{}*eta", num(b)), vec![("b", b)])
                }
                _ => {
                    let c = ps.get("c", 1.0);
                    (format!("{}/sqrt(rho^2 + eta^2)", num(c)), vec![("c", c)])
                }
            };
            let profile = HarmonicProfile::new(label, &params, &text, chart.clone())?;
            let structure = ward_build(&profile)?;
            let mut e = CatalogEntry {
                profile: Some(profile),
                ..plain(structure, Some(2))
            };
            if label == "ward-logrho" {
                e.closed_form = Some(diagonal(&chart, label, ["1", "1", "rho^2"], ["0", "0", "0"])?);
                e.chart_map = Some(ChartMap::parse(&chart, ["rho", "eta", "psi"])?);
            }
            e
        }
        "taubnut" => {
            let (a, b, c) = (ps.get("a", 1.0), ps.get("b", 1.0), ps.get("c", 1.0));
            let profile = taubnut_profile(a, b, c)?;
            let closed = taubnut_closed(a, b, c)?;
            CatalogEntry {
                chart_map: Some(ChartMap::parse(&closed.chart, ["r*cos(theta)", "r*sin(theta)", "psi"])?),
                structure: ward_build(&profile)?,
                profile: Some(profile),
                closed_form: Some(closed),
                ..plain(flat_placeholder()?, Some(2))
            }
        }
        "eguchi-hanson-1" | "eguchi-hanson-2" => {
            let eps2 = if label.ends_with('1') { -1.0 } else { 1.0 };
            let given = ps.get("eps2", eps2);
            if given != eps2 {
                return Err(Error::InvalidParams(format!("{label} requires eps2 = {eps2}")));
            }
            let default = if eps2 < 0.0 { (0.0, 1.0, 1.0) } else { (1.0, 1.0, 1.0) };
            let (a, b, c) = (ps.get("a", default.0), ps.get("b", default.1), ps.get("c", default.2));
            let rmin = ps.get("rmin", if eps2 < 0.0 { 0.2 } else { 1.2 });
            let margin = crate::charts::DEFAULT_MARGIN;
            if eps2 > 0.0 && rmin <= 1.0 + margin {
                return Err(Error::InvalidParams(format!(
                    "{label}: rmin = {rmin} must exceed 1 + {margin}"
                )));
            }
            if !(rmin > 0.0 && rmin < 3.0) {
                return Err(Error::InvalidParams(format!("{label}: rmin = {rmin} outside (0, 3)")));
            }
            let profile = if eps2 < 0.0 { eh1_profile(a, b, c)? } else { eh2_profile(a, b, c)? };
            let closed = eh_closed(label, a, b, c, eps2, (rmin, 3.0))?;
            let map = ChartMap::parse(
                &closed.chart,
                [&format!("sqrt(R^2 - {})*sin(theta)", num(eps2)), "R*cos(theta)", "psi"],
            )?;
            CatalogEntry {
                chart_map: Some(map),
                structure: ward_build(&profile)?,
                profile: Some(profile),
                closed_form: Some(closed),
                ..plain(flat_placeholder()?, Some(2))
            }
        }
        "s2h2-quotient" => {
            let (b, c) = (ps.get("b", 1.0), ps.get("c", 1.0));
            if b == 0.0 && c == 0.0 {
                return Err(Error::InvalidParams("s2h2-quotient: b = c = 0".into()));
            }
            let chart = eh_chart((0.2, 3.0), -1.0)?;
            let structure = WeylStructure::new(chart, Arc::new(QuotientSource { b, c }), label);
            plain(structure, Some(2))
        }
        _ => return Err(Error::UnknownLabel(label.to_string())),
    };
    let extra = entry.params.clone();
    entry.params = ps.finish()?;
    entry.params.extend(extra);
    if let Some(k) = params.iter().rev().find(|(n, _)| n == "k").map(|(_, v)| *v) {
        entry = entry.with_log_rho(k)?;
    }
    Ok(entry)
}

fn flat_placeholder() -> Result<WeylStructure> {
    flat_with_one_form(Chart::cartesian([(-1.0, 1.0); 3])?, ["0", "0", "0"])
}
