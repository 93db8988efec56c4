//! Symmetries generated by pairs of Toda structures.

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::Serialize;

use super::system::{connection, parallel_jets, transport, PLANES};
use super::{TodaJet, TodaStructureField};
use crate::charts::{Point, Taylor};
use crate::error::{Error, Result};
use crate::weylgeom::geometry::{max_abs, vvalues};
use crate::weylgeom::hodge::{cross, epsilon};
use crate::weylgeom::killing::covariant_derivative;
use crate::weylgeom::{conformal_field_checks, ConformalFieldReport, VectorField, WeylStructure};

/// Below this norm the Wronskian counts as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Jets of the structure `s` at `q`, reached by transport along the straight
/// segment from its base point.
pub fn structure_jet(w: &WeylStructure, s: &TodaStructureField, q: Point, order: usize) -> Result<TodaJet> {
    let psi = if q == s.base {
        s.seed()
    } else {
        transport(w, &[s.base, q], &s.seed())?
    };
    let geo = w.geometry(q, (order + 1).max(2))?;
    parallel_jets(&connection(&geo), &psi, order)
}

/// `K = *(𝒳₁ ∧ 𝒳₂)` at `q`.
pub fn wronskian(
    w: &WeylStructure,
    s1: &TodaStructureField,
    s2: &TodaStructureField,
    q: Point,
) -> Result<Vector3<f64>> {
    let x1 = structure_jet(w, s1, q, 0)?.vector();
    let x2 = structure_jet(w, s2, q, 0)?.vector();
    Ok(cross(&w.metric(q)?, &x1, &x2, w.orientation()))
}

/// `K = *(𝒳₁ ∧ 𝒳₂)` as a vector field with jets. The pair is ordered so that
/// `K^axis > 0` at the base point of `s1` when `axis` is given.
pub fn wronskian_field(
    w: &WeylStructure,
    s1: &TodaStructureField,
    s2: &TodaStructureField,
    axis: Option<usize>,
) -> Result<VectorField> {
    let (mut a, mut b) = (*s1, *s2);
    if let Some(axis) = axis {
        if wronskian(w, &a, &b, a.base)?[axis] < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
    }
    let w = w.clone();
    Ok(VectorField::new(move |q, order| {
        let n = order.max(1);
        let j1 = structure_jet(&w, &a, q, n)?;
        let j2 = structure_jet(&w, &b, q, n)?;
        let geo = w.geometry(q, n + 1)?;
        let o = w.orientation();
        let lower: [Taylor; 3] = std::array::from_fn(|i| {
            let mut t = Taylor::zero(n);
            for c in 0..3 {
                for d in 0..3 {
                    let e = epsilon(i, c, d);
                    if e != 0.0 {
                        t += j1.x[c] * j2.x[d] * e;
                    }
                }
            }
            t * geo.sqrt_det.truncate(n) * o
        });
        Ok(std::array::from_fn(|a| {
            let mut t = Taylor::zero(n);
            for i in 0..3 {
                t += geo.ginv[a][i].truncate(n) * lower[i];
            }
            t.truncate(order)
        }))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxialReport {
    pub points: usize,
    /// Worst of each residual over the probes.
    pub checks: ConformalFieldReport,
    pub min_norm: f64,
    /// `max |K - K^axis ∂_axis| / |K|` when an axis is given.
    pub axis_deviation: Option<f64>,
    /// `K^axis > 0` at every probe.
    pub axis_positive: Option<bool>,
}

impl AxialReport {
    pub fn worst(&self) -> f64 {
        self.checks.worst()
    }
}

/// Divergence, twist, conformal-Killing and `ℒ_K D` checks on `K` over
/// `probes`, with alignment to the coordinate field `∂_axis`.
pub fn axial_symmetry_checks(
    w: &WeylStructure,
    k: &VectorField,
    probes: &[Point],
    axis: Option<usize>,
) -> Result<AxialReport> {
    let mut report = AxialReport {
        points: probes.len(),
        checks: ConformalFieldReport {
            divergence: 0.0,
            twist: 0.0,
            conformal_killing: 0.0,
            lie_connection: Some(0.0),
            lie_formula: Some(0.0),
        },
        min_norm: f64::INFINITY,
        axis_deviation: axis.map(|_| 0.0),
        axis_positive: axis.map(|_| true),
    };
    let mut max_norm = 0.0f64;
    for &p in probes {
        let geo = w.geometry(p, 3)?;
        let kj = k.jet(p, 2)?;
        let kv = vvalues(&kj);
        let norm = kv.dot(&(geo.metric() * kv)).sqrt();
        max_norm = max_norm.max(norm);
        report.min_norm = report.min_norm.min(norm);
        if norm <= DEGENERATE_NORM {
            continue;
        }
        let c = conformal_field_checks(&geo, &kj);
        let acc = &mut report.checks;
        acc.divergence = acc.divergence.max(c.divergence.abs());
        acc.twist = acc.twist.max(c.twist.abs());
        acc.conformal_killing = acc.conformal_killing.max(c.conformal_killing);
        acc.lie_connection = Some(acc.lie_connection.unwrap_or(0.0).max(c.lie_connection.unwrap_or(0.0)));
        acc.lie_formula = Some(acc.lie_formula.unwrap_or(0.0).max(c.lie_formula.unwrap_or(0.0)));
        if let Some(axis) = axis {
            let mut off = kv;
            off[axis] = 0.0;
            let dev = off.norm() / kv.norm();
            report.axis_deviation = report.axis_deviation.map(|d| d.max(dev));
            if kv[axis] <= 0.0 {
                report.axis_positive = Some(false);
            }
        }
    }
    if max_norm <= DEGENERATE_NORM {
        return Err(Error::Degenerate("degenerate pair: K vanishes at every probe".into()));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DStarReport {
    /// `max |DK - α△K|`.
    pub form_residual: f64,
    pub alpha: [f64; 3],
    /// `max |R*_ab P|` over coordinate planes, `P` the projection onto `K^⊥`.
    pub curvature: f64,
}

/// Curvature of `D*_X 𝒳 = D_X 𝒳 - α(𝒳) X` on weight-1/2 fields orthogonal
/// to `K`, where `DK = α△K` and `α(K) = 0`.
pub fn dstar_flatness(w: &WeylStructure, k: &VectorField, p: Point, form_tol: f64) -> Result<DStarReport> {
    let geo = w.geometry(p, 3)?;
    let kj = k.jet(p, 2)?;
    let dk = covariant_derivative(&geo, &kj);
    let klow: [Taylor; 3] = std::array::from_fn(|i| {
        let mut t = Taylor::zero(2);
        for j in 0..3 {
            t += geo.g[i][j].truncate(2) * kj[j];
        }
        t
    });
    let mut norm2 = Taylor::zero(2);
    for i in 0..3 {
        norm2 += kj[i] * klow[i];
    }
    if norm2.value() <= DEGENERATE_NORM * DEGENERATE_NORM {
        return Err(Error::Degenerate(format!("K vanishes at {p:?}")));
    }
    let inv = norm2.truncate(1).recip();
    let alpha_up: [Taylor; 3] = std::array::from_fn(|a| {
        let mut t = Taylor::zero(1);
        for i in 0..3 {
            t += dk[a][i] * kj[i].truncate(1);
        }
        -(t * inv)
    });
    let alpha: [Taylor; 3] = std::array::from_fn(|i| {
        let mut t = Taylor::zero(1);
        for j in 0..3 {
            t += geo.g[i][j].truncate(1) * alpha_up[j];
        }
        t
    });

    let kv = vvalues(&kj);
    let kl = vvalues(&klow);
    let au = vvalues(&alpha_up);
    let al = vvalues(&alpha);
    let model = Matrix3::from_fn(|a, i| al[i] * kv[a] - kl[i] * au[a]);
    let dkv = Matrix3::from_fn(|a, i| dk[a][i].value());
    let form_residual = max_abs(&(dkv - model));
    if form_residual > form_tol {
        return Err(Error::Precondition(format!(
            "DK is not of the form α△K at {p:?}: residual {form_residual:.3e} exceeds {form_tol:.1e}"
        )));
    }

    let astar: [[[Taylor; 3]; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|a| {
            std::array::from_fn(|j| {
                let mut t = geo.gamma[a][i][j].truncate(1);
                if a == j {
                    t += geo.omega[i].truncate(1) * -0.5;
                }
                if a == i {
                    t += -alpha[j];
                }
                t
            })
        })
    });
    let value = |m: &[[Taylor; 3]; 3]| Matrix3::from_fn(|r, c| m[r][c].value());
    let deriv = |m: &[[Taylor; 3]; 3], v: usize| Matrix3::from_fn(|r, c| m[r][c].derivative(v).value());
    let proj = Matrix3::identity() - kv * kl.transpose() / norm2.value();
    let mut curvature = 0.0f64;
    for (a, b) in PLANES {
        let r = deriv(&astar[b], a) - deriv(&astar[a], b) + value(&astar[a]) * value(&astar[b])
            - value(&astar[b]) * value(&astar[a]);
        curvature = curvature.max(max_abs(&(r * proj)));
    }
    Ok(DStarReport {
        form_residual,
        alpha: [al[0], al[1], al[2]],
        curvature,
    })
}

/// `max |ℒ_K 𝒳|` at `p` with `ℒ_K 𝒳 = [K, 𝒳] + (div_g K / 6) 𝒳`.
pub fn k_invariance(w: &WeylStructure, s: &TodaStructureField, k: &VectorField, p: Point) -> Result<f64> {
    let x = structure_jet(w, s, p, 1)?;
    let kj = k.jet(p, 1)?;
    let geo = w.geometry(p, 2)?;
    let log_vol = geo.sqrt_det.ln();
    let mut div = 0.0;
    for a in 0..3 {
        div += kj[a].derivative(a).value() + kj[a].value() * log_vol.derivative(a).value();
    }
    let xv = x.vector();
    let kv = vvalues(&kj);
    let lie = Vector3::from_fn(|a, _| {
        let mut r = div / 6.0 * xv[a];
        for b in 0..3 {
            r += kv[b] * x.x[a].derivative(b).value() - xv[b] * kj[a].derivative(b).value();
        }
        r
    });
    Ok(lie.amax())
}

/// Seed vector of `(𝒳, σ)`.
pub fn seed_of(x: Vector3<f64>, sigma: f64) -> Vector4<f64> {
    Vector4::new(x[0], x[1], x[2], sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::Chart;
    use crate::weylgeom::flat_with_one_form;

    fn flat() -> WeylStructure {
        flat_with_one_form(Chart::cartesian([(-2.0, 2.0); 3]).unwrap(), ["0", "0", "0"]).unwrap()
    }

    fn pair() -> (TodaStructureField, TodaStructureField) {
        let base = [0.0; 3];
        (
            TodaStructureField::from_seed(base, &seed_of(Vector3::z(), 0.0)),
            TodaStructureField::from_seed(base, &seed_of(Vector3::zeros(), 1.0)),
        )
    }

    #[test]
    fn flat_wronskian_is_rotation() {
        let w = flat();
        let (s1, s2) = pair();
        let p = [0.4, -0.3, 0.2];
        let k = wronskian(&w, &s1, &s2, p).unwrap();
        assert!((k - Vector3::new(0.3, 0.4, 0.0)).amax() < 1e-12);
        let field = wronskian_field(&w, &s1, &s2, None).unwrap();
        let probes = w.chart.sample_points(5, 3).unwrap();
        let rep = axial_symmetry_checks(&w, &field, &probes, None).unwrap();
        assert!(rep.worst() < 1e-10, "{rep:?}");
        let d = dstar_flatness(&w, &field, p, 1e-8).unwrap();
        assert!(d.form_residual < 1e-10 && d.curvature < 1e-10, "{d:?}");
        assert!(k_invariance(&w, &s1, &field, p).unwrap() < 1e-10);
        assert!(k_invariance(&w, &s2, &field, p).unwrap() < 1e-10);
    }

    #[test]
    fn equal_structures_are_degenerate() {
        let w = flat();
        let (s1, _) = pair();
        assert_eq!(wronskian(&w, &s1, &s1, [0.5, 0.1, 0.0]).unwrap(), Vector3::zeros());
        let field = wronskian_field(&w, &s1, &s1, None).unwrap();
        let probes = w.chart.sample_points(3, 3).unwrap();
        let err = axial_symmetry_checks(&w, &field, &probes, None).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn translation_is_not_a_rotation() {
        let w = flat();
        let k = VectorField::parse_analytic(&w.chart, ["0", "0", "1"]).unwrap();
        // DK = 0 is of the form α△K with α = 0
        let d = dstar_flatness(&w, &k, [0.1, 0.2, 0.3], 1e-8).unwrap();
        assert_eq!(d.curvature, 0.0);
        let dilation = VectorField::parse_analytic(&w.chart, ["x", "y", "z"]).unwrap();
        assert!(dstar_flatness(&w, &dilation, [0.1, 0.2, 0.3], 1e-8).is_err());
    }
}
