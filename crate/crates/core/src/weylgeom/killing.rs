//! Killing-gauge identities and checks for conformal symmetries.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::geometry::{max_abs, values, vvalues, Geometry, V3};
use super::hodge::epsilon;
use super::WeylStructure;
use crate::charts::{Point, Taylor};
use crate::error::{Error, Result};

/// Largest component of `ℒ_K g` for a vector field jet of order at least 1.
pub fn lie_metric(geo: &Geometry, k: &V3) -> Matrix3<f64> {
    let g = geo.metric();
    let kv = vvalues(k);
    Matrix3::from_fn(|i, j| {
        let mut r = 0.0;
        for m in 0..3 {
            r += kv[m] * geo.g[i][j].derivative(m).value()
                + g[(m, j)] * k[m].derivative(i).value()
                + g[(i, m)] * k[m].derivative(j).value();
        }
        r
    })
}

/// `max |ℒ_K g|` at `p` for the jet `k`.
pub fn killing_residual(geo: &Geometry, k: &V3) -> f64 {
    max_abs(&lie_metric(geo, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalFieldReport {
    /// `trace DK`.
    pub divergence: f64,
    /// `K♭ ∧ dK♭` as a scalar density, divided by `|K|²`.
    pub twist: f64,
    /// Trace-free part of `ℒ_K g`.
    pub conformal_killing: f64,
    /// `max |ℒ_K Γ^D|`; needs a second-order jet of `K`.
    pub lie_connection: Option<f64>,
    /// `|d trace DK + F(K, ·)|`; needs a second-order jet of `K`.
    pub lie_formula: Option<f64>,
}

impl ConformalFieldReport {
    pub fn worst(&self) -> f64 {
        [
            self.divergence.abs(),
            self.twist.abs(),
            self.conformal_killing,
            self.lie_connection.unwrap_or(0.0),
            self.lie_formula.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `(DK)^k_i = ∂_i K^k + Γ^k_ij K^j` for an honest vector field.
pub(crate) fn covariant_derivative(geo: &Geometry, k: &V3) -> [[Taylor; 3]; 3] {
    std::array::from_fn(|a| {
        std::array::from_fn(|i| {
            let mut t = k[a].derivative(i);
            for j in 0..3 {
                t += geo.gamma[a][i][j] * k[j];
            }
            t
        })
    })
}

/// Divergence, twist, conformal-Killing and connection-preservation checks
/// for an honest vector field `K` given by its jet at the geometry point.
pub fn conformal_field_checks(geo: &Geometry, k: &V3) -> ConformalFieldReport {
    let korder = k.iter().map(Taylor::order).min().unwrap_or(0);
    assert!(korder >= 1, "vector field jet must have order at least 1");
    let g = geo.metric();
    let kv = vvalues(k);
    let dk = covariant_derivative(geo, k);
    let dkv = values(&dk);
    let divergence = dkv.trace();

    let lowered = g * dkv;
    let sym = 0.5 * (lowered + lowered.transpose());
    let conformal_killing = max_abs(&(sym - g * (divergence / 3.0)));

    let kflat: V3 = std::array::from_fn(|i| {
        let mut t = Taylor::zero(korder.min(geo.order));
        for j in 0..3 {
            t += geo.g[i][j] * k[j];
        }
        t
    });
    let mut twist = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let e = epsilon(i, j, l);
                if e != 0.0 {
                    twist += e * kflat[i].value() * kflat[l].derivative(j).value();
                }
            }
        }
    }
    let norm2 = kv.dot(&(g * kv));
    twist /= geo.sqrt_det.value() * norm2.max(f64::MIN_POSITIVE);

    let (lie_connection, lie_formula) = if korder >= 2 {
        let f = geo.faraday_values();
        let mut trace = dk[0][0];
        trace += dk[1][1];
        trace += dk[2][2];
        let formula = Vector3::from_fn(|j, _| {
            let mut r = trace.derivative(j).value();
            for i in 0..3 {
                r += kv[i] * f[(i, j)];
            }
            r
        });
        let gm = geo.christoffel();
        let mut worst = 0.0f64;
        for a in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut r = k[a].derivative(i).derivative(j).value();
                    for m in 0..3 {
                        r += kv[m] * geo.dgamma[m][a][i][j].value()
                            - gm[m][i][j] * k[a].derivative(m).value()
                            + gm[a][m][j] * k[m].derivative(i).value()
                            + gm[a][i][m] * k[m].derivative(j).value();
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        (Some(worst), Some(formula.amax()))
    } else {
        (None, None)
    };

    ConformalFieldReport {
        divergence,
        twist,
        conformal_killing,
        lie_connection,
        lie_formula,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KillingStatus {
    /// `F = 0` at every probe: the identities hold as `0 = 0`.
    Degenerate,
    /// `⟨ω, *F⟩ ≠ 0`: the identities were checked and no symmetry is built.
    Checked,
    /// `⟨ω, *F⟩ ≈ 0` with `F ≠ 0`: the dual of `*F` was also checked.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KillingGaugeReport {
    pub status: KillingStatus,
    pub points: usize,
    pub killing_residual: f64,
    /// `max |D^g F - (scal/3) ω ∧ ⟨X, ·⟩|`.
    pub faraday_identity: f64,
    /// `max |Y - Y_closed_form|`.
    pub cotton_york_identity: f64,
    /// `max |⟨ω, *F⟩|`.
    pub omega_dot_star_f: f64,
    pub max_faraday: f64,
    /// Checks on the dual of `*F` when it is orthogonal to `ω`.
    pub symmetry: Option<ConformalFieldReport>,
}

/// Killing-gauge identity check at one point; returns
/// `(killing, faraday_identity, cotton_york_identity, ⟨ω,*F⟩, |F|, symmetry)`.
fn killing_point(
    w: &WeylStructure,
    p: Point,
    vanish: f64,
) -> Result<(f64, f64, f64, f64, f64, Option<ConformalFieldReport>)> {
    let order = w.source.max_order().min(4);
    let geo = w.geometry(p, order)?;
    let killing = killing_residual(&geo, &geo.omega_up);
    let g = geo.metric();
    let omega = geo.one_form();
    let f = geo.faraday_values();
    let s = geo.scal_value();

    let mut faraday_identity = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let mut r = geo.faraday[j][k].derivative(i).value();
                for m in 0..3 {
                    r -= geo.gamma_g[m][i][j].value() * f[(m, k)]
                        + geo.gamma_g[m][i][k].value() * f[(j, m)];
                }
                r -= s / 3.0 * (omega[j] * g[(i, k)] - omega[k] * g[(i, j)]);
                faraday_identity = faraday_identity.max(r.abs());
            }
        }
    }

    let y = geo.cotton_york()?;
    let sf = geo.star_faraday_form();
    let ginv = geo.inverse_metric();
    let dot = omega.dot(&(ginv * sf));
    let model = 1.5 * (omega * sf.transpose() + sf * omega.transpose()) - g * dot;
    let cy_identity = max_abs(&(y - model));
    let fmax = max_abs(&f);

    let symmetry = if dot.abs() < vanish && fmax > vanish && geo.order >= 3 {
        let sqrt_det = geo.sqrt_det;
        let o = geo.orientation;
        let kvec: V3 = std::array::from_fn(|a| {
            let mut t = Taylor::zero(geo.order - 2);
            for i in 0..3 {
                for j in 0..3 {
                    let e = epsilon(a, i, j);
                    if e != 0.0 {
                        t += geo.faraday[i][j] * (0.5 * e * o);
                    }
                }
            }
            t / sqrt_det
        });
        Some(conformal_field_checks(&geo, &kvec))
    } else {
        None
    };
    Ok((killing, faraday_identity, cy_identity, dot.abs(), fmax, symmetry))
}

/// Runs the Killing-gauge identities over `probes`. Fails with a
/// precondition error when `ω♯` is not Killing to within `gate`.
pub fn killing_gauge_checks(
    w: &WeylStructure,
    probes: &[Point],
    gate: f64,
    vanish: f64,
) -> Result<KillingGaugeReport> {
    if w.source.max_order() < 3 {
        return Err(Error::InsufficientOrder {
            needed: 3,
            available: w.source.max_order(),
        });
    }
    let mut report = KillingGaugeReport {
        status: KillingStatus::Degenerate,
        points: probes.len(),
        killing_residual: 0.0,
        faraday_identity: 0.0,
        cotton_york_identity: 0.0,
        omega_dot_star_f: 0.0,
        max_faraday: 0.0,
        symmetry: None,
    };
    let mut symmetric_everywhere = true;
    for &p in probes {
        let (killing, fi, cy, dot, fmax, sym) = killing_point(w, p, vanish)?;
        if killing > gate {
            return Err(Error::Precondition(format!(
                "ω not Killing-dual: |L g| = {killing:.3e} at {p:?} exceeds {gate:.1e}"
            )));
        }
        report.killing_residual = report.killing_residual.max(killing);
        report.faraday_identity = report.faraday_identity.max(fi);
        report.cotton_york_identity = report.cotton_york_identity.max(cy);
        report.omega_dot_star_f = report.omega_dot_star_f.max(dot);
        report.max_faraday = report.max_faraday.max(fmax);
        match (sym, &mut report.symmetry) {
            (Some(s), Some(acc)) => {
                acc.divergence = acc.divergence.abs().max(s.divergence.abs());
                acc.twist = acc.twist.abs().max(s.twist.abs());
                acc.conformal_killing = acc.conformal_killing.max(s.conformal_killing);
                acc.lie_connection = max_opt(acc.lie_connection, s.lie_connection);
                acc.lie_formula = max_opt(acc.lie_formula, s.lie_formula);
            }
            (Some(s), None) => report.symmetry = Some(s),
            (None, _) => symmetric_everywhere = false,
        }
    }
    report.status = if report.max_faraday <= vanish {
        KillingStatus::Degenerate
    } else if symmetric_everywhere && report.symmetry.is_some() {
        KillingStatus::Symmetric
    } else {
        report.symmetry = None;
        KillingStatus::Checked
    };
    Ok(report)
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.abs().max(y.abs())),
        (x, None) => x,
        (None, y) => y,
    }
}
