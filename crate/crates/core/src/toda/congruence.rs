//! Geodesic congruences and the passage between Toda congruences and
//! solutions of `D𝒳 = σ id`.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::TodaJet;
use crate::charts::taylor::{monomial, n_terms};
use crate::charts::{Point, Taylor};
use crate::error::{Error, Result};
use crate::weylgeom::geometry::Geometry;
use crate::weylgeom::{VectorField, WeylStructure};

/// Tolerance on `|⟨χ, χ⟩ - 1|`.
pub const UNIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CongruenceReport {
    pub divergence: f64,
    pub shear_norm: f64,
    pub twist_norm: f64,
    pub acceleration_norm: f64,
    pub tau: f64,
}

impl CongruenceReport {
    pub fn worst(&self) -> f64 {
        self.shear_norm
            .max(self.twist_norm)
            .max(self.acceleration_norm)
    }
}

/// `(Dχ)^k_i` for a vector field of weight `w` (given as twice the weight).
pub(crate) fn weighted_derivative(geo: &Geometry, v: &[Taylor; 3], twice_weight: i32) -> [[Taylor; 3]; 3] {
    let shift = twice_weight as f64 / 2.0 - 1.0;
    std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            let mut t = v[k].derivative(i) + geo.omega[i] * v[k] * shift;
            for j in 0..3 {
                t += geo.gamma[k][i][j] * v[j];
            }
            t
        })
    })
}

fn decompose(g: &Matrix3<f64>, chi: &Vector3<f64>, m: &Matrix3<f64>) -> CongruenceReport {
    let l = g.cholesky().expect("metric is positive definite").l();
    let lt = l.transpose();
    let lt_inv = lt.try_inverse().expect("Cholesky factor is invertible");
    let c = lt * chi;
    let mh = lt * m * lt_inv;
    let p = Matrix3::identity() - c * c.transpose();
    let n = p * mh * p;
    let divergence = m.trace();
    let sym = 0.5 * (n + n.transpose());
    let shear = sym - p * (n.trace() / 2.0);
    let twist = 0.5 * (n - n.transpose());
    CongruenceReport {
        divergence,
        shear_norm: shear.norm(),
        twist_norm: twist.norm(),
        acceleration_norm: (mh * c).norm(),
        tau: divergence / 2.0,
    }
}

/// Splits `Dχ` for a unit weightless vector field at `p`.
pub fn congruence_decompose(w: &WeylStructure, chi: &VectorField, p: Point) -> Result<CongruenceReport> {
    let geo = w.geometry(p, 2)?;
    let jet = chi.jet(p, 1)?;
    let g = geo.metric();
    let c = Vector3::new(jet[0].value(), jet[1].value(), jet[2].value());
    let norm = c.dot(&(g * c));
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::Precondition(format!(
            "congruence field is not unit at {p:?}: ⟨χ,χ⟩ = {norm}"
        )));
    }
    let m = weighted_derivative(&geo, &jet, 0);
    let mv = Matrix3::from_fn(|k, i| m[k][i].value());
    Ok(decompose(&g, &c, &mv))
}

/// Potential with value 0 at the expansion point whose gradient jet is
/// `theta` (assumed closed).
pub(crate) fn integrate_closed(theta: &[Taylor; 3], order: usize) -> Taylor {
    let mut coeffs = vec![0.0; n_terms(order)];
    for (idx, c) in coeffs.iter_mut().enumerate().skip(1) {
        let m = monomial(idx);
        let mut acc = 0.0;
        let mut count = 0.0;
        for i in 0..3 {
            if m[i] > 0 {
                let mut lower = m;
                lower[i] -= 1;
                acc += theta[i].coeff(lower) / m[i] as f64;
                count += 1.0;
            }
        }
        *c = acc / count;
    }
    Taylor::from_coeffs(&coeffs, order)
}

#[derive(Debug, Clone)]
pub struct Linearized {
    pub jet: TodaJet,
    pub congruence: CongruenceReport,
    /// `max |D𝒳 - σ id|` at the point.
    pub residual: f64,
}

/// `max |D𝒳 - σ id|` for a weight-1/2 jet.
pub fn linear_residual(geo: &Geometry, jet: &TodaJet) -> f64 {
    let dx = weighted_derivative(geo, &jet.x, 1);
    let s = jet.sigma.value();
    let mut worst = 0.0f64;
    for (k, row) in dx.iter().enumerate() {
        for (i, t) in row.iter().enumerate() {
            let r = t.value() - if k == i { s } else { 0.0 };
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Turns a Toda congruence into `(𝒳, σ) = (λ^{1/2} χ, λ^{1/2} τ)` with
/// `d log λ = 2τχ♭ - ω` and `λ(p) = 1`.
pub fn linearize(w: &WeylStructure, chi: &VectorField, p: Point, tol: f64) -> Result<Linearized> {
    let congruence = congruence_decompose(w, chi, p)?;
    if congruence.worst() > tol {
        return Err(Error::Precondition(format!(
            "not a Toda congruence at {p:?}: shear/twist/acceleration {:.3e} exceeds {tol:.1e}",
            congruence.worst()
        )));
    }
    let n = w.source.max_order().min(3);
    let k = n - 1;
    let geo = w.geometry(p, n)?;
    let c = chi.jet(p, k)?;
    let dc = weighted_derivative(&geo, &c, 0);
    let mut div = dc[0][0];
    div += dc[1][1];
    div += dc[2][2];
    let tau = div * 0.5;
    let theta: [Taylor; 3] = std::array::from_fn(|i| {
        let mut flat = Taylor::zero(k);
        for j in 0..3 {
            flat += geo.g[i][j] * c[j];
        }
        tau * flat * 2.0 - geo.omega[i]
    });
    let log_lambda = integrate_closed(&theta, k);
    let root = (log_lambda * 0.5).exp();
    let jet = TodaJet {
        x: c.map(|ci| root * ci),
        sigma: root * tau,
    };
    let residual = linear_residual(&geo, &jet);
    Ok(Linearized {
        jet,
        congruence,
        residual,
    })
}

/// `(χ, μ, τ)` from `(𝒳, σ)`: `μ = |𝒳|²`, `χ = μ^{-1/2} 𝒳`, `τ = μ^{-1/2} σ`.
pub fn delinearize(
    w: &WeylStructure,
    p: Point,
    x: &Vector3<f64>,
    sigma: f64,
) -> Result<(Vector3<f64>, f64, f64)> {
    let g = w.metric(p)?;
    let mu = x.dot(&(g * x));
    if !(mu > 0.0) {
        return Err(Error::Degenerate(format!("𝒳 vanishes at {p:?}")));
    }
    let r = mu.sqrt();
    Ok((x / r, mu, sigma / r))
}

/// Unit congruence `𝒳/|𝒳|` of a Toda jet, as jets.
pub fn congruence_of(geo: &Geometry, jet: &TodaJet) -> [Taylor; 3] {
    let mut norm2 = Taylor::zero(jet.x[0].order());
    for i in 0..3 {
        for j in 0..3 {
            norm2 += geo.g[i][j] * jet.x[i] * jet.x[j];
        }
    }
    let inv = norm2.sqrt().recip();
    jet.x.map(|x| x * inv)
}

/// Congruence report of the unit field `𝒳/|𝒳|`.
pub fn congruence_of_jet(geo: &Geometry, jet: &TodaJet) -> CongruenceReport {
    let c = congruence_of(geo, jet);
    let m = weighted_derivative(geo, &c, 0);
    let mv = Matrix3::from_fn(|k, i| m[k][i].value());
    let cv = Vector3::new(c[0].value(), c[1].value(), c[2].value());
    decompose(&geo.metric(), &cv, &mv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{Chart, ScalarField};
    use crate::toda::build_toda;
    use crate::weylgeom::flat_with_one_form;

    fn flat() -> WeylStructure {
        flat_with_one_form(Chart::cartesian([(-2.0, 2.0); 3]).unwrap(), ["0", "0", "0"]).unwrap()
    }

    #[test]
    fn parallel_congruence() {
        let w = flat();
        let chi = VectorField::parse_analytic(&w.chart, ["0", "0", "1"]).unwrap();
        let r = congruence_decompose(&w, &chi, [0.1, 0.2, 0.3]).unwrap();
        assert_eq!(r.worst(), 0.0);
        assert_eq!(r.tau, 0.0);
        let lin = linearize(&w, &chi, [0.1, 0.2, 0.3], 1e-9).unwrap();
        assert!((lin.jet.vector() - Vector3::z()).norm() < 1e-15);
        assert_eq!(lin.jet.sigma.value(), 0.0);
    }

    #[test]
    fn radial_congruence() {
        let w = flat();
        let r = "sqrt(x^2+y^2+z^2)";
        let chi = VectorField::parse_analytic(
            &w.chart,
            [&format!("x/{r}"), &format!("y/{r}"), &format!("z/{r}")],
        )
        .unwrap();
        let p = [0.6, -0.3, 1.2];
        let rep = congruence_decompose(&w, &chi, p).unwrap();
        let rad = (0.36f64 + 0.09 + 1.44).sqrt();
        assert!(rep.worst() < 1e-13);
        assert!((rep.tau - 1.0 / rad).abs() < 1e-13);
        let lin = linearize(&w, &chi, p, 1e-9).unwrap();
        assert!(lin.residual < 1e-13);
        // λ ∝ r² so 𝒳 = r ∂_r / r(p) and σ = 1 / r(p)
        let expect = Vector3::from(p) / rad;
        assert!((lin.jet.vector() - expect).norm() < 1e-13);
        assert!((lin.jet.sigma.value() - 1.0 / rad).abs() < 1e-13);
        let (c, mu, tau) = delinearize(&w, p, &lin.jet.vector(), lin.jet.sigma.value()).unwrap();
        assert!((mu - 1.0).abs() < 1e-13);
        assert!((tau - rep.tau).abs() < 1e-13);
        assert!((c - expect).norm() < 1e-13);
    }

    #[test]
    fn toda_ansatz_congruence() {
        let chart = Chart::cartesian([(-1.0, 1.0), (-1.0, 1.0), (0.5, 2.0)]).unwrap();
        let text = "log(z + 1) + 0.3*x*z - 0.2*y^2";
        let u = ScalarField::builtin("u", chart.parse(text).unwrap());
        let w = build_toda(chart.clone(), u.clone());
        let chi = VectorField::parse_analytic(&chart, ["0", "0", "1"]).unwrap();
        let p = [0.2, 0.4, 1.1];
        let rep = congruence_decompose(&w, &chi, p).unwrap();
        let uz = u.jet(p, 1).unwrap().partial([0, 0, 1]);
        assert!(rep.worst() < 1e-13);
        assert!((rep.tau + 0.5 * uz).abs() < 1e-13);
        let lin = linearize(&w, &chi, p, 1e-9).unwrap();
        assert!(lin.residual < 1e-12);
        assert!((lin.jet.sigma.value() + 0.5 * uz).abs() < 1e-13);
    }

    #[test]
    fn sheared_field_is_rejected() {
        let w = flat();
        let chi = VectorField::parse_analytic(&w.chart, ["sin(z)", "cos(z)", "0"]).unwrap();
        let rep = congruence_decompose(&w, &chi, [0.0, 0.0, 0.3]).unwrap();
        assert!(rep.twist_norm > 0.1);
        assert!(linearize(&w, &chi, [0.0, 0.0, 0.3], 1e-6).is_err());
        let not_unit = VectorField::parse_analytic(&w.chart, ["2", "0", "0"]).unwrap();
        assert!(congruence_decompose(&w, &not_unit, [0.0; 3]).is_err());
    }
}
