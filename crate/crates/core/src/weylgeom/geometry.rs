//! Local Weyl geometry in Taylor arithmetic.
//!
//! Index conventions: `Γ[k][i][j] = Γ^k_ij` with `D_{∂_i} ∂_j = Γ^k_ij ∂_k`,
//! `R(∂_i, ∂_j)∂_k = R^l_ijk ∂_l`, `Ric_jk = R^i_ijk`, `F_ij = ∂_i ω_j - ∂_j ω_i`.
//! A vector of weight `w` has `D_i X^k = ∂_i X^k + Γ^k_ij X^j + (w - 1) ω_i X^k`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::Serialize;

use super::hodge::{epsilon, star_two_form_vector};
use super::weight::{Kind, Weight, Weighted};
use super::{LocalWeyl, WeylStructure};
use crate::charts::{Point, Taylor};
use crate::error::{Error, Result};

pub type Christoffel = [[[f64; 3]; 3]; 3];

pub(crate) type V3 = [Taylor; 3];
pub(crate) type M3 = [[Taylor; 3]; 3];
pub(crate) type C3 = [[[Taylor; 3]; 3]; 3];

fn from_fn3<T>(mut f: impl FnMut(usize) -> T) -> [T; 3] {
    [f(0), f(1), f(2)]
}

/// Inverse and determinant of a symmetric 3×3 Taylor matrix.
pub(crate) fn inverse(g: &M3) -> (M3, Taylor) {
    let cof = |i: usize, j: usize| {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        let (c, d) = ((j + 1) % 3, (j + 2) % 3);
        g[a][c] * g[b][d] - g[a][d] * g[b][c]
    };
    let det = g[0][0] * cof(0, 0) + g[0][1] * cof(0, 1) + g[0][2] * cof(0, 2);
    let rdet = det.recip();
    let inv = from_fn3(|i| from_fn3(|j| cof(j, i) * rdet));
    (inv, det)
}

pub(crate) fn values(m: &M3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j].value())
}

pub(crate) fn vvalues(v: &V3) -> Vector3<f64> {
    Vector3::from_fn(|i, _| v[i].value())
}

pub(crate) fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    from_fn3(|i| from_fn3(|j| m[(i, j)]))
}

pub(crate) fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// All local invariants of a Weyl structure at a point. With `g` known to
/// order `n`, the connection is known to order `n - 1` and the curvature
/// quantities to order `n - 2`.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub point: Point,
    pub order: usize,
    pub orientation: f64,
    pub g: M3,
    pub ginv: M3,
    pub sqrt_det: Taylor,
    pub omega: V3,
    pub omega_up: V3,
    pub gamma_g: C3,
    pub gamma: C3,
    /// `dgamma[a][k][i][j] = ∂_a Γ^k_ij`.
    pub dgamma: [C3; 3],
    /// `Ric_jk`, not symmetrized.
    pub ricci: M3,
    pub faraday: M3,
    pub scal: Taylor,
}

impl Geometry {
    pub fn new(local: &LocalWeyl, point: Point, orientation: f64) -> Result<Self> {
        let n = local.g.iter().flatten().map(Taylor::order).min().unwrap_or(0);
        let wn = local.omega.iter().map(Taylor::order).min().unwrap_or(0);
        if n < 2 {
            return Err(Error::InsufficientOrder {
                needed: 2,
                available: n,
            });
        }
        if wn + 1 < n {
            return Err(Error::InsufficientOrder {
                needed: n - 1,
                available: wn,
            });
        }
        let g = local.g.map(|r| r.map(|t| t.truncate(n)));
        let omega = local.omega.map(|t| t.truncate(n - 1));
        let gv = values(&g);
        let min_eigenvalue = SymmetricEigen::new(gv).eigenvalues.min();
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite {
                point,
                min_eigenvalue,
            });
        }
        let (ginv, det) = inverse(&g);
        let sqrt_det = det.sqrt();
        let dg: [M3; 3] = from_fn3(|a| g.map(|r| r.map(|t| t.derivative(a))));
        let gamma_g: C3 = from_fn3(|k| {
            from_fn3(|i| {
                from_fn3(|j| {
                    let mut acc = Taylor::zero(n - 1);
                    for l in 0..3 {
                        acc += ginv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                    }
                    acc * 0.5
                })
            })
        });
        let omega_up: V3 = from_fn3(|k| {
            let mut acc = Taylor::zero(n - 1);
            for l in 0..3 {
                acc += ginv[k][l] * omega[l];
            }
            acc
        });
        let gamma: C3 = from_fn3(|k| {
            from_fn3(|i| {
                from_fn3(|j| {
                    let mut t = gamma_g[k][i][j] - g[i][j] * omega_up[k];
                    if k == i {
                        t += omega[j];
                    }
                    if k == j {
                        t += omega[i];
                    }
                    t
                })
            })
        });
        let dgamma: [C3; 3] =
            from_fn3(|a| gamma.map(|m| m.map(|r| r.map(|t| t.derivative(a)))));
        let ricci: M3 = from_fn3(|j| {
            from_fn3(|k| {
                let mut acc = Taylor::zero(n - 2);
                for i in 0..3 {
                    acc += dgamma[i][i][j][k] - dgamma[j][i][i][k];
                    for m in 0..3 {
                        acc += gamma[i][i][m] * gamma[m][j][k] - gamma[i][j][m] * gamma[m][i][k];
                    }
                }
                acc
            })
        });
        let faraday: M3 = from_fn3(|i| {
            from_fn3(|j| omega[j].derivative(i) - omega[i].derivative(j))
        });
        let mut scal = Taylor::zero(n - 2);
        for j in 0..3 {
            for k in 0..3 {
                scal += ginv[j][k] * ricci[j][k];
            }
        }
        Ok(Geometry {
            point,
            order: n,
            orientation,
            g,
            ginv,
            sqrt_det,
            omega,
            omega_up,
            gamma_g,
            gamma,
            dgamma,
            ricci,
            faraday,
            scal,
        })
    }

    fn require(&self, order: usize) -> Result<()> {
        if self.order < order {
            return Err(Error::InsufficientOrder {
                needed: order,
                available: self.order,
            });
        }
        Ok(())
    }

    pub fn metric(&self) -> Matrix3<f64> {
        values(&self.g)
    }

    pub fn inverse_metric(&self) -> Matrix3<f64> {
        values(&self.ginv)
    }

    pub fn one_form(&self) -> Vector3<f64> {
        vvalues(&self.omega)
    }

    pub fn christoffel(&self) -> Christoffel {
        self.gamma.map(|m| m.map(|r| r.map(|t| t.value())))
    }

    pub fn ricci_values(&self) -> Matrix3<f64> {
        values(&self.ricci)
    }

    pub fn faraday_values(&self) -> Matrix3<f64> {
        values(&self.faraday)
    }

    pub fn scal_value(&self) -> f64 {
        self.scal.value()
    }

    /// `∂_i g_jk - Γ^m_ij g_mk - Γ^m_ik g_jm + 2 ω_i g_jk`, maximum over all
    /// components.
    pub fn metricity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut r = self.g[j][k].derivative(i).value()
                        + 2.0 * self.omega[i].value() * self.g[j][k].value();
                    for m in 0..3 {
                        r -= self.gamma[m][i][j].value() * self.g[m][k].value()
                            + self.gamma[m][i][k].value() * self.g[j][m].value();
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// Symmetric trace-free part of the Ricci tensor.
    pub fn ew_residual(&self) -> Matrix3<f64> {
        let ric = self.ricci_values();
        let sym = 0.5 * (ric + ric.transpose());
        sym - self.metric() * (self.scal_value() / 3.0)
    }

    /// `R(∂_i, ∂_j)` on honest vectors, as `[i][j]` endomorphisms with entry
    /// `(l, k) = R^l_ijk`.
    pub fn riemann(&self) -> [[Matrix3<f64>; 3]; 3] {
        let gm = self.christoffel();
        from_fn3(|i| {
            from_fn3(|j| {
                Matrix3::from_fn(|l, k| {
                    let mut r = self.dgamma[i][l][j][k].value() - self.dgamma[j][l][i][k].value();
                    for m in 0..3 {
                        r += gm[l][i][m] * gm[m][j][k] - gm[l][j][m] * gm[m][i][k];
                    }
                    r
                })
            })
        })
    }

    /// Curvature of `D` on vectors of weight `w`.
    pub fn weighted_curvature(&self, w: Weight) -> [[Matrix3<f64>; 3]; 3] {
        let riem = self.riemann();
        let f = self.faraday_values();
        let shift = w.value() - 1.0;
        from_fn3(|i| from_fn3(|j| riem[i][j] + Matrix3::identity() * (shift * f[(i, j)])))
    }

    /// Right-hand side of the Einstein-Weyl curvature decomposition on
    /// weight-1/2 vectors, in the same layout as [`Geometry::riemann`].
    pub fn ewcurv_model(&self) -> [[Matrix3<f64>; 3]; 3] {
        let g = self.metric();
        let ginv = self.inverse_metric();
        let f = self.faraday_values();
        let s = self.scal_value();
        // fup[(i, l)] = (F(∂_i, ·)♯)^l
        let fup = f * ginv;
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        from_fn3(|i| {
            from_fn3(|j| {
                Matrix3::from_fn(|l, k| {
                    -s / 6.0 * (g[(i, k)] * d(l, j) - g[(j, k)] * d(l, i))
                        + 0.5 * (f[(i, k)] * d(l, j) - g[(j, k)] * fup[(i, l)])
                        - 0.5 * (f[(j, k)] * d(l, i) - g[(i, k)] * fup[(j, l)])
                        + 0.5 * f[(i, j)] * d(l, k)
                })
            })
        })
    }

    pub fn ewcurv_residual(&self) -> f64 {
        let lhs = self.weighted_curvature(Weight(1));
        let rhs = self.ewcurv_model();
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max(max_abs(&(lhs[i][j] - rhs[i][j])));
            }
        }
        worst
    }

    /// `*F` as a vector.
    pub fn star_faraday_vector(&self) -> Vector3<f64> {
        star_two_form_vector(&self.metric(), &self.faraday_values(), self.orientation)
    }

    /// `*F` as a 1-form.
    pub fn star_faraday_form(&self) -> Vector3<f64> {
        self.metric() * self.star_faraday_vector()
    }

    /// Cyclic sum `∂_i F_jk + ∂_j F_ki + ∂_k F_ij` for `(i, j, k) = (0, 1, 2)`.
    pub fn faraday_closedness(&self) -> Result<f64> {
        self.require(3)?;
        let d = |i: usize, j: usize, k: usize| self.faraday[j][k].derivative(i).value();
        Ok((d(0, 1, 2) + d(1, 2, 0) + d(2, 0, 1)).abs())
    }

    /// `(D_i F)_jk` as `[i]` matrices.
    pub fn faraday_derivative(&self) -> Result<[Matrix3<f64>; 3]> {
        self.require(3)?;
        let gm = self.christoffel();
        let f = self.faraday_values();
        Ok(from_fn3(|i| {
            Matrix3::from_fn(|j, k| {
                let mut r = self.faraday[j][k].derivative(i).value();
                for m in 0..3 {
                    r -= gm[m][i][j] * f[(m, k)] + gm[m][i][k] * f[(j, m)];
                }
                r
            })
        }))
    }

    /// `D scal = d scal - 2 scal ω`.
    pub fn scal_derivative(&self) -> Result<Vector3<f64>> {
        self.require(3)?;
        let s = self.scal_value();
        Ok(Vector3::from_fn(|i, _| {
            self.scal.derivative(i).value() - 2.0 * self.omega[i].value() * s
        }))
    }

    /// `C[i][(j, k)] = (D_i F)_jk - (D_j F)_ik + (g_ik D_j s - g_jk D_i s)/6`.
    pub fn cotton(&self) -> Result<[Matrix3<f64>; 3]> {
        let df = self.faraday_derivative()?;
        let ds = self.scal_derivative()?;
        let g = self.metric();
        Ok(from_fn3(|i| {
            Matrix3::from_fn(|j, k| {
                df[i][(j, k)] - df[j][(i, k)] + (g[(i, k)] * ds[j] - g[(j, k)] * ds[i]) / 6.0
            })
        }))
    }

    /// `Y(U, V) = ⟨*(C(·,·)U), V⟩` before symmetrization.
    pub fn cotton_york_raw(&self) -> Result<Matrix3<f64>> {
        let c = self.cotton()?;
        let g = self.metric();
        let o = self.orientation;
        let sqrt_det = self.sqrt_det.value();
        // star of the 2-form (i, j) -> C_ijk, as a vector, then lowered
        Ok(Matrix3::from_fn(|k, l| {
            let mut acc = 0.0;
            for m in 0..3 {
                let mut star = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        star += epsilon(m, i, j) * c[i][(j, k)];
                    }
                }
                acc += g[(l, m)] * star;
            }
            o * 0.5 * acc / sqrt_det
        }))
    }

    pub fn cotton_york(&self) -> Result<Matrix3<f64>> {
        let y = self.cotton_york_raw()?;
        Ok(0.5 * (y + y.transpose()))
    }

    /// `(*D scal)(X, ·)` as a 1-form.
    pub fn star_dscal_contract(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        let ds = self.scal_derivative()?;
        let star = super::hodge::star_one_form(&self.metric(), &ds, self.orientation);
        Ok(star.transpose() * x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub point: Point,
    pub ew_residual: [[f64; 3]; 3],
    pub faraday: [[f64; 3]; 3],
    pub scal: f64,
    pub cotton_york: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EwcurvOutcome {
    Residual(f64),
    /// The structure is not Einstein-Weyl at the point.
    Inapplicable { ew_residual: f64 },
}

/// Connection coefficients `Γ^D`.
pub fn weyl_connection(w: &WeylStructure, p: Point) -> Result<Christoffel> {
    Ok(w.geometry(p, 2)?.christoffel())
}

pub fn metricity_residual(w: &WeylStructure, p: Point) -> Result<f64> {
    Ok(w.geometry(p, 2)?.metricity_residual())
}

pub fn ew_residual(w: &WeylStructure, p: Point) -> Result<Matrix3<f64>> {
    Ok(w.geometry(p, 2)?.ew_residual())
}

pub fn faraday(w: &WeylStructure, p: Point) -> Result<Matrix3<f64>> {
    Ok(w.geometry(p, 2)?.faraday_values())
}

/// `*F` as a weight −2 vector representative.
pub fn star_faraday(w: &WeylStructure, p: Point) -> Result<Weighted> {
    let v = w.geometry(p, 2)?.star_faraday_vector();
    Ok(Weighted::new(Weight(-4), Kind::Vector, v.iter().copied().collect()))
}

/// Scalar curvature, the weight −2 representative in the chart gauge.
pub fn scal_weyl(w: &WeylStructure, p: Point) -> Result<f64> {
    Ok(w.geometry(p, 2)?.scal_value())
}

pub fn weighted_curvature(
    w: &WeylStructure,
    p: Point,
    weight: Weight,
) -> Result<[[Matrix3<f64>; 3]; 3]> {
    Ok(w.geometry(p, 2)?.weighted_curvature(weight))
}

/// Residual of the curvature decomposition on weight-1/2 vectors, gated on
/// the Einstein-Weyl residual.
pub fn ewcurv_check(w: &WeylStructure, p: Point, ew_tol: f64) -> Result<EwcurvOutcome> {
    let geo = w.geometry(p, 2)?;
    let ew = max_abs(&geo.ew_residual());
    if ew > ew_tol {
        return Ok(EwcurvOutcome::Inapplicable { ew_residual: ew });
    }
    Ok(EwcurvOutcome::Residual(geo.ewcurv_residual()))
}

pub fn cotton_york(w: &WeylStructure, p: Point) -> Result<Matrix3<f64>> {
    w.geometry(p, 3)?.cotton_york()
}

pub fn curvature_report(w: &WeylStructure, p: Point) -> Result<CurvatureReport> {
    let geo = w.geometry(p, 3)?;
    Ok(CurvatureReport {
        point: p,
        ew_residual: rows(&geo.ew_residual()),
        faraday: rows(&geo.faraday_values()),
        scal: geo.scal_value(),
        cotton_york: rows(&geo.cotton_york()?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{Chart, ScalarField};
    use crate::weylgeom::flat_with_one_form;

    fn cube() -> Chart {
        Chart::cartesian([(-2.0, 2.0); 3]).unwrap()
    }

    fn euler_metric(a: f64, lambda: f64) -> WeylStructure {
        let chart = Chart::euler().unwrap();
        let a2 = a * a;
        let f = |t: String| ScalarField::builtin("berger", chart.parse(&t).unwrap());
        let zero = || f("0".into());
        let g = [
            [f(format!("{a2:?}")), zero(), zero()],
            [zero(), f(format!("{a2:?}*sin(theta)^2 + cos(theta)^2")), f("cos(theta)".into())],
            [zero(), f("cos(theta)".into()), f("1".into())],
        ];
        let omega = [zero(), f(format!("{lambda:?}*cos(theta)")), f(format!("{lambda:?}"))];
        WeylStructure::from_components(chart, g, omega, "berger")
    }

    #[test]
    fn flat_space_is_flat() {
        let w = flat_with_one_form(cube(), ["0", "0", "0"]).unwrap();
        let p = [0.3, -0.4, 1.1];
        let geo = w.geometry(p, 3).unwrap();
        assert!(geo.christoffel().iter().flatten().flatten().all(|c| *c == 0.0));
        assert_eq!(max_abs(&geo.ew_residual()), 0.0);
        assert_eq!(geo.scal_value(), 0.0);
        assert_eq!(max_abs(&geo.cotton_york().unwrap()), 0.0);
    }

    #[test]
    fn exact_one_form_coefficients() {
        let c = 0.7;
        let w = flat_with_one_form(cube(), ["0", "0", &format!("{c}")]).unwrap();
        let gm = weyl_connection(&w, [0.1, 0.2, 0.3]).unwrap();
        assert!((gm[2][0][0] + c).abs() < 1e-15);
        assert!((gm[0][0][2] - c).abs() < 1e-15);
        assert!((gm[0][2][0] - c).abs() < 1e-15);
        assert!((gm[2][2][2] - c).abs() < 1e-15);
    }

    #[test]
    fn non_closed_one_form_is_not_einstein_weyl() {
        let w = flat_with_one_form(cube(), ["y", "0", "0"]).unwrap();
        let r = ew_residual(&w, [1.0, 1.0, 0.0]).unwrap();
        assert!(max_abs(&r) > 0.1);
        let f = faraday(&w, [1.0, 1.0, 0.0]).unwrap();
        assert!((f[(1, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_sphere_is_einstein() {
        let w = euler_metric(1.0, 0.0);
        let p = [1.0, 0.4, 2.0];
        let geo = w.geometry(p, 3).unwrap();
        assert!((geo.scal_value() - 1.5).abs() < 1e-12);
        assert!(max_abs(&geo.ew_residual()) < 1e-12);
        assert!(geo.ewcurv_residual() < 1e-12);
        assert!(max_abs(&geo.cotton_york().unwrap()) < 1e-12);
    }

    #[test]
    fn metricity_and_trace_free() {
        let w = euler_metric(1.3, 0.4);
        for p in w.chart.sample_points(10, 3).unwrap() {
            let geo = w.geometry(p, 3).unwrap();
            assert!(geo.metricity_residual() < 1e-12);
            let ginv = geo.inverse_metric();
            assert!((ginv * geo.ew_residual()).trace().abs() < 1e-12);
            assert!((ginv * geo.cotton_york().unwrap()).trace().abs() < 1e-12);
            assert!(geo.faraday_closedness().unwrap() < 1e-12);
        }
    }

    #[test]
    fn squashed_sphere_closed_form() {
        let a: f64 = 1.5;
        let lambda = ((a * a - 1.0) / a.powi(4)).sqrt();
        let w = euler_metric(a, lambda);
        for p in w.chart.sample_points(5, 11).unwrap() {
            let geo = w.geometry(p, 3).unwrap();
            assert!(max_abs(&geo.ew_residual()) < 1e-12);
            assert!(geo.ewcurv_residual() < 1e-12);
            let y = geo.cotton_york_raw().unwrap();
            assert!(max_abs(&(y - y.transpose())) < 1e-12);
            assert!(max_abs(&y) > 1e-2);
        }
        let off = euler_metric(a, 0.3);
        assert!(max_abs(&ew_residual(&off, [1.0, 0.2, 0.2]).unwrap()) > 1e-2);
    }
}
