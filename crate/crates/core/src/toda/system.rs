//! The rank-4 linear system for `Ψ = (𝒳, σ)`: `∂_i Ψ + A_i Ψ = 0`.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::TodaJet;
use crate::charts::{Point, Taylor};
use crate::error::{Error, Result};
use crate::weylgeom::geometry::{max_abs, Geometry};
use crate::weylgeom::WeylStructure;

/// `A_i` as Taylor jets, indexed `[i][row][col]`.
pub type Connection = [[[Taylor; 4]; 4]; 3];

/// Coordinate planes `(0,1)`, `(0,2)`, `(1,2)`.
pub const PLANES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Relative and absolute tolerances of the transport integrator.
pub const TRANSPORT_RTOL: f64 = 1e-9;
pub const TRANSPORT_ATOL: f64 = 1e-12;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub enum CurvatureMethod {
    /// Differentiates the connection jets.
    #[default]
    Jet,
    /// Holonomy of small squares with Richardson extrapolation.
    Plaquette { h: f64 },
}

/// Connection jets of order `geo.order - 2`.
pub fn connection(geo: &Geometry) -> Connection {
    let n = geo.order - 2;
    std::array::from_fn(|i| {
        let mut a = [[Taylor::zero(n); 4]; 4];
        for k in 0..3 {
            for j in 0..3 {
                let mut t = geo.gamma[k][i][j].truncate(n);
                if k == j {
                    t += geo.omega[i].truncate(n) * -0.5;
                }
                a[k][j] = t;
            }
            if k == i {
                a[k][3] = Taylor::constant(-1.0, n);
            }
        }
        for j in 0..3 {
            a[3][j] = geo.faraday[j][i] * 0.5 + geo.scal * geo.g[i][j].truncate(n) * (1.0 / 6.0);
        }
        a[3][3] = geo.omega[i].truncate(n) * -0.5;
        a
    })
}

fn values(a: &[[Taylor; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| a[r][c].value())
}

/// `A_i(p)` as matrices.
pub fn connection_values(w: &WeylStructure, p: Point) -> Result<[Matrix4<f64>; 3]> {
    let geo = w.geometry(p, 2)?;
    let a = connection(&geo);
    Ok(std::array::from_fn(|i| values(&a[i])))
}

fn matmul(x: &[[Taylor; 4]; 4], y: &[[Taylor; 4]; 4], order: usize) -> [[Taylor; 4]; 4] {
    std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            let mut t = Taylor::zero(order);
            for m in 0..4 {
                t += x[r][m].truncate(order) * y[m][c].truncate(order);
            }
            t
        })
    })
}

/// `R_ab = ∂_a A_b - ∂_b A_a + [A_a, A_b]` for the coordinate planes, as jets
/// of order `geo.order - 3`.
pub fn curvature_jets(geo: &Geometry) -> Result<[[[Taylor; 4]; 4]; 3]> {
    if geo.order < 3 {
        return Err(Error::InsufficientOrder {
            needed: 3,
            available: geo.order,
        });
    }
    let a = connection(geo);
    let n = geo.order - 3;
    Ok(PLANES.map(|(p, q)| {
        let ab = matmul(&a[p], &a[q], n);
        let ba = matmul(&a[q], &a[p], n);
        std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                a[q][r][c].derivative(p) - a[p][r][c].derivative(q) + ab[r][c] - ba[r][c]
            })
        })
    }))
}

fn check_ew(w: &WeylStructure, p: Point, ew_tol: f64) -> Result<()> {
    let geo = w.geometry(p, 2)?;
    let residual = max_abs(&geo.ew_residual());
    if !(residual <= ew_tol) {
        return Err(Error::NotEinsteinWeyl {
            point: p,
            residual,
            tolerance: ew_tol,
        });
    }
    Ok(())
}

/// Curvature of the linear system on the three coordinate planes at `p`.
/// Fails when the Einstein-Weyl residual exceeds `ew_tol`.
pub fn toda_system_curvature(
    w: &WeylStructure,
    p: Point,
    method: CurvatureMethod,
    ew_tol: f64,
) -> Result<[Matrix4<f64>; 3]> {
    check_ew(w, p, ew_tol)?;
    match method {
        CurvatureMethod::Jet => {
            let geo = w.geometry(p, 3)?;
            Ok(curvature_jets(&geo)?.map(|r| values(&r)))
        }
        CurvatureMethod::Plaquette { h } => {
            let mut out = [Matrix4::zeros(); 3];
            for (slot, &(a, b)) in out.iter_mut().zip(PLANES.iter()) {
                *slot = plaquette_curvature(w, p, a, b, h)?;
            }
            Ok(out)
        }
    }
}

fn generator(w: &WeylStructure, q: Point, d: &[f64; 3]) -> Result<Matrix4<f64>> {
    let a = connection_values(w, q)?;
    Ok(-(a[0] * d[0] + a[1] * d[1] + a[2] * d[2]))
}

fn lerp(a: &Point, d: &[f64; 3], t: f64) -> Point {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

fn rk4_step(
    w: &WeylStructure,
    a: &Point,
    d: &[f64; 3],
    t: f64,
    h: f64,
    phi: &Matrix4<f64>,
) -> Result<Matrix4<f64>> {
    let m0 = generator(w, lerp(a, d, t), d)?;
    let mh = generator(w, lerp(a, d, t + 0.5 * h), d)?;
    let m1 = generator(w, lerp(a, d, t + h), d)?;
    let k1 = m0 * phi;
    let k2 = mh * (phi + k1 * (0.5 * h));
    let k3 = mh * (phi + k2 * (0.5 * h));
    let k4 = m1 * (phi + k3 * h);
    Ok(phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn transport_segment(
    w: &WeylStructure,
    a: &Point,
    b: &Point,
    segment: usize,
    phi: Matrix4<f64>,
) -> Result<Matrix4<f64>> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len == 0.0 {
        return Ok(phi);
    }
    let min_step = MIN_STEP / len;
    let mut phi = phi;
    let mut t = 0.0;
    let mut h = (0.1 / len).min(1.0);
    while t < 1.0 {
        h = h.min(1.0 - t);
        let full = rk4_step(w, a, &d, t, h, &phi)?;
        let half = rk4_step(w, a, &d, t, 0.5 * h, &phi)?;
        let two = rk4_step(w, a, &d, t + 0.5 * h, 0.5 * h, &half)?;
        let err = (two - full).amax() / 15.0;
        let tol = TRANSPORT_ATOL + TRANSPORT_RTOL * two.amax();
        if !err.is_finite() {
            return Err(Error::NonFinite {
                what: "parallel transport".into(),
                point: lerp(a, &d, t),
            });
        }
        if err <= tol {
            t += h;
            phi = two + (two - full) / 15.0;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < min_step && t < 1.0 {
            return Err(Error::StepUnderflow { t, segment });
        }
    }
    Ok(phi)
}

/// Fundamental matrix of `∂Ψ + AΨ = 0` along the polyline `path`.
pub fn transport_matrix(w: &WeylStructure, path: &[Point]) -> Result<Matrix4<f64>> {
    let mut phi = Matrix4::identity();
    for (segment, pair) in path.windows(2).enumerate() {
        phi = transport_segment(w, &pair[0], &pair[1], segment, phi)?;
    }
    Ok(phi)
}

/// Parallel transport of `psi` along `path`.
pub fn transport(w: &WeylStructure, path: &[Point], psi: &Vector4<f64>) -> Result<Vector4<f64>> {
    Ok(transport_matrix(w, path)? * psi)
}

/// Loop from `p` around the square of side `h` centred at `p` in the
/// `(a, b)` plane, traversed `a` first.
pub fn square_lasso(p: Point, a: usize, b: usize, h: f64) -> Vec<Point> {
    let corner = |sa: f64, sb: f64| {
        let mut q = p;
        q[a] += 0.5 * sa * h;
        q[b] += 0.5 * sb * h;
        q
    };
    let c0 = corner(-1.0, -1.0);
    vec![
        p,
        c0,
        corner(1.0, -1.0),
        corner(1.0, 1.0),
        corner(-1.0, 1.0),
        c0,
        p,
    ]
}

/// `R_ab(p)` from the holonomy `H` of small squares: `(I - H)/h²`,
/// Richardson-extrapolated in `h`.
pub fn plaquette_curvature(w: &WeylStructure, p: Point, a: usize, b: usize, h: f64) -> Result<Matrix4<f64>> {
    let est = |h: f64| -> Result<Matrix4<f64>> {
        let hol = transport_matrix(w, &square_lasso(p, a, b, h))?;
        Ok((Matrix4::identity() - hol) / (h * h))
    };
    let coarse = est(h)?;
    let fine = est(0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Taylor jets of the parallel section with value `seed` at the expansion
/// point of `a`, to order `order`. Needs `a` to order `order - 1`.
pub fn parallel_jets(a: &Connection, seed: &Vector4<f64>, order: usize) -> Result<TodaJet> {
    let available = a[0][0][0].order();
    if order > available + 1 {
        return Err(Error::InsufficientOrder {
            needed: order - 1,
            available,
        });
    }
    let a: Connection = a.map(|m| m.map(|r| r.map(|t| t.truncate(available.min(order)).extend(order))));
    let mut psi: [Taylor; 4] = std::array::from_fn(|r| Taylor::constant(seed[r], order));
    let x = Taylor::variables([0.0; 3], order);
    for m in 1..=order {
        let mut next = [Taylor::zero(order); 4];
        for (i, ai) in a.iter().enumerate() {
            for r in 0..4 {
                let mut prod = Taylor::zero(order);
                for c in 0..4 {
                    prod += ai[r][c] * psi[c];
                }
                let mut part = Taylor::zero(order);
                part.set_homogeneous(m - 1, prod.homogeneous(m - 1));
                next[r] += part * x[i];
            }
        }
        for r in 0..4 {
            let coeffs: Vec<f64> = next[r].homogeneous(m).iter().map(|c| -c / m as f64).collect();
            psi[r].set_homogeneous(m, &coeffs);
        }
    }
    Ok(TodaJet {
        x: [psi[0], psi[1], psi[2]],
        sigma: psi[3],
    })
}
