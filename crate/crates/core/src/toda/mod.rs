//! The Toda Ansatz, Toda congruences and the linear system for Toda
//! structures.

pub mod congruence;
pub mod count;
pub mod symmetry;
pub mod system;

use std::sync::Arc;

use nalgebra::{Vector3, Vector4};
use serde::Serialize;

use crate::charts::{Chart, Point, ScalarField, Taylor};
use crate::error::Result;
use crate::weylgeom::{LocalWeyl, WeylSource, WeylStructure};

pub use congruence::{congruence_decompose, delinearize, linearize, CongruenceReport, Linearized};
pub use count::{toda_structure_count, CountOptions, StructureCount};
pub use symmetry::{
    axial_symmetry_checks, dstar_flatness, k_invariance, structure_jet, wronskian,
    wronskian_field, AxialReport, DStarReport,
};
pub use system::{
    connection, curvature_jets, parallel_jets, plaquette_curvature, toda_system_curvature,
    transport, transport_matrix, CurvatureMethod,
};

/// `(e^u (dx² + dy²) + dz², -u_z dz)`.
#[derive(Debug, Clone)]
pub struct TodaSource {
    pub u: ScalarField,
}

impl WeylSource for TodaSource {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        let u = self.u.jet(p, order.max(1))?;
        let e = u.exp().truncate(order);
        let zero = Taylor::zero(order);
        let one = Taylor::constant(1.0, order);
        let g = [[e, zero, zero], [zero, e, zero], [zero, zero, one]];
        let w = u.derivative(2);
        let omega = [Taylor::zero(w.order()), Taylor::zero(w.order()), -w];
        Ok(LocalWeyl { g, omega })
    }

    fn max_order(&self) -> usize {
        self.u.max_order()
    }
}

/// Weyl structure of the Toda Ansatz on an `(x, y, z)` chart.
pub fn build_toda(chart: Chart, u: ScalarField) -> WeylStructure {
    let provenance = u.label.clone().unwrap_or_else(|| "user".into());
    WeylStructure::new(chart, Arc::new(TodaSource { u }), &provenance)
}

/// `u_xx + u_yy + (e^u)_zz`.
pub fn toda_residual(u: &ScalarField, chart: &Chart, p: Point) -> Result<f64> {
    chart.check(p)?;
    let j = u.jet(p, 2)?;
    let uz = j.partial([0, 0, 1]);
    Ok(j.partial([2, 0, 0])
        + j.partial([0, 2, 0])
        + j.value().exp() * (j.partial([0, 0, 2]) + uz * uz))
}

/// A Toda structure `(𝒳, σ)` by its value at a base point, in the chart
/// gauge. `𝒳` has weight 1/2 and `σ` weight -1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TodaStructureField {
    pub base: Point,
    pub x: [f64; 3],
    pub sigma: f64,
}

impl TodaStructureField {
    pub fn from_seed(base: Point, seed: &Vector4<f64>) -> Self {
        TodaStructureField {
            base,
            x: [seed[0], seed[1], seed[2]],
            sigma: seed[3],
        }
    }

    pub fn seed(&self) -> Vector4<f64> {
        Vector4::new(self.x[0], self.x[1], self.x[2], self.sigma)
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.x)
    }
}

/// Taylor jets of a Toda structure about a point.
#[derive(Debug, Clone)]
pub struct TodaJet {
    pub x: [Taylor; 3],
    pub sigma: Taylor,
}

impl TodaJet {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x[0].value(), self.x[1].value(), self.x[2].value())
    }
}

/// `⟨𝒳, *F⟩` in the chart gauge.
pub fn obstruction_orth(w: &WeylStructure, x: &Vector3<f64>, p: Point) -> Result<f64> {
    let geo = w.geometry(p, 2)?;
    Ok(x.dot(&geo.star_faraday_form()))
}

/// Coefficient of `(*D scal)(𝒳, ·)` in the Cotton-York constraint under the
/// star convention `** = 1`.
pub const CY_SCAL_SIGN: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CottonYorkObstruction {
    /// `Y(𝒳, ·) - (*D scal)(𝒳, ·)/6 - σ *F` as a 1-form.
    pub residual: [f64; 3],
    /// `Y(𝒳, 𝒳)`.
    pub null: f64,
}

impl CottonYorkObstruction {
    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn obstruction_cy(
    w: &WeylStructure,
    x: &Vector3<f64>,
    sigma: f64,
    p: Point,
) -> Result<CottonYorkObstruction> {
    let geo = w.geometry(p, 3)?;
    let y = geo.cotton_york()?;
    let yx = y * x;
    let ds = geo.star_dscal_contract(x)?;
    let r = yx + ds * (CY_SCAL_SIGN / 6.0) - geo.star_faraday_form() * sigma;
    Ok(CottonYorkObstruction {
        residual: [r[0], r[1], r[2]],
        null: x.dot(&yx),
    })
}
