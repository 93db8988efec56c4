//! Weyl structures `(g, ω)` on a chart and their local invariants.

pub mod geometry;
pub mod hodge;
pub mod killing;
pub mod weight;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::charts::{Chart, Point, ScalarField, Taylor};
use crate::error::{Error, Result};

pub use geometry::{
    curvature_report, cotton_york, ew_residual, ewcurv_check, faraday, metricity_residual,
    scal_weyl, star_faraday, weighted_curvature, weyl_connection, Christoffel, CurvatureReport,
    EwcurvOutcome, Geometry,
};
pub use killing::{
    conformal_field_checks, killing_gauge_checks, killing_residual, ConformalFieldReport,
    KillingGaugeReport, KillingStatus,
};
pub use weight::{Kind, Weight, Weighted, WeightedField};

/// Taylor expansions of `g_ij` and `ω_i` about a point.
#[derive(Debug, Clone)]
pub struct LocalWeyl {
    pub g: [[Taylor; 3]; 3],
    pub omega: [Taylor; 3],
}

impl LocalWeyl {
    pub fn metric(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.g[i][j].value())
    }

    pub fn one_form(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.omega[i].value())
    }
}

/// Anything that can produce local jets of a Weyl structure.
///
/// `local(p, n)` returns `g` to order at least `n` and `ω` to order at least
/// `n - 1`.
pub trait WeylSource: Send + Sync + fmt::Debug {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl>;
    /// Largest `n` accepted by [`WeylSource::local`].
    fn max_order(&self) -> usize;
}

#[derive(Debug, Clone)]
pub struct WeylStructure {
    pub chart: Chart,
    pub source: Arc<dyn WeylSource>,
    /// Catalog label or `"user"`.
    pub provenance: String,
}

impl WeylStructure {
    pub fn new(chart: Chart, source: Arc<dyn WeylSource>, provenance: &str) -> Self {
        WeylStructure {
            chart,
            source,
            provenance: provenance.to_string(),
        }
    }

    /// Structure given by component fields; only `g[i][j]` with `i <= j` is
    /// read.
    pub fn from_components(
        chart: Chart,
        g: [[ScalarField; 3]; 3],
        omega: [ScalarField; 3],
        provenance: &str,
    ) -> Self {
        let source = Components { g, omega };
        Self::new(chart, Arc::new(source), provenance)
    }

    /// Parses component expressions in the chart coordinates. User fields are
    /// differentiated by finite differences.
    pub fn parse(chart: Chart, g: [[&str; 3]; 3], omega: [&str; 3]) -> Result<Self> {
        let mut fields = Vec::with_capacity(9);
        for row in g {
            for text in row {
                fields.push(ScalarField::parse(text, &chart)?);
            }
        }
        let g: [[ScalarField; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| fields[3 * i + j].clone()));
        let omega = [
            ScalarField::parse(omega[0], &chart)?,
            ScalarField::parse(omega[1], &chart)?,
            ScalarField::parse(omega[2], &chart)?,
        ];
        Ok(Self::from_components(chart, g, omega, "user"))
    }

    pub fn orientation(&self) -> f64 {
        self.chart.orientation.sign()
    }

    /// Local jets at a margin-safe point.
    pub fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        self.chart.check(p)?;
        if order > self.source.max_order() {
            return Err(Error::InsufficientOrder {
                needed: order,
                available: self.source.max_order(),
            });
        }
        let local = self.source.local(p, order)?;
        let finite = local.g.iter().flatten().all(Taylor::is_finite)
            && local.omega.iter().all(Taylor::is_finite);
        if !finite {
            return Err(Error::NonFinite {
                what: format!("Weyl structure `{}`", self.provenance),
                point: p,
            });
        }
        Ok(local)
    }

    pub fn geometry(&self, p: Point, order: usize) -> Result<Geometry> {
        Geometry::new(&self.local(p, order)?, p, self.orientation())
    }

    pub fn metric(&self, p: Point) -> Result<Matrix3<f64>> {
        Ok(self.local(p, 0)?.metric())
    }

    pub fn one_form(&self, p: Point) -> Result<Vector3<f64>> {
        Ok(self.local(p, 1)?.one_form())
    }
}

/// `g_ij` and `ω_i` given field by field.
#[derive(Debug, Clone)]
pub struct Components {
    pub g: [[ScalarField; 3]; 3],
    pub omega: [ScalarField; 3],
}

impl WeylSource for Components {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        let mut g = [[Taylor::zero(order); 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                g[i][j] = self.g[i][j].jet(p, order)?;
                g[j][i] = g[i][j];
            }
        }
        let w = order.saturating_sub(1);
        let omega = [
            self.omega[0].jet(p, w)?,
            self.omega[1].jet(p, w)?,
            self.omega[2].jet(p, w)?,
        ];
        Ok(LocalWeyl { g, omega })
    }

    fn max_order(&self) -> usize {
        let g = (0..3)
            .flat_map(|i| (i..3).map(move |j| (i, j)))
            .map(|(i, j)| self.g[i][j].max_order())
            .min()
            .unwrap_or(0);
        let w = self.omega.iter().map(|f| f.max_order() + 1).min().unwrap_or(0);
        g.min(w)
    }
}

/// The structure `(e^{2f} g, ω - df)`.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub base: Arc<dyn WeylSource>,
    pub f: ScalarField,
}

impl WeylSource for Rescaled {
    fn local(&self, p: Point, order: usize) -> Result<LocalWeyl> {
        let base = self.base.local(p, order)?;
        let f = self.f.jet(p, order.max(1))?;
        let factor = (f * 2.0).exp();
        let g = base.g.map(|row| row.map(|gij| gij * factor));
        let omega = std::array::from_fn(|i| base.omega[i] - f.derivative(i));
        Ok(LocalWeyl { g, omega })
    }

    fn max_order(&self) -> usize {
        self.base.max_order().min(self.f.max_order())
    }
}

/// Changes gauge: `g' = e^{2f} g`, `ω' = ω - df`.
pub fn gauge_transform(w: &WeylStructure, f: ScalarField) -> WeylStructure {
    let source = Rescaled {
        base: w.source.clone(),
        f,
    };
    WeylStructure {
        chart: w.chart.clone(),
        source: Arc::new(source),
        provenance: w.provenance.clone(),
    }
}

/// Flat metric with the given constant-coefficient 1-form expressions, on a
/// Cartesian chart. Mostly useful for tests and examples.
pub fn flat_with_one_form(chart: Chart, omega: [&str; 3]) -> Result<WeylStructure> {
    let one = |t: &str| -> Result<ScalarField> {
        Ok(ScalarField::builtin("flat", chart.parse(t)?))
    };
    let g = std::array::from_fn(|i| {
        std::array::from_fn(|j| one(if i == j { "1" } else { "0" }).expect("constant parses"))
    });
    let omega = [one(omega[0])?, one(omega[1])?, one(omega[2])?];
    Ok(WeylStructure::from_components(chart, g, omega, "flat"))
}

type JetFn = dyn Fn(Point, usize) -> Result<[Taylor; 3]> + Send + Sync;

/// A vector field given by its Taylor jets at points.
#[derive(Clone)]
pub struct VectorField {
    jets: Arc<JetFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField")
    }
}

impl VectorField {
    pub fn new<F>(jets: F) -> Self
    where
        F: Fn(Point, usize) -> Result<[Taylor; 3]> + Send + Sync + 'static,
    {
        VectorField {
            jets: Arc::new(jets),
        }
    }

    pub fn from_components(fields: [ScalarField; 3]) -> Self {
        VectorField::new(move |p, order| {
            Ok([
                fields[0].jet(p, order)?,
                fields[1].jet(p, order)?,
                fields[2].jet(p, order)?,
            ])
        })
    }

    pub fn parse(chart: &Chart, components: [&str; 3]) -> Result<Self> {
        Ok(Self::from_components([
            ScalarField::parse(components[0], chart)?,
            ScalarField::parse(components[1], chart)?,
            ScalarField::parse(components[2], chart)?,
        ]))
    }

    /// Like [`VectorField::parse`] but with exact partials.
    pub fn parse_analytic(chart: &Chart, components: [&str; 3]) -> Result<Self> {
        let f = |t: &str| -> Result<ScalarField> { Ok(ScalarField::builtin("vector", chart.parse(t)?)) };
        Ok(Self::from_components([f(components[0])?, f(components[1])?, f(components[2])?]))
    }

    pub fn jet(&self, p: Point, order: usize) -> Result<[Taylor; 3]> {
        (self.jets)(p, order)
    }

    pub fn value(&self, p: Point) -> Result<Vector3<f64>> {
        let j = self.jet(p, 0)?;
        Ok(Vector3::new(j[0].value(), j[1].value(), j[2].value()))
    }
}
