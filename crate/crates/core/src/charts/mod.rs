//! Coordinate charts, scalar fields on them, and the derivative engine.

pub mod expr;
pub mod field;
pub mod taylor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use expr::Expr;

pub use field::{convergence_order, eval_jet, fd_jet3, ConvergenceOrder, Differentiation, Jet3, ScalarField};
pub use taylor::Taylor;

/// Default distance kept from every singular locus, in chart units.
pub const DEFAULT_MARGIN: f64 = 0.05;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

/// A scalar function that must stay above the chart margin on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularLocus {
    pub label: String,
    pub field: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub coords: [String; 3],
    pub domain: [Interval; 3],
    pub singular_margin: f64,
    pub singular_loci: Vec<SingularLocus>,
    pub orientation: Orientation,
}

impl Chart {
    pub fn new(name: &str, coords: [&str; 3], domain: [(f64, f64); 3]) -> Result<Self> {
        let chart = Chart {
            name: name.to_string(),
            coords: coords.map(String::from),
            domain: domain.map(|(lo, hi)| Interval::new(lo, hi)),
            singular_margin: DEFAULT_MARGIN,
            singular_loci: Vec::new(),
            orientation: Orientation::Positive,
        };
        chart.validate()?;
        Ok(chart)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidChart {
            chart: self.name.clone(),
            reason,
        };
        for (iv, c) in self.domain.iter().zip(&self.coords) {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(invalid(format!("empty interval for `{c}`")));
            }
        }
        if !(self.singular_margin > 0.0) {
            return Err(invalid("singular margin must be positive".into()));
        }
        Ok(())
    }

    /// Adds a singular locus given as an expression in the chart coordinates.
    pub fn with_locus(mut self, label: &str, text: &str) -> Result<Self> {
        let field = Expr::parse(text, &self.coord_names())?;
        self.singular_loci.push(SingularLocus {
            label: label.to_string(),
            field,
        });
        Ok(self)
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        self.singular_margin = margin;
        self.validate()?;
        Ok(self)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_domain(mut self, domain: [Interval; 3]) -> Result<Self> {
        self.domain = domain;
        self.validate()?;
        Ok(self)
    }

    pub fn coord_names(&self) -> [&str; 3] {
        [
            self.coords[0].as_str(),
            self.coords[1].as_str(),
            self.coords[2].as_str(),
        ]
    }

    pub fn parse(&self, text: &str) -> Result<Expr> {
        Ok(Expr::parse(text, &self.coord_names())?)
    }

    /// Checks that `p` lies in the domain box and clears every singular locus
    /// by more than the margin.
    pub fn check(&self, p: Point) -> Result<()> {
        for i in 0..3 {
            if !self.domain[i].contains(p[i]) {
                return Err(Error::OutsideDomain {
                    chart: self.name.clone(),
                    point: p,
                    coord: self.coords[i].clone(),
                });
            }
        }
        for locus in &self.singular_loci {
            let value = locus.field.eval(&p);
            if !(value > self.singular_margin) {
                return Err(Error::InsideMargin {
                    chart: self.name.clone(),
                    point: p,
                    locus: locus.label.clone(),
                    value,
                    margin: self.singular_margin,
                });
            }
        }
        Ok(())
    }

    /// The domain box shrunk by the singular margin on every side.
    pub fn sampling_box(&self) -> [Interval; 3] {
        let m = self.singular_margin;
        self.domain.map(|iv| {
            if iv.width() > 2.0 * m {
                Interval::new(iv.lo + m, iv.hi - m)
            } else {
                Interval::new(iv.mid(), iv.mid())
            }
        })
    }

    pub fn center(&self) -> Point {
        self.domain.map(|iv| iv.mid())
    }

    /// Uniform probes over the sampling box, rejecting points inside a
    /// singular margin. ChaCha8 seeded with `seed` via `seed_from_u64`.
    pub fn sample_points(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bx = self.sampling_box();
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts > 1000 * (n + 10) {
                return Err(Error::Degenerate(format!(
                    "could not sample margin-safe points on chart `{}`",
                    self.name
                )));
            }
            let p: Point = std::array::from_fn(|i| {
                let iv = bx[i];
                if iv.width() > 0.0 {
                    rng.random_range(iv.lo..iv.hi)
                } else {
                    iv.lo
                }
            });
            if self.check(p).is_ok() {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Cartesian `(x, y, z)` on a box.
    pub fn cartesian(domain: [(f64, f64); 3]) -> Result<Self> {
        Chart::new("cartesian", ["x", "y", "z"], domain)
    }

    /// Cylindrical-type `(rho, eta, psi)` chart used by axially symmetric
    /// profiles.
    pub fn axial(rho: (f64, f64), eta: (f64, f64)) -> Result<Self> {
        Chart::new(
            "axial",
            ["rho", "eta", "psi"],
            [rho, eta, (0.0, 2.0 * std::f64::consts::PI)],
        )?
        .with_locus("rho=0", "rho")
    }

    /// Euler angles `(theta, phi, psi)` on SU(2).
    pub fn euler() -> Result<Self> {
        use std::f64::consts::PI;
        Chart::new(
            "euler",
            ["theta", "phi", "psi"],
            [(0.2, PI - 0.2), (0.0, 2.0 * PI), (0.0, 4.0 * PI)],
        )?
        .with_locus("sin(theta)=0", "sin(theta)")
    }
}
