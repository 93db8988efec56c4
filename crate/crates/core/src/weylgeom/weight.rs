//! Conformal weights and gauge representatives.
//!
//! A quantity of weight `w` with `p` upper and `q` lower indices is a section
//! of `L^m ⊗ T^p ⊗ T*^q` with `m = w - (p - q)`. Raising and lowering with the
//! conformal metric preserves `w`. Under `g' = e^{2f} g` the representative in
//! the new gauge is `e^{m f}` times the old one.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::charts::Point;
use crate::error::{Error, Result};

/// A half-integer weight, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Weight(pub i32);

impl Weight {
    pub const ZERO: Weight = Weight(0);

    pub fn half_units(twice: i32) -> Self {
        Weight(twice)
    }

    pub fn from_f64(w: f64) -> Result<Self> {
        let twice = 2.0 * w;
        if (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "weight {w} is not a half-integer"
            )));
        }
        Ok(Weight(twice.round() as i32))
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl std::ops::Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Kind {
    Scalar,
    Vector,
    OneForm,
    /// Components `F_ij` in row-major order.
    TwoForm,
    /// Components `h_ij` in row-major order.
    Sym2,
}

impl Kind {
    /// Number of upper minus number of lower indices.
    pub fn index_balance(self) -> i32 {
        match self {
            Kind::Scalar => 0,
            Kind::Vector => 1,
            Kind::OneForm => -1,
            Kind::TwoForm | Kind::Sym2 => -2,
        }
    }

    /// Number of stored components.
    pub fn component_count(self) -> usize {
        match self {
            Kind::Scalar => 1,
            Kind::Vector | Kind::OneForm => 3,
            Kind::TwoForm | Kind::Sym2 => 9,
        }
    }
}

/// A weighted quantity at a point, as its representative in some gauge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weighted {
    pub weight: Weight,
    pub kind: Kind,
    pub components: Vec<f64>,
}

impl Weighted {
    pub fn new(weight: Weight, kind: Kind, components: Vec<f64>) -> Self {
        assert_eq!(components.len(), kind.component_count());
        Weighted {
            weight,
            kind,
            components,
        }
    }

    pub fn scalar(weight: Weight, value: f64) -> Self {
        Self::new(weight, Kind::Scalar, vec![value])
    }

    /// Twice the density exponent `m`.
    pub fn twice_density(&self) -> i32 {
        self.weight.0 - 2 * self.kind.index_balance()
    }

    /// Representative in the gauge of `e^{2f} g`.
    pub fn rescale(&self, f: f64) -> Weighted {
        let factor = (0.5 * self.twice_density() as f64 * f).exp();
        Weighted {
            weight: self.weight,
            kind: self.kind,
            components: self.components.iter().map(|c| c * factor).collect(),
        }
    }

    /// Product with a weighted scalar; weights add.
    pub fn times(&self, scalar: &Weighted) -> Result<Weighted> {
        if scalar.kind != Kind::Scalar {
            return Err(Error::Precondition(
                "weighted products are supported with a scalar factor only".into(),
            ));
        }
        let s = scalar.components[0];
        Ok(Weighted {
            weight: self.weight + scalar.weight,
            kind: self.kind,
            components: self.components.iter().map(|c| c * s).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

type Evaluator = dyn Fn(Point) -> Result<Vec<f64>> + Send + Sync;

/// A weighted field given by an evaluator of its chart-gauge representative.
#[derive(Clone)]
pub struct WeightedField {
    pub weight: Weight,
    pub kind: Kind,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for WeightedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightedField")
            .field("weight", &self.weight)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl WeightedField {
    pub fn new<F>(weight: Weight, kind: Kind, eval: F) -> Self
    where
        F: Fn(Point) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        WeightedField {
            weight,
            kind,
            eval: Arc::new(eval),
        }
    }

    pub fn at(&self, p: Point) -> Result<Weighted> {
        let components = (self.eval)(p)?;
        if components.len() != self.kind.component_count() {
            return Err(Error::Precondition(format!(
                "{:?} field returned {} components",
                self.kind,
                components.len()
            )));
        }
        Ok(Weighted::new(self.weight, self.kind, components))
    }

    /// Pointwise product with a weighted scalar field.
    pub fn times(&self, scalar: &WeightedField) -> Result<WeightedField> {
        if scalar.kind != Kind::Scalar {
            return Err(Error::Precondition(
                "weighted products are supported with a scalar factor only".into(),
            ));
        }
        let (a, b) = (self.clone(), scalar.clone());
        Ok(WeightedField::new(
            self.weight + scalar.weight,
            self.kind,
            move |p| Ok(a.at(p)?.times(&b.at(p)?)?.components),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_arithmetic() {
        let half = Weight::from_f64(0.5).unwrap();
        assert_eq!(half + Weight::from_f64(-0.5).unwrap(), Weight::ZERO);
        assert_eq!(half.to_string(), "1/2");
        assert_eq!(Weight(-4).to_string(), "-2");
        assert!(Weight::from_f64(0.3).is_err());
    }

    #[test]
    fn metric_rescales_by_conformal_factor() {
        let g = Weighted::new(Weight::ZERO, Kind::Sym2, vec![1.0; 9]);
        assert_eq!(g.twice_density(), 4);
        let h = g.rescale(0.5);
        assert!((h.components[0] - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn honest_fields_are_gauge_invariant() {
        let v = Weighted::new(Weight(2), Kind::Vector, vec![1.0, 2.0, 3.0]);
        assert_eq!(v.rescale(0.7), v);
        let a = Weighted::new(Weight(-2), Kind::OneForm, vec![1.0, 2.0, 3.0]);
        assert_eq!(a.rescale(-1.3), a);
        let f = Weighted::new(Weight(-4), Kind::TwoForm, vec![0.5; 9]);
        assert_eq!(f.rescale(2.0), f);
    }

    #[test]
    fn products_add_weights() {
        let x = WeightedField::new(Weight(1), Kind::Vector, |p| Ok(p.to_vec()));
        let s = WeightedField::new(Weight(-1), Kind::Scalar, |p| Ok(vec![p[0]]));
        let xs = x.times(&s).unwrap();
        assert_eq!(xs.weight, Weight::ZERO);
        assert_eq!(xs.at([2.0, 1.0, 0.0]).unwrap().components, vec![4.0, 2.0, 0.0]);
        assert!(s.times(&x).is_err());
    }
}
