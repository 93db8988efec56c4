//! Dimension of the space of Toda structures near a base point.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;

use super::system::{toda_system_curvature, transport_matrix, CurvatureMethod};
use super::TodaStructureField;
use crate::charts::Point;
use crate::error::{Error, Result};
use crate::weylgeom::WeylStructure;

/// Relative threshold below which a singular value counts as zero.
pub const KERNEL_RELATIVE: f64 = 1e-7;
/// Absolute floor of the kernel threshold.
pub const KERNEL_FLOOR: f64 = 1e-8;
/// Ratio reported when the spectrum has no gap to measure.
const GAP_EPS: f64 = 1e-16;

#[derive(Debug, Clone, Serialize)]
pub struct CountOptions {
    /// Defaults to the chart centre.
    pub base: Option<Point>,
    /// Defaults to `probes` seeded samples of the sampling box.
    pub probe_points: Option<Vec<Point>>,
    pub probes: usize,
    pub seed: u64,
    pub ew_tol: f64,
    pub method: CurvatureMethod,
    /// Holonomy defect below which a kernel direction is confirmed.
    pub loop_tol: f64,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            base: None,
            probe_points: None,
            probes: 6,
            seed: 0,
            ew_tol: 1e-6,
            method: CurvatureMethod::Jet,
            loop_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureCount {
    pub base: Point,
    /// Joint kernel dimension of the curvature transported to the base.
    pub upper_bound: usize,
    /// Kernel directions with trivial holonomy on the loop family.
    pub confirmed: usize,
    /// Orthonormal seeds of the confirmed structures.
    pub basis: Vec<TodaStructureField>,
    /// Largest holonomy singular value among the confirmed directions.
    pub loop_residual: f64,
    /// Ratio of the smallest nonzero to the largest zero singular value.
    pub gap: f64,
    /// Singular values of the stacked curvature, largest first.
    pub singular_values: Vec<f64>,
    /// `|𝒳|²` at the base for each basis seed: the homothety constant of
    /// its gauge.
    pub homothety: Vec<f64>,
}

fn sorted_svd(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = m.ncols();
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, order.len(), |r, c| vt[(order[c], r)]);
    (values, v)
}

fn stack(blocks: &[Matrix4<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(4 * blocks.len(), 4, |r, c| blocks[r / 4][(r % 4, c)])
}

/// Spectral gap around the threshold.
fn spectral_gap(values: &[f64], threshold: f64) -> f64 {
    let above = values
        .iter()
        .copied()
        .filter(|&s| s >= threshold)
        .fold(f64::INFINITY, f64::min);
    let above = if above.is_finite() {
        above
    } else {
        values.first().copied().unwrap_or(0.0).max(1.0)
    };
    let below = values
        .iter()
        .copied()
        .filter(|&s| s < threshold)
        .fold(f64::NEG_INFINITY, f64::max);
    let below = if below.is_finite() { below } else { threshold };
    above / below.max(GAP_EPS)
}

/// Rectangle from `start` with sides `s e_a` then `s e_b`.
fn rectangle(start: Point, a: usize, b: usize, s: f64) -> Vec<Point> {
    let shift = |p: Point, i: usize, d: f64| {
        let mut q = p;
        q[i] += d;
        q
    };
    let c1 = shift(start, a, s);
    let c2 = shift(c1, b, s);
    let c3 = shift(start, b, s);
    vec![start, c1, c2, c3, start]
}

/// Twelve test loops based at `base`: every coordinate plane, two sizes, and
/// two placements.
pub fn loop_family(w: &WeylStructure, base: Point) -> Result<Vec<Vec<Point>>> {
    let bx = w.chart.sampling_box();
    let half = (0..3)
        .map(|i| (base[i] - bx[i].lo).min(bx[i].hi - base[i]))
        .fold(f64::INFINITY, f64::min);
    if !(half > 0.0) {
        return Err(Error::Degenerate(format!(
            "base point {base:?} has no room for test loops"
        )));
    }
    let mut loops = Vec::with_capacity(12);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for s in [half / 4.0, half / 2.0] {
            loops.push(rectangle(base, a, b, s));
            let mut corner = base;
            corner[a] -= s;
            corner[b] -= s;
            let mut lasso = vec![base];
            lasso.extend(rectangle(corner, a, b, s));
            lasso.push(base);
            loops.push(lasso);
        }
    }
    for path in &loops {
        for &p in path {
            w.chart.check(p)?;
        }
    }
    Ok(loops)
}

/// Counts Toda structures: bounds the dimension by the joint kernel of the
/// curvature at the base and at probes, then confirms kernel directions by
/// holonomy around test loops.
pub fn toda_structure_count(w: &WeylStructure, opts: &CountOptions) -> Result<StructureCount> {
    let base = opts.base.unwrap_or_else(|| w.chart.center());
    w.chart.check(base)?;
    let probes = match &opts.probe_points {
        Some(p) => p.clone(),
        None => w.chart.sample_points(opts.probes, opts.seed)?,
    };

    let mut blocks: Vec<Matrix4<f64>> =
        toda_system_curvature(w, base, opts.method, opts.ew_tol)?.to_vec();
    let transported: Vec<[Matrix4<f64>; 3]> = probes
        .par_iter()
        .map(|&q| {
            let r = toda_system_curvature(w, q, opts.method, opts.ew_tol)?;
            let t = transport_matrix(w, &[base, q])?;
            Ok(r.map(|m| m * t))
        })
        .collect::<Result<_>>()?;
    blocks.extend(transported.into_iter().flatten());

    let (singular_values, v) = sorted_svd(stack(&blocks));
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let threshold = (KERNEL_RELATIVE * smax).max(KERNEL_FLOOR);
    let upper_bound = singular_values.iter().filter(|&&s| s < threshold).count();
    let gap = spectral_gap(&singular_values, threshold);
    let kernel = v.columns(4 - upper_bound, upper_bound).into_owned();

    let mut count = StructureCount {
        base,
        upper_bound,
        confirmed: 0,
        basis: Vec::new(),
        loop_residual: 0.0,
        gap,
        singular_values,
        homothety: Vec::new(),
    };
    if upper_bound == 0 {
        return Ok(count);
    }

    let loops = loop_family(w, base)?;
    let holonomies: Vec<Matrix4<f64>> = loops
        .par_iter()
        .map(|path| transport_matrix(w, path))
        .collect::<Result<_>>()?;
    let defects: Vec<DMatrix<f64>> = holonomies
        .iter()
        .map(|h| DMatrix::from_fn(4, 4, |r, c| h[(r, c)] - if r == c { 1.0 } else { 0.0 }) * &kernel)
        .collect();
    let stacked = DMatrix::from_fn(4 * defects.len(), upper_bound, |r, c| defects[r / 4][(r % 4, c)]);
    let (loop_values, lv) = sorted_svd(stacked);
    let small: Vec<usize> = (0..loop_values.len())
        .filter(|&i| loop_values[i] < opts.loop_tol)
        .collect();
    count.confirmed = small.len();
    count.loop_residual = small.iter().map(|&i| loop_values[i]).fold(0.0, f64::max);
    let g = w.metric(base)?;
    for &i in &small {
        let seed = &kernel * lv.column(i);
        let seed = Vector4::new(seed[0], seed[1], seed[2], seed[3]);
        let field = TodaStructureField::from_seed(base, &seed);
        let x = field.vector();
        count.homothety.push(x.dot(&(g * x)));
        count.basis.push(field);
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_conventions() {
        assert_eq!(spectral_gap(&[2.0, 1.0, 1e-12, 1e-13], 1e-7), 1e12);
        assert_eq!(spectral_gap(&[1e-12, 0.0], 1e-8), 1.0 / 1e-12);
        assert_eq!(spectral_gap(&[3.0, 2.0], 1e-7), 2.0 / 1e-7);
        assert_eq!(spectral_gap(&[0.0, 0.0], 1e-8), 1.0 / GAP_EPS);
    }

    #[test]
    fn svd_is_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 3.0, 0.0]);
        let (s, v) = sorted_svd(m);
        assert_eq!(s, vec![3.0, 1.0]);
        assert!((v[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }
}
