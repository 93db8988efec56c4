//! Riemannian Hodge star in three dimensions on chart components.
//!
//! With orientation sign `o` and `√g = √det g`:
//! `(*α)_ij = o √g ε_ijk α^k` on 1-forms and
//! `(*β)^k = o (2√g)^{-1} ε^{kij} β_ij` on 2-forms, so `**` is the identity.

use nalgebra::{Matrix3, Vector3};

/// Levi-Civita symbol.
pub fn epsilon(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Dual of a 2-form as a vector.
pub fn star_two_form_vector(g: &Matrix3<f64>, beta: &Matrix3<f64>, o: f64) -> Vector3<f64> {
    let sqrt_det = g.determinant().sqrt();
    Vector3::from_fn(|k, _| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += epsilon(k, i, j) * beta[(i, j)];
            }
        }
        o * 0.5 * acc / sqrt_det
    })
}

/// Dual of a 2-form as a 1-form.
pub fn star_two_form(g: &Matrix3<f64>, beta: &Matrix3<f64>, o: f64) -> Vector3<f64> {
    g * star_two_form_vector(g, beta, o)
}

/// Dual of a 1-form as a 2-form.
pub fn star_one_form(g: &Matrix3<f64>, alpha: &Vector3<f64>, o: f64) -> Matrix3<f64> {
    let sqrt_det = g.determinant().sqrt();
    let up = g.try_inverse().expect("metric is invertible") * alpha;
    Matrix3::from_fn(|i, j| {
        let mut acc = 0.0;
        for k in 0..3 {
            acc += epsilon(i, j, k) * up[k];
        }
        o * sqrt_det * acc
    })
}

/// `*(X ∧ Y)` for vectors, returned as a vector: `g^{-1} √g o (X × Y)`.
pub fn cross(g: &Matrix3<f64>, x: &Vector3<f64>, y: &Vector3<f64>, o: f64) -> Vector3<f64> {
    let sqrt_det = g.determinant().sqrt();
    let lower = x.cross(y) * (o * sqrt_det);
    g.try_inverse().expect("metric is invertible") * lower
}

/// Wedge of two 1-forms as a 2-form.
pub fn wedge(a: &Vector3<f64>, b: &Vector3<f64>) -> Matrix3<f64> {
    a * b.transpose() - b * a.transpose()
}
