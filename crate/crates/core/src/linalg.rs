//! Small dense helpers on top of nalgebra.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

/// Singular values in descending order.
pub fn singular_values<T: ComplexField<RealField = f64>>(mat: &DMatrix<T>) -> Vec<f64> {
    if mat.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = mat.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `σ_max / σ_min` of a square matrix; infinite when singular.
pub fn condition_number(mat: &DMatrix<f64>) -> f64 {
    let sv = singular_values(mat);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Number of singular values above `tol · σ_1`.
pub fn numerical_rank<T: ComplexField<RealField = f64>>(mat: &DMatrix<T>, tol: f64) -> usize {
    let sv = singular_values(mat);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Right singular vector for the smallest singular value of a tall
/// (`rows >= cols`) complex matrix, together with all singular values in
/// descending order.
pub fn smallest_right_singular_vector(
    mat: &DMatrix<Complex64>,
) -> Option<(DVector<Complex64>, Vec<f64>)> {
    let svd = mat.clone().svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let v: DVector<Complex64> = v_t.row(idx).transpose().map(|c| c.conj());
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Some((v, sv))
}

pub fn determinant(mat: &DMatrix<f64>) -> f64 {
    if mat.is_empty() {
        return 1.0;
    }
    mat.clone().lu().determinant()
}

pub fn complex_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}
