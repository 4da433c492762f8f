//! Small dense linear-algebra helpers shared by the fitting stages.

use nalgebra::{ComplexField, DMatrix};

/// Column-pivot-free rank threshold on the normalized triangular factor.
pub const RANK_TOL: f64 = 1e-10;

/// Least-squares solution `X` of `A X ≈ B` via Householder QR on the
/// column-normalized `A`.
///
/// On (near) rank deficiency returns the indices of the columns of `A` that
/// are numerically dependent on earlier ones.
pub fn lstsq<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>, Vec<usize>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    assert_eq!(a.nrows(), b.nrows(), "lstsq row mismatch");
    let cols = a.ncols();
    if a.nrows() < cols {
        return Err((a.nrows()..cols).collect());
    }
    let scale: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<usize> = (0..cols).filter(|&j| !(scale[j] > 0.0)).collect();
    if !zero.is_empty() {
        return Err(zero);
    }
    let mut an = a.clone();
    for (j, mut c) in an.column_iter_mut().enumerate() {
        c.scale_mut(1.0 / scale[j]);
    }
    let qr = an.qr();
    let r = qr.r();
    let rmax = (0..cols).map(|i| r[(i, i)].modulus()).fold(0.0, f64::max);
    let weak: Vec<usize> = (0..cols).filter(|&i| r[(i, i)].modulus() <= RANK_TOL * rmax).collect();
    if !weak.is_empty() {
        return Err(weak);
    }
    let qtb = qr.q().adjoint() * b;
    let mut x = r.solve_upper_triangular(&qtb).expect("nonsingular triangular factor");
    for (j, mut row) in x.row_iter_mut().enumerate() {
        row.scale_mut(1.0 / scale[j]);
    }
    Ok(x)
}

/// Thin QR factor `Q` of `a` with the sign convention `diag(R) ≥ 0`.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut c) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            c.neg_mut();
        }
    }
    q
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal matrices.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s = (a.transpose() * b).svd(false, false).singular_values;
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    // arccos loses precision near 1; use the sine of the residual instead
    let resid = b - a * (a.transpose() * b);
    let sin_max = resid.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
    if smin > 0.7 {
        sin_max.min(1.0).asin()
    } else {
        smin.acos()
    }
}
