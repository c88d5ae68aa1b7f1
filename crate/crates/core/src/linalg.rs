//! Small dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works with plain (non-conjugating) transposes: the
//! bilinear pairings `ᵗy u` that appear in the dressing formulas are never
//! Hermitian products.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest condition number (1-norm estimate) accepted by [`guarded_inverse`].
pub const MAX_CONDITION: f64 = 1e12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `ᵗa b = Σ a_k b_k`, no conjugation.
pub fn dot_t(a: &CVec, b: &CVec) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Rectangular identity: ones on the leading diagonal, zeros elsewhere.
pub fn rect_identity(rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| if i == j { ONE } else { ZERO })
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn norm_1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting, refusing matrices whose 1-norm
/// condition number exceeds [`MAX_CONDITION`].
pub fn guarded_inverse(m: &CMat, what: &str) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!("{what}: matrix is not square")));
    }
    if m.nrows() == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SolutionSingularity(format!("{what} is exactly singular")))?;
    let cond = norm_1(m) * norm_1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SolutionSingularity(format!(
            "{what} is numerically singular (condition {cond:.2e})"
        )));
    }
    Ok(inv)
}

pub fn determinant(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

/// Numerical rank from singular values, threshold `tol · σ_max`.
pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis of the kernel of `m`, singular values below `threshold`
/// count as zero.
pub fn kernel_basis(m: &CMat, threshold: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    // Pad to a square matrix so the SVD returns a full right basis.
    let rows = m.nrows().max(n);
    let mut padded = CMat::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(k, _)| v_t.row(k).adjoint().into_owned())
        .collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}
