//! Dense complex-matrix primitives used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` throughout; this module adds
//! the quantum-specific operations: Kronecker products, Hermitian
//! eigendecomposition with a fixed (descending) ordering, matrix functions
//! restricted to the support, and polar decomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QecError, Result};

/// Dense complex matrix, the universal carrier for states, operators, Choi
/// and transfer matrices.
pub type CMat = DMatrix<Complex64>;
/// Dense complex vector (state vectors, eigenvectors).
pub type CVec = nalgebra::DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative support cutoff used by default in `inv_sqrt_on_support` and the
/// Petz construction. Keeps the inverse root stable when `E[P]` becomes
/// rank-deficient at the maximum-noise point.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-12;

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Computational basis state |i> in the given dimension.
pub fn basis_state(dim: usize, index: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[index] = ONE;
    v
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

/// |v><w|
pub fn outer(v: &CVec, w: &CVec) -> CMat {
    let mut m = zeros(v.len(), w.len());
    for i in 0..v.len() {
        for j in 0..w.len() {
            m[(i, j)] = v[i] * w[j].conj();
        }
    }
    m
}

/// Entrywise max-norm.
pub fn max_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of the difference a - b.
pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_diff shape mismatch");
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

/// Deviation from Hermiticity, ||a - a^dag||_max.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    max_diff(a, &a.adjoint())
}

/// Kronecker product. Dimensions multiply; index convention is
/// (i, k) -> i * b.nrows() + k, so the first factor carries the most
/// significant part of the index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// All entries finite (no NaN/Inf).
pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with the i-th column of the matrix
/// the eigenvector of the i-th eigenvalue. Fails with `NotHermitian` when
/// ||h - h^dag||_max > tol; the symmetrized (h + h^dag)/2 is what gets
/// decomposed. Ties are broken by the eigensolver's ordering; callers must
/// not rely on tie order.
pub fn hermitian_eig(h: &CMat, tol: f64) -> Result<(Vec<f64>, CMat)> {
    let residual = hermiticity_residual(h);
    if residual > tol {
        return Err(QecError::NotHermitian { residual, tol });
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Apply a real function to a Hermitian PSD matrix on its support.
///
/// Eigenvalues above `rel_tol * lambda_max` are mapped through `f`; the rest
/// are treated as exact zeros. Errors with `NegativeEigenvalue` if any
/// eigenvalue drops below `-rel_tol * lambda_max`.
fn psd_function_on_support(h: &CMat, rel_tol: f64, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (values, vectors) = hermitian_eig(h, 1e-8.max(rel_tol))?;
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rel_tol * lambda_max;
    let n = h.nrows();
    let mut out = zeros(n, n);
    for (i, &lambda) in values.iter().enumerate() {
        if lambda < -cutoff {
            return Err(QecError::NegativeEigenvalue {
                value: lambda,
                tol: cutoff,
            });
        }
        if lambda > cutoff {
            let v = vectors.column(i).clone_owned();
            let scale = Complex64::new(f(lambda), 0.0);
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += scale * v[r] * v[c].conj();
                }
            }
        }
    }
    Ok(out)
}

/// h^{-1/2} on the support of h; acts as zero off-support.
pub fn inv_sqrt_on_support(h: &CMat, rel_tol: f64) -> Result<CMat> {
    psd_function_on_support(h, rel_tol, |lambda| lambda.powf(-0.5))
}

/// PSD square root with negative rounding noise clipped to zero.
pub fn psd_sqrt_clipped(h: &CMat) -> Result<CMat> {
    let (values, vectors) = hermitian_eig(h, 1e-6)?;
    let n = h.nrows();
    let mut out = zeros(n, n);
    for (i, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(i).clone_owned();
            let scale = Complex64::new(lambda.sqrt(), 0.0);
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += scale * v[r] * v[c].conj();
                }
            }
        }
    }
    Ok(out)
}

/// Orthogonal projector onto the support of a PSD matrix.
pub fn support_projector(h: &CMat, rel_tol: f64) -> Result<CMat> {
    psd_function_on_support(h, rel_tol, |_| 1.0)
}

/// Unitary factor of the polar decomposition a = U sqrt(a^dag a).
///
/// Computed via the SVD a = W S V^dag as U = W V^dag, which also fixes the
/// unitary completion on the null space of rank-deficient inputs.
pub fn polar_unitary(a: &CMat) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "polar decomposition needs a square matrix");
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    u * v_t
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(h: &CMat) -> f64 {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
