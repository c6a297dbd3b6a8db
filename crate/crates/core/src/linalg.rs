//! Small dense complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Residual above which [`polar_project`] falls back to an SVD.
const NEWTON_SCHULZ_LIMIT: f64 = 1e-6;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Frobenius norm of `U*U - I`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - identity(n)).norm()
}

/// Frobenius norm of `X* + X`.
pub fn skew_hermitian_residual(x: &CMatrix) -> f64 {
    (x.adjoint() + x).norm()
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(x: &CMatrix) -> CMatrix {
    x.exp()
}

/// Closest unitary matrix in the Frobenius norm.
///
/// Near-unitary inputs take one Newton–Schulz step towards the polar
/// factor; anything further away goes through the SVD.
pub fn polar_project(u: &CMatrix) -> CMatrix {
    let n = u.nrows();
    let gram = u.adjoint() * u;
    let drift = (&gram - identity(n)).norm();
    if drift == 0.0 {
        return u.clone();
    }
    if drift < NEWTON_SCHULZ_LIMIT {
        let three = identity(n) * Complex64::new(3.0, 0.0);
        return u * (three - gram) * Complex64::new(0.5, 0.0);
    }
    let svd = u.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(w), Some(v_t)) => w * v_t,
        _ => u.clone(),
    }
}

/// Spectral-norm-free distance used for all matrix comparisons: Frobenius norm of the difference.
pub fn distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// An `n×n` complex matrix together with its certified unitarity residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMatrix {
    entries: CMatrix,
    residual: f64,
}

impl UnitaryMatrix {
    /// Residual accepted by [`UnitaryMatrix::certify`].
    pub const TOLERANCE: f64 = 1e-10;

    pub fn identity(n: usize) -> Self {
        Self { entries: identity(n), residual: 0.0 }
    }

    /// Projects onto U(n) and records the remaining residual.
    pub fn project(m: CMatrix) -> Self {
        let entries = polar_project(&m);
        let residual = unitarity_residual(&entries);
        Self { entries, residual }
    }

    /// Wraps `m` after checking `‖m*m − I‖ ≤ TOLERANCE`.
    pub fn certify(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape { expected: m.nrows(), found: m.ncols() });
        }
        let residual = unitarity_residual(&m);
        if !residual.is_finite() || residual > Self::TOLERANCE {
            return Err(Error::Integrity(format!(
                "matrix is not unitary (residual {residual:.3e})"
            )));
        }
        Ok(Self { entries: m, residual })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn rank(&self) -> usize {
        self.entries.nrows()
    }

    pub fn inverse(&self) -> Self {
        Self { entries: self.entries.adjoint(), residual: self.residual }
    }

    /// `self · other` re-certified.
    pub fn compose(&self, other: &UnitaryMatrix) -> Self {
        let m = &self.entries * &other.entries;
        let residual = unitarity_residual(&m);
        Self { entries: m, residual }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.entries * v
    }

    pub fn distance(&self, other: &UnitaryMatrix) -> f64 {
        distance(&self.entries, &other.entries)
    }

    pub fn determinant(&self) -> Complex64 {
        self.entries.determinant()
    }

    /// Row-major `[re, im]` pairs.
    pub fn flatten(&self) -> Vec<[f64; 2]> {
        flatten(&self.entries)
    }
}

/// Row-major `[re, im]` pairs of a complex matrix.
pub fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten(n: usize, entries: &[[f64; 2]]) -> Result<CMatrix> {
    if entries.len() != n * n {
        return Err(Error::Shape { expected: n * n, found: entries.len() });
    }
    Ok(CMatrix::from_row_iterator(
        n,
        n,
        entries.iter().map(|[re, im]| Complex64::new(*re, *im)),
    ))
}

/// Skew-Hermitian matrix from real and imaginary part tables (row-major).
pub fn skew_hermitian_from_parts(n: usize, re: &[f64], im: &[f64]) -> Result<CMatrix> {
    if re.len() != n * n || im.len() != n * n {
        return Err(Error::Shape { expected: n * n, found: re.len().min(im.len()) });
    }
    let m = CMatrix::from_row_iterator(
        n,
        n,
        re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)),
    );
    let r = skew_hermitian_residual(&m);
    if r > 1e-12 {
        return Err(Error::Integrity(format!("matrix is not skew-Hermitian (residual {r:.3e})")));
    }
    Ok(m)
}

/// Divides by the norm and rotates the global phase so that entry `pivot` is real and positive.
pub fn normalize_at(v: &CVector, pivot: usize) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let p = v[pivot];
    let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { Complex64::new(1.0, 0.0) };
    v * (phase / norm)
}

/// Index of the largest-modulus entry.
pub fn largest_entry(v: &CVector) -> usize {
    v.iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bn), (i, z)| if z.norm() > bn { (i, z.norm()) } else { (bi, bn) })
        .0
}

/// Phase-and-scale normalization: unit norm, largest-modulus entry positive real.
pub fn normalize_phase_scale(v: &CVector) -> CVector {
    normalize_at(v, largest_entry(v))
}

/// Distance between two vectors after removing an unknown nonzero complex scalar.
///
/// Both vectors are normalized at the pivot given by the largest entry of
/// `reference`, so near-ties in modulus cannot pick different pivots.
pub fn normalized_distance(candidate: &CVector, reference: &CVector) -> f64 {
    let pivot = largest_entry(reference);
    (normalize_at(candidate, pivot) - normalize_at(reference, pivot)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn projection_restores_unitarity() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 1e-4), c(2e-4, 0.0), c(0.0, -1e-4), c(1.0, 0.0)]);
        let u = UnitaryMatrix::project(m);
        assert!(u.residual() < 1e-14);
        let far = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.3)]);
        assert!(UnitaryMatrix::project(far).residual() < 1e-13);
    }

    #[test]
    fn certify_rejects_non_unitary() {
        let m = identity(2) * c(1.01, 0.0);
        assert!(matches!(UnitaryMatrix::certify(m), Err(Error::Integrity(_))));
    }

    #[test]
    fn skew_hermitian_parts_checked() {
        assert!(skew_hermitian_from_parts(2, &[0.0, 1.0, -1.0, 0.0], &[0.5, 0.0, 0.0, 0.0]).is_ok());
        assert!(skew_hermitian_from_parts(2, &[0.0, 1.0, 1.0, 0.0], &[0.0; 4]).is_err());
    }

    #[test]
    fn normalization_removes_complex_scalar() {
        let v = CVector::from_vec(vec![c(0.3, 0.1), c(-1.0, 0.4)]);
        let w = &v * c(-2.0, 3.0);
        assert!(normalized_distance(&w, &v) < 1e-14);
        let n = normalize_phase_scale(&v);
        assert!((n.norm() - 1.0).abs() < 1e-14);
        assert!(n[1].im.abs() < 1e-15 && n[1].re > 0.0);
    }

    #[test]
    fn flatten_round_trip() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0)]);
        let flat = flatten(&m);
        assert_eq!(flat[1], [3.0, 4.0]);
        assert_eq!(unflatten(2, &flat).unwrap(), m);
    }
}
