//! Dense complex linear algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Basis convention for two-level systems: index 0 is the `σ_z = +1`
/// (excited) state, index 1 the `σ_z = -1` (ground) state.
pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Lowering operator, maps the excited state to the ground state.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

pub fn sigma_plus() -> CMatrix {
    sigma_minus().adjoint()
}

pub fn excited() -> CVector {
    CVector::from_vec(alloc::vec![ONE, ZERO])
}

pub fn ground() -> CVector {
    CVector::from_vec(alloc::vec![ZERO, ONE])
}

/// `(|e> + |g>)/sqrt(2)`.
pub fn plus_state() -> CVector {
    let a = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    CVector::from_vec(alloc::vec![a, a])
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).iter().all(|x| x.norm() <= tol)
}

/// Eigenvalues of a Hermitian matrix in ascending order. Only the lower
/// triangle is trusted, so the input is symmetrized first.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `(1/2) ||a - b||_1` for Hermitian `a`, `b`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Lower Cholesky factor of a Hermitian positive semidefinite matrix with an
/// escalating diagonal jitter `eps * scale * I`, `eps = 1e-10 .. 1e-6`.
///
/// Returns the factor and the jitter that was finally added.
pub fn cholesky_jittered(m: &CMatrix, scale: f64) -> Result<(CMatrix, f64)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), 0.0));
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut eps = 1e-10;
    loop {
        let jitter = eps * scale;
        let mut shifted = m.clone();
        for k in 0..n {
            shifted[(k, k)] += C64::new(jitter, 0.0);
        }
        if let Some(l) = cholesky_lower(&shifted) {
            return Ok((l, jitter));
        }
        if eps >= 1e-6 * (1.0 - 1e-9) {
            return Err(Error::Factorization { jitter });
        }
        eps *= 10.0;
    }
}

/// Cholesky-Banachiewicz on row-major scratch; `None` on a non-positive or
/// non-finite pivot.
fn cholesky_lower(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    let mut l = alloc::vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: C64 = row_i.iter().zip(row_j).map(|(a, b)| a * b.conj()).sum();
            let acc = m[(i, j)] - dot;
            if i == j {
                let pivot = acc.re;
                if !(pivot.is_finite() && pivot > 0.0) {
                    return None;
                }
                l[i * n + i] = C64::new(pivot.sqrt(), 0.0);
            } else {
                l[i * n + j] = acc / l[j * n + j].re;
            }
        }
    }
    Some(CMatrix::from_row_slice(n, n, &l))
}

/// Identity of the given size.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub(crate) fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Dimension { expected: dim, found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let sp = sigma_plus();
        let sm = sigma_minus();
        assert_eq!(&sm * excited(), ground());
        let comm = &sp * &sm - &sm * &sp;
        assert!((comm - sigma_z()).iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let d = trace_distance(&projector(&excited()), &projector(&ground()));
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_rank_deficient_matrix() {
        let v = CVector::from_vec(alloc::vec![ONE, I, ONE]);
        let m = projector(&v);
        let (l, jitter) = cholesky_jittered(&m, 1.0).unwrap();
        assert!(jitter <= 1e-6);
        let back = &l * l.adjoint();
        assert!((back - m).iter().all(|x| x.norm() < 1e-5));
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        assert!(matches!(cholesky_jittered(&m, 1.0), Err(Error::Factorization { .. })));
    }
}
