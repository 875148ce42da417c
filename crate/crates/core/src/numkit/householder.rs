//! Householder transport of unitary matrices between successive states.
//!
//! Given unit vectors `u_prev` and `u_next`, the transition
//!
//! ```text
//! w = u_prev - u_next
//! T = I - w w^H / (w^H u_prev)
//! ```
//!
//! satisfies `T u_prev = u_next` and is unitary, because for unit inputs
//! `2 Re(w^H u_prev) = ||w||^2`. Applying `T` to a whole unitary matrix whose
//! first column is `u_prev` moves that column to `u_next` and carries the
//! remaining columns along while keeping orthogonality.

use num_complex::Complex64;

use super::matrix::{CMatrix, CVector};
use crate::error::{Error, Result};

/// Default degeneracy tolerance for [`householder_transition`].
pub const DEFAULT_TOL: f64 = 1e-12;

const UNIT_NORM_TOL: f64 = 1e-9;

fn check_unit(v: &CVector) -> Result<()> {
    let deviation = (v.norm() - 1.0).abs();
    if deviation >= UNIT_NORM_TOL || !deviation.is_finite() {
        return Err(Error::NotUnitNorm { deviation });
    }
    Ok(())
}

/// Transition matrix mapping `u_prev` onto `u_next`.
///
/// Returns the identity when `||w|| < tol` or `|w^H u_prev| < tol`.
pub fn householder_transition(u_prev: &CVector, u_next: &CVector, tol: f64) -> Result<CMatrix> {
    if u_prev.len() != u_next.len() {
        return Err(Error::Dimension(format!(
            "transition between lengths {} and {}",
            u_prev.len(),
            u_next.len()
        )));
    }
    check_unit(u_prev)?;
    check_unit(u_next)?;

    let n = u_prev.len();
    let w: Vec<Complex64> = u_prev
        .iter()
        .zip(u_next.iter())
        .map(|(a, b)| a - b)
        .collect();
    let w_norm_sqr: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let whu: Complex64 = w.iter().zip(u_prev.iter()).map(|(a, b)| a.conj() * b).sum();
    // Real part taken as ||w||^2 / 2 (exact for unit inputs) so T stays unitary
    // to rounding even when the inputs carry tiny norm errors.
    let denom = Complex64::new(0.5 * w_norm_sqr, whu.im);

    if w_norm_sqr.sqrt() < tol || denom.norm() < tol {
        return Ok(CMatrix::identity(n));
    }

    let mut t = CMatrix::identity(n);
    for i in 0..n {
        let wi = w[i] / denom;
        for j in 0..n {
            t[(i, j)] -= wi * w[j].conj();
        }
    }
    Ok(t)
}

/// Next state `T * U_prev`.
pub fn apply_transition(t: &CMatrix, u_prev: &CMatrix) -> Result<CMatrix> {
    if !t.is_square() || t.cols() != u_prev.rows() {
        return Err(Error::Dimension(format!(
            "transition {}x{} applied to {}x{}",
            t.rows(),
            t.cols(),
            u_prev.rows(),
            u_prev.cols()
        )));
    }
    t.try_mul(u_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{random_unit_vector, random_unitary, unitarity_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_vectors_give_identity() {
        let e1 = CVector::basis(3, 0);
        let t = householder_transition(&e1, &e1, DEFAULT_TOL).unwrap();
        assert_eq!(t, CMatrix::identity(3));
    }

    #[test]
    fn basis_swap_in_two_dimensions() {
        let t = householder_transition(&CVector::basis(2, 0), &CVector::basis(2, 1), DEFAULT_TOL)
            .unwrap();
        let expected = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(t.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn random_pairs_map_exactly_and_stay_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst_map = 0.0f64;
        let mut worst_unit = 0.0f64;
        for _ in 0..1000 {
            let a = random_unit_vector(4, &mut rng);
            let b = random_unit_vector(4, &mut rng);
            let t = householder_transition(&a, &b, DEFAULT_TOL).unwrap();
            // oracle: plain matrix-vector and matrix-matrix products
            let ta = t.mul_vec(&a).unwrap();
            worst_map = worst_map.max(ta.max_abs_diff(&b));
            let tht = &t.adjoint() * &t;
            worst_unit = worst_unit.max(tht.max_abs_diff(&CMatrix::identity(4)));
        }
        assert!(worst_map < 1e-10, "map error {worst_map:e}");
        assert!(worst_unit < 1e-10, "unitarity error {worst_unit:e}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = CVector::basis(2, 0);
        let b = CVector::basis(3, 0);
        assert!(matches!(
            householder_transition(&a, &b, DEFAULT_TOL),
            Err(Error::Dimension(_))
        ));
        let long = CVector(vec![Complex64::new(1.1, 0.0), Complex64::new(0.0, 0.0)]);
        assert!(matches!(
            householder_transition(&long, &a, DEFAULT_TOL),
            Err(Error::NotUnitNorm { .. })
        ));
    }

    #[test]
    fn apply_transition_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(4, &mut rng);
        assert_eq!(apply_transition(&CMatrix::identity(4), &u).unwrap(), u);

        let swap = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let out = apply_transition(&swap, &CMatrix::identity(2)).unwrap();
        assert!(out.max_abs_diff(&swap) < 1e-15);

        let t = random_unitary(4, &mut rng);
        assert!(unitarity_error(&apply_transition(&t, &u).unwrap()) < 1e-10);

        assert!(apply_transition(&CMatrix::zeros(2, 3), &u).is_err());
    }
}
