//! Complex linear algebra for small channel matrices.

mod householder;
mod matrix;
mod svd;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub use householder::{apply_transition, householder_transition, DEFAULT_TOL};
pub use matrix::{CMatrix, CVector};
pub use svd::{svd, SvdOrder, SvdTriple, MAX_SVD_DIM};

use crate::error::{Error, Result};

/// Physical channel `U S V^H`.
pub fn assemble(u: &CMatrix, s: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    if !u.is_square() || !v.is_square() || s.rows() != u.rows() || s.cols() != v.rows() {
        return Err(Error::Dimension(format!(
            "assemble U {}x{}, S {}x{}, V {}x{}",
            u.rows(),
            u.cols(),
            s.rows(),
            s.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let us = u.try_mul(s)?;
    us.try_mul(&v.adjoint())
}

/// `U diag(s) V^H` for a diagonal given by its values; `s.len()` must be
/// `min(N, M)`.
pub fn assemble_diag(u: &CMatrix, s: &[Complex64], v: &CMatrix) -> Result<CMatrix> {
    let (n, m) = (u.rows(), v.rows());
    if !u.is_square() || !v.is_square() || s.len() != n.min(m) {
        return Err(Error::Dimension(format!(
            "assemble {n}x{n} / {} values / {m}x{m}",
            s.len()
        )));
    }
    let mut h = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            h[(i, j)] = s
                .iter()
                .enumerate()
                .map(|(k, sk)| u[(i, k)] * sk * v[(j, k)].conj())
                .sum();
        }
    }
    Ok(h)
}

/// Max-element modulus of `M^H M - I`.
pub fn unitarity_error(m: &CMatrix) -> f64 {
    let mhm = &m.adjoint() * m;
    mhm.max_abs_diff(&CMatrix::identity(m.cols()))
}

/// Modified Gram–Schmidt over the columns, column 0 only renormalized.
pub fn reorthonormalize(m: &mut CMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    for j in 0..cols {
        let mut col = m.column(j).0;
        for k in 0..j {
            let qk = m.column(k);
            let proj: Complex64 = qk.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
            for (c, q) in col.iter_mut().zip(qk.iter()) {
                *c -= proj * q;
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..rows {
            m[(i, j)] = col[i] / norm;
        }
    }
}

/// i.i.d. circular complex Gaussian entries with unit variance.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..rows * cols)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    CMatrix::from_vec(rows, cols, data).expect("finite gaussian draws")
}

pub fn random_unit_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    complex_gaussian_matrix(len, 1, rng).column(0).normalized()
}

/// Haar-ish random unitary from Gram–Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut m = complex_gaussian_matrix(n, n, rng);
    reorthonormalize(&mut m);
    reorthonormalize(&mut m);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitarity_error_examples() {
        assert_eq!(unitarity_error(&CMatrix::identity(3)), 0.0);
        let m = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(unitarity_error(&m), 3.0);
    }

    #[test]
    fn assemble_examples() {
        let s = CMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let id = CMatrix::identity(2);
        assert_eq!(assemble(&id, &s, &id).unwrap(), s);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(3, &mut rng);
        let v = random_unitary(2, &mut rng);
        let h = assemble(&u, &CMatrix::zeros(3, 2), &v).unwrap();
        assert_eq!(h.max_abs(), 0.0);
        assert!(assemble(&u, &CMatrix::zeros(2, 2), &v).is_err());
    }

    #[test]
    fn diag_assembly_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(4, &mut rng);
        let v = random_unitary(2, &mut rng);
        let vals = [Complex64::new(1.5, -0.2), Complex64::new(0.3, 0.4)];
        let dense = CMatrix::diagonal(4, 2, &vals).unwrap();
        let a = assemble(&u, &dense, &v).unwrap();
        let b = assemble_diag(&u, &vals, &v).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn reorthonormalize_keeps_first_column_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = random_unitary(4, &mut rng);
        let first = m.column(0);
        // perturb away from unitarity
        for i in 0..4 {
            for j in 1..4 {
                m[(i, j)] += Complex64::new(1e-6 * (i + j) as f64, -1e-6);
            }
        }
        reorthonormalize(&mut m);
        assert!(unitarity_error(&m) < 1e-14);
        assert!(m.column(0).max_abs_diff(&first) < 1e-15);
    }

    proptest! {
        #[test]
        fn svd_of_assembled_triple_recovers_gains(seed in any::<u64>(), n in 2usize..=4, m in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(n, &mut rng);
            let v = random_unitary(m, &mut rng);
            let k = n.min(m);
            let vals: Vec<Complex64> = (0..k)
                .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let h = assemble_diag(&u, &vals, &v).unwrap();
            let r = svd(&h, SvdOrder::Descending).unwrap();
            let mut expected: Vec<f64> = vals.iter().map(|z| z.norm()).collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in r.singular_values().iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!(assemble(&r.u, &r.s, &r.v).unwrap().max_abs_diff(&h) < 1e-9);
        }
    }
}
