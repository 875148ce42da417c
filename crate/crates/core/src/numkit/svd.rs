//! One-sided (Hestenes) Jacobi SVD for small complex matrices.
//!
//! Columns of the working matrix are rotated pairwise until mutually
//! orthogonal; their norms are then the singular values and the accumulated
//! rotations form `V`. One-sided Jacobi keeps high relative accuracy on the
//! small singular values, which the sorted-reference comparisons rely on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// Largest supported row or column count.
pub const MAX_SVD_DIM: usize = 8;
const MAX_SWEEPS: usize = 100;
const OFF_TOL: f64 = 1e-14;
const GAUGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdOrder {
    /// Singular values sorted non-increasing (ties keep their original order).
    Descending,
    /// Order as produced by the Jacobi sweeps, no sorting.
    Natural,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriple {
    pub u: CMatrix,
    pub s: CMatrix,
    pub v: CMatrix,
    pub order: SvdOrder,
}

impl SvdTriple {
    pub fn singular_values(&self) -> Vec<f64> {
        self.s.diag().iter().map(|z| z.re).collect()
    }
}

/// Full SVD `H = U S V^H` with `U` N×N, `S` N×M, `V` M×M.
///
/// Each column of `V` has its first nonzero entry made real-positive (the
/// paired `U` column is rotated by the same phase).
pub fn svd(h: &CMatrix, order: SvdOrder) -> Result<SvdTriple> {
    let (n, m) = (h.rows(), h.cols());
    if n > MAX_SVD_DIM || m > MAX_SVD_DIM {
        return Err(Error::UnsupportedSize {
            rows: n,
            cols: m,
            limit: MAX_SVD_DIM,
        });
    }
    if !h.is_finite() {
        return Err(Error::NonFinite);
    }

    let (mut u, sigma, mut v) = if n >= m {
        jacobi_tall(h, order)?
    } else {
        // H^H = U' S V'^H  =>  H = V' S^T U'^H
        let (ut, sigma, vt) = jacobi_tall(&h.adjoint(), order)?;
        (vt, sigma, ut)
    };

    let paired = n.min(m);
    for j in 0..m {
        let Some(lead) = (0..m).map(|i| v[(i, j)]).find(|z| z.norm() > GAUGE_TOL) else {
            continue;
        };
        let phase = lead.conj() / lead.norm();
        for i in 0..m {
            v[(i, j)] *= phase;
        }
        if j < paired {
            for i in 0..n {
                u[(i, j)] *= phase;
            }
        }
    }

    let diag: Vec<Complex64> = sigma.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let s = CMatrix::diagonal(n, m, &diag)?;
    Ok(SvdTriple { u, s, v, order })
}

/// SVD of a tall (rows ≥ cols) matrix: returns full U (rows×rows), the
/// `cols` singular values and V (cols×cols).
fn jacobi_tall(a: &CMatrix, order: SvdOrder) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut work: Vec<Vec<Complex64>> = (0..cols).map(|j| a.column(j).0).collect();
    let mut vcols: Vec<Vec<Complex64>> = (0..cols)
        .map(|j| crate::numkit::CVector::basis(cols, j).0)
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = work[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = work[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = work[p]
                    .iter()
                    .zip(&work[q])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let g = gamma.norm();
                if g == 0.0 || g <= OFF_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let e = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let sign = if zeta < 0.0 { -1.0 } else { 1.0 };
                let t = sign / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut work, p, q, c, s, e);
                rotate(&mut vcols, p, q, c, s, e);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut sigma: Vec<f64> = work
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();

    let mut perm: Vec<usize> = (0..cols).collect();
    if order == SvdOrder::Descending {
        // stable: equal values keep original index order
        perm.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    }
    sigma = perm.iter().map(|&i| sigma[i]).collect();

    let mut ucols: Vec<Option<Vec<Complex64>>> = perm
        .iter()
        .zip(&sigma)
        .map(|(&i, &s)| (s > 0.0).then(|| work[i].iter().map(|z| z / s).collect()))
        .collect();
    ucols.resize(rows, None);
    let ucols = complete_basis(rows, ucols);

    let mut u = CMatrix::zeros(rows, rows);
    for (j, col) in ucols.iter().enumerate() {
        u.set_column(j, col);
    }
    let mut v = CMatrix::zeros(cols, cols);
    for (j, &i) in perm.iter().enumerate() {
        v.set_column(j, &vcols[i]);
    }
    Ok((u, sigma, v))
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, c: f64, s: f64, e: Complex64) {
    let (head, tail) = cols.split_at_mut(q);
    let (xp, xq) = (&mut head[p], &mut tail[0]);
    let ec = e.conj();
    for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x0, y0) = (*x, *y);
        *x = x0 * c - ec * y0 * s;
        *y = e * x0 * s + y0 * c;
    }
}

/// Fills missing slots with standard-basis vectors orthogonalized against the
/// present columns (two Gram–Schmidt passes each).
fn complete_basis(len: usize, mut cols: Vec<Option<Vec<Complex64>>>) -> Vec<Vec<Complex64>> {
    let mut candidate = 0usize;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        while candidate < len {
            let mut r = crate::numkit::CVector::basis(len, candidate).0;
            candidate += 1;
            for _ in 0..2 {
                for existing in cols.iter().flatten() {
                    let proj: Complex64 = existing.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                    for (ri, ei) in r.iter_mut().zip(existing) {
                        *ri -= proj * ei;
                    }
                }
            }
            let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols[slot] = Some(r.into_iter().map(|z| z / norm).collect());
                break;
            }
        }
    }
    cols.into_iter()
        .map(|c| c.expect("basis completion exhausted"))
        .collect()
}
