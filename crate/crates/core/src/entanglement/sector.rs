//! Reordering a multimode operator into `left ⊗ right` form and locating
//! the effective two-qubit sector it lives on.

use super::Bipartition;
use crate::error::{Error, Result};
use crate::fock_space::ModeLayout;
use crate::linalg::{self, CMatrix, CVector, ZERO};

/// Local eigenvalues above this define the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// `(left index, right index)` for every basis index of `layout`.
pub(crate) fn split_indices(layout: &ModeLayout, cut: &Bipartition) -> (Vec<(usize, usize)>, usize, usize) {
    let left = layout.select(cut.left());
    let right = layout.select(cut.right());
    let map = (0..layout.dim())
        .map(|i| {
            let occ = layout.occupations(i);
            let l: Vec<usize> = cut.left().iter().map(|&m| occ[m]).collect();
            let r: Vec<usize> = cut.right().iter().map(|&m| occ[m]).collect();
            (left.index_of(&l).unwrap(), right.index_of(&r).unwrap())
        })
        .collect();
    (map, left.dim(), right.dim())
}

/// Operator with rows and columns ordered `l * d_right + r`.
pub(crate) fn bipartite_matrix(m: &CMatrix, layout: &ModeLayout, cut: &Bipartition) -> (CMatrix, usize, usize) {
    let (map, dl, dr) = split_indices(layout, cut);
    let mut out = CMatrix::zeros(dl * dr, dl * dr);
    for (i, &(li, ri)) in map.iter().enumerate() {
        for (j, &(lj, rj)) in map.iter().enumerate() {
            out[(li * dr + ri, lj * dr + rj)] = m[(i, j)];
        }
    }
    (out, dl, dr)
}

/// Partial transpose on the right factor of a `dl × dr` bipartite operator.
pub fn partial_transpose_right(m: &CMatrix, dl: usize, dr: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dl * dr, dl * dr);
    for a in 0..dl {
        for b in 0..dr {
            for a2 in 0..dl {
                for b2 in 0..dr {
                    out[(a * dr + b2, a2 * dr + b)] = m[(a * dr + b, a2 * dr + b2)];
                }
            }
        }
    }
    out
}

pub fn reduce_left(m: &CMatrix, dl: usize, dr: usize) -> CMatrix {
    CMatrix::from_fn(dl, dl, |a, a2| (0..dr).map(|b| m[(a * dr + b, a2 * dr + b)]).sum())
}

pub fn reduce_right(m: &CMatrix, dl: usize, dr: usize) -> CMatrix {
    CMatrix::from_fn(dr, dr, |b, b2| (0..dl).map(|a| m[(a * dr + b, a * dr + b2)]).sum())
}

/// Two orthonormal local vectors spanning the support of `reduced`
/// (padded with a zero column when the local space is one-dimensional).
fn local_basis(reduced: &CMatrix, side: &str) -> Result<[CVector; 2]> {
    let (vals, vecs) = linalg::eigh(reduced);
    let d = vals.len();
    let rank = vals.iter().filter(|&&v| v > SUPPORT_THRESHOLD).count();
    if rank > 2 {
        return Err(Error::UnsupportedDimension(format!(
            "{side} support has dimension {rank}; only 2x2 sectors are supported"
        )));
    }
    let col = |k: usize| -> CVector {
        if k < d {
            vecs.column(d - 1 - k).into_owned()
        } else {
            CVector::from_element(d, ZERO)
        }
    };
    Ok([col(0), col(1)])
}

/// Compresses a bipartite operator onto the 2×2 sector carrying its support.
pub fn support_sector(m: &CMatrix, dl: usize, dr: usize) -> Result<CMatrix> {
    if dl == 2 && dr == 2 {
        return Ok(m.clone());
    }
    let bl = local_basis(&reduce_left(m, dl, dr), "left")?;
    let br = local_basis(&reduce_right(m, dl, dr), "right")?;
    let mut iso = CMatrix::zeros(dl * dr, 4);
    for a in 0..2 {
        for b in 0..2 {
            for i in 0..dl {
                for j in 0..dr {
                    iso[(i * dr + j, a * 2 + b)] = bl[a][i] * br[b][j];
                }
            }
        }
    }
    let sector = iso.adjoint() * m * &iso;
    let lost = (linalg::trace(m) - linalg::trace(&sector)).norm();
    if lost > 1e-9 {
        return Err(Error::UnsupportedDimension(format!(
            "state is not confined to a 2x2 product sector (weight {lost:.3e} outside)"
        )));
    }
    Ok(linalg::hermitize(&sector))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn partial_transpose_of_bell_projector() {
        let h = 0.5;
        let mut m = CMatrix::zeros(4, 4);
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            m[(i, j)] = c(h, 0.0);
        }
        let pt = partial_transpose_right(&m, 2, 2);
        let vals = linalg::eigvalsh(&pt);
        assert!((vals[0] + 0.5).abs() < 1e-15);
        assert!(vals[1..].iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn embedded_qubits_are_recovered() {
        // |Ψ+⟩ written in a 3x3 space with the excitation in levels {1, 2}
        let mut psi = CVector::zeros(9);
        psi[3 + 2] = c(0.6, 0.0);
        psi[2 * 3 + 1] = c(0.0, 0.8);
        let m = &psi * psi.adjoint();
        let s = support_sector(&m, 3, 3).unwrap();
        assert!((linalg::trace(&s).re - 1.0).abs() < 1e-14);
        let mut spectrum = linalg::eigvalsh(&partial_transpose_right(&s, 2, 2));
        spectrum.sort_by(f64::total_cmp);
        assert!((spectrum[0] + 0.48).abs() < 1e-12);
    }

    #[test]
    fn wide_support_is_rejected() {
        let m = CMatrix::identity(9, 9) * c(1.0 / 9.0, 0.0);
        assert!(matches!(support_sector(&m, 3, 3), Err(Error::UnsupportedDimension(_))));
    }
}
