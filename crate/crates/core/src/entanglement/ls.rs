//! Best separable approximation of a two-qubit state,
//! `ρ = λ ρ_sep + (1 - λ) |ψ⟩⟨ψ|` with maximal `λ`.
//!
//! The pure component must lie in the range of `ρ`. For a fixed `ψ` the
//! smallest admissible weight `p = 1 - λ` is the first root of the concave
//! function `p ↦ λ_min(ρ^Γ - p |ψ⟩⟨ψ|^Γ)` below `1/⟨ψ|ρ⁺|ψ⟩`, the largest
//! weight that keeps `ρ - p|ψ⟩⟨ψ|` positive. The weight is then minimized
//! over `ψ` by a multi-start simplex search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sector::partial_transpose_right;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::optim;

/// Slack on the PPT condition, so that exactly PPT remainders count.
const PPT_SLACK: f64 = 1e-12;
const RANGE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsOptions {
    pub starts: usize,
    pub seed: u64,
    /// Absolute accuracy of the weight root and the simplex spread.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self { starts: 6, seed: 0x15ee, tolerance: 1e-11, max_iterations: 3000 }
    }
}

#[derive(Clone, Debug)]
pub struct LsDecomposition {
    pub lambda_max: f64,
    pub e_exact: f64,
    pub pure_component: CVector,
    /// `ρ_sep`, or `None` when `λ_max = 0`.
    pub separable_part: Option<CMatrix>,
    /// `ρ - (1-λ)|ψ⟩⟨ψ|` was checked positive and PPT.
    pub certified: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Entanglement entropy of a two-qubit pure state.
pub(crate) fn pure_entropy(psi: &CVector) -> f64 {
    let m = CMatrix::from_fn(2, 2, |a, b| psi[a * 2 + b]);
    let sv = m.singular_values();
    let norm: f64 = sv.iter().map(|s| s * s).sum();
    linalg::entropy_of(sv.iter().map(|s| s * s / norm))
}

struct Range {
    vecs: CMatrix,
    inv_vals: Vec<f64>,
}

impl Range {
    fn of(rho: &CMatrix) -> Self {
        let (vals, vecs) = linalg::eigh(rho);
        let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > RANGE_THRESHOLD).collect();
        Self {
            vecs: CMatrix::from_fn(4, keep.len(), |i, j| vecs[(i, keep[j])]),
            inv_vals: keep.iter().map(|&k| 1.0 / vals[k]).collect(),
        }
    }

    fn rank(&self) -> usize {
        self.inv_vals.len()
    }

    /// Normalized state and `p_max` from real coordinates.
    fn state(&self, x: &[f64]) -> Option<(CVector, f64)> {
        let z: Vec<C64> = x.chunks(2).map(|p| c(p[0], p[1])).collect();
        let norm2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        if norm2 < 1e-20 {
            return None;
        }
        let psi = &self.vecs * CVector::from_vec(z.clone()) / c(norm2.sqrt(), 0.0);
        let q: f64 = z.iter().zip(&self.inv_vals).map(|(v, w)| v.norm_sqr() * w).sum::<f64>() / norm2;
        Some((psi, 1.0 / q))
    }
}

/// Minimal weight of `ψ`, or a penalty above 1 when no weight works.
fn minimal_weight(rho_pt: &CMatrix, psi: &CVector, p_max: f64, tol: f64) -> f64 {
    let proj_pt = partial_transpose_right(&(psi * psi.adjoint()), 2, 2);
    let g = |p: f64| linalg::eigvalsh(&(rho_pt - &proj_pt * c(p, 0.0)))[0] + PPT_SLACK;
    let p_max = p_max.min(1.0);
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    let upper = if g(p_max) >= 0.0 {
        p_max
    } else {
        let (peak, value) = optim::golden_max(g, 0.0, p_max, tol);
        if value < 0.0 {
            return 1.0 + (1.0 - peak / p_max) - value;
        }
        peak
    };
    optim::bisect(g, 0.0, upper, tol).unwrap_or(upper)
}

pub fn ls_two_qubit(rho: &CMatrix, opts: &LsOptions) -> Result<LsDecomposition> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::Dimension(format!("expected a 4x4 matrix, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let rho = linalg::hermitize(rho);
    let rho_pt = partial_transpose_right(&rho, 2, 2);
    let range = Range::of(&rho);
    let top = range.vecs.column(0).into_owned();

    if linalg::eigvalsh(&rho_pt)[0] >= -PPT_SLACK {
        return Ok(LsDecomposition {
            lambda_max: 1.0,
            e_exact: 0.0,
            pure_component: top,
            separable_part: Some(rho),
            certified: true,
            iterations: 0,
            converged: true,
        });
    }

    let objective = |x: &[f64]| match range.state(x) {
        Some((psi, p_max)) => minimal_weight(&rho_pt, &psi, p_max, opts.tolerance),
        None => 3.0,
    };
    let dims = 2 * range.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = vec![{
        let mut x = vec![0.0; dims];
        x[0] = 1.0;
        x
    }];
    while starts.len() < opts.starts.max(1) {
        starts.push((0..dims).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let mut best: Option<optim::Minimum> = None;
    let mut iterations = 0;
    for x0 in &starts {
        let m = optim::nelder_mead(objective, x0, 0.3, opts.tolerance, opts.max_iterations);
        iterations += m.iterations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    let (psi, _) = range.state(&best.x).expect("optimum has a nonzero state");
    let p = best.value;
    if p > 1.0 {
        return Ok(LsDecomposition {
            lambda_max: 0.0,
            e_exact: pure_entropy(&psi),
            pure_component: psi,
            separable_part: None,
            certified: false,
            iterations,
            converged: false,
        });
    }

    let remainder = &rho - (&psi * psi.adjoint()) * c(p, 0.0);
    let certified = linalg::eigvalsh(&remainder)[0] >= -1e-9
        && linalg::eigvalsh(&partial_transpose_right(&remainder, 2, 2))[0] >= -1e-9;
    let lambda = (1.0 - p).max(0.0);
    Ok(LsDecomposition {
        lambda_max: lambda,
        e_exact: p * pure_entropy(&psi),
        pure_component: psi,
        separable_part: (lambda > 1e-9).then(|| remainder / c(lambda, 0.0)),
        certified,
        iterations,
        converged: best.converged && certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> CVector {
        let h = 0.5f64.sqrt();
        CVector::from_vec(vec![c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn pure_bell_state_has_no_separable_part() {
        let psi = bell();
        let d = ls_two_qubit(&(&psi * psi.adjoint()), &LsOptions::default()).unwrap();
        assert!(d.lambda_max.abs() < 1e-9, "{}", d.lambda_max);
        assert!((d.e_exact - 2f64.ln()).abs() < 1e-9);
        assert!(d.converged && d.separable_part.is_none());
    }

    #[test]
    fn separable_state_is_its_own_approximation() {
        let m = CMatrix::identity(4, 4) * c(0.25, 0.0);
        let d = ls_two_qubit(&m, &LsOptions::default()).unwrap();
        assert_eq!(d.lambda_max, 1.0);
        assert_eq!(d.e_exact, 0.0);
    }

    #[test]
    fn werner_state_weight() {
        // ρ = w|Ψ+⟩⟨Ψ+| + (1-w) I/4; the known best separable approximation
        // keeps the singlet weight (3w - 1)/2 in the pure part
        let w = 0.7;
        let psi = bell();
        let rho = (&psi * psi.adjoint()) * c(w, 0.0) + CMatrix::identity(4, 4) * c((1.0 - w) / 4.0, 0.0);
        let d = ls_two_qubit(&rho, &LsOptions::default()).unwrap();
        assert!(d.certified);
        assert!((1.0 - d.lambda_max - (3.0 * w - 1.0) / 2.0).abs() < 1e-8, "λ = {}", d.lambda_max);
        assert!((d.e_exact - (3.0 * w - 1.0) / 2.0 * 2f64.ln()).abs() < 1e-8);
    }
}
