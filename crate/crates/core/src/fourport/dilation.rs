//! Fock-space realization of a four-mode Bogoliubov transformation.
//!
//! Modes are ordered (field₁, field₂, device₁, device₂) and the operator
//! vector is `α = (a₁, a₂, d₁, d₂)` with `d = g` for absorbing and `d = g†`
//! for amplifying devices. A Lie-algebra element `K` (with `K J + J K† = 0`)
//! is realized as `U = exp(iG)`, `G = Σ M_jk :α_j† α_k:` and `M = -i J K`, so
//! that `U† α U = exp(K) α`. The generator is assembled on the truncated
//! space, which keeps `U` exactly unitary there; for absorbing devices `G`
//! conserves photon number and the result is exact whenever every mode can
//! hold the total photon number of the input.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::device::Sigma;
use crate::fock_space::ModeLayout;
use crate::linalg::{c, CMatrix, C64, ZERO};

/// Row-compressed sparse matrix.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, col, _)| (r, col));
        let mut row_start = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, col, v) in triplets {
            if last == Some((r, col)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(col);
            vals.push(v);
            row_start[r + 1] += 1;
            last = Some((r, col));
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        Self { dim, row_start, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_dot(&self, r: usize, x: &[C64]) -> C64 {
        let mut acc = ZERO;
        for k in self.row_start[r]..self.row_start[r + 1] {
            acc += self.vals[k] * x[self.cols[k]];
        }
        acc
    }

    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        #[cfg(feature = "parallel")]
        {
            if self.dim >= 4096 {
                out.par_iter_mut().enumerate().for_each(|(r, o)| *o = self.row_dot(r, x));
                return;
            }
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, x);
        }
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm of a
    /// Hermitian operator.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.vals[self.row_start[r]..self.row_start[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy)]
enum Ladder {
    Create(usize),
    Annihilate(usize),
}

fn apply_ladder(layout: &ModeLayout, index: usize, op: Ladder) -> Option<(usize, f64)> {
    match op {
        Ladder::Create(m) => {
            let n = layout.occupation(index, m);
            (n < layout.cutoffs()[m]).then(|| (index + layout.stride(m), ((n + 1) as f64).sqrt()))
        }
        Ladder::Annihilate(m) => {
            let n = layout.occupation(index, m);
            (n > 0).then(|| (index - layout.stride(m), (n as f64).sqrt()))
        }
    }
}

/// Ladder operator realizing `α_j` (`dagger = false`) or `α_j†`.
fn alpha(mode: usize, dagger: bool, sigma: Sigma) -> Ladder {
    let creation_type = mode >= 2 && sigma == Sigma::Amplifying;
    if creation_type != dagger {
        Ladder::Create(mode)
    } else {
        Ladder::Annihilate(mode)
    }
}

/// Sparse `G = Σ M_jk :α_j† α_k:` with `M = -i J K` on a four-mode layout.
pub fn quadratic_generator(k: &CMatrix, sigma: Sigma, layout: &ModeLayout) -> SparseOperator {
    assert_eq!(layout.num_modes(), 4, "dilation layout has four modes");
    let j = sigma.j_form();
    let m = (&j * k) * c(0.0, -1.0);
    let mut terms = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            let coeff = m[(a, b)];
            if coeff.norm() < 1e-15 {
                continue;
            }
            let left = alpha(a, true, sigma);
            let right = alpha(b, false, sigma);
            // normal order: annihilation acts first
            let (first, second) = match (left, right) {
                (Ladder::Annihilate(_), Ladder::Create(_)) => (left, right),
                _ => (right, left),
            };
            terms.push((coeff, first, second));
        }
    }
    let dim = layout.dim();
    let mut triplets = Vec::with_capacity(dim * terms.len());
    for col in 0..dim {
        for &(coeff, first, second) in &terms {
            let Some((mid, f1)) = apply_ladder(layout, col, first) else {
                continue;
            };
            let Some((row, f2)) = apply_ladder(layout, mid, second) else {
                continue;
            };
            triplets.push((row, col, coeff * (f1 * f2)));
        }
    }
    SparseOperator::from_triplets(dim, triplets)
}

/// `exp(iG) v` for Hermitian `G`, by scaled Taylor series.
pub fn expi_apply(g: &SparseOperator, v: &[C64]) -> Vec<C64> {
    let norm = g.inf_norm();
    let steps = norm.ceil().max(1.0) as usize;
    let scale = c(0.0, 1.0 / steps as f64);
    let mut current = v.to_vec();
    let mut term = vec![ZERO; v.len()];
    let mut scratch = vec![ZERO; v.len()];
    for _ in 0..steps {
        term.copy_from_slice(&current);
        let base = norm_of(&current);
        for order in 1..=60 {
            g.apply(&term, &mut scratch);
            let f = scale / order as f64;
            for (t, s) in term.iter_mut().zip(&scratch) {
                *t = s * f;
            }
            for (x, t) in current.iter_mut().zip(&term) {
                *x += t;
            }
            if norm_of(&term) <= 1e-17 * base {
                break;
            }
        }
    }
    current
}

fn norm_of(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A product of Gaussian unitaries `U = U_1 U_2 ... U_n` on a four-mode layout.
#[derive(Clone, Debug)]
pub struct Dilation {
    layout: ModeLayout,
    /// Stored in application order (rightmost factor first).
    generators: Vec<SparseOperator>,
}

impl Dilation {
    /// `ks` lists Lie-algebra factors with `Λ = exp(ks[0]) exp(ks[1]) ...`.
    pub fn new(ks: &[CMatrix], sigma: Sigma, layout: ModeLayout) -> Self {
        let generators =
            ks.iter().rev().filter(|k| k.norm() > 1e-15).map(|k| quadratic_generator(k, sigma, &layout)).collect();
        Self { layout, generators }
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = v.to_vec();
        for g in &self.generators {
            out = expi_apply(g, &out);
        }
        out
    }

    /// Like [`Dilation::apply`], also returning for every mode the largest
    /// top-level population seen after any factor. Intermediate states can
    /// hit the cutoff even when the final state does not.
    pub fn apply_tracked(&self, v: &[C64]) -> (Vec<C64>, Vec<f64>) {
        let mut out = v.to_vec();
        let mut top = vec![0.0; self.layout.num_modes()];
        for g in &self.generators {
            out = expi_apply(g, &out);
            for (slot, p) in top.iter_mut().zip(self.top_populations(&out)) {
                *slot = f64::max(*slot, p);
            }
        }
        (out, top)
    }

    fn top_populations(&self, v: &[C64]) -> Vec<f64> {
        let cutoffs = self.layout.cutoffs();
        let mut top = vec![0.0; cutoffs.len()];
        for (i, z) in v.iter().enumerate() {
            let p = z.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (m, slot) in top.iter_mut().enumerate() {
                if self.layout.occupation(i, m) == cutoffs[m] {
                    *slot += p;
                }
            }
        }
        top
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourport::device::{DeviceSpec, LambdaFactors};
    use crate::linalg::{self, ONE};

    fn basis(layout: &ModeLayout, occ: &[usize]) -> Vec<C64> {
        let mut v = vec![ZERO; layout.dim()];
        v[layout.index_of(occ).unwrap()] = ONE;
        v
    }

    #[test]
    fn single_photon_amplitudes_follow_lambda() {
        // ⟨1_l| U |1_k⟩ = Λ_lk for a passive dilation
        let t = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.2), c(0.1, -0.3), c(-0.2, 0.1), c(0.3, 0.5)]);
        let spec = DeviceSpec::with_completed_absorption(t, Sigma::Absorbing, 0.0).unwrap();
        let factors = LambdaFactors::new(&spec).unwrap();
        let lambda = factors.product();
        let layout = ModeLayout::new(vec![2, 2, 2, 2]).unwrap();
        let dil = Dilation::new(&factors.generators(), Sigma::Absorbing, layout.clone());
        for k in 0..4 {
            let mut occ = [0usize; 4];
            occ[k] = 1;
            let out = dil.apply(&basis(&layout, &occ));
            for l in 0..4 {
                let mut occ_l = [0usize; 4];
                occ_l[l] = 1;
                let amp = out[layout.index_of(&occ_l).unwrap()];
                assert!((amp - lambda.matrix()[(l, k)]).norm() < 1e-12, "l={l} k={k}");
            }
            assert!((norm_of(&out) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn two_mode_squeezer_vacuum_amplitudes() {
        // exp(r(a†g† - a g))|00⟩ = Σ tanhⁿr / cosh r |nn⟩
        let r: f64 = 0.4;
        let mut k = CMatrix::zeros(4, 4);
        k[(0, 2)] = c(r, 0.0);
        k[(2, 0)] = c(r, 0.0);
        let layout = ModeLayout::new(vec![30, 1, 30, 1]).unwrap();
        let dil = Dilation::new(&[k], Sigma::Amplifying, layout.clone());
        let out = dil.apply(&basis(&layout, &[0, 0, 0, 0]));
        for n in 0..8 {
            let amp = out[layout.index_of(&[n, 0, n, 0]).unwrap()];
            let expect = r.tanh().powi(n as i32) / r.cosh();
            assert!((amp.norm() - expect).abs() < 1e-10, "n={n}: {amp} vs {expect}");
        }
    }

    #[test]
    fn identity_generator_is_skipped() {
        let layout = ModeLayout::new(vec![1, 1, 1, 1]).unwrap();
        let dil = Dilation::new(&[CMatrix::zeros(4, 4)], Sigma::Absorbing, layout.clone());
        let v = basis(&layout, &[1, 0, 0, 1]);
        assert_eq!(dil.apply(&v), v);
        let g = quadratic_generator(&CMatrix::zeros(4, 4), Sigma::Absorbing, &layout);
        assert_eq!(g.nnz(), 0);
        let _ = linalg::ZERO;
    }
}
