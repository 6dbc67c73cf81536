//! Truncated multimode Fock space: layouts, pure and mixed states, and the
//! elementary operations on them (tensor products, partial traces, ladder
//! operators).
//!
//! Basis enumeration is row-major over occupation tuples with the last mode
//! varying fastest, so `|n_1 n_2 ... n_M>` sits at
//! `sum_m n_m * prod_{k>m} (cutoff_k + 1)`. Serialized states rely on this
//! order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, ZERO};

/// Normalization tolerance for pure states.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Elementwise Hermiticity tolerance for density operators.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Eigenvalues above `-EIGEN_FLOOR` count as zero.
pub const EIGEN_FLOOR: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Trace leakage below this only warns for operators flagged as truncated
/// channel output.
pub const LEAKAGE_WARN_LIMIT: f64 = 1e-4;
/// Default truncation weight accepted from state factories.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeLayout {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl ModeLayout {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::Dimension("layout needs at least one mode".into()));
        }
        if let Some(m) = cutoffs.iter().position(|&n| n == 0) {
            return Err(Error::Dimension(format!("mode {m} has cutoff 0")));
        }
        let mut strides = vec![1usize; cutoffs.len()];
        for m in (0..cutoffs.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * (cutoffs[m + 1] + 1);
        }
        let dim = strides[0] * (cutoffs[0] + 1);
        Ok(Self { cutoffs, strides, dim })
    }

    /// Two modes with the same cutoff.
    pub fn two_mode(cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff, cutoff])
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn mode_dim(&self, mode: usize) -> usize {
        self.cutoffs[mode] + 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    /// Basis index of an occupation tuple, `None` if any entry exceeds its cutoff.
    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.cutoffs.len() {
            return None;
        }
        let mut idx = 0;
        for (m, &n) in occupations.iter().enumerate() {
            if n > self.cutoffs[m] {
                return None;
            }
            idx += n * self.strides[m];
        }
        Some(idx)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.cutoffs.len()];
        for (m, slot) in occ.iter_mut().enumerate() {
            *slot = index / self.strides[m];
            index %= self.strides[m];
        }
        occ
    }

    /// Occupation of a single mode at a basis index.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn concat(&self, other: &ModeLayout) -> ModeLayout {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        ModeLayout::new(cutoffs).expect("concatenation of valid layouts")
    }

    pub fn select(&self, modes: &[usize]) -> ModeLayout {
        ModeLayout::new(modes.iter().map(|&m| self.cutoffs[m]).collect()).expect("selection of valid modes")
    }
}

#[derive(Clone, Debug)]
pub struct FockState {
    layout: ModeLayout,
    amplitudes: CVector,
}

impl FockState {
    /// Builds a state and normalizes it.
    pub fn new(layout: ModeLayout, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { layout, amplitudes: amplitudes / c(norm, 0.0) })
    }

    pub fn basis(layout: ModeLayout, occupations: &[usize]) -> Result<Self> {
        let idx = layout
            .index_of(occupations)
            .ok_or_else(|| Error::Dimension(format!("occupations {occupations:?} outside layout")))?;
        let mut amps = CVector::zeros(layout.dim());
        amps[idx] = c(1.0, 0.0);
        Ok(Self { layout, amplitudes: amps })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> C64 {
        self.layout.index_of(occupations).map_or(ZERO, |i| self.amplitudes[i])
    }

    pub fn density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator::from_parts(self.layout.clone(), m, false)
    }

    pub fn to_json(&self) -> FockStateJson {
        FockStateJson {
            cutoffs: self.layout.cutoffs().to_vec(),
            amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_json(json: &FockStateJson) -> Result<Self> {
        let layout = ModeLayout::new(json.cutoffs.clone())?;
        let amps = CVector::from_iterator(json.amplitudes.len(), json.amplitudes.iter().map(|p| c(p[0], p[1])));
        if amps.len() != layout.dim() {
            return Err(Error::Format(format!(
                "amplitudes has {} entries, cutoffs {:?} need {}",
                amps.len(),
                json.cutoffs,
                layout.dim()
            )));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("amplitudes have norm {norm}, expected 1")));
        }
        Self::new(layout, amps)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FockStateJson {
    pub cutoffs: Vec<usize>,
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct DensityOperator {
    layout: ModeLayout,
    matrix: CMatrix,
    truncated_output: bool,
}

impl DensityOperator {
    /// Validating constructor: Hermitian, positive semidefinite, unit trace.
    pub fn new(layout: ModeLayout, matrix: CMatrix) -> Result<Self> {
        let rho = Self::checked_shape(layout, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Constructor for output of a channel simulated at finite cutoff. Trace
    /// leakage up to [`LEAKAGE_WARN_LIMIT`] is logged instead of rejected.
    pub fn from_truncated_channel(layout: ModeLayout, matrix: CMatrix) -> Result<Self> {
        let mut rho = Self::checked_shape(layout, linalg::hermitize(&matrix))?;
        rho.truncated_output = true;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(layout: ModeLayout, matrix: CMatrix, truncated_output: bool) -> Self {
        debug_assert_eq!(matrix.nrows(), layout.dim());
        Self { layout, matrix, truncated_output }
    }

    fn checked_shape(layout: ModeLayout, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, layout dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        Ok(Self { layout, matrix, truncated_output: false })
    }

    pub fn validate(&self) -> Result<()> {
        let defect = linalg::hermiticity_defect(&self.matrix);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:.3e})")));
        }
        let min_eig = linalg::eigvalsh(&self.matrix)[0];
        if min_eig < -EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        let tr = self.trace();
        let leak = (tr - 1.0).abs();
        if leak > TRACE_TOLERANCE {
            if self.truncated_output && leak < LEAKAGE_WARN_LIMIT {
                log::warn!("truncated channel output has trace {tr:.12} (leakage {leak:.3e})");
            } else {
                return Err(Error::InvalidState(format!("trace {tr:.12} differs from 1")));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn is_truncated_output(&self) -> bool {
        self.truncated_output
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn element(&self, row: &[usize], col: &[usize]) -> C64 {
        match (self.layout.index_of(row), self.layout.index_of(col)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => ZERO,
        }
    }

    /// Embed into a layout with equal or larger cutoffs, zero-padding.
    pub fn embed(&self, target: &ModeLayout) -> Result<DensityOperator> {
        if target.num_modes() != self.layout.num_modes()
            || target.cutoffs().iter().zip(self.layout.cutoffs()).any(|(t, s)| t < s)
        {
            return Err(Error::Dimension(format!(
                "cannot embed cutoffs {:?} into {:?}",
                self.layout.cutoffs(),
                target.cutoffs()
            )));
        }
        let map: Vec<usize> = (0..self.dim()).map(|i| target.index_of(&self.layout.occupations(i)).unwrap()).collect();
        let mut out = CMatrix::zeros(target.dim(), target.dim());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out[(map[i], map[j])] = self.matrix[(i, j)];
            }
        }
        Ok(Self::from_parts(target.clone(), out, self.truncated_output))
    }

    /// Reorder tensor factors: mode `k` of the result is mode `order[k]` of `self`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<DensityOperator> {
        let n = self.layout.num_modes();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&m| m >= n || std::mem::replace(&mut seen[m], true)) {
            return Err(Error::Domain(format!("{order:?} is not a permutation of {n} modes")));
        }
        let new_layout = self.layout.select(order);
        let old_of_new: Vec<usize> = (0..new_layout.dim())
            .map(|i| {
                let occ_new = new_layout.occupations(i);
                let mut occ_old = vec![0; n];
                for (k, &m) in order.iter().enumerate() {
                    occ_old[m] = occ_new[k];
                }
                self.layout.index_of(&occ_old).unwrap()
            })
            .collect();
        let d = new_layout.dim();
        let out = CMatrix::from_fn(d, d, |i, j| self.matrix[(old_of_new[i], old_of_new[j])]);
        Ok(Self::from_parts(new_layout, out, self.truncated_output))
    }

    pub fn to_json(&self) -> DensityOperatorJson {
        DensityOperatorJson {
            cutoffs: self.layout.cutoffs().to_vec(),
            matrix: self.matrix.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }

    pub fn from_json(json: &DensityOperatorJson) -> Result<Self> {
        let layout = ModeLayout::new(json.cutoffs.clone())?;
        let d = layout.dim();
        if json.matrix.len() != d {
            return Err(Error::Format(format!("matrix has {} rows, expected {d}", json.matrix.len())));
        }
        let mut m = CMatrix::zeros(d, d);
        for (i, row) in json.matrix.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Format(format!("matrix row {i} has {} entries, expected {d}", row.len())));
            }
            for (j, z) in row.iter().enumerate() {
                m[(i, j)] = c(z[0], z[1]);
            }
        }
        Self::new(layout, m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityOperatorJson {
    pub cutoffs: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellKind {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [BellKind::PsiPlus, BellKind::PsiMinus, BellKind::PhiPlus, BellKind::PhiMinus];

    pub fn sign(self) -> f64 {
        match self {
            BellKind::PsiPlus | BellKind::PhiPlus => 1.0,
            BellKind::PsiMinus | BellKind::PhiMinus => -1.0,
        }
    }

    pub fn is_psi(self) -> bool {
        matches!(self, BellKind::PsiPlus | BellKind::PsiMinus)
    }
}

fn require_two_modes(layout: &ModeLayout) -> Result<()> {
    if layout.num_modes() != 2 {
        return Err(Error::Dimension(format!("expected a two-mode layout, got {} modes", layout.num_modes())));
    }
    Ok(())
}

/// `(|01> ± |10>)/√2` or `(|00> ± |11>)/√2`.
pub fn make_bell_state(kind: BellKind, layout: &ModeLayout) -> Result<FockState> {
    require_two_modes(layout)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (first, second) = if kind.is_psi() { ([0, 1], [1, 0]) } else { ([0, 0], [1, 1]) };
    let mut amps = CVector::zeros(layout.dim());
    amps[layout.index_of(&first).unwrap()] = c(h, 0.0);
    amps[layout.index_of(&second).unwrap()] = c(kind.sign() * h, 0.0);
    Ok(FockState { layout: layout.clone(), amplitudes: amps })
}

/// A factory output together with the probability weight lost to truncation.
#[derive(Clone, Debug)]
pub struct Truncated<T> {
    pub state: T,
    pub truncation_weight: f64,
}

impl<T> Truncated<T> {
    pub fn check(self, tolerance: f64) -> Result<T> {
        if self.truncation_weight > tolerance {
            return Err(Error::Truncation {
                detail: "state factory truncation".into(),
                leakage: self.truncation_weight,
                tolerance,
            });
        }
        Ok(self.state)
    }
}

/// Two-mode squeezed vacuum `sqrt(1-q²) Σ qⁿ |nn>`, truncated at the smaller
/// cutoff and renormalized.
pub fn make_tmsv(q: f64, layout: &ModeLayout) -> Result<Truncated<FockState>> {
    require_two_modes(layout)?;
    if !(q.abs() < 1.0) {
        return Err(Error::Domain(format!("squeezing parameter |q| = {} must be < 1", q.abs())));
    }
    let n_max = layout.cutoffs()[0].min(layout.cutoffs()[1]);
    let norm = (1.0 - q * q).sqrt();
    let mut amps = CVector::zeros(layout.dim());
    let mut qn = 1.0;
    for n in 0..=n_max {
        amps[layout.index_of(&[n, n]).unwrap()] = c(norm * qn, 0.0);
        qn *= q;
    }
    let truncation_weight = (q * q).powi(n_max as i32 + 1);
    Ok(Truncated { state: FockState::new(layout.clone(), amps)?, truncation_weight })
}

/// Thermal state of a single mode with mean occupation `n_th`, renormalized
/// on the truncated space.
pub fn make_thermal(n_th: f64, cutoff: usize) -> Result<Truncated<DensityOperator>> {
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::Domain(format!("thermal occupation {n_th} must be >= 0")));
    }
    let layout = ModeLayout::new(vec![cutoff])?;
    let ratio = n_th / (n_th + 1.0);
    let weights: Vec<f64> = (0..=cutoff).map(|n| ratio.powi(n as i32) / (n_th + 1.0)).collect();
    let kept: f64 = weights.iter().sum();
    let mut m = CMatrix::zeros(cutoff + 1, cutoff + 1);
    for (n, w) in weights.iter().enumerate() {
        m[(n, n)] = c(w / kept, 0.0);
    }
    Ok(Truncated {
        state: DensityOperator::from_parts(layout, m, false),
        truncation_weight: ratio.powi(cutoff as i32 + 1),
    })
}

pub fn vacuum(layout: &ModeLayout) -> DensityOperator {
    FockState::basis(layout.clone(), &vec![0; layout.num_modes()]).expect("vacuum is inside every layout").density()
}

/// Kronecker product with concatenated layout.
pub fn tensor(a: &DensityOperator, b: &DensityOperator) -> DensityOperator {
    DensityOperator::from_parts(
        a.layout.concat(&b.layout),
        linalg::kron(&a.matrix, &b.matrix),
        a.truncated_output || b.truncated_output,
    )
}

/// Reduced operator on the modes in `keep` (taken in ascending order).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let n = rho.layout.num_modes();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::Domain("partial trace must keep at least one mode".into()));
    }
    if let Some(&m) = keep.iter().find(|&&m| m >= n) {
        return Err(Error::Domain(format!("mode {m} out of range for {n} modes")));
    }
    if keep.len() == n {
        return Ok(rho.clone());
    }
    let traced: Vec<usize> = (0..n).filter(|m| !keep.contains(m)).collect();
    let order: Vec<usize> = keep.iter().chain(traced.iter()).copied().collect();
    let permuted = rho.permute_modes(&order)?;
    let kept_layout = rho.layout.select(&keep);
    let dk = kept_layout.dim();
    let dt = permuted.dim() / dk;
    let m = &permuted.matrix;
    let out = CMatrix::from_fn(dk, dk, |i, j| (0..dt).map(|k| m[(i * dt + k, j * dt + k)]).sum());
    Ok(DensityOperator::from_parts(kept_layout, out, rho.truncated_output))
}

/// Partial transpose of the modes in `modes`.
pub fn partial_transpose(rho: &DensityOperator, modes: &[usize]) -> CMatrix {
    let layout = &rho.layout;
    let d = layout.dim();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            // swap the occupations of the transposed modes between row and column
            let (mut ii, mut jj) = (i, j);
            for &m in modes {
                let s = layout.stride(m);
                let ni = layout.occupation(i, m);
                let nj = layout.occupation(j, m);
                ii = ii - ni * s + nj * s;
                jj = jj - nj * s + ni * s;
            }
            out[(ii, jj)] = rho.matrix[(i, j)];
        }
    }
    out
}

/// Mean photon number of one mode.
pub fn mean_photon_number(rho: &DensityOperator, mode: usize) -> f64 {
    (0..rho.dim()).map(|i| rho.layout.occupation(i, mode) as f64 * rho.matrix[(i, i)].re).sum()
}

/// Population of the highest Fock level of `mode`.
pub fn top_level_population(rho: &DensityOperator, mode: usize) -> f64 {
    let top = rho.layout.cutoffs()[mode];
    (0..rho.dim()).filter(|&i| rho.layout.occupation(i, mode) == top).map(|i| rho.matrix[(i, i)].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two(c: usize) -> ModeLayout {
        ModeLayout::two_mode(c).unwrap()
    }

    #[test]
    fn layout_enumeration_is_last_mode_fastest() {
        let l = ModeLayout::new(vec![1, 2]).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(l.index_of(&[0, 1]), Some(1));
        assert_eq!(l.index_of(&[1, 0]), Some(3));
        assert_eq!(l.occupations(5), vec![1, 2]);
        assert_eq!(l.index_of(&[0, 3]), None);
        for i in 0..l.dim() {
            assert_eq!(l.index_of(&l.occupations(i)), Some(i));
        }
    }

    #[test]
    fn zero_cutoff_is_rejected() {
        assert!(matches!(ModeLayout::new(vec![1, 0]), Err(Error::Dimension(_))));
        assert!(matches!(ModeLayout::new(vec![]), Err(Error::Dimension(_))));
    }

    #[test]
    fn bell_amplitudes() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = make_bell_state(BellKind::PsiPlus, &two(1)).unwrap();
        assert_abs_diff_eq!(psi.amplitude(&[0, 1]).re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amplitude(&[1, 0]).re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amplitude(&[0, 0]).norm(), 0.0);
        let phi = make_bell_state(BellKind::PhiMinus, &two(1)).unwrap();
        assert_abs_diff_eq!(phi.amplitude(&[0, 0]).re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.amplitude(&[1, 1]).re, -h, epsilon = 1e-15);

        let big = make_bell_state(BellKind::PsiPlus, &two(3)).unwrap();
        assert_eq!(big.amplitudes().len(), 16);
        assert_abs_diff_eq!(big.amplitude(&[0, 1]).re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(big.amplitudes().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bell_needs_two_modes() {
        let one = ModeLayout::new(vec![2]).unwrap();
        assert!(matches!(make_bell_state(BellKind::PhiPlus, &one), Err(Error::Dimension(_))));
    }

    #[test]
    fn tmsv_factory() {
        let vac = make_tmsv(0.0, &two(5)).unwrap();
        assert_eq!(vac.truncation_weight, 0.0);
        assert_abs_diff_eq!(vac.state.amplitude(&[0, 0]).re, 1.0);

        let t = make_tmsv(0.5, &two(10)).unwrap();
        // geometric tail (q²)^(N+1), summed independently
        let tail: f64 = (11..400).map(|n| 0.75 * 0.25f64.powi(n)).sum();
        assert_abs_diff_eq!(t.truncation_weight, tail, epsilon = 1e-15);
        assert_abs_diff_eq!(t.truncation_weight, 2.384185791015625e-7, epsilon = 1e-18);
        let unnormalized = 0.75f64.sqrt() * 0.5;
        assert_abs_diff_eq!(unnormalized, 0.4330127018922193, epsilon = 1e-15);
        let renorm = (1.0 - t.truncation_weight).sqrt();
        assert_abs_diff_eq!(t.state.amplitude(&[1, 1]).re, unnormalized / renorm, epsilon = 1e-14);

        assert!(matches!(make_tmsv(1.0, &two(3)), Err(Error::Domain(_))));
        assert!(make_tmsv(0.9, &two(3)).unwrap().check(1e-6).is_err());
    }

    #[test]
    fn tmsv_reduction_is_thermal() {
        let q = 0.4;
        let t = make_tmsv(q, &two(20)).unwrap().state.density();
        let red = partial_trace(&t, &[0]).unwrap();
        let p0 = red.matrix()[(0, 0)].re;
        for n in 0..=20 {
            assert_abs_diff_eq!(red.matrix()[(n, n)].re, p0 * (q * q).powi(n as i32), epsilon = 1e-14);
            if n > 0 {
                assert_abs_diff_eq!(red.matrix()[(n, n - 1)].norm(), 0.0);
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let l1 = ModeLayout::new(vec![1]).unwrap();
        let v = vacuum(&l1);
        let vv = tensor(&v, &v);
        assert_eq!(vv.layout().cutoffs(), &[1, 1]);
        assert_abs_diff_eq!(vv.element(&[0, 0], &[0, 0]).re, 1.0);
        assert_abs_diff_eq!(vv.trace(), 1.0);

        let mixed = DensityOperator::new(l1.clone(), CMatrix::identity(2, 2) * c(0.5, 0.0)).unwrap();
        let t = tensor(&mixed, &v);
        let diag: Vec<f64> = t.matrix().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn partial_trace_examples() {
        let psi = make_bell_state(BellKind::PsiPlus, &two(1)).unwrap().density();
        let red = partial_trace(&psi, &[0]).unwrap();
        assert!(linalg::max_abs_diff(red.matrix(), &(CMatrix::identity(2, 2) * c(0.5, 0.0))) < 1e-15);
        assert!(matches!(partial_trace(&psi, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn partial_transpose_of_bell() {
        let psi = make_bell_state(BellKind::PsiPlus, &two(1)).unwrap().density();
        let pt = partial_transpose(&psi, &[1]);
        let ev = linalg::eigvalsh(&pt);
        assert_abs_diff_eq!(ev[0], -0.5, epsilon = 1e-14);
        for e in &ev[1..] {
            assert_abs_diff_eq!(*e, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn validation_rejects_bad_operators() {
        let l = ModeLayout::new(vec![1]).unwrap();
        let nonherm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(DensityOperator::new(l.clone(), nonherm).is_err());
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(DensityOperator::new(l.clone(), neg).is_err());
        let leaky = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), ZERO, ZERO, c(0.49999, 0.0)]);
        assert!(DensityOperator::new(l.clone(), leaky.clone()).is_err());
        assert!(DensityOperator::from_truncated_channel(l, leaky).is_ok());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let rho = make_bell_state(BellKind::PhiMinus, &two(1)).unwrap().density();
        let text = serde_json::to_string(&rho.to_json()).unwrap();
        let back = DensityOperator::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(back.matrix(), rho.matrix()) < 1e-15);

        let bad = DensityOperatorJson { cutoffs: vec![1, 1], matrix: vec![vec![[1.0, 0.0]; 4]; 3] };
        assert!(matches!(DensityOperator::from_json(&bad), Err(Error::Format(_))));

        let psi = make_tmsv(0.3, &two(4)).unwrap().state;
        let again = FockState::from_json(&psi.to_json()).unwrap();
        assert!((again.amplitudes() - psi.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn thermal_factory() {
        let t = make_thermal(1.0, 3).unwrap();
        assert_abs_diff_eq!(t.truncation_weight, 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(t.state.trace(), 1.0, epsilon = 1e-15);
        let zero = make_thermal(0.0, 3).unwrap();
        assert_eq!(zero.truncation_weight, 0.0);
        assert_abs_diff_eq!(zero.state.matrix()[(0, 0)].re, 1.0);
    }
}
