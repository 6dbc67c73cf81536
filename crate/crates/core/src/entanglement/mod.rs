//! Entanglement measures across a bipartition of the field modes.
//!
//! All values are in nats.

mod ls;
mod ree;
pub mod sector;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_space::{DensityOperator, FockState};
use crate::fourport::{apply_local_channels, ChannelOptions, DeviceSpec, LocalChannel};
use crate::linalg::{self, CMatrix};

pub use ls::{LsDecomposition, LsOptions};
pub use ree::{ReeOptions, ReeSolution};
use sector::{bipartite_matrix, partial_transpose_right, support_sector};

/// Split of the modes into two parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Bipartition {
    pub fn new(mut left: Vec<usize>, mut right: Vec<usize>) -> Result<Self> {
        left.sort_unstable();
        right.sort_unstable();
        if left.is_empty() || right.is_empty() {
            return Err(Error::Dimension("both parties need at least one mode".into()));
        }
        let mut all: Vec<usize> = left.iter().chain(&right).copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(k, &m)| k != m) {
            return Err(Error::Dimension(format!(
                "modes {left:?} | {right:?} are not a disjoint cover of 0..{}",
                all.len()
            )));
        }
        Ok(Self { left, right })
    }

    /// Mode 0 against mode 1.
    pub fn two_mode() -> Self {
        Self { left: vec![0], right: vec![1] }
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn num_modes(&self) -> usize {
        self.left.len() + self.right.len()
    }

    fn check(&self, modes: usize) -> Result<()> {
        if self.num_modes() != modes {
            return Err(Error::Dimension(format!("bipartition covers {} modes, state has {modes}", self.num_modes())));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    ReducedEntropy,
    Negativity,
    LogNegativity,
    RelativeEntropy,
    #[serde(rename = "LSEntanglement")]
    LsEntanglement,
    UpperBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub measure: Measure,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl EntanglementReport {
    fn exact(measure: Measure, value: f64) -> Self {
        Self { measure, value, converged: true, iterations: 0, residual: 0.0 }
    }
}

/// Von Neumann entropy of the left reduced state of a pure state.
pub fn reduced_entropy(psi: &FockState, cut: &Bipartition) -> Result<EntanglementReport> {
    cut.check(psi.layout().num_modes())?;
    let (map, dl, dr) = sector::split_indices(psi.layout(), cut);
    let mut m = CMatrix::zeros(dl, dr);
    for (i, &(l, r)) in map.iter().enumerate() {
        m[(l, r)] = psi.amplitudes()[i];
    }
    let sv = m.singular_values();
    let value = linalg::entropy_of(sv.iter().map(|s| s * s));
    Ok(EntanglementReport::exact(Measure::ReducedEntropy, value))
}

fn pt_spectrum(rho: &DensityOperator, cut: &Bipartition) -> Result<Vec<f64>> {
    cut.check(rho.layout().num_modes())?;
    let (m, dl, dr) = bipartite_matrix(rho.matrix(), rho.layout(), cut);
    Ok(linalg::eigvalsh(&partial_transpose_right(&m, dl, dr)))
}

/// Sum of the magnitudes of the negative partial-transpose eigenvalues.
pub fn negativity(rho: &DensityOperator, cut: &Bipartition) -> Result<EntanglementReport> {
    let value: f64 = pt_spectrum(rho, cut)?.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    Ok(EntanglementReport::exact(Measure::Negativity, value))
}

/// `ln ‖ρ^Γ‖₁ = ln(1 + 2N)`.
pub fn log_negativity(rho: &DensityOperator, cut: &Bipartition) -> Result<EntanglementReport> {
    let norm: f64 = pt_spectrum(rho, cut)?.iter().map(|v| v.abs()).sum();
    Ok(EntanglementReport::exact(Measure::LogNegativity, norm.ln().max(0.0)))
}

/// Two-qubit matrix of `rho` on the sector carrying its support.
pub fn two_qubit_sector(rho: &DensityOperator, cut: &Bipartition) -> Result<CMatrix> {
    cut.check(rho.layout().num_modes())?;
    let (m, dl, dr) = bipartite_matrix(rho.matrix(), rho.layout(), cut);
    let s = support_sector(&m, dl, dr)?;
    let tr = linalg::trace(&s).re;
    Ok(s / linalg::c(tr, 0.0))
}

pub fn relative_entropy_entanglement(
    rho: &DensityOperator,
    cut: &Bipartition,
    opts: &ReeOptions,
) -> Result<EntanglementReport> {
    let sol = ree_solution(rho, cut, opts)?;
    Ok(EntanglementReport {
        measure: Measure::RelativeEntropy,
        value: sol.value,
        converged: sol.converged,
        iterations: sol.iterations,
        residual: sol.certificate_gap,
    })
}

/// Full optimizer output, including the closest separable state.
pub fn ree_solution(rho: &DensityOperator, cut: &Bipartition, opts: &ReeOptions) -> Result<ReeSolution> {
    ree::ree_two_qubit(&two_qubit_sector(rho, cut)?, opts)
}

/// REE of a two-qubit density matrix given directly in `left ⊗ right` order.
pub fn ree_two_qubit(rho: &CMatrix, opts: &ReeOptions) -> Result<ReeSolution> {
    ree::ree_two_qubit(rho, opts)
}

pub fn lewenstein_sanpera(rho: &DensityOperator, cut: &Bipartition, opts: &LsOptions) -> Result<LsDecomposition> {
    ls::ls_two_qubit(&two_qubit_sector(rho, cut)?, opts)
}

pub fn ls_two_qubit(rho: &CMatrix, opts: &LsOptions) -> Result<LsDecomposition> {
    ls::ls_two_qubit(rho, opts)
}

pub fn ls_report(d: &LsDecomposition) -> EntanglementReport {
    EntanglementReport {
        measure: Measure::LsEntanglement,
        value: d.e_exact,
        converged: d.converged,
        iterations: d.iterations,
        residual: if d.certified { 0.0 } else { f64::INFINITY },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellFamily {
    Psi,
    Phi,
}

/// Convexity bound on the entanglement left in a Bell state after two equal
/// lossy fibers of intensity transmission `t_sq`.
pub fn bell_output_bound(family: BellFamily, t_sq: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t_sq) {
        return Err(Error::Domain(format!("|T|² = {t_sq} outside [0, 1]")));
    }
    Ok(match family {
        BellFamily::Psi => t_sq * 2f64.ln(),
        BellFamily::Phi => {
            let x_ln_x = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
            0.5 * ((1.0 + t_sq) * (1.0 + t_sq).ln() - x_ln_x(t_sq))
        }
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MonotonicityOptions {
    /// Device cutoff used by each local channel.
    pub channel: ChannelOptions,
    pub tolerance: f64,
    pub ree: ReeOptions,
}

impl MonotonicityOptions {
    pub fn new(device_cutoff: usize, tolerance: f64) -> Self {
        Self { channel: ChannelOptions::new(device_cutoff), tolerance, ree: ReeOptions::default() }
    }
}

/// Evaluates `measure` before and after independent channels on the two
/// modes and fails if entanglement grew by more than the tolerance.
pub fn monotonicity_check(
    rho_in: &DensityOperator,
    first: &DeviceSpec,
    second: &DeviceSpec,
    measure: Measure,
    opts: &MonotonicityOptions,
) -> Result<(f64, f64)> {
    let layout = rho_in.layout();
    if layout.num_modes() != 2 {
        return Err(Error::Dimension(format!("expected 2 modes, got {}", layout.num_modes())));
    }
    let cut = Bipartition::two_mode();
    let evaluate = |rho: &DensityOperator| -> Result<f64> {
        match measure {
            Measure::Negativity => Ok(negativity(rho, &cut)?.value),
            Measure::RelativeEntropy => Ok(relative_entropy_entanglement(rho, &cut, &opts.ree)?.value),
            other => Err(Error::Domain(format!("{other:?} is not supported by the monotonicity check"))),
        }
    };
    let e_in = evaluate(rho_in)?;
    let ch1 = LocalChannel::new(first, layout.cutoffs()[0], &opts.channel)?;
    let ch2 = LocalChannel::new(second, layout.cutoffs()[1], &opts.channel)?;
    let out = apply_local_channels(rho_in, &ch1, &ch2, opts.channel.leakage_tolerance)?;
    let e_out = evaluate(&out.state)?;
    if e_out > e_in + opts.tolerance {
        return Err(Error::MonotonicityViolation { e_in, e_out });
    }
    Ok((e_in, e_out))
}
