//! Output state of the field after a four-port device: dilate to
//! field ⊗ device, apply the Fock-space unitary, trace out the device.

use serde::Serialize;

use super::device::{DeviceSpec, LambdaFactors, Sigma};
use super::dilation::Dilation;
use crate::error::{Error, Result};
use crate::fock_space::{self, DensityOperator, ModeLayout, DEFAULT_TRUNCATION_TOLERANCE};
use crate::linalg::{self, c, CMatrix, C64, ZERO};
use crate::par::{self, Execution};

/// Components of the input mixture below this weight are dropped.
const WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug)]
pub struct ChannelOptions {
    /// Cutoff of each device mode.
    pub device_cutoff: usize,
    /// Largest acceptable leakage estimate.
    pub leakage_tolerance: f64,
    pub execution: Execution,
}

impl ChannelOptions {
    pub fn new(device_cutoff: usize) -> Self {
        Self { device_cutoff, leakage_tolerance: DEFAULT_TRUNCATION_TOLERANCE, execution: Execution::default() }
    }
}

/// Where probability may have been lost to the finite cutoffs.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LeakageReport {
    /// Weight of the device thermal state cut off by the device cutoff.
    pub device_truncation: f64,
    /// Largest population of the top Fock level of each dilation mode after
    /// any factor of the unitary.
    pub top_level_population: Vec<f64>,
    /// True when every input component fits into every mode, so the
    /// number-conserving (absorbing) dilation is exact.
    pub exact_sector: bool,
    /// Largest of the above that counts against the tolerance.
    pub estimate: f64,
}

#[derive(Clone, Debug)]
pub struct ChannelOutput {
    pub state: DensityOperator,
    pub leakage: LeakageReport,
}

/// Weight and occupations `[n1, n2]` of one device basis state.
type DeviceComponent = (f64, [usize; 2]);

/// Weighted product basis states of the two device modes.
fn device_ensemble(n_th: f64, cutoff: usize) -> Result<(Vec<DeviceComponent>, f64)> {
    let thermal = fock_space::make_thermal(n_th, cutoff)?;
    let p: Vec<f64> = (0..=cutoff).map(|n| thermal.state.matrix()[(n, n)].re).collect();
    let mut out = Vec::new();
    for (n1, &p1) in p.iter().enumerate() {
        for (n2, &p2) in p.iter().enumerate() {
            if p1 * p2 > WEIGHT_FLOOR {
                out.push((p1 * p2, [n1, n2]));
            }
        }
    }
    let kept = 1.0 - thermal.truncation_weight;
    Ok((out, 1.0 - kept * kept))
}

struct PureComponent {
    weight: f64,
    amplitudes: Vec<C64>,
    max_photons: usize,
}

fn pure_components(rho: &DensityOperator) -> Vec<PureComponent> {
    let (vals, vecs) = linalg::eigh(rho.matrix());
    let layout = rho.layout();
    vals.iter()
        .enumerate()
        .filter(|(_, &w)| w > WEIGHT_FLOOR)
        .map(|(k, &w)| {
            let amplitudes: Vec<C64> = vecs.column(k).iter().copied().collect();
            let max_photons = amplitudes
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm_sqr() > 1e-24)
                .map(|(i, _)| layout.occupations(i).iter().sum::<usize>())
                .max()
                .unwrap_or(0);
            PureComponent { weight: w, amplitudes, max_photons }
        })
        .collect()
}

/// Runs the dilation on every (input component, device basis state) pair and
/// returns the traced field operator on the modes `0..keep` plus the largest
/// top-level populations of all dilation modes seen along the way.
fn dilate_and_trace(
    dilation: &Dilation,
    inputs: &[(f64, Vec<C64>)],
    keep_dim: usize,
    execution: Execution,
) -> (CMatrix, Vec<f64>) {
    let layout = dilation.layout().clone();
    let rest = layout.dim() / keep_dim;
    let partials = par::map(inputs, execution, |(w, v)| {
        let (out, top) = dilation.apply_tracked(v);
        let mat = CMatrix::from_row_slice(keep_dim, rest, &out);
        let reduced = (&mat * mat.adjoint()) * c(*w, 0.0);
        (reduced, top.into_iter().map(|p| w * p).collect::<Vec<_>>())
    });
    let mut acc = CMatrix::zeros(keep_dim, keep_dim);
    let mut top = vec![0.0; layout.num_modes()];
    for (m, t) in partials {
        acc += m;
        for (a, b) in top.iter_mut().zip(t) {
            *a += b;
        }
    }
    (acc, top)
}

fn finish_leakage(
    sigma: Sigma,
    exact_sector: bool,
    device_truncation: f64,
    top: Vec<f64>,
    tolerance: f64,
) -> Result<LeakageReport> {
    let top_max = if exact_sector && sigma == Sigma::Absorbing { 0.0 } else { top.iter().copied().fold(0.0, f64::max) };
    let estimate = top_max.max(device_truncation);
    let report = LeakageReport {
        device_truncation,
        top_level_population: top,
        exact_sector: exact_sector && sigma == Sigma::Absorbing,
        estimate,
    };
    if estimate > tolerance {
        return Err(Error::Truncation {
            detail: if device_truncation > tolerance {
                "device thermal state truncated".into()
            } else {
                "top Fock level populated after the channel".into()
            },
            leakage: estimate,
            tolerance,
        });
    }
    Ok(report)
}

/// Applies one four-port device to a two-mode field state.
///
/// The device modes start in a thermal state with occupation `spec.n_th()`.
pub fn apply_channel(rho_in: &DensityOperator, spec: &DeviceSpec, opts: &ChannelOptions) -> Result<ChannelOutput> {
    let field = rho_in.layout();
    if field.num_modes() != 2 {
        return Err(Error::Dimension(format!("four-port channel acts on 2 field modes, got {}", field.num_modes())));
    }
    if opts.device_cutoff == 0 {
        return Err(Error::Dimension("device cutoff must be >= 1".into()));
    }
    let factors = LambdaFactors::new(spec)?;
    let layout = ModeLayout::new(vec![field.cutoffs()[0], field.cutoffs()[1], opts.device_cutoff, opts.device_cutoff])?;
    let dilation = Dilation::new(&factors.generators(), spec.sigma(), layout.clone());
    let (device_states, device_truncation) = device_ensemble(spec.n_th(), opts.device_cutoff)?;
    let components = pure_components(rho_in);

    let min_cutoff = *layout.cutoffs().iter().min().unwrap();
    let device_dim = (opts.device_cutoff + 1) * (opts.device_cutoff + 1);
    let mut exact = true;
    let mut inputs = Vec::with_capacity(components.len() * device_states.len());
    for comp in &components {
        for &(w, [n1, n2]) in &device_states {
            exact &= comp.max_photons + n1 + n2 <= min_cutoff;
            // field modes lead, so field index i maps to i * device_dim
            let dev_index = n1 * (opts.device_cutoff + 1) + n2;
            let mut v = vec![ZERO; layout.dim()];
            for (i, a) in comp.amplitudes.iter().enumerate() {
                v[i * device_dim + dev_index] = *a;
            }
            inputs.push((comp.weight * w, v));
        }
    }
    let (traced, top) = dilate_and_trace(&dilation, &inputs, field.dim(), opts.execution);
    let leakage = finish_leakage(spec.sigma(), exact, device_truncation, top, opts.leakage_tolerance)?;
    let state = DensityOperator::from_truncated_channel(field.clone(), traced)?;
    Ok(ChannelOutput { state, leakage })
}

/// Single-mode channel obtained by feeding one party's mode into the first
/// input port of a four-port device whose second input port carries vacuum.
///
/// Stored as the superoperator `S[(p,q),(m,n)] = ⟨p|Φ(|m⟩⟨n|)|q⟩`.
#[derive(Clone, Debug)]
pub struct LocalChannel {
    cutoff: usize,
    superop: CMatrix,
    leakage: LeakageReport,
}

impl LocalChannel {
    pub fn new(spec: &DeviceSpec, cutoff: usize, opts: &ChannelOptions) -> Result<Self> {
        if cutoff == 0 || opts.device_cutoff == 0 {
            return Err(Error::Dimension("cutoffs must be >= 1".into()));
        }
        let factors = LambdaFactors::new(spec)?;
        let layout = ModeLayout::new(vec![cutoff, cutoff, opts.device_cutoff, opts.device_cutoff])?;
        let dilation = Dilation::new(&factors.generators(), spec.sigma(), layout.clone());
        let (device_states, device_truncation) = device_ensemble(spec.n_th(), opts.device_cutoff)?;
        let d = cutoff + 1;
        let rest = layout.dim() / d;
        let min_cutoff = *layout.cutoffs().iter().min().unwrap();

        let jobs: Vec<(usize, usize)> = (0..d).flat_map(|m| (0..device_states.len()).map(move |k| (m, k))).collect();
        let outputs = par::map(&jobs, opts.execution, |&(m, k)| {
            let [n1, n2] = device_states[k].1;
            let mut v = vec![ZERO; layout.dim()];
            v[layout.index_of(&[m, 0, n1, n2]).unwrap()] = c(1.0, 0.0);
            dilation.apply(&v)
        });

        let mut exact = true;
        let mut superop = CMatrix::zeros(d * d, d * d);
        for (k, &(w, [n1, n2])) in device_states.iter().enumerate() {
            exact &= cutoff + n1 + n2 <= min_cutoff;
            let mats: Vec<CMatrix> =
                (0..d).map(|m| CMatrix::from_row_slice(d, rest, &outputs[m * device_states.len() + k])).collect();
            for m in 0..d {
                for n in 0..d {
                    let block = (&mats[m] * mats[n].adjoint()) * c(w, 0.0);
                    for p in 0..d {
                        for q in 0..d {
                            superop[(p * d + q, m * d + n)] += block[(p, q)];
                        }
                    }
                }
            }
        }
        // exactness is judged for the worst case of a fully occupied field
        // mode; top-level populations are measured on the output state
        let leakage = LeakageReport {
            device_truncation,
            top_level_population: Vec::new(),
            exact_sector: exact && spec.sigma() == Sigma::Absorbing,
            estimate: device_truncation,
        };
        Ok(Self { cutoff, superop, leakage })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superop
    }

    pub fn leakage(&self) -> &LeakageReport {
        &self.leakage
    }
}

/// Applies independent local channels to the two modes of `rho`.
pub fn apply_local_channels(
    rho: &DensityOperator,
    first: &LocalChannel,
    second: &LocalChannel,
    leakage_tolerance: f64,
) -> Result<ChannelOutput> {
    let layout = rho.layout();
    if layout.num_modes() != 2 {
        return Err(Error::Dimension(format!("expected 2 modes, got {}", layout.num_modes())));
    }
    let (d0, d1) = (layout.mode_dim(0), layout.mode_dim(1));
    if first.cutoff + 1 != d0 || second.cutoff + 1 != d1 {
        return Err(Error::Dimension(format!(
            "channel cutoffs ({}, {}) do not match state cutoffs {:?}",
            first.cutoff,
            second.cutoff,
            layout.cutoffs()
        )));
    }
    let m = rho.matrix();
    // party 0: out[(p,b),(q,b')] = Σ S1[(p,q),(a,a')] ρ[(a,b),(a',b')]
    let mut stage = CMatrix::zeros(d0 * d1, d0 * d1);
    for a in 0..d0 {
        for a2 in 0..d0 {
            let col = first.superop.column(a * d0 + a2);
            for b in 0..d1 {
                for b2 in 0..d1 {
                    let r = m[(a * d1 + b, a2 * d1 + b2)];
                    if r == ZERO {
                        continue;
                    }
                    for p in 0..d0 {
                        for q in 0..d0 {
                            let s = col[p * d0 + q];
                            if s != ZERO {
                                stage[(p * d1 + b, q * d1 + b2)] += s * r;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = CMatrix::zeros(d0 * d1, d0 * d1);
    for b in 0..d1 {
        for b2 in 0..d1 {
            let col = second.superop.column(b * d1 + b2);
            for p in 0..d0 {
                for q in 0..d0 {
                    let r = stage[(p * d1 + b, q * d1 + b2)];
                    if r == ZERO {
                        continue;
                    }
                    for s in 0..d1 {
                        for t in 0..d1 {
                            let w = col[s * d1 + t];
                            if w != ZERO {
                                out[(p * d1 + s, q * d1 + t)] += w * r;
                            }
                        }
                    }
                }
            }
        }
    }
    let state = DensityOperator::from_truncated_channel(layout.clone(), out)?;
    let device_truncation = first.leakage.device_truncation.max(second.leakage.device_truncation);
    let top: Vec<f64> = (0..2).map(|mode| fock_space::top_level_population(&state, mode)).collect();
    let exact = first.leakage.exact_sector && second.leakage.exact_sector;
    let top_max = if !exact { top.iter().copied().fold(0.0, f64::max) } else { 0.0 };
    let estimate = device_truncation.max(top_max);
    if estimate > leakage_tolerance {
        return Err(Error::Truncation {
            detail: "local channel output reaches the field cutoff".into(),
            leakage: estimate,
            tolerance: leakage_tolerance,
        });
    }
    Ok(ChannelOutput {
        state,
        leakage: LeakageReport { device_truncation, top_level_population: top, exact_sector: exact, estimate },
    })
}
