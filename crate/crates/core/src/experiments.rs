//! Parameter sweeps behind the command-line tool.
//!
//! Each sweep evaluates independent grid rows through [`par::map`], so the
//! output order is the grid order regardless of the execution mode.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::entanglement::{self, BellFamily, Bipartition, EntanglementReport, Measure, ReeOptions};
use crate::error::{Error, Result};
use crate::fock_space::{
    self, make_bell_state, make_tmsv, BellKind, DensityOperator, DensityOperatorJson, FockStateJson, ModeLayout,
};
use crate::fourport::{
    apply_channel, fiber_transmission, ChannelOptions, DeviceSpec, DeviceSpecJson, FiberSpec, LeakageReport, Sigma,
};
use crate::gaussian::{self, GaussianState, GaussianStateJson, ModeChannel, ThresholdInputs};
use crate::linalg::{self, c, CMatrix, C64};
use crate::par::{self, Execution};

pub const SCHEMA_VERSION: u32 = 1;
/// Every `VERIFY_STRIDE`-th row is re-checked against oracles (5%).
pub const VERIFY_STRIDE: usize = 20;
pub const CROSSING_TOLERANCE: f64 = 1e-6;
/// Slack for pointwise comparisons between optimizer outputs.
const OPTIMIZER_SLACK: f64 = 1e-8;
const BOUND_SLACK: f64 = 1e-4;
const DUAL_ENGINE_TOLERANCE: f64 = 1e-6;
/// Device cutoffs of the Fock cross-check. Device modes absorb up to the full
/// field photon number, so the usual default of 6 is too small; a thermal
/// device multiplies the work by the number of device basis states, hence
/// the lower value there.
const DUAL_ENGINE_DEVICE_CUTOFF: usize = 14;
const DUAL_ENGINE_THERMAL_CUTOFF: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BellDecay,
    TmsvSeparability,
    AmplifierGain,
    ChannelApply,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BellDecay => "bell-decay",
            Experiment::TmsvSeparability => "tmsv-separability",
            Experiment::AmplifierGain => "amplifier-gain",
            Experiment::ChannelApply => "channel-apply",
        }
    }

    pub fn schema(self) -> String {
        format!("fourport/{}/v{SCHEMA_VERSION}", self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    /// Number of grid points, both ends included.
    pub steps: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        let g = Self { start, stop, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 points, got {}", self.steps)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.stop <= self.start {
            return Err(Error::Domain(format!("grid [{}, {}] is empty", self.start, self.stop)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| if k + 1 == self.steps { self.stop } else { self.start + h * k as f64 }).collect()
    }
}

/// Sweep configuration as read from JSON; unset fields take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Option<Experiment>,
    pub grid: Option<Grid>,
    pub zeta: Option<f64>,
    pub n_th: Option<f64>,
    /// Reflection coefficient `R` as `[re, im]`.
    pub reflection: Option<[f64; 2]>,
    /// Fiber phase per absorption length, `n_R / n_I`.
    pub phase_per_length: Option<f64>,
    pub sigma: Option<i64>,
    pub field_cutoff: Option<usize>,
    pub device_cutoff: Option<usize>,
    pub measure: Option<Measure>,
    pub device: Option<DeviceSpecJson>,
    /// Diagonal transmissions `[re, im]`, used when `device` is absent.
    pub t1: Option<[f64; 2]>,
    pub t2: Option<[f64; 2]>,
    /// Named input state for channel-apply, used when `input` is absent.
    pub state: Option<StateKind>,
    /// TMSV amplitude ratio `q = tanh ζ`, an alternative to `zeta`.
    pub q: Option<f64>,
    pub input: Option<String>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub verify: Option<bool>,
    pub sequential: Option<bool>,
}

impl SweepConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("config line {} column {}: {e}", e.line(), e.column())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: &SweepConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(
            experiment,
            grid,
            zeta,
            n_th,
            reflection,
            phase_per_length,
            sigma,
            field_cutoff,
            device_cutoff,
            measure,
            device,
            t1,
            t2,
            state,
            q,
            input,
            out,
            format,
            verify,
            sequential
        );
        self
    }

    pub fn execution(&self) -> Execution {
        if self.sequential.unwrap_or(false) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn verify_enabled(&self) -> bool {
        self.verify.unwrap_or(false)
    }

    fn reflection_c64(&self) -> C64 {
        self.reflection.map(|[re, im]| c(re, im)).unwrap_or(c(0.0, 0.0))
    }

    fn n_th_or(&self, default: f64) -> Result<f64> {
        let n = self.n_th.unwrap_or(default);
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::Domain(format!("n_th = {n} must be a finite value >= 0")));
        }
        Ok(n)
    }

    fn zeta_or(&self, default: f64) -> Result<f64> {
        let from_q = match self.q {
            Some(q) if !(0.0..1.0).contains(&q) => {
                return Err(Error::Domain(format!("q = {q} must lie in [0, 1)")));
            }
            Some(q) => Some(q.atanh()),
            None => None,
        };
        let z = match (self.zeta, from_q) {
            (Some(z), Some(zq)) if (z - zq).abs() > 1e-12 * z.max(1.0) => {
                return Err(Error::Domain(format!("zeta = {z} and q = {} disagree (q = tanh zeta)", self.q.unwrap())));
            }
            (Some(z), _) => z,
            (None, Some(zq)) => zq,
            (None, None) => default,
        };
        if !z.is_finite() || z < 0.0 {
            return Err(Error::Domain(format!("zeta = {z} must be finite and >= 0")));
        }
        Ok(z)
    }

    fn sigma_value(&self) -> Result<Sigma> {
        Sigma::from_value(self.sigma.unwrap_or(1))
    }

    /// Device from `device`, or from `t1`/`t2`/`reflection`/`sigma`.
    fn device_spec(&self) -> Result<DeviceSpec> {
        let n_th = self.n_th_or(0.0)?;
        let pair = |v: [f64; 2]| c(v[0], v[1]);
        match (&self.device, self.t1) {
            (Some(_), Some(_)) => Err(Error::Domain("give either \"device\" or \"t1\"/\"t2\", not both".into())),
            (Some(json), None) => {
                let spec = DeviceSpec::from_json(json)?;
                if self.n_th.is_some() {
                    spec.with_thermal_occupation(n_th)
                } else {
                    Ok(spec)
                }
            }
            (None, Some(t1)) => match (self.reflection, self.t2) {
                (Some(_), Some(_)) => Err(Error::Domain(
                    "\"reflection\" describes a port device and cannot be combined with \"t2\"".into(),
                )),
                (Some(r), None) => DeviceSpec::port(pair(t1), pair(r), self.sigma_value()?, n_th),
                (None, t2) => DeviceSpec::diagonal(pair(t1), pair(t2.unwrap_or(t1)), self.sigma_value()?, n_th),
            },
            (None, None) => Err(Error::Domain("channel-apply needs a \"device\" specification or \"t1\"".into())),
        }
    }

    fn grid_or(&self, default: Grid) -> Result<Grid> {
        let g = self.grid.unwrap_or(default);
        g.validate()?;
        Ok(g)
    }

    fn cutoff(value: Option<usize>, default: usize, what: &str) -> Result<usize> {
        let n = value.unwrap_or(default);
        if n == 0 {
            return Err(Error::Domain(format!("{what} must be >= 1")));
        }
        Ok(n)
    }
}

/// Result of a sweep: numeric columns plus a JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, Value>,
}

impl Table {
    fn new(experiment: Experiment, columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self {
            schema: experiment.schema(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
            summary: BTreeMap::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn at_row<T>(row: usize, parameter: &'static str, value: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Row { row, parameter, value, source: Box::new(e) })
}

fn is_verify_row(row: usize) -> bool {
    row.is_multiple_of(VERIFY_STRIDE)
}

/// Closed-form output of a Bell state after `diag(T₁, T₂)` losses into
/// vacuum, in the `{|00⟩, |01⟩, |10⟩, |11⟩}` basis.
pub fn bell_output_closed_form(kind: BellKind, t1: C64, t2: C64) -> CMatrix {
    let s = kind.sign();
    let (a1, a2) = (1.0 - t1.norm_sqr(), 1.0 - t2.norm_sqr());
    let mut m = CMatrix::zeros(4, 4);
    if kind.is_psi() {
        m[(0, 0)] = c(0.5 * (a1 + a2), 0.0);
        m[(1, 1)] = c(0.5 * t2.norm_sqr(), 0.0);
        m[(2, 2)] = c(0.5 * t1.norm_sqr(), 0.0);
        m[(1, 2)] = t2 * t1.conj() * (0.5 * s);
        m[(2, 1)] = m[(1, 2)].conj();
    } else {
        m[(0, 0)] = c(0.5 * (1.0 + a1 * a2), 0.0);
        m[(1, 1)] = c(0.5 * a1 * t2.norm_sqr(), 0.0);
        m[(2, 2)] = c(0.5 * t1.norm_sqr() * a2, 0.0);
        m[(3, 3)] = c(0.5 * (t1 * t2).norm_sqr(), 0.0);
        m[(0, 3)] = (t1 * t2).conj() * (0.5 * s);
        m[(3, 0)] = m[(0, 3)].conj();
    }
    m
}

/// The `{0,1} × {0,1}` block of a two-mode density operator.
pub fn qubit_block(rho: &DensityOperator) -> CMatrix {
    let layout = rho.layout();
    let idx = |a: usize, b: usize| layout.index_of(&[a, b]).unwrap();
    let basis = [idx(0, 0), idx(0, 1), idx(1, 0), idx(1, 1)];
    CMatrix::from_fn(4, 4, |i, j| rho.matrix()[(basis[i], basis[j])])
}

// ---------------------------------------------------------------- bell-decay

#[derive(Clone, Debug)]
pub struct BellDecayParams {
    pub grid: Grid,
    pub phase_per_length: f64,
    pub n_th: f64,
    pub field_cutoff: usize,
    pub device_cutoff: usize,
    pub ree: ReeOptions,
    pub verify: bool,
    pub execution: Execution,
}

impl BellDecayParams {
    pub fn from_config(cfg: &SweepConfig) -> Result<Self> {
        if let Some(m) = cfg.measure {
            if m != Measure::RelativeEntropy {
                return Err(Error::Domain(format!(
                    "bell-decay reports the relative entropy of entanglement, not {m:?}"
                )));
            }
        }
        if let Some(s) = cfg.sigma {
            if s != 1 {
                return Err(Error::Domain("bell-decay models absorbing fibers (sigma = 1)".into()));
            }
        }
        let grid = cfg.grid_or(Grid::new(0.0, 2.0, 81)?)?;
        if grid.start < 0.0 {
            return Err(Error::Domain(format!("l/L grid starts at {} < 0", grid.start)));
        }
        Ok(Self {
            grid,
            phase_per_length: cfg.phase_per_length.unwrap_or(0.0),
            n_th: cfg.n_th_or(0.0)?,
            field_cutoff: SweepConfig::cutoff(cfg.field_cutoff, 6, "field_cutoff")?,
            device_cutoff: SweepConfig::cutoff(cfg.device_cutoff, 6, "device_cutoff")?,
            ree: ReeOptions::default(),
            verify: cfg.verify_enabled(),
            execution: cfg.execution(),
        })
    }
}

struct BellRow {
    values: Vec<f64>,
}

fn bell_output(kind: BellKind, spec: &DeviceSpec, p: &BellDecayParams) -> Result<DensityOperator> {
    let layout = ModeLayout::two_mode(p.field_cutoff)?;
    let rho = make_bell_state(kind, &layout)?.density();
    let mut opts = ChannelOptions::new(p.device_cutoff);
    opts.execution = Execution::Sequential;
    Ok(apply_channel(&rho, spec, &opts)?.state)
}

fn converged_ree(rho: &DensityOperator, p: &BellDecayParams) -> Result<EntanglementReport> {
    let r = entanglement::relative_entropy_entanglement(rho, &Bipartition::two_mode(), &p.ree)?;
    if !r.converged {
        return Err(Error::Convergence(format!("REE certificate gap {:.3e}", r.residual)));
    }
    Ok(r)
}

fn bell_row(row: usize, l: f64, p: &BellDecayParams) -> Result<BellRow> {
    let t = fiber_transmission(&FiberSpec::new(l, p.phase_per_length * l))?;
    let spec = DeviceSpec::diagonal(t, t, Sigma::Absorbing, p.n_th)?;
    let t_sq = t.norm_sqr();
    let out_psi = bell_output(BellKind::PsiPlus, &spec, p)?;
    let out_phi = bell_output(BellKind::PhiPlus, &spec, p)?;
    let e_psi = converged_ree(&out_psi, p)?.value;
    let e_phi = converged_ree(&out_phi, p)?.value;
    let bound_psi = entanglement::bell_output_bound(BellFamily::Psi, t_sq)?;
    let bound_phi = entanglement::bell_output_bound(BellFamily::Phi, t_sq)?;

    if p.verify && is_verify_row(row) {
        verify_bell_row(t, &out_psi, &out_phi, e_psi, e_phi, &spec, p)?;
    }
    let ln2 = 2f64.ln();
    Ok(BellRow { values: vec![l, t_sq, e_psi, e_phi, bound_psi, bound_phi, e_psi / ln2, e_phi / ln2] })
}

fn verify_bell_row(
    t: C64,
    out_psi: &DensityOperator,
    out_phi: &DensityOperator,
    e_psi: f64,
    e_phi: f64,
    spec: &DeviceSpec,
    p: &BellDecayParams,
) -> Result<()> {
    let cut = Bipartition::two_mode();
    if p.n_th == 0.0 {
        for (kind, out) in [(BellKind::PsiPlus, out_psi), (BellKind::PhiPlus, out_phi)] {
            let d = linalg::max_abs_diff(&qubit_block(out), &bell_output_closed_form(kind, t, t));
            if d > 1e-10 {
                return Err(Error::Invariant(format!("{kind:?} output deviates from the closed form by {d:.3e}")));
            }
        }
        // closed form for (1-τ)|00⟩⟨00| + τ|Ψ⟩⟨Ψ|
        let tau = t.norm_sqr();
        let mut exact = (tau - 2.0) * (1.0 - tau / 2.0).ln();
        if tau < 1.0 {
            exact += (1.0 - tau) * (1.0 - tau).ln();
        }
        if (exact - e_psi).abs() > 1e-7 {
            return Err(Error::Invariant(format!("E_psi = {e_psi} but the closed form gives {exact}")));
        }
    }
    for (kind, e) in [(BellKind::PsiMinus, e_psi), (BellKind::PhiMinus, e_phi)] {
        let other = converged_ree(&bell_output(kind, spec, p)?, p)?.value;
        if (other - e).abs() > 1e-7 {
            return Err(Error::Invariant(format!("{kind:?} gives {other}, its partner gives {e}")));
        }
    }
    for (out, e) in [(out_psi, e_psi), (out_phi, e_phi)] {
        let block = entanglement::two_qubit_sector(out, &cut)?;
        let s_ab = linalg::von_neumann_entropy(&block);
        let s_b = linalg::von_neumann_entropy(&entanglement::sector::reduce_right(&block, 2, 2));
        let upper = entanglement::log_negativity(out, &cut)?.value;
        if e < s_b - s_ab - OPTIMIZER_SLACK || e > upper + OPTIMIZER_SLACK {
            return Err(Error::Invariant(format!(
                "REE {e} outside [coherent information {}, log-negativity {upper}]",
                s_b - s_ab
            )));
        }
    }
    Ok(())
}

pub fn run_bell_decay(p: &BellDecayParams) -> Result<Table> {
    let grid = p.grid.points();
    let rows = par::map_indexed(&grid, p.execution, |row, &l| at_row(row, "l_over_L", l, bell_row(row, l, p)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.values).collect();
    let mut table = Table::new(
        Experiment::BellDecay,
        &["l_over_L", "T_sq", "E_psi", "E_phi", "bound_psi", "bound_phi", "E_psi_ln2", "E_phi_ln2"],
        rows,
    );

    let ln2 = 2f64.ln();
    let mut max_excess: f64 = f64::NEG_INFINITY;
    for (k, r) in table.rows.iter().enumerate() {
        let (l, e_psi, e_phi) = (r[0], r[2], r[3]);
        if l == 0.0 && ((e_psi - ln2).abs() > BOUND_SLACK || (e_phi - ln2).abs() > BOUND_SLACK) {
            return Err(Error::Invariant(format!("lossless row: E_psi = {e_psi}, E_phi = {e_phi}, expected ln 2")));
        }
        if l > 0.0 && e_phi > e_psi + OPTIMIZER_SLACK {
            return Err(Error::Invariant(format!("row {k}: E_phi = {e_phi} exceeds E_psi = {e_psi}")));
        }
        max_excess = max_excess.max(e_psi - r[4]).max(e_phi - r[5]);
        if k > 0 {
            let prev = &table.rows[k - 1];
            if e_psi > prev[2] + OPTIMIZER_SLACK || e_phi > prev[3] + OPTIMIZER_SLACK {
                return Err(Error::Invariant(format!("row {k}: entanglement increased with fiber length")));
            }
        }
    }
    if max_excess > BOUND_SLACK {
        return Err(Error::Invariant(format!("output entanglement exceeds the convexity bound by {max_excess:.3e}")));
    }
    table.summary.insert("max_bound_excess".into(), json!(max_excess));
    table.summary.insert("units".into(), json!("nats; *_ln2 columns divided by ln 2"));
    table.summary.insert("verified_rows".into(), json!(verified_rows(table.rows.len(), p.verify)));
    Ok(table)
}

fn verified_rows(n: usize, verify: bool) -> Vec<usize> {
    if verify {
        (0..n).filter(|&r| is_verify_row(r)).collect()
    } else {
        Vec::new()
    }
}

// ---------------------------------------------------------- shared crossings

/// First grid interval on which `values` turns from negative to
/// non-negative, refined by bisection on `f`. A non-negative first value
/// puts the crossing at the grid start.
fn first_crossing(points: &[f64], values: &[f64], f: impl Fn(f64) -> f64) -> Option<f64> {
    if values[0] >= 0.0 {
        return Some(points[0]);
    }
    let k = values.windows(2).position(|w| w[0] < 0.0 && w[1] >= 0.0)?;
    crate::optim::bisect(f, points[k], points[k + 1], 1e-14)
}

fn check_crossing(found: Option<f64>, predicted: f64, grid: &Grid, what: &str) -> Result<f64> {
    match found {
        Some(x) => {
            let diff = (x - predicted).abs();
            if diff > CROSSING_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "{what}: sweep crossing {x:.12} differs from closed form {predicted:.12} by {diff:.3e}"
                )));
            }
            Ok(diff)
        }
        None if predicted > grid.stop => Ok(0.0),
        None => Err(Error::Invariant(format!(
            "{what}: closed form predicts a crossing at {predicted:.12} but the sweep found none"
        ))),
    }
}

/// Smallest PT symplectic eigenvalue from the two-mode invariants, an
/// oracle independent of the eigen-solver route.
fn invariant_min_symplectic(cov: &nalgebra::DMatrix<f64>) -> f64 {
    let a = cov.view((0, 0), (2, 2)).determinant();
    let b = cov.view((2, 2), (2, 2)).determinant();
    let cc = cov.view((0, 2), (2, 2)).determinant();
    let delta = a + b - 2.0 * cc;
    let det = cov.determinant();
    (((delta - (delta * delta - 4.0 * det).max(0.0).sqrt()) / 2.0).max(0.0)).sqrt()
}

// --------------------------------------------------------- tmsv-separability

#[derive(Clone, Debug)]
pub struct TmsvParams {
    pub grid: Grid,
    pub zeta: f64,
    pub n_th: f64,
    pub phase_per_length: f64,
    pub verify: bool,
    pub execution: Execution,
}

impl TmsvParams {
    pub fn from_config(cfg: &SweepConfig) -> Result<Self> {
        let n_th = cfg.n_th_or(1.0)?;
        if n_th == 0.0 {
            return Err(Error::Divergence(
                "n_th = 0: the squeezed state stays entangled for every finite fiber length".into(),
            ));
        }
        let grid = cfg.grid_or(Grid::new(0.0, 2.0, 81)?)?;
        if grid.start < 0.0 {
            return Err(Error::Domain(format!("l/L grid starts at {} < 0", grid.start)));
        }
        Ok(Self {
            grid,
            zeta: cfg.zeta_or(1.0)?,
            n_th,
            phase_per_length: cfg.phase_per_length.unwrap_or(0.0),
            verify: cfg.verify_enabled(),
            execution: cfg.execution(),
        })
    }
}

fn tmsv_fiber_margin(
    zeta: f64,
    n_th: f64,
    phase_per_length: f64,
    l: f64,
) -> Result<(f64, gaussian::PptVerdict, GaussianState)> {
    let t = fiber_transmission(&FiberSpec::new(l, phase_per_length * l))?;
    let ch = ModeChannel::fiber(t, n_th)?;
    let out = gaussian::transform_moments(&gaussian::tmsv_covariance(zeta), &ch, &ch)?;
    Ok((t.norm_sqr(), gaussian::is_separable_ppt(&out)?, out))
}

pub fn run_tmsv_separability(p: &TmsvParams) -> Result<Table> {
    let grid = p.grid.points();
    let rows = par::map_indexed(&grid, p.execution, |row, &l| {
        at_row(
            row,
            "l_over_L",
            l,
            (|| {
                let (t_sq, verdict, out) = tmsv_fiber_margin(p.zeta, p.n_th, p.phase_per_length, l)?;
                let closed = t_sq * (-2.0 * p.zeta).exp() / 2.0 + (1.0 - t_sq) * (p.n_th + 0.5);
                if p.verify && is_verify_row(row) {
                    let inv = invariant_min_symplectic(out.cov());
                    for (name, v) in [("invariant", inv), ("closed-form", closed)] {
                        if (v - verdict.min_symplectic).abs() > 1e-9 * v.max(1.0) {
                            return Err(Error::Invariant(format!(
                                "PT symplectic eigenvalue {} disagrees with the {name} value {v}",
                                verdict.min_symplectic
                            )));
                        }
                    }
                }
                Ok(vec![l, t_sq, verdict.min_symplectic, verdict.margin, verdict.entangled as u8 as f64])
            })(),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(
        Experiment::TmsvSeparability,
        &["l_over_L", "T_sq", "min_symplectic_pt", "ppt_margin", "entangled"],
        rows,
    );
    let margins = table.column("ppt_margin").unwrap();
    let found = first_crossing(&grid, &margins, |l| {
        tmsv_fiber_margin(p.zeta, p.n_th, p.phase_per_length, l).map(|(_, v, _)| v.margin).unwrap_or(f64::NAN)
    });
    let predicted = gaussian::lmax_fiber(p.zeta, p.n_th)?;
    let diff = check_crossing(found, predicted, &p.grid, "tmsv-separability")?;
    table.summary.insert("crossing_l_over_L".into(), json!(found));
    table.summary.insert("l_max_closed_form".into(), json!(predicted));
    table.summary.insert("crossing_difference".into(), json!(diff));
    table.summary.insert("verified_rows".into(), json!(verified_rows(table.rows.len(), p.verify)));
    Ok(table)
}

// ------------------------------------------------------------ amplifier-gain

#[derive(Clone, Debug)]
pub struct AmplifierParams {
    pub grid: Grid,
    pub zeta: f64,
    pub n_th: f64,
    pub reflection: C64,
    pub verify: bool,
    pub execution: Execution,
}

impl AmplifierParams {
    pub fn from_config(cfg: &SweepConfig) -> Result<Self> {
        if let Some(s) = cfg.sigma {
            if s != -1 {
                return Err(Error::Domain("amplifier-gain requires sigma = -1".into()));
            }
        }
        let reflection = cfg.reflection_c64();
        if reflection.norm() > 1.0 {
            return Err(Error::Domain(format!("|R| = {} exceeds 1", reflection.norm())));
        }
        Ok(Self {
            grid: cfg.grid_or(Grid::new(1.0, 2.2, 61)?)?,
            zeta: cfg.zeta_or(1.0)?,
            n_th: cfg.n_th_or(0.0)?,
            reflection,
            verify: cfg.verify_enabled(),
            execution: cfg.execution(),
        })
    }

    /// Closed-form |T|² at which the output turns separable.
    pub fn predicted_crossing(&self) -> Result<f64> {
        if self.n_th == 0.0 {
            return Ok(gaussian::max_gain(self.zeta, self.reflection)?.0);
        }
        let floor = 1.0 - self.reflection.norm_sqr();
        let h = |t_sq: f64| {
            gaussian::nth_threshold(&ThresholdInputs {
                zeta: self.zeta,
                reflection: self.reflection,
                transmission: c(t_sq.sqrt(), 0.0),
                n_th: self.n_th,
                sigma: Sigma::Amplifying,
            })
            .map(|v| v - self.n_th)
            .unwrap_or(f64::INFINITY)
        };
        let lo = floor * (1.0 + 1e-12) + 1e-300;
        let mut hi = floor.max(1e-3) * 2.0;
        while h(hi) > 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
        crate::optim::bisect(h, lo, hi, 1e-15).ok_or_else(|| Error::Invariant("no amplifier threshold found".into()))
    }
}

fn amplifier_margin(p: &AmplifierParams, t_sq: f64) -> Result<(gaussian::PptVerdict, GaussianState)> {
    if t_sq < 0.0 {
        return Err(Error::Domain(format!("|T|² = {t_sq} < 0")));
    }
    let ch = ModeChannel::new(c(t_sq.sqrt(), 0.0), p.reflection, Sigma::Amplifying, p.n_th)?;
    let out = gaussian::transform_moments(&gaussian::tmsv_covariance(p.zeta), &ch, &ch)?;
    Ok((gaussian::is_separable_ppt(&out)?, out))
}

pub fn run_amplifier_gain(p: &AmplifierParams) -> Result<Table> {
    let grid = p.grid.points();
    let rows = par::map_indexed(&grid, p.execution, |row, &t_sq| {
        at_row(
            row,
            "T_sq",
            t_sq,
            (|| {
                let (verdict, out) = amplifier_margin(p, t_sq)?;
                if p.verify && is_verify_row(row) {
                    let inv = invariant_min_symplectic(out.cov());
                    if (inv - verdict.min_symplectic).abs() > 1e-9 * inv.max(1.0) {
                        return Err(Error::Invariant(format!(
                            "PT symplectic eigenvalue {} disagrees with the invariant value {inv}",
                            verdict.min_symplectic
                        )));
                    }
                }
                Ok(vec![t_sq, t_sq - 1.0, verdict.min_symplectic, verdict.margin, verdict.entangled as u8 as f64])
            })(),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut table =
        Table::new(Experiment::AmplifierGain, &["T_sq", "gain", "min_symplectic_pt", "ppt_margin", "entangled"], rows);
    let margins = table.column("ppt_margin").unwrap();
    let found = first_crossing(&grid, &margins, |t| amplifier_margin(p, t).map(|v| v.0.margin).unwrap_or(f64::NAN));
    let predicted = p.predicted_crossing()?;
    let diff = check_crossing(found, predicted, &p.grid, "amplifier-gain")?;
    table.summary.insert("crossing_T_sq".into(), json!(found));
    table.summary.insert("T_max_sq_closed_form".into(), json!(predicted));
    table.summary.insert("g_max_closed_form".into(), json!(predicted - 1.0));
    table.summary.insert("crossing_difference".into(), json!(diff));
    table.summary.insert("verified_rows".into(), json!(verified_rows(table.rows.len(), p.verify)));
    Ok(table)
}

// ------------------------------------------------------------- channel-apply

#[derive(Clone, Debug)]
pub enum StateInput {
    Fock(DensityOperator),
    Gaussian(GaussianState),
}

/// Parses a state file: a Gaussian state (`cov`), a pure Fock state
/// (`amplitudes`) or a density operator (`matrix`).
pub fn parse_state_json(text: &str) -> Result<StateInput> {
    let located = |e: serde_json::Error| Error::Format(format!("state line {} column {}: {e}", e.line(), e.column()));
    let value: Value = serde_json::from_str(text).map_err(located)?;
    let obj = value.as_object().ok_or_else(|| Error::Format("state file must contain a JSON object".into()))?;
    if obj.contains_key("cov") {
        let j: GaussianStateJson =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("gaussian state: {e}")))?;
        Ok(StateInput::Gaussian(GaussianState::from_json(&j)?))
    } else if obj.contains_key("amplitudes") {
        let j: FockStateJson = serde_json::from_value(value).map_err(|e| Error::Format(format!("fock state: {e}")))?;
        Ok(StateInput::Fock(fock_space::FockState::from_json(&j)?.density()))
    } else if obj.contains_key("matrix") {
        let j: DensityOperatorJson =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("density operator: {e}")))?;
        Ok(StateInput::Fock(DensityOperator::from_json(&j)?))
    } else {
        Err(Error::Format("state file needs one of the keys \"cov\", \"amplitudes\" or \"matrix\"".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
    /// Two-mode squeezed vacuum as a Gaussian state.
    Tmsv,
    /// Two-mode squeezed vacuum truncated at `field_cutoff`.
    TmsvFock,
}

/// Input state of channel-apply: the `input` file if given, otherwise the
/// named `state` built from `zeta`/`q` and `field_cutoff`.
pub fn load_state_input(cfg: &SweepConfig) -> Result<StateInput> {
    match (&cfg.input, cfg.state) {
        (Some(_), Some(_)) => Err(Error::Domain("give either \"input\" or \"state\", not both".into())),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Format(format!("cannot read state file {path}: {e}")))?;
            parse_state_json(&text).map_err(|e| match e {
                Error::Format(m) => Error::Format(format!("{path}: {m}")),
                other => other,
            })
        }
        (None, Some(kind)) => {
            let bell = |k: BellKind| -> Result<StateInput> {
                let layout = ModeLayout::two_mode(SweepConfig::cutoff(cfg.field_cutoff, 6, "field_cutoff")?)?;
                Ok(StateInput::Fock(make_bell_state(k, &layout)?.density()))
            };
            match kind {
                StateKind::PsiPlus => bell(BellKind::PsiPlus),
                StateKind::PsiMinus => bell(BellKind::PsiMinus),
                StateKind::PhiPlus => bell(BellKind::PhiPlus),
                StateKind::PhiMinus => bell(BellKind::PhiMinus),
                StateKind::Tmsv => Ok(StateInput::Gaussian(gaussian::tmsv_covariance(cfg.zeta_or(0.5)?))),
                StateKind::TmsvFock => {
                    let layout = ModeLayout::two_mode(SweepConfig::cutoff(cfg.field_cutoff, 14, "field_cutoff")?)?;
                    let tmsv = make_tmsv(cfg.zeta_or(0.5)?.tanh(), &layout)?
                        .check(fock_space::DEFAULT_TRUNCATION_TOLERANCE)?;
                    Ok(StateInput::Fock(tmsv.density()))
                }
            }
        }
        (None, None) => Err(Error::Domain("channel-apply needs an \"input\" state file or a \"state\" kind".into())),
    }
}

#[derive(Clone, Debug)]
pub struct ChannelApplyParams {
    pub device: DeviceSpec,
    pub device_cutoff: usize,
    /// Field cutoff of the Fock cross-check for Gaussian inputs.
    pub field_cutoff: usize,
    pub measure: Option<Measure>,
    pub verify: bool,
    pub execution: Execution,
}

impl ChannelApplyParams {
    pub fn from_config(cfg: &SweepConfig) -> Result<Self> {
        Ok(Self {
            device: cfg.device_spec()?,
            device_cutoff: SweepConfig::cutoff(cfg.device_cutoff, 6, "device_cutoff")?,
            field_cutoff: SweepConfig::cutoff(cfg.field_cutoff, 14, "field_cutoff")?,
            measure: cfg.measure,
            verify: cfg.verify_enabled(),
            execution: cfg.execution(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelApplyOutput {
    pub schema: String,
    pub kind: &'static str,
    pub state: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<EntanglementReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_engine_deviation: Option<f64>,
    pub device: DeviceSpecJson,
}

/// TMSV squeezing if `g` is a two-mode squeezed vacuum.
fn tmsv_parameter(g: &GaussianState) -> Option<f64> {
    if g.modes() != 2 || g.mean().amax() > 1e-12 {
        return None;
    }
    let zeta = 0.5 * (2.0 * g.cov()[(0, 0)]).max(1.0).acosh();
    ((g.cov() - gaussian::tmsv_covariance(zeta).cov()).amax() < 1e-10).then_some(zeta)
}

/// Output moments of a TMSV computed in Fock space, for comparison with
/// the moment map.
pub fn fock_tmsv_moments(
    zeta: f64,
    spec: &DeviceSpec,
    field_cutoff: usize,
    device_cutoff: usize,
    execution: Execution,
) -> Result<GaussianState> {
    let layout = ModeLayout::two_mode(field_cutoff)?;
    let tmsv = make_tmsv(zeta.tanh(), &layout)?.check(fock_space::DEFAULT_TRUNCATION_TOLERANCE)?;
    let mut opts = ChannelOptions::new(device_cutoff);
    opts.execution = execution;
    // second moments weight the top level by up to `field_cutoff` photons
    opts.leakage_tolerance = DUAL_ENGINE_TOLERANCE / field_cutoff as f64;
    let out = apply_channel(&tmsv.density(), spec, &opts)?;
    gaussian::fock_moments(&out.state)
}

fn measure_of(rho: &DensityOperator, measure: Measure) -> Result<EntanglementReport> {
    let cut = Bipartition::two_mode();
    match measure {
        Measure::Negativity => entanglement::negativity(rho, &cut),
        Measure::LogNegativity => entanglement::log_negativity(rho, &cut),
        Measure::RelativeEntropy => entanglement::relative_entropy_entanglement(rho, &cut, &ReeOptions::default()),
        Measure::LsEntanglement => {
            Ok(entanglement::ls_report(&entanglement::lewenstein_sanpera(rho, &cut, &Default::default())?))
        }
        other => Err(Error::Domain(format!("{other:?} cannot be evaluated on a mixed output state"))),
    }
}

pub fn run_channel_apply(input: &StateInput, p: &ChannelApplyParams) -> Result<ChannelApplyOutput> {
    let schema = Experiment::ChannelApply.schema();
    match input {
        StateInput::Fock(rho) => {
            let mut opts = ChannelOptions::new(p.device_cutoff);
            opts.execution = p.execution;
            let out = apply_channel(rho, &p.device, &opts)?;
            let entanglement = p.measure.map(|m| measure_of(&out.state, m)).transpose()?;
            if p.verify {
                let tr = out.state.trace();
                if (tr - 1.0).abs() > 1e-8 {
                    return Err(Error::Invariant(format!("output trace {tr}")));
                }
                out.state.validate()?;
            }
            Ok(ChannelApplyOutput {
                schema,
                kind: "fock",
                state: serde_json::to_value(out.state.to_json()).expect("serializable"),
                leakage: Some(out.leakage),
                entanglement,
                dual_engine_deviation: None,
                device: p.device.to_json(),
            })
        }
        StateInput::Gaussian(g) => {
            let out = gaussian::transform_moments_device(g, &p.device)?;
            let mut deviation = None;
            if p.verify {
                let margin = gaussian::uncertainty_margin(out.cov());
                if margin < -1e-10 * out.cov().amax().max(1.0) {
                    return Err(Error::Invariant(format!("output violates the uncertainty principle ({margin:.3e})")));
                }
                if let Some(zeta) = tmsv_parameter(g).filter(|&z| z <= 0.5) {
                    let floor =
                        if p.device.n_th() == 0.0 { DUAL_ENGINE_DEVICE_CUTOFF } else { DUAL_ENGINE_THERMAL_CUTOFF };
                    let device_cutoff = p.device_cutoff.max(floor);
                    let fock = fock_tmsv_moments(zeta, &p.device, p.field_cutoff, device_cutoff, p.execution)?;
                    let d = (fock.cov() - out.cov()).amax().max((fock.mean() - out.mean()).amax());
                    if d > DUAL_ENGINE_TOLERANCE {
                        return Err(Error::Invariant(format!("Fock and moment engines differ by {d:.3e}")));
                    }
                    deviation = Some(d);
                }
            }
            Ok(ChannelApplyOutput {
                schema,
                kind: "gaussian",
                state: serde_json::to_value(out.to_json()).expect("serializable"),
                leakage: None,
                entanglement: None,
                dual_engine_deviation: deviation,
                device: p.device.to_json(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_hit_both_ends() {
        let g = Grid::new(0.0, 2.0, 81).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 81);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[80], 2.0);
        assert!((pts[40] - 1.0).abs() < 1e-15);
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = SweepConfig::from_json_str(r#"{"zeta": 0.5, "n_th": 2.0}"#).unwrap();
        let flags = SweepConfig { n_th: Some(1.0), ..Default::default() };
        let merged = file.overlay(&flags);
        assert_eq!(merged.zeta, Some(0.5));
        assert_eq!(merged.n_th, Some(1.0));
    }

    #[test]
    fn unknown_config_key_reports_location() {
        let err = SweepConfig::from_json_str("{\n  \"zta\": 1}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn crossing_at_start_and_interior() {
        let pts = [0.0, 1.0, 2.0];
        assert_eq!(first_crossing(&pts, &[0.0, 1.0, 2.0], |x| x), Some(0.0));
        let r = first_crossing(&pts, &[-1.5, -0.5, 0.5], |x| x - 1.5).unwrap();
        assert!((r - 1.5).abs() < 1e-13);
        assert_eq!(first_crossing(&pts, &[-3.0, -2.0, -1.0], |x| x - 3.0), None);
    }

    #[test]
    fn tmsv_refuses_zero_temperature() {
        let cfg = SweepConfig { n_th: Some(0.0), ..Default::default() };
        assert!(matches!(TmsvParams::from_config(&cfg), Err(Error::Divergence(_))));
    }

    #[test]
    fn state_file_detection() {
        let g = gaussian::tmsv_covariance(0.3).to_json();
        let text = serde_json::to_string(&g).unwrap();
        assert!(matches!(parse_state_json(&text).unwrap(), StateInput::Gaussian(_)));
        assert!(parse_state_json("{\"foo\": 1}").is_err());
        let err = parse_state_json("{\n\"cov\": [[1, 0],\n oops]}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
