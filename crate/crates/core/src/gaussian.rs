//! First and second moments of two-mode Gaussian states, their transformation
//! by absorbing or amplifying devices, PPT separability, and the closed-form
//! separability thresholds for a two-mode squeezed vacuum sent through noisy
//! fibers or amplifiers.
//!
//! Quadratures are ordered `x₁, p₁, x₂, p₂` with `a = (x + i p)/√2`, so the
//! vacuum has variance 1/2.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_space::DensityOperator;
use crate::fourport::{DeviceSpec, Sigma};
use crate::linalg::{self, CMatrix, C64};

pub const CONVENTION: &str = "xpxp, vacuum variance 1/2 (hbar = 1)";
pub const VACUUM_VARIANCE: f64 = 0.5;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PHYSICALITY_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Standard symplectic form for `modes` modes in xpxp ordering.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// Smallest eigenvalue of `V + (i/2) Ω`; nonnegative for physical states.
/// Eigenvalues of `V + iΩ/2` carry rounding of order eps·‖V‖, which matters
/// for strongly squeezed states.
fn physicality_floor(cov: &DMatrix<f64>) -> f64 {
    PHYSICALITY_FLOOR * cov.amax().max(1.0)
}

pub fn uncertainty_margin(cov: &DMatrix<f64>) -> f64 {
    let n = cov.nrows();
    let o = omega(n / 2);
    let m = CMatrix::from_fn(n, n, |i, j| C64::new(cov[(i, j)], 0.5 * o[(i, j)]));
    linalg::eigvalsh(&m)[0]
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || !n.is_multiple_of(2) || cov.ncols() != n || mean.len() != n {
            return Err(Error::Dimension(format!(
                "mean of length {} and {}x{} covariance do not describe whole modes",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE * cov.amax().max(1.0) {
            return Err(Error::Domain(format!("covariance not symmetric (defect {asym:.3e})")));
        }
        let margin = uncertainty_margin(&cov);
        if margin < -physicality_floor(&cov) {
            return Err(Error::Domain(format!(
                "covariance violates the uncertainty principle (V + iΩ/2 has eigenvalue {margin:.3e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { mean: DVector::zeros(2 * modes), cov: DMatrix::identity(2 * modes, 2 * modes) * VACUUM_VARIANCE }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn to_json(&self) -> GaussianStateJson {
        GaussianStateJson {
            mean: self.mean.iter().copied().collect(),
            cov: self.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
            convention: CONVENTION.to_string(),
        }
    }

    pub fn from_json(json: &GaussianStateJson) -> Result<Self> {
        let n = json.cov.len();
        if json.cov.iter().any(|r| r.len() != n) {
            return Err(Error::Format("cov must be square".into()));
        }
        if json.convention != CONVENTION {
            return Err(Error::Format(format!(
                "unsupported convention {:?}, expected {CONVENTION:?}",
                json.convention
            )));
        }
        Self::new(DVector::from_vec(json.mean.clone()), DMatrix::from_fn(n, n, |i, j| json.cov[i][j]))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GaussianStateJson {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub convention: String,
}

/// Two-mode squeezed vacuum with squeezing `zeta`.
pub fn tmsv_covariance(zeta: f64) -> GaussianState {
    let (ch, sh) = ((2.0 * zeta).cosh() / 2.0, (2.0 * zeta).sinh() / 2.0);
    let mut cov = DMatrix::zeros(4, 4);
    for k in 0..4 {
        cov[(k, k)] = ch;
    }
    cov[(0, 2)] = sh;
    cov[(2, 0)] = sh;
    cov[(1, 3)] = -sh;
    cov[(3, 1)] = -sh;
    GaussianState { mean: DVector::zeros(4), cov }
}

/// Real 2N×2N representation of a complex N×N mode matrix.
pub fn realify(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            r[(2 * i, 2 * j)] = z.re;
            r[(2 * i, 2 * j + 1)] = -z.im;
            r[(2 * i + 1, 2 * j)] = z.im;
            r[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    r
}

/// One mode sent through the first port of a four-port: transmission `t`,
/// reflection `r` of a vacuum-filled second port, and device noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeChannel {
    pub transmission: C64,
    #[serde(default)]
    pub reflection: C64,
    pub sigma: Sigma,
    #[serde(default)]
    pub n_th: f64,
}

impl ModeChannel {
    pub fn new(transmission: C64, reflection: C64, sigma: Sigma, n_th: f64) -> Result<Self> {
        let ch = Self { transmission, reflection, sigma, n_th };
        ch.validate()?;
        Ok(ch)
    }

    pub fn fiber(transmission: C64, n_th: f64) -> Result<Self> {
        Self::new(transmission, C64::new(0.0, 0.0), Sigma::Absorbing, n_th)
    }

    pub fn amplifier(transmission: C64, n_th: f64) -> Result<Self> {
        Self::new(transmission, C64::new(0.0, 0.0), Sigma::Amplifying, n_th)
    }

    /// `σ(1 - |T|² - |R|²)`, the device coupling strength |A|².
    pub fn device_weight(&self) -> f64 {
        self.sigma.value() * (1.0 - self.transmission.norm_sqr() - self.reflection.norm_sqr())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_th >= 0.0) || !self.n_th.is_finite() {
            return Err(Error::Domain(format!("thermal occupation {} must be >= 0", self.n_th)));
        }
        let w = self.device_weight();
        if w < -1e-12 {
            return Err(Error::InvalidDevice {
                reason: match self.sigma {
                    Sigma::Absorbing => "|T|² + |R|² exceeds 1 for an absorbing device".into(),
                    Sigma::Amplifying => "|T|² + |R|² below 1 for an amplifying device".into(),
                },
                residual: -w,
            });
        }
        Ok(())
    }

    /// Added noise variance per quadrature.
    fn noise(&self) -> f64 {
        self.reflection.norm_sqr() * VACUUM_VARIANCE + self.device_weight().max(0.0) * (self.n_th + 0.5)
    }
}

/// Moment transformation for independent per-mode devices.
pub fn transform_moments(g: &GaussianState, first: &ModeChannel, second: &ModeChannel) -> Result<GaussianState> {
    if g.modes() != 2 {
        return Err(Error::Dimension(format!("expected a two-mode state, got {} modes", g.modes())));
    }
    first.validate()?;
    second.validate()?;
    let t = CMatrix::from_row_slice(
        2,
        2,
        &[first.transmission, C64::new(0.0, 0.0), C64::new(0.0, 0.0), second.transmission],
    );
    let x = realify(&t);
    let mut cov = &x * g.cov() * x.transpose();
    for (k, ch) in [first, second].iter().enumerate() {
        let n = ch.noise();
        cov[(2 * k, 2 * k)] += n;
        cov[(2 * k + 1, 2 * k + 1)] += n;
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { mean: &x * g.mean(), cov })
}

/// Moment transformation for a full four-port acting on both modes:
/// `V → X V Xᵀ + (n_th + 1/2) R(A A†)`.
pub fn transform_moments_device(g: &GaussianState, spec: &DeviceSpec) -> Result<GaussianState> {
    if g.modes() != 2 {
        return Err(Error::Dimension(format!("expected a two-mode state, got {} modes", g.modes())));
    }
    let x = realify(spec.t());
    let noise = realify(&(spec.a() * spec.a().adjoint())) * (spec.n_th() + 0.5);
    let cov = &x * g.cov() * x.transpose() + noise;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { mean: &x * g.mean(), cov })
}

/// Symplectic eigenvalues from the spectrum `±iν` of `Ω V`, ascending.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Vec<f64> {
    let n = cov.nrows() / 2;
    let ov = omega(n) * cov;
    let mut im: Vec<f64> = ov.complex_eigenvalues().iter().map(|z| z.im.abs()).collect();
    im.sort_by(f64::total_cmp);
    im.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Covariance of the partially transposed state (momentum of mode 2 flipped).
pub fn partial_transpose_cov(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = DMatrix::identity(4, 4);
    p[(3, 3)] = -1.0;
    &p * cov * &p
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PptVerdict {
    pub entangled: bool,
    /// Smallest symplectic eigenvalue of the partial transpose.
    pub min_symplectic: f64,
    /// `min_symplectic - 1/2`; negative means entangled.
    pub margin: f64,
}

pub fn is_separable_ppt(g: &GaussianState) -> Result<PptVerdict> {
    if g.modes() != 2 {
        return Err(Error::Dimension(format!("expected a two-mode state, got {} modes", g.modes())));
    }
    let margin = uncertainty_margin(g.cov());
    if margin < -physicality_floor(g.cov()) {
        return Err(Error::Domain(format!("non-physical covariance (margin {margin:.3e})")));
    }
    let nu = symplectic_eigenvalues(&partial_transpose_cov(g.cov()))[0];
    Ok(PptVerdict { entangled: nu < VACUUM_VARIANCE, min_symplectic: nu, margin: nu - VACUUM_VARIANCE })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub zeta: f64,
    pub reflection: C64,
    pub transmission: C64,
    pub n_th: f64,
    pub sigma: Sigma,
}

/// Thermal occupation at which an equal-fiber (or equal-amplifier) TMSV
/// becomes separable; separable iff the actual occupation is at least this.
pub fn nth_threshold(inp: &ThresholdInputs) -> Result<f64> {
    let s = inp.sigma.value();
    let r2 = inp.reflection.norm_sqr();
    let t2 = inp.transmission.norm_sqr();
    if inp.sigma == Sigma::Absorbing && r2 + t2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|R|² + |T|² = {} exceeds 1", r2 + t2)));
    }
    let denom = 2.0 * s * (1.0 - r2 - t2);
    if denom.abs() < 1e-15 {
        return Err(Error::SingularThreshold("1 - |R|² - |T|² = 0: the device adds no noise".into()));
    }
    let e = (-2.0 * inp.zeta.abs()).exp();
    Ok(((1.0 - s) * (1.0 - r2) + t2 * (s - e)) / denom)
}

/// Longest fiber (in absorption lengths) after which the TMSV is still
/// entangled, for reflectionless fibers.
pub fn lmax_fiber(zeta: f64, n_th: f64) -> Result<f64> {
    if n_th == 0.0 {
        return Err(Error::Divergence("n_th = 0: entanglement survives every finite fiber length".into()));
    }
    if !(n_th > 0.0) {
        return Err(Error::Domain(format!("thermal occupation {n_th} must be > 0")));
    }
    let e = (-2.0 * zeta.abs()).exp();
    Ok(0.5 * (-(e - 1.0) / (2.0 * n_th)).ln_1p())
}

/// `(|T_max|², g_max)` for a zero-temperature amplifier.
pub fn max_gain(zeta: f64, reflection: C64) -> Result<(f64, f64)> {
    let r2 = reflection.norm_sqr();
    if r2 > 1.0 {
        return Err(Error::Domain(format!("|R| = {} exceeds 1", r2.sqrt())));
    }
    let t_max_sq = 2.0 * (1.0 - r2) / (1.0 + (-2.0 * zeta.abs()).exp());
    Ok((t_max_sq, t_max_sq - 1.0))
}

fn annihilation(rho: &DensityOperator, mode: usize) -> CMatrix {
    let layout = rho.layout();
    let d = layout.dim();
    let stride = layout.stride(mode);
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        let n = layout.occupation(i, mode);
        if n > 0 {
            a[(i - stride, i)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    a
}

fn expect(rho: &CMatrix, op: &CMatrix) -> C64 {
    // Tr(ρ X) without forming the product
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}

/// First and second quadrature moments of a two-mode Fock-space state.
///
/// Anti-normally ordered terms use the canonical commutator instead of the
/// truncated `a a†`, so the result is exact for states away from the cutoff.
pub fn fock_moments(rho: &DensityOperator) -> Result<GaussianState> {
    let layout = rho.layout();
    if layout.num_modes() != 2 {
        return Err(Error::Dimension(format!("expected two modes, got {}", layout.num_modes())));
    }
    let m = rho.matrix();
    let ops: Vec<CMatrix> = (0..2).map(|k| annihilation(rho, k)).collect();
    let mean_a: Vec<C64> = ops.iter().map(|a| expect(m, a)).collect();
    let mut mean = DVector::zeros(4);
    for k in 0..2 {
        mean[2 * k] = 2f64.sqrt() * mean_a[k].re;
        mean[2 * k + 1] = 2f64.sqrt() * mean_a[k].im;
    }
    let mut cov = DMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            let n_ij = expect(m, &(ops[i].adjoint() * &ops[j])) - mean_a[i].conj() * mean_a[j];
            let m_ij = expect(m, &(&ops[i] * &ops[j])) - mean_a[i] * mean_a[j];
            let delta = if i == j { 0.5 } else { 0.0 };
            cov[(2 * i, 2 * j)] = m_ij.re + n_ij.re + delta;
            cov[(2 * i + 1, 2 * j + 1)] = -m_ij.re + n_ij.re + delta;
            cov[(2 * i, 2 * j + 1)] = m_ij.im + n_ij.im;
            cov[(2 * j + 1, 2 * i)] = m_ij.im + n_ij.im;
        }
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { mean, cov })
}
