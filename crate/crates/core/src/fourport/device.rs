use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ONE, ZERO};

pub const DEFAULT_DEVICE_TOLERANCE: f64 = 1e-10;
/// Eigenvalues of C or S below this make Eq.-(1.7)-style inverses unusable.
const SINGULAR_EIGENVALUE: f64 = 1e-9;

/// Absorbing devices couple the field to device annihilation operators,
/// amplifying devices to device creation operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma {
    Absorbing,
    Amplifying,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Absorbing => 1.0,
            Sigma::Amplifying => -1.0,
        }
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Sigma::Absorbing),
            -1 => Ok(Sigma::Amplifying),
            other => Err(Error::Domain(format!("sigma must be +1 or -1, got {other}"))),
        }
    }

    /// `J = diag(I, σI)` on field ⊕ device modes.
    pub fn j_form(self) -> CMatrix {
        let s = self.value();
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ONE, c(s, 0.0), c(s, 0.0)]))
    }
}

/// Transmission and absorption matrices of a four-port device at one frequency.
#[derive(Clone, Debug)]
pub struct DeviceSpec {
    t: CMatrix,
    a: CMatrix,
    sigma: Sigma,
    n_th: f64,
    tolerance: f64,
}

fn require_2x2(m: &CMatrix, name: &str) -> Result<()> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::Dimension(format!("{name} must be 2x2, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

impl DeviceSpec {
    pub fn new(t: CMatrix, a: CMatrix, sigma: Sigma, n_th: f64) -> Result<Self> {
        Self::with_tolerance(t, a, sigma, n_th, DEFAULT_DEVICE_TOLERANCE)
    }

    pub fn with_tolerance(t: CMatrix, a: CMatrix, sigma: Sigma, n_th: f64, tolerance: f64) -> Result<Self> {
        require_2x2(&t, "T")?;
        require_2x2(&a, "A")?;
        if !(n_th >= 0.0) || !n_th.is_finite() {
            return Err(Error::Domain(format!("thermal occupation {n_th} must be >= 0")));
        }
        let spec = Self { t, a, sigma, n_th, tolerance };
        let residual = spec.conservation_residual();
        if residual > tolerance {
            return Err(Error::InvalidDevice { reason: "T T† + σ A A† != I".into(), residual });
        }
        Ok(spec)
    }

    /// Completes `A = sqrt(σ(I - T T†))`; rejects `T` for which that matrix is
    /// not positive semidefinite.
    pub fn with_completed_absorption(t: CMatrix, sigma: Sigma, n_th: f64) -> Result<Self> {
        require_2x2(&t, "T")?;
        let target = (CMatrix::identity(2, 2) - &t * t.adjoint()) * c(sigma.value(), 0.0);
        let min_eig = linalg::eigvalsh(&target)[0];
        if min_eig < -DEFAULT_DEVICE_TOLERANCE {
            return Err(Error::InvalidDevice {
                reason: match sigma {
                    Sigma::Absorbing => "transmission has a singular value above 1".into(),
                    Sigma::Amplifying => "amplifier transmission has a singular value below 1".into(),
                },
                residual: -min_eig,
            });
        }
        let a = linalg::psd_sqrt(&target);
        Self::new(t, a, sigma, n_th)
    }

    /// Two independent channels: `T = diag(t1, t2)` with completed absorption.
    pub fn diagonal(t1: C64, t2: C64, sigma: Sigma, n_th: f64) -> Result<Self> {
        let t = CMatrix::from_row_slice(2, 2, &[t1, ZERO, ZERO, t2]);
        Self::with_completed_absorption(t, sigma, n_th)
    }

    /// A single four-port with transmission `t` and reflection `r` on its
    /// first output port, `T = [[t, r], [-r*, t*]]`.
    pub fn port(t: C64, r: C64, sigma: Sigma, n_th: f64) -> Result<Self> {
        let tm = CMatrix::from_row_slice(2, 2, &[t, r, -r.conj(), t.conj()]);
        Self::with_completed_absorption(tm, sigma, n_th)
    }

    pub fn identity() -> Self {
        Self {
            t: CMatrix::identity(2, 2),
            a: CMatrix::zeros(2, 2),
            sigma: Sigma::Absorbing,
            n_th: 0.0,
            tolerance: DEFAULT_DEVICE_TOLERANCE,
        }
    }

    pub fn t(&self) -> &CMatrix {
        &self.t
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn sigma(&self) -> Sigma {
        self.sigma
    }

    pub fn n_th(&self) -> f64 {
        self.n_th
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn with_thermal_occupation(mut self, n_th: f64) -> Result<Self> {
        if !(n_th >= 0.0) || !n_th.is_finite() {
            return Err(Error::Domain(format!("thermal occupation {n_th} must be >= 0")));
        }
        self.n_th = n_th;
        Ok(self)
    }

    /// Frobenius norm of `T T† + σ A A† - I`.
    pub fn conservation_residual(&self) -> f64 {
        let lhs = &self.t * self.t.adjoint() + &self.a * self.a.adjoint() * c(self.sigma.value(), 0.0);
        (lhs - CMatrix::identity(2, 2)).norm()
    }

    /// True when both `T` and `A` are diagonal, i.e. the device acts as two
    /// independent single-mode channels.
    pub fn is_diagonal(&self) -> bool {
        let off = |m: &CMatrix| m[(0, 1)].norm().max(m[(1, 0)].norm());
        off(&self.t) < 1e-14 && off(&self.a) < 1e-14
    }

    pub fn to_json(&self) -> DeviceSpecJson {
        DeviceSpecJson {
            sigma: self.sigma.value() as i64,
            n_th: self.n_th,
            t: matrix_to_json(&self.t),
            a: Some(matrix_to_json(&self.a)),
        }
    }

    pub fn from_json(json: &DeviceSpecJson) -> Result<Self> {
        let sigma = Sigma::from_value(json.sigma)?;
        let t = matrix_from_json(&json.t, "T")?;
        match &json.a {
            Some(a) => Self::new(t, matrix_from_json(a, "A")?, sigma, json.n_th),
            None => Self::with_completed_absorption(t, sigma, json.n_th),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DeviceSpecJson {
    pub sigma: i64,
    #[serde(default)]
    pub n_th: f64,
    #[serde(rename = "T")]
    pub t: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<[f64; 2]>>>,
}

fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix_from_json(rows: &[Vec<[f64; 2]>], name: &str) -> Result<CMatrix> {
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(Error::Format(format!("{name} must be a 2x2 array of [re, im] pairs")));
    }
    Ok(CMatrix::from_fn(2, 2, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// `C = sqrt(T T†)`, `S = sqrt(A A†)`.
pub fn make_cs(spec: &DeviceSpec) -> Result<(CMatrix, CMatrix)> {
    let residual = spec.conservation_residual();
    if residual > spec.tolerance {
        return Err(Error::InvalidDevice { reason: "T T† + σ A A† != I".into(), residual });
    }
    let cm = linalg::psd_sqrt(&(&spec.t * spec.t.adjoint()));
    let sm = linalg::psd_sqrt(&(&spec.a * spec.a.adjoint()));
    Ok((cm, sm))
}

/// The 4x4 mode transformation acting on (field₁, field₂, device₁, device₂).
#[derive(Clone, Debug)]
pub struct LambdaMatrix {
    matrix: CMatrix,
    sigma: Sigma,
}

impl LambdaMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn sigma(&self) -> Sigma {
        self.sigma
    }

    /// Frobenius norm of `Λ J Λ† - J`.
    pub fn j_residual(&self) -> f64 {
        let j = self.sigma.j_form();
        (&self.matrix * &j * self.matrix.adjoint() - j).norm()
    }
}

fn block4(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m.view_mut((0, 0), (2, 2)).copy_from(tl);
    m.view_mut((0, 2), (2, 2)).copy_from(tr);
    m.view_mut((2, 0), (2, 2)).copy_from(bl);
    m.view_mut((2, 2), (2, 2)).copy_from(br);
    m
}

/// `Λ = [[T, A], [-σ S C⁻¹ T, C S⁻¹ A]]`, defined when C and S are invertible.
pub fn make_lambda(spec: &DeviceSpec) -> Result<LambdaMatrix> {
    let (cm, sm) = make_cs(spec)?;
    let c_min = linalg::eigvalsh(&cm)[0];
    let s_min = linalg::eigvalsh(&sm)[0];
    if c_min < SINGULAR_EIGENVALUE || s_min < SINGULAR_EIGENVALUE {
        return Err(Error::DegenerateDevice(format!(
            "C or S is singular (smallest eigenvalues {c_min:.3e}, {s_min:.3e}); use the limiting construction"
        )));
    }
    let c_inv = cm.clone().try_inverse().ok_or_else(|| Error::DegenerateDevice("C not invertible".into()))?;
    let s_inv = sm.clone().try_inverse().ok_or_else(|| Error::DegenerateDevice("S not invertible".into()))?;
    let sigma = c(spec.sigma.value(), 0.0);
    let bl = &sm * c_inv * &spec.t * (-sigma);
    let br = &cm * s_inv * &spec.a;
    Ok(LambdaMatrix { matrix: block4(&spec.t, &spec.a, &bl, &br), sigma: spec.sigma })
}

/// Factorization `Λ = diag(W, W) · B · diag(W†U_T, W†U_A)`.
///
/// `W` diagonalizes `T T†` (and hence C and S), `U_T`, `U_A` are the unitary
/// polar factors of T and A, and `B` couples field mode k only to device mode
/// k through `[[c_k, s_k], [-σ s_k, c_k]]`. The product equals
/// [`make_lambda`] whenever that is defined and stays J-unitary when C or S
/// is singular (lossless and fully absorbing limits).
#[derive(Clone, Debug)]
pub struct LambdaFactors {
    pub w: CMatrix,
    pub cos_like: [f64; 2],
    pub sin_like: [f64; 2],
    pub field_unitary: CMatrix,
    pub device_unitary: CMatrix,
    pub sigma: Sigma,
}

impl LambdaFactors {
    pub fn new(spec: &DeviceSpec) -> Result<Self> {
        let (_, sm) = make_cs(spec)?;
        // W = U_T V with V an eigenbasis of T†T kept close to the identity:
        // the first factor diag(V†, ·) then leaves the field modes alone
        // for diagonal and port devices, and the loss acts before any mixing
        let u_t = linalg::polar_unitary(&spec.t);
        let (e, v) = aligned_eigenbasis(&(spec.t.adjoint() * &spec.t));
        let w = &u_t * v;
        let s_in_w = w.adjoint() * &sm * &w;
        let mut cos_like = [0.0; 2];
        let mut sin_like = [0.0; 2];
        for k in 0..2 {
            cos_like[k] = e[k].max(0.0).sqrt();
            sin_like[k] = match spec.sigma {
                Sigma::Absorbing => (1.0 - e[k]).max(0.0).sqrt(),
                Sigma::Amplifying => (e[k] - 1.0).max(0.0).sqrt(),
            };
            let from_a = s_in_w[(k, k)].re;
            if (from_a - sin_like[k]).abs() > 1e-6_f64.max(spec.tolerance.sqrt()) {
                return Err(Error::InvalidDevice {
                    reason: "S does not share the eigenbasis of C".into(),
                    residual: (from_a - sin_like[k]).abs(),
                });
            }
        }
        let u_a = linalg::polar_unitary(&spec.a);
        Ok(Self {
            field_unitary: w.adjoint() * u_t,
            device_unitary: w.adjoint() * u_a,
            w,
            cos_like,
            sin_like,
            sigma: spec.sigma,
        })
    }

    pub fn rotation(&self) -> CMatrix {
        block4(&self.w, &CMatrix::zeros(2, 2), &CMatrix::zeros(2, 2), &self.w)
    }

    pub fn coupling(&self) -> CMatrix {
        let s = self.sigma.value();
        let mut m = CMatrix::zeros(4, 4);
        for k in 0..2 {
            m[(k, k)] = c(self.cos_like[k], 0.0);
            m[(k + 2, k + 2)] = c(self.cos_like[k], 0.0);
            m[(k, k + 2)] = c(self.sin_like[k], 0.0);
            m[(k + 2, k)] = c(-s * self.sin_like[k], 0.0);
        }
        m
    }

    pub fn polar(&self) -> CMatrix {
        block4(&self.field_unitary, &CMatrix::zeros(2, 2), &CMatrix::zeros(2, 2), &self.device_unitary)
    }

    pub fn product(&self) -> LambdaMatrix {
        LambdaMatrix { matrix: self.rotation() * self.coupling() * self.polar(), sigma: self.sigma }
    }

    /// Lie-algebra elements `K_i` with `Λ = exp(K_1) exp(K_2) exp(K_3)`.
    pub fn generators(&self) -> [CMatrix; 3] {
        let zero = CMatrix::zeros(2, 2);
        let log_w = linalg::unitary_log(&self.w);
        let rotation = block4(&log_w, &zero, &zero, &log_w);
        let mut coupling = CMatrix::zeros(4, 4);
        for k in 0..2 {
            let (ck, sk) = (self.cos_like[k], self.sin_like[k]);
            match self.sigma {
                Sigma::Absorbing => {
                    let theta = sk.atan2(ck);
                    coupling[(k, k + 2)] = c(theta, 0.0);
                    coupling[(k + 2, k)] = c(-theta, 0.0);
                }
                Sigma::Amplifying => {
                    let r = sk.asinh();
                    coupling[(k, k + 2)] = c(r, 0.0);
                    coupling[(k + 2, k)] = c(r, 0.0);
                }
            }
        }
        let polar =
            block4(&linalg::unitary_log(&self.field_unitary), &zero, &zero, &linalg::unitary_log(&self.device_unitary));
        [rotation, coupling, polar]
    }
}

/// Eigen-decomposition of a 2×2 Hermitian matrix with the eigenbasis chosen
/// as close to the identity as possible. A needless mode swap would route
/// photons through occupations beyond a per-mode cutoff.
fn aligned_eigenbasis(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (mut e, mut w) = linalg::eigh(m);
    if (e[1] - e[0]).abs() <= 1e-13 * e[1].abs().max(1.0) {
        return (vec![m[(0, 0)].re, m[(1, 1)].re], CMatrix::identity(2, 2));
    }
    if w[(0, 0)].norm_sqr() + w[(1, 1)].norm_sqr() < w[(0, 1)].norm_sqr() + w[(1, 0)].norm_sqr() {
        w.swap_columns(0, 1);
        e.swap(0, 1);
    }
    for k in 0..2 {
        let d = w[(k, k)];
        if d.norm() > 0.0 {
            let phase = d.conj() / d.norm();
            for i in 0..2 {
                w[(i, k)] *= phase;
            }
        }
    }
    (e, w)
}

/// Λ from the factorized construction; defined for every valid device.
pub fn make_lambda_limit(spec: &DeviceSpec) -> Result<LambdaMatrix> {
    Ok(LambdaFactors::new(spec)?.product())
}

/// A fiber segment obeying exponential (Lambert-Beer) amplitude decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// Propagation length over absorption length, l/L.
    pub length_ratio: f64,
    /// Propagation phase n_R ω l / c in radians.
    pub phase: f64,
}

impl FiberSpec {
    pub fn new(length_ratio: f64, phase: f64) -> Self {
        Self { length_ratio, phase }
    }

    /// Phase from the complex refractive index `n_r + i n_i`: with
    /// `L = c / (n_i ω)` the phase is `(n_r / n_i) · l/L`.
    pub fn from_refractive_index(n_r: f64, n_i: f64, length_ratio: f64) -> Result<Self> {
        if !(n_i > 0.0) {
            return Err(Error::Domain(format!("imaginary refractive index {n_i} must be > 0")));
        }
        Ok(Self { length_ratio, phase: n_r / n_i * length_ratio })
    }
}

/// `T = e^{iφ} e^{-l/L}`.
pub fn fiber_transmission(f: &FiberSpec) -> Result<C64> {
    if !(f.length_ratio >= 0.0) || !f.length_ratio.is_finite() {
        return Err(Error::Domain(format!("l/L = {} must be >= 0", f.length_ratio)));
    }
    Ok(C64::from_polar((-f.length_ratio).exp(), f.phase))
}
