//! Relative entropy of entanglement of a two-qubit state.
//!
//! Separable and PPT states coincide for two qubits, so the closest
//! separable state solves a smooth convex program over a spectrahedron:
//! minimize `-Tr ρ ln σ` subject to `σ ≥ 0`, `σ^Γ ≥ 0`, `Tr σ = 1`. It is
//! solved by a primal log-det barrier method with exact Newton steps in the
//! 15 real coordinates of trace-one Hermitian matrices. Gradients and
//! Hessians of the matrix logarithm come from divided differences in the
//! eigenbasis of `σ`.
//!
//! The result is certified independently by a Frank–Wolfe gap: with
//! `Y = D ln σ[ρ]`, every separable `ω` obeys
//! `S(ρ‖ω) ≥ S(ρ‖σ) - (max_product ⟨ab|Y|ab⟩ - 1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sector::partial_transpose_right;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ZERO};
use crate::optim;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReeOptions {
    /// Target accuracy of the value, also the certificate threshold.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ReeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct ReeSolution {
    pub value: f64,
    pub closest_separable: CMatrix,
    /// Frank–Wolfe gap at the returned point.
    pub certificate_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

const DIM: usize = 4;
const PARAMS: usize = 15;

fn pauli(k: usize) -> CMatrix {
    let (o, z) = (c(1.0, 0.0), ZERO);
    match k {
        0 => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        1 => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        _ => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Orthonormal traceless basis `σ_i ⊗ σ_j / 2` and the signs picked up
/// under partial transposition of the second factor.
struct Basis {
    mats: Vec<CMatrix>,
    pt_sign: Vec<f64>,
}

impl Basis {
    fn new() -> Self {
        let mut mats = Vec::with_capacity(PARAMS);
        let mut pt_sign = Vec::with_capacity(PARAMS);
        for i in 0..4 {
            for j in 0..4 {
                if i == 0 && j == 0 {
                    continue;
                }
                mats.push(linalg::kron(&pauli(i), &pauli(j)) * c(0.5, 0.0));
                pt_sign.push(if j == 2 { -1.0 } else { 1.0 });
            }
        }
        Self { mats, pt_sign }
    }

    fn matrix(&self, x: &[f64], transposed: bool) -> CMatrix {
        let mut m = CMatrix::identity(DIM, DIM) * c(0.25, 0.0);
        for (a, b) in self.mats.iter().enumerate() {
            let s = if transposed { self.pt_sign[a] } else { 1.0 };
            m += b * c(s * x[a], 0.0);
        }
        m
    }

    #[cfg(test)]
    fn coords(&self, m: &CMatrix) -> Vec<f64> {
        self.mats.iter().map(|b| (b * m).trace().re).collect()
    }
}

struct Spectral {
    vals: Vec<f64>,
    vecs: CMatrix,
}

impl Spectral {
    fn of(m: &CMatrix) -> Option<Self> {
        let (vals, vecs) = linalg::eigh(m);
        (vals[0] > 0.0).then_some(Self { vals, vecs })
    }

    fn rotate(&self, m: &CMatrix) -> CMatrix {
        self.vecs.adjoint() * m * &self.vecs
    }
}

/// Adds the derivatives of `-μ ln det M`, `M = I/4 + Σ s_a x_a B_a`.
fn add_barrier(sp: &Spectral, basis: &Basis, transposed: bool, mu: f64, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
    let rot: Vec<CMatrix> = basis
        .mats
        .iter()
        .enumerate()
        .map(|(a, b)| {
            let s = if transposed { basis.pt_sign[a] } else { 1.0 };
            sp.rotate(b) * c(s, 0.0)
        })
        .collect();
    let inv: Vec<f64> = sp.vals.iter().map(|v| 1.0 / v).collect();
    for a in 0..PARAMS {
        g[a] -= mu * (0..DIM).map(|i| rot[a][(i, i)].re * inv[i]).sum::<f64>();
        for b in a..PARAMS {
            let mut acc = 0.0;
            for i in 0..DIM {
                for j in 0..DIM {
                    acc += (rot[a][(i, j)] * rot[b][(j, i)]).re * inv[i] * inv[j];
                }
            }
            h[(a, b)] += mu * acc;
            if a != b {
                h[(b, a)] += mu * acc;
            }
        }
    }
}

struct Problem {
    rho: CMatrix,
    basis: Basis,
}

impl Problem {
    fn feasible(&self, x: &[f64]) -> Option<(Spectral, Spectral)> {
        let s = Spectral::of(&self.basis.matrix(x, false))?;
        let t = Spectral::of(&self.basis.matrix(x, true))?;
        Some((s, t))
    }

    /// `-Tr ρ ln σ`.
    fn cross_entropy(&self, sp: &Spectral) -> f64 {
        let r = sp.rotate(&self.rho);
        -(0..DIM).map(|i| r[(i, i)].re * sp.vals[i].ln()).sum::<f64>()
    }

    fn value(&self, x: &[f64], mu: f64) -> Option<f64> {
        let (s, t) = self.feasible(x)?;
        let barrier = -mu * (s.vals.iter().map(|v| v.ln()).sum::<f64>() + t.vals.iter().map(|v| v.ln()).sum::<f64>());
        Some(self.cross_entropy(&s) + barrier)
    }

    fn derivatives(&self, s: &Spectral, t: &Spectral, mu: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(PARAMS);
        let mut h = DMatrix::zeros(PARAMS, PARAMS);
        let r = s.rotate(&self.rho);
        let rot: Vec<CMatrix> = self.basis.mats.iter().map(|b| s.rotate(b)).collect();
        let l = &s.vals;
        let mut l1 = [[0.0; DIM]; DIM];
        let mut l2 = [[[0.0; DIM]; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                l1[i][j] = linalg::ln_divided1(l[i], l[j]);
                for k in 0..DIM {
                    l2[i][j][k] = linalg::ln_divided2(l[i], l[j], l[k]);
                }
            }
        }
        for a in 0..PARAMS {
            let mut acc = ZERO;
            for i in 0..DIM {
                for j in 0..DIM {
                    acc += r[(j, i)] * rot[a][(i, j)] * l1[i][j];
                }
            }
            g[a] = -acc.re;
        }
        for a in 0..PARAMS {
            for b in a..PARAMS {
                let mut acc = ZERO;
                for i in 0..DIM {
                    for j in 0..DIM {
                        let xa = rot[a][(i, j)];
                        let xb = rot[b][(i, j)];
                        for k in 0..DIM {
                            let pair = xa * rot[b][(j, k)] + xb * rot[a][(j, k)];
                            acc += pair * r[(k, i)] * l2[i][j][k];
                        }
                    }
                }
                h[(a, b)] = -acc.re;
                h[(b, a)] = -acc.re;
            }
        }
        add_barrier(s, &self.basis, false, mu, &mut g, &mut h);
        add_barrier(t, &self.basis, true, mu, &mut g, &mut h);
        (g, h)
    }
}

/// Largest `⟨ab|Y|ab⟩` over product pure states, by a Bloch-sphere search.
pub(crate) fn max_product_expectation(y: &CMatrix) -> f64 {
    let reduced_max = |theta: f64, phi: f64| -> f64 {
        let a = [c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)];
        let mut m = [[ZERO; 2]; 2];
        for (b, row) in m.iter_mut().enumerate() {
            for (b2, entry) in row.iter_mut().enumerate() {
                for i in 0..2 {
                    for i2 in 0..2 {
                        *entry += a[i].conj() * a[i2] * y[(i * 2 + b, i2 * 2 + b2)];
                    }
                }
            }
        }
        let (p, q) = (m[0][0].re, m[1][1].re);
        0.5 * (p + q) + (0.25 * (p - q).powi(2) + m[0][1].norm_sqr()).sqrt()
    };
    let (nt, np) = (24, 48);
    let mut seeds: Vec<(f64, f64, f64)> = Vec::with_capacity(nt * np);
    for it in 0..=nt {
        for ip in 0..np {
            let (t, p) =
                (std::f64::consts::PI * it as f64 / nt as f64, 2.0 * std::f64::consts::PI * ip as f64 / np as f64);
            seeds.push((reduced_max(t, p), t, p));
        }
    }
    seeds.sort_by(|x, y| y.0.total_cmp(&x.0));
    seeds
        .iter()
        .take(4)
        .map(|&(v, t, p)| {
            let m = optim::nelder_mead(|z| -reduced_max(z[0], z[1]), &[t, p], 0.05, 1e-15, 400);
            v.max(-m.value)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Frank–Wolfe gap of `σ` for the problem defined by `ρ`.
pub(crate) fn certificate_gap(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let (vals, vecs) = linalg::eigh(sigma);
    let r = vecs.adjoint() * rho * &vecs;
    let mut g = CMatrix::zeros(DIM, DIM);
    for i in 0..DIM {
        for j in 0..DIM {
            g[(i, j)] = r[(i, j)] * linalg::ln_divided1(vals[i].max(1e-300), vals[j].max(1e-300));
        }
    }
    let y = linalg::hermitize(&(&vecs * g * vecs.adjoint()));
    max_product_expectation(&y) - 1.0
}

/// REE of a two-qubit density matrix in `left ⊗ right` order.
pub fn ree_two_qubit(rho: &CMatrix, opts: &ReeOptions) -> Result<ReeSolution> {
    if rho.nrows() != DIM || rho.ncols() != DIM {
        return Err(Error::Dimension(format!("expected a 4x4 matrix, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let rho = linalg::hermitize(rho);
    let entropy = linalg::von_neumann_entropy(&rho);

    // a PPT state is its own closest separable state
    let pt_min = linalg::eigvalsh(&partial_transpose_right(&rho, 2, 2))[0];
    if pt_min >= -1e-14 {
        let gap = if linalg::eigvalsh(&rho)[0] > 1e-10 { certificate_gap(&rho, &rho) } else { 0.0 };
        return Ok(ReeSolution {
            value: 0.0,
            closest_separable: rho,
            certificate_gap: gap.max(0.0),
            iterations: 0,
            converged: true,
        });
    }

    let problem = Problem { rho: rho.clone(), basis: Basis::new() };
    let mut x = vec![0.0; PARAMS];
    let mut mu = 0.1;
    let mu_final = opts.tolerance / 80.0;
    let mut iterations = 0;
    let mut newton_ok = true;
    loop {
        let mut stage_ok = false;
        while iterations < opts.max_iterations {
            iterations += 1;
            let (s, t) = problem.feasible(&x).expect("iterates stay strictly feasible");
            let (g, mut h) = problem.derivatives(&s, &t, mu);
            let f0 = problem.value(&x, mu).unwrap();
            let step = loop {
                if let Some(ch) = h.clone().cholesky() {
                    break ch.solve(&(-&g));
                }
                let shift = 1e-12 * h.diagonal().amax().max(1.0);
                for k in 0..PARAMS {
                    h[(k, k)] += shift;
                }
            };
            let decrement = -g.dot(&step);
            if decrement <= 1e-15 * f0.abs().max(1.0) || decrement < 1e-24 {
                stage_ok = true;
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(f1) = problem.value(&trial, mu) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no representable progress left at this μ
                stage_ok = decrement < 1e-10;
                break;
            }
            if decrement < 1e-20 {
                stage_ok = true;
                break;
            }
        }
        newton_ok &= stage_ok;
        if mu <= mu_final || iterations >= opts.max_iterations {
            break;
        }
        mu = (mu / 10.0).max(mu_final);
    }

    let sigma = problem.basis.matrix(&x, false);
    let (s, _) = problem.feasible(&x).expect("final iterate is feasible");
    let value = (problem.cross_entropy(&s) - entropy).max(0.0);
    let gap = certificate_gap(&rho, &sigma).max(0.0);
    let converged = newton_ok && iterations < opts.max_iterations && gap <= opts.tolerance;
    if !converged {
        log::warn!("REE optimizer: certificate gap {gap:.3e} after {iterations} Newton steps");
    }
    Ok(ReeSolution { value, closest_separable: sigma, certificate_gap: gap, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell_mixture(lambda: f64) -> CMatrix {
        // (1-λ)|00⟩⟨00| + λ|Ψ+⟩⟨Ψ+|
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0 - lambda, 0.0);
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            m[(i, j)] = c(lambda / 2.0, 0.0);
        }
        m
    }

    /// Closed form for the family above.
    fn bell_mixture_ree(lambda: f64) -> f64 {
        let mut e = (lambda - 2.0) * (1.0 - lambda / 2.0).ln();
        if lambda < 1.0 {
            e += (1.0 - lambda) * (1.0 - lambda).ln();
        }
        e
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = Basis::new();
        for (i, p) in b.mats.iter().enumerate() {
            for (j, q) in b.mats.iter().enumerate() {
                let ip = (p * q).trace();
                assert!((ip.re - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15 && ip.im.abs() < 1e-15);
            }
            let pt = partial_transpose_right(p, 2, 2);
            assert!(linalg::max_abs_diff(&pt, &(p * c(b.pt_sign[i], 0.0))) < 1e-15);
        }
        let x: Vec<f64> = (0..PARAMS).map(|k| 0.01 * k as f64).collect();
        let back = b.coords(&b.matrix(&x, false));
        assert!(back.iter().zip(&x).all(|(u, v)| (u - v).abs() < 1e-15));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let problem = Problem { rho: bell_mixture(0.7), basis: Basis::new() };
        let x: Vec<f64> = (0..PARAMS).map(|k| 0.02 * ((k as f64) * 0.7).sin()).collect();
        let mu = 0.05;
        let (s, t) = problem.feasible(&x).unwrap();
        let (g, h) = problem.derivatives(&s, &t, mu);
        let eps = 1e-5;
        for a in 0..PARAMS {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += eps;
            xm[a] -= eps;
            let fd = (problem.value(&xp, mu).unwrap() - problem.value(&xm, mu).unwrap()) / (2.0 * eps);
            assert!((fd - g[a]).abs() < 1e-8, "grad {a}: {fd} vs {}", g[a]);
            let (sp, tp) = problem.feasible(&xp).unwrap();
            let (sm, tm) = problem.feasible(&xm).unwrap();
            let gp = problem.derivatives(&sp, &tp, mu).0;
            let gm = problem.derivatives(&sm, &tm, mu).0;
            for b in 0..PARAMS {
                let fd = (gp[b] - gm[b]) / (2.0 * eps);
                assert!((fd - h[(a, b)]).abs() < 1e-6, "hess ({a},{b}): {fd} vs {}", h[(a, b)]);
            }
        }
    }

    #[test]
    fn bell_mixture_family_matches_closed_form() {
        for lambda in [1.0, 0.9, 0.5, 0.2, 0.05] {
            let sol = ree_two_qubit(&bell_mixture(lambda), &ReeOptions::default()).unwrap();
            let expect = bell_mixture_ree(lambda);
            assert!(sol.converged, "λ={lambda}: gap {}", sol.certificate_gap);
            assert!((sol.value - expect).abs() < 1e-7, "λ={lambda}: {} vs {expect}", sol.value);
        }
    }

    #[test]
    fn separable_state_has_zero_ree() {
        let mut m = CMatrix::zeros(4, 4);
        for (k, p) in [0.4, 0.1, 0.2, 0.3].iter().enumerate() {
            m[(k, k)] = c(*p, 0.0);
        }
        let sol = ree_two_qubit(&m, &ReeOptions::default()).unwrap();
        assert_eq!(sol.value, 0.0);
        assert!(sol.converged && sol.certificate_gap < 1e-10);
    }
}
