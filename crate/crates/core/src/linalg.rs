//! Dense complex linear-algebra helpers shared by the state, device and
//! entanglement modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest elementwise modulus of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let h = hermitize(m);
    // nalgebra's tridiagonal QR can return NaN on sparse, low-rank operators
    // such as truncated squeezed states; exactly-zero rows are split off
    // first (they are eigenvectors with eigenvalue 0)
    let live: Vec<usize> = (0..n).filter(|&i| h.row(i).iter().any(|z| *z != ZERO)).collect();
    let sub = CMatrix::from_fn(live.len(), live.len(), |i, j| h[(live[i], live[j])]);
    let (sub_vals, sub_vecs) = dense_eigh(&sub);
    let mut vals = vec![0.0; n];
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &v) in sub_vals.iter().enumerate() {
        vals[k] = v;
        for (i, &row) in live.iter().enumerate() {
            vecs[(row, k)] = sub_vecs[(i, k)];
        }
    }
    let mut is_live = vec![false; n];
    for &i in &live {
        is_live[i] = true;
    }
    for (k, row) in (0..n).filter(|&i| !is_live[i]).enumerate() {
        vecs[(row, live.len() + k)] = ONE;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&k| vals[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    (values, vectors)
}

fn dense_eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = h.clone().symmetric_eigen();
    let finite = eig.eigenvalues.iter().all(|v| v.is_finite())
        && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    if finite {
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    // a diagonal shift changes the QR iteration path; eigenvalues shift back
    // exactly up to rounding of order eps * shift
    let shift = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    log::warn!("symmetric eigensolver produced NaN on a {n}x{n} operator; retrying with a diagonal shift");
    let eig = (h + CMatrix::identity(n, n) * c(shift, 0.0)).symmetric_eigen();
    (eig.eigenvalues.iter().map(|v| v - shift).collect(), eig.eigenvectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return eigh(m).0;
    }
    v.sort_by(f64::total_cmp);
    v
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&x| c(f(x), 0.0))));
    &vecs * d * vecs.adjoint()
}

/// Principal square root of a positive semidefinite matrix; tiny negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |x| x.max(0.0).sqrt())
}

/// Unitary factor `U` of the polar decomposition `M = sqrt(M M†) U`.
///
/// On the kernel of `M` the factor is completed with the SVD's own basis, so
/// it is always unitary.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    u * v_t
}

/// Logarithm of a unitary matrix, returned anti-Hermitian.
///
/// Eigenphases are taken in (-pi, pi]. Any branch yields the same unitary
/// after exponentiation, which is all the callers rely on.
pub fn unitary_log(u: &CMatrix) -> CMatrix {
    let n = u.nrows();
    let (q, t) = u.clone().schur().unpack();
    let mut d = CMatrix::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = c(0.0, t[(k, k)].arg());
    }
    let k = &q * d * q.adjoint();
    (&k - k.adjoint()) * c(0.5, 0.0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `-sum p ln p` over the strictly positive entries.
pub fn entropy_of(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities.into_iter().filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum()
}

pub fn von_neumann_entropy(rho: &CMatrix) -> f64 {
    entropy_of(eigvalsh(rho))
}

/// Cholesky-based positive-definiteness test.
pub fn is_positive_definite(m: &CMatrix) -> bool {
    hermitize(m).cholesky().is_some()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// First divided difference of `ln` at (a, b).
pub fn ln_divided1(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let r = (hi - lo) / lo;
    if r < 1e-8 {
        // ln(1+r)/(r lo) ≈ (1 - r/2 + r²/3)/lo
        (1.0 - r / 2.0 + r * r / 3.0) / lo
    } else {
        (hi / lo).ln() / (hi - lo)
    }
}

/// Second divided difference of `ln` at (a, b, c).
pub fn ln_divided2(a: f64, b: f64, c3: f64) -> f64 {
    let mut v = [a, b, c3];
    v.sort_by(f64::total_cmp);
    let [x, y, z] = v;
    if (z - x) > 1e-6 * x {
        (ln_divided1(z, y) - ln_divided1(y, x)) / (z - x)
    } else {
        // f''(m)/2 with f = ln; curvature changes slowly over the tiny spread
        let m = (x + y + z) / 3.0;
        -0.5 / (m * m)
    }
}
