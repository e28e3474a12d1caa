//! Classical ground truth: normal modes, closed-form Newtonian motion, and
//! exact quantum evolution by eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{mass_weighted_stiffness, stiffness_matrix, SpringMassSystem};

/// Eigenvalues in `[-CLIP, 0)` are rigid modes and become exactly zero.
const CLIP: f64 = 1e-12;
/// Eigenvalues below `-REJECT` mean the stiffness matrix is not PSD.
const REJECT: f64 = 1e-9;

/// Normal modes sorted by ascending frequency.
#[derive(Clone, Debug)]
pub struct NormalModes {
    /// `ω_α >= 0`.
    pub frequencies: Vec<f64>,
    /// Columns `u_α = M^{-1/2} y_α`, orthonormal in the mass inner product.
    pub mode_matrix: DMatrix<f64>,
    /// Orthonormal eigenvectors `y_α` of `M^{-1/2} F M^{-1/2}`.
    pub eigenvectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition of `m + sI`, shifted back by `s`.
///
/// nalgebra's implicit QR step returns NaN on some sparse matrices with
/// many zero eigenvalues (the padded Hamiltonian from N = 8 upward). A
/// Gershgorin shift makes the matrix positive definite, which avoids the
/// breakdown while leaving the eigenvectors unchanged.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let radius = (0..n).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let shift = radius + 1.0;
    let mut eig = SymmetricEigen::new(m + DMatrix::identity(n, n) * shift);
    eig.eigenvalues.add_scalar_mut(-shift);
    if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("symmetric eigensolver did not converge".into()));
    }
    Ok(eig)
}

pub fn normal_modes(sys: &SpringMassSystem) -> Result<NormalModes> {
    let w = mass_weighted_stiffness(sys);
    let eig = symmetric_eigen(&w)?;
    let n = sys.n_osc();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut frequencies = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        let mut lam = eig.eigenvalues[idx];
        if lam < -REJECT {
            return Err(Error::InvalidSystem(format!(
                "stiffness matrix has negative eigenvalue {lam:e}"
            )));
        }
        if lam < CLIP {
            lam = 0.0;
        }
        frequencies.push(lam.sqrt());
        vecs.set_column(col, &eig.eigenvectors.column(idx));
    }
    let mode_matrix =
        DMatrix::from_fn(n, n, |i, a| vecs[(i, a)] / sys.masses()[i].sqrt());
    Ok(NormalModes { frequencies, mode_matrix, eigenvectors: vecs })
}

/// Positions and velocities at time `t` by modal superposition.
pub fn evolve_newton(sys: &SpringMassSystem, modes: &NormalModes, t: f64) -> (Vec<f64>, Vec<f64>) {
    let n = sys.n_osc();
    let sq: Vec<f64> = sys.masses().iter().map(|m| m.sqrt()).collect();
    let q0 = DVector::from_fn(n, |i, _| sq[i] * sys.x0()[i]);
    let p0 = DVector::from_fn(n, |i, _| sq[i] * sys.v0()[i]);
    let y = &modes.eigenvectors;
    let c0 = y.transpose() * q0;
    let d0 = y.transpose() * p0;
    let mut c = DVector::zeros(n);
    let mut d = DVector::zeros(n);
    for a in 0..n {
        let w = modes.frequencies[a];
        if w == 0.0 {
            c[a] = c0[a] + d0[a] * t;
            d[a] = d0[a];
        } else {
            let (s, co) = (w * t).sin_cos();
            c[a] = c0[a] * co + d0[a] * s / w;
            d[a] = -c0[a] * w * s + d0[a] * co;
        }
    }
    let q = y * c;
    let p = y * d;
    let x = (0..n).map(|i| q[i] / sq[i]).collect();
    let v = (0..n).map(|i| p[i] / sq[i]).collect();
    (x, v)
}

/// Classical kinetic energy at time `t`.
pub fn classical_kinetic_energy(sys: &SpringMassSystem, modes: &NormalModes, t: f64) -> f64 {
    let (_, v) = evolve_newton(sys, modes, t);
    sys.kinetic_energy(&v)
}

/// Fixed-step fourth-order Runge–Kutta integration of `M ẍ = -F x`.
pub fn rk4_newton(sys: &SpringMassSystem, t: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = sys.n_osc();
    let f = stiffness_matrix(sys);
    let minv: Vec<f64> = sys.masses().iter().map(|m| 1.0 / m).collect();
    let accel = |x: &[f64]| -> Vec<f64> {
        (0..n).map(|i| -minv[i] * (0..n).map(|j| f[(i, j)] * x[j]).sum::<f64>()).collect()
    };
    let mut x = sys.x0().to_vec();
    let mut v = sys.v0().to_vec();
    let steps = (t / dt).round() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(a, b)| a + s * b).collect()
    };
    for _ in 0..steps {
        let k1x = v.clone();
        let k1v = accel(&x);
        let k2x = axpy(&v, h / 2.0, &k1v);
        let k2v = accel(&axpy(&x, h / 2.0, &k1x));
        let k3x = axpy(&v, h / 2.0, &k2v);
        let k3v = accel(&axpy(&x, h / 2.0, &k2x));
        let k4x = axpy(&v, h, &k3v);
        let k4v = accel(&axpy(&x, h, &k3x));
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    (x, v)
}

/// Eigendecomposition of a real symmetric Hamiltonian, reusable across times.
#[derive(Clone, Debug)]
pub struct ExactPropagator {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ExactPropagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::Dimension { expected: h.nrows(), got: h.ncols() });
        }
        let asym = (h - h.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::NotHermitian(asym));
        }
        let eig = symmetric_eigen(h)?;
        Ok(Self { eigenvalues: eig.eigenvalues.iter().copied().collect(), eigenvectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V e^{-iΛt} Vᵀ ψ0`.
    pub fn evolve(&self, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let d = self.dim();
        if psi0.len() != d {
            return Err(Error::Dimension { expected: d, got: psi0.len() });
        }
        let v = &self.eigenvectors;
        let mut coef = vec![Complex64::new(0.0, 0.0); d];
        for (a, c) in coef.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..d {
                s += psi0[i] * v[(i, a)];
            }
            *c = s * Complex64::from_polar(1.0, -self.eigenvalues[a] * t);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for a in 0..d {
                s += coef[a] * v[(i, a)];
            }
            *o = s;
        }
        Ok(out)
    }

    /// Dense unitary `e^{-iHt}`.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let d = self.dim();
        let v = &self.eigenvectors;
        DMatrix::from_fn(d, d, |i, j| {
            (0..d)
                .map(|a| {
                    Complex64::from_polar(v[(i, a)] * v[(j, a)], -self.eigenvalues[a] * t)
                })
                .sum()
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// One-shot exact evolution `e^{-iHt} ψ0`.
pub fn evolve_exact_quantum(h: &DMatrix<f64>, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    ExactPropagator::new(h)?.evolve(psi0, t)
}
