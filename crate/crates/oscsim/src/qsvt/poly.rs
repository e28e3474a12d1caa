//! Bessel functions, Jacobi–Anger truncations and QSP phase factors.
//!
//! Phase convention. [`qsp_phases`] returns symmetric phases
//! `Φ = (φ_0, …, φ_d)` in the Wx convention
//!
//! ```text
//! U_Φ(x) = e^{iφ_0 Z} W(x) e^{iφ_1 Z} ⋯ W(x) e^{iφ_d Z},
//! W(x) = [[x, i√(1−x²)], [i√(1−x²), x]],
//! ```
//!
//! with `Re⟨0|U_Φ(x)|0⟩ = f(x)`. Circuits use the reflection
//! `R(x) = [[x, √(1−x²)], [√(1−x²), −x]]`, which a block encoding realizes
//! in each invariant subspace. Since `W = i·e^{−iπZ/4} R e^{−iπZ/4}`,
//! [`to_reflection_phases`] subtracts `π/4` from the end phases and `π/2`
//! from the inner ones, and the reflection sequence equals `(−i)^d U_Φ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bessel functions `J_0(τ), …, J_kmax(τ)` by Miller's downward recurrence,
/// normalized with `J_0 + 2 Σ J_{2m} = 1`.
pub fn bessel_j(kmax: usize, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if tau == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = tau.abs();
    let top = kmax.max(x.ceil() as usize) + 30 + (40.0 * (kmax as f64 + x)).sqrt() as usize;
    let top = top + top % 2;
    let mut vals = vec![0.0; top + 2];
    vals[top] = 1e-300;
    for k in (1..=top).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for (k, o) in out.iter_mut().enumerate() {
        let v = vals[k] / norm;
        // J_k(−τ) = (−1)^k J_k(τ)
        *o = if tau < 0.0 && k % 2 == 1 { -v } else { v };
    }
    out
}

/// `Σ c_k T_k(x)` by Clenshaw.
pub fn chebyshev_eval(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Truncated Jacobi–Anger expansions of `cos(τx)` and `sin(τx)`, each
/// multiplied by `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct QsvtPlan {
    /// `τ = λt`.
    pub tau: f64,
    pub eps_poly: f64,
    /// Every polynomial is multiplied by this factor so that it stays
    /// bounded away from 1, which the phase solver needs.
    pub scale: f64,
    /// Chebyshev coefficients; even degree.
    pub cos_coeffs: Vec<f64>,
    /// Chebyshev coefficients; odd degree.
    pub sin_coeffs: Vec<f64>,
}

impl QsvtPlan {
    pub fn cos_degree(&self) -> usize {
        self.cos_coeffs.len() - 1
    }

    pub fn sin_degree(&self) -> usize {
        self.sin_coeffs.len() - 1
    }
}

/// Polynomial scale applied by [`jacobi_anger_plan`].
pub const POLY_SCALE: f64 = 0.9;

/// Jacobi–Anger plan for `e^{−iλtx}` with tail `Σ_{j>k} 2|J_j(τ)| ≤ ε`.
pub fn jacobi_anger_plan(t: f64, lambda: f64, eps_poly: f64) -> Result<QsvtPlan> {
    if !(eps_poly > 0.0 && eps_poly < 0.5) {
        return Err(Error::InvalidInput("polynomial accuracy must lie in (0, 0.5)".into()));
    }
    let tau = lambda * t;
    if !tau.is_finite() {
        return Err(Error::InvalidInput("λt must be finite".into()));
    }
    // J_k decays super-exponentially once k > e|τ|/2.
    let kmax = (1.5 * tau.abs()).ceil() as usize + 40 + (-eps_poly.ln()).ceil() as usize;
    let j = bessel_j(kmax + 1, tau);
    let tail = |k: usize| 2.0 * j[k + 1..].iter().map(|v| v.abs()).sum::<f64>();
    let k = (0..=kmax).find(|&k| tail(k) <= eps_poly).unwrap_or(kmax);
    let cos_deg = k - k % 2;
    let sin_deg = if k == 0 { 1 } else if k % 2 == 1 { k } else { k - 1 };
    let mut cos_coeffs = vec![0.0; cos_deg + 1];
    let mut sin_coeffs = vec![0.0; sin_deg + 1];
    cos_coeffs[0] = POLY_SCALE * j[0];
    for m in 1..=cos_deg / 2 {
        cos_coeffs[2 * m] = POLY_SCALE * 2.0 * sign(m) * j[2 * m];
    }
    for m in 0..=(sin_deg - 1) / 2 {
        if 2 * m < k {
            sin_coeffs[2 * m + 1] = POLY_SCALE * 2.0 * sign(m) * j[2 * m + 1];
        }
    }
    Ok(QsvtPlan { tau, eps_poly, scale: POLY_SCALE, cos_coeffs, sin_coeffs })
}

fn sign(m: usize) -> f64 {
    if m.is_multiple_of(2) { 1.0 } else { -1.0 }
}

type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn zrot(phi: f64) -> M2 {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, phi), z], [z, Complex64::from_polar(1.0, -phi)]]
}

fn wx(x: f64) -> M2 {
    let s = Complex64::new(0.0, (1.0 - x * x).max(0.0).sqrt());
    [[Complex64::new(x, 0.0), s], [s, Complex64::new(x, 0.0)]]
}

fn reflection(x: f64) -> M2 {
    let s = Complex64::new((1.0 - x * x).max(0.0).sqrt(), 0.0);
    [[Complex64::new(x, 0.0), s], [s, Complex64::new(-x, 0.0)]]
}

/// `⟨0|e^{iφ_0 Z} S(x) e^{iφ_1 Z} ⋯ S(x) e^{iφ_d Z}|0⟩` for a signal `S`.
fn qsp_amplitude(phases: &[f64], x: f64, signal: fn(f64) -> M2) -> Complex64 {
    let s = signal(x);
    let mut m = zrot(phases[0]);
    for &p in &phases[1..] {
        m = mul(&mul(&m, &s), &zrot(p));
    }
    m[0][0]
}

/// `⟨0|U_Φ(x)|0⟩` in the Wx convention.
pub fn qsp_wx(phases: &[f64], x: f64) -> Complex64 {
    qsp_amplitude(phases, x, wx)
}

/// `⟨0|·|0⟩` of the reflection sequence with the same phase list.
pub fn qsp_reflection(phases: &[f64], x: f64) -> Complex64 {
    qsp_amplitude(phases, x, reflection)
}

/// Converts Wx phases to reflection phases.
pub fn to_reflection_phases(wx_phases: &[f64]) -> Vec<f64> {
    let d = wx_phases.len() - 1;
    if d == 0 {
        return wx_phases.to_vec();
    }
    let q = std::f64::consts::FRAC_PI_4;
    wx_phases
        .iter()
        .enumerate()
        .map(|(k, p)| if k == 0 || k == d { p - q } else { p - 2.0 * q })
        .collect()
}

fn full_phases(reduced: &[f64], d: usize) -> Vec<f64> {
    (0..=d).map(|k| reduced[k.min(d - k)]).collect()
}

/// Newton iteration cap for [`qsp_phases`].
pub const QSP_MAX_ITER: usize = 200;
/// Node residual at which Newton stops.
pub const QSP_NODE_TOL: f64 = 1e-13;
/// Required agreement on the 200-node validation grid.
pub const QSP_CHECK_TOL: f64 = 1e-8;

/// Symmetric Wx phases with `Re⟨0|U_Φ(x)|0⟩ = Σ c_k T_k(x)`.
///
/// Solves for the `d̃ = ⌈(d+1)/2⌉` free phases by Newton's method on the
/// positive Chebyshev nodes `cos((2j−1)π/(4d̃))`, starting from
/// `(π/4, 0, …, 0, π/4)`, whose real part is identically zero. The Jacobian
/// comes from prefix and suffix products. Iteration stops once the node
/// residual is below [`QSP_NODE_TOL`] or the step stalls; the result is then checked on 200
/// Chebyshev nodes against [`QSP_CHECK_TOL`].
pub fn qsp_phases(coeffs: &[f64], parity: usize) -> Result<Vec<f64>> {
    let d = coeffs.len().saturating_sub(1);
    if coeffs.is_empty() || d % 2 != parity % 2 {
        return Err(Error::InvalidInput(format!("degree {d} does not have parity {parity}")));
    }
    if coeffs.iter().enumerate().any(|(k, c)| k % 2 != parity % 2 && *c != 0.0) {
        return Err(Error::InvalidInput("coefficients break the stated parity".into()));
    }
    let target = |x: f64| chebyshev_eval(coeffs, x);
    if d == 0 {
        if coeffs[0].abs() > 1.0 {
            return Err(Error::InvalidInput("constant exceeds 1 in magnitude".into()));
        }
        return Ok(vec![coeffs[0].acos()]);
    }
    let dt = d / 2 + 1;
    let nodes: Vec<f64> =
        (1..=dt).map(|j| ((2 * j - 1) as f64 * std::f64::consts::PI / (4 * dt) as f64).cos()).collect();
    let want: Vec<f64> = nodes.iter().map(|&x| target(x)).collect();
    let mut reduced = vec![0.0; dt];
    reduced[0] = std::f64::consts::FRAC_PI_4;

    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < QSP_MAX_ITER {
        let phases = full_phases(&reduced, d);
        let (vals, jac) = value_and_jacobian(&phases, &nodes, dt);
        let r = DVector::from_fn(dt, |i, _| vals[i] - want[i]);
        residual = r.amax();
        if residual < QSP_NODE_TOL {
            break;
        }
        let step = jac.lu().solve(&r).ok_or(Error::QspNonConvergence { residual, iterations })?;
        for (p, s) in reduced.iter_mut().zip(step.iter()) {
            *p -= s;
        }
        iterations += 1;
        if step.amax() < 1e-15 {
            break;
        }
    }
    let phases = full_phases(&reduced, d);
    let check = (0..200)
        .map(|j| {
            let x = ((2 * j + 1) as f64 * std::f64::consts::PI / 400.0).cos();
            (qsp_wx(&phases, x).re - target(x)).abs()
        })
        .fold(0.0, f64::max);
    if !(check <= QSP_CHECK_TOL) {
        return Err(Error::QspNonConvergence { residual: check.max(residual), iterations });
    }
    Ok(phases)
}

/// Real parts at the nodes and their derivatives with respect to the
/// reduced phases.
fn value_and_jacobian(phases: &[f64], nodes: &[f64], dt: usize) -> (Vec<f64>, DMatrix<f64>) {
    let d = phases.len() - 1;
    let iz: M2 = [[Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)]];
    let mut vals = vec![0.0; nodes.len()];
    let mut jac = DMatrix::zeros(nodes.len(), dt);
    let id: M2 = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    for (row, &x) in nodes.iter().enumerate() {
        let w = wx(x);
        // factor k = e^{iφ_k Z} (k ≥ 1 preceded by W)
        let factor = |k: usize| if k == 0 { zrot(phases[0]) } else { mul(&w, &zrot(phases[k])) };
        let mut prefix = vec![id; d + 2];
        for k in 0..=d {
            prefix[k + 1] = mul(&prefix[k], &factor(k));
        }
        let mut suffix = vec![id; d + 2];
        for k in (0..=d).rev() {
            suffix[k] = mul(&factor(k), &suffix[k + 1]);
        }
        vals[row] = prefix[d + 1][0][0].re;
        for k in 0..=d {
            // d/dφ_k inserts iZ right after e^{iφ_k Z}.
            let dk = mul(&mul(&prefix[k + 1], &iz), &suffix[k + 1]);
            jac[(row, k.min(d - k))] += dk[0][0].re;
        }
    }
    (vals, jac)
}

/// Writes one angle per line with 17 significant digits.
pub fn write_phases(path: &std::path::Path, phases: &[f64]) -> Result<()> {
    let text: String = phases.iter().map(|p| format!("{p:.16e}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_phases(path: &std::path::Path) -> Result<Vec<f64>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad phase '{l}': {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_j(n: usize, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for m in 1..80 {
            term *= -(x / 2.0).powi(2) / (m as f64 * (m + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_power_series() {
        for &x in &[0.3, 1.0, 2.5, 5.0, 7.7, 10.0] {
            let j = bessel_j(25, x);
            for (n, v) in j.iter().enumerate() {
                assert!((v - series_j(n, x)).abs() < 1e-12, "J_{n}({x}): {v} vs {}", series_j(n, x));
            }
        }
    }

    #[test]
    fn zero_time_plan() {
        let p = jacobi_anger_plan(0.0, 3.0, 1e-6).unwrap();
        assert_eq!(p.cos_degree(), 0);
        assert_eq!(p.sin_degree(), 1);
        assert!((p.cos_coeffs[0] - POLY_SCALE).abs() < 1e-15);
        assert!(p.sin_coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn identity_polynomial_has_zero_phases() {
        // |P| = 1 makes φ = 0 a double root, so the phases only reach the
        // square root of the residual tolerance.
        let ph = qsp_phases(&[0.0, 1.0], 1).unwrap();
        assert!(ph.iter().all(|p| p.abs() < 1e-6), "{ph:?}");
        for x in [-0.9, -0.2, 0.3, 1.0] {
            assert!((qsp_wx(&ph, x).re - x).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_conversion_matches_up_to_power_of_i() {
        let coeffs = [0.0, 0.5, 0.0, -0.3];
        let ph = qsp_phases(&coeffs, 1).unwrap();
        let refl = to_reflection_phases(&ph);
        for x in [-0.9, -0.2, 0.1, 0.77] {
            let a = qsp_wx(&ph, x);
            let b = qsp_reflection(&refl, x) * Complex64::new(0.0, 1.0).powi(3);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parity_mismatch_is_rejected() {
        assert!(qsp_phases(&[0.1, 0.2], 0).is_err());
        assert!(qsp_phases(&[0.1, 0.2, 0.3], 0).is_err());
    }
}
