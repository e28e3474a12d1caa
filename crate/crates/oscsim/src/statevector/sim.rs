use nalgebra::DMatrix;
use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::circuit::{Circuit, Control, Gate, GateKind};
use crate::error::{Error, Result};

/// How amplitude updates are scheduled. Both policies perform the same
/// per-amplitude arithmetic, so their results are bit-identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecPolicy {
    Sequential,
    /// Data-parallel over amplitudes. Without the `parallel` feature this
    /// runs sequentially.
    Parallel,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecPolicy::Parallel
        } else {
            ExecPolicy::Sequential
        }
    }
}

/// Below this many amplitudes the parallel path is not worth the overhead.
const PAR_MIN_LEN: usize = 1 << 12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn control_masks(controls: &[Control]) -> (usize, usize) {
    let mut mask = 0usize;
    let mut val = 0usize;
    for c in controls {
        mask |= 1 << c.qubit;
        if c.on {
            val |= 1 << c.qubit;
        }
    }
    (mask, val)
}

fn bits_of(index: usize, qubits: &[usize]) -> u64 {
    qubits.iter().enumerate().fold(0u64, |acc, (i, &q)| acc | (((index >> q) & 1) as u64) << i)
}

fn with_bits(index: usize, qubits: &[usize], value: u64) -> usize {
    qubits.iter().enumerate().fold(index, |acc, (i, &q)| {
        (acc & !(1 << q)) | ((((value >> i) & 1) as usize) << q)
    })
}

/// 2×2 matrix of a one-qubit kind, row-major.
fn matrix_of(kind: &GateKind) -> [Complex64; 4] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match *kind {
        GateKind::X => [ZERO, c(1.0, 0.0), c(1.0, 0.0), ZERO],
        GateKind::Z => [c(1.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)],
        GateKind::H => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]
        }
        GateKind::Ry(t) => {
            let (s, co) = (t / 2.0).sin_cos();
            [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
        }
        GateKind::Rz(t) => [Complex64::from_polar(1.0, -t / 2.0), ZERO, ZERO, Complex64::from_polar(1.0, t / 2.0)],
        GateKind::Phase(p) => [c(1.0, 0.0), ZERO, ZERO, Complex64::from_polar(1.0, p)],
        _ => unreachable!("not a one-qubit gate"),
    }
}

/// Dense state vector over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n_qubits: usize,
    scratch: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { amps, n_qubits, scratch: Vec::new() }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Dimension { expected: amps.len().next_power_of_two(), got: amps.len() });
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        Ok(StateVector { amps, n_qubits, scratch: Vec::new() })
    }

    /// Embeds `amps` into the low-index corner of a larger register.
    pub fn embed(amps: &[Complex64], n_qubits: usize) -> Result<Self> {
        if amps.len() > 1 << n_qubits {
            return Err(Error::Dimension { expected: 1 << n_qubits, got: amps.len() });
        }
        let mut v = vec![ZERO; 1 << n_qubits];
        v[..amps.len()].copy_from_slice(amps);
        Ok(StateVector { amps: v, n_qubits, scratch: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn run(&mut self, circuit: &Circuit, policy: ExecPolicy) -> Result<()> {
        if circuit.width() != self.n_qubits {
            return Err(Error::Dimension { expected: 1 << circuit.width(), got: self.amps.len() });
        }
        for g in circuit.gates() {
            self.apply(g, policy);
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate, policy: ExecPolicy) {
        let parallel = policy == ExecPolicy::Parallel && self.amps.len() >= PAR_MIN_LEN;
        match gate.kind {
            GateKind::Z | GateKind::Rz(_) | GateKind::Phase(_) => self.apply_diagonal(gate, parallel),
            GateKind::X | GateKind::H | GateKind::Ry(_) => self.apply_pairwise(gate, parallel),
            _ => self.apply_permutation(gate, parallel),
        }
    }

    fn apply_diagonal(&mut self, gate: &Gate, parallel: bool) {
        let m = matrix_of(&gate.kind);
        let (d0, d1) = (m[0], m[3]);
        let t = gate.targets[0];
        let (cmask, cval) = control_masks(&gate.controls);
        let f = move |i: usize, a: &mut Complex64| {
            if i & cmask == cval {
                *a *= if (i >> t) & 1 == 1 { d1 } else { d0 };
            }
        };
        if parallel {
            #[cfg(feature = "parallel")]
            {
                self.amps.par_iter_mut().enumerate().for_each(|(i, a)| f(i, a));
                return;
            }
        }
        self.amps.iter_mut().enumerate().for_each(|(i, a)| f(i, a));
    }

    fn apply_pairwise(&mut self, gate: &Gate, parallel: bool) {
        let m = matrix_of(&gate.kind);
        let t = gate.targets[0];
        let tb = 1usize << t;
        let (cmask, cval) = control_masks(&gate.controls);
        let update = move |i: usize, a0: &mut Complex64, a1: &mut Complex64| {
            if i & cmask == cval {
                let (x0, x1) = (*a0, *a1);
                *a0 = m[0] * x0 + m[1] * x1;
                *a1 = m[2] * x0 + m[3] * x1;
            }
        };
        let chunk = 2 * tb;
        let chunk_fn = move |(ci, ch): (usize, &mut [Complex64])| {
            let base = ci * chunk;
            let (lo, hi) = ch.split_at_mut(tb);
            for (k, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                update(base + k, a0, a1);
            }
        };
        if parallel {
            #[cfg(feature = "parallel")]
            {
                let n_chunks = self.amps.len() / chunk;
                if n_chunks >= 64 {
                    self.amps.par_chunks_mut(chunk).enumerate().for_each(chunk_fn);
                } else {
                    for (ci, ch) in self.amps.chunks_mut(chunk).enumerate() {
                        let base = ci * chunk;
                        let (lo, hi) = ch.split_at_mut(tb);
                        lo.par_iter_mut()
                            .zip(hi.par_iter_mut())
                            .enumerate()
                            .for_each(|(k, (a0, a1))| update(base + k, a0, a1));
                    }
                }
                return;
            }
        }
        self.amps.chunks_mut(chunk).enumerate().for_each(chunk_fn);
    }

    fn apply_permutation(&mut self, gate: &Gate, parallel: bool) {
        let (cmask, cval) = control_masks(&gate.controls);
        let targets = gate.targets.clone();
        let kind = gate.kind.clone();
        // `source(i)` is the preimage of basis state `i`.
        let source = move |i: usize| -> usize {
            if i & cmask != cval {
                return i;
            }
            match kind {
                GateKind::Swap => {
                    let (a, b) = (targets[0], targets[1]);
                    let (ba, bb) = ((i >> a) & 1, (i >> b) & 1);
                    if ba == bb {
                        i
                    } else {
                        i ^ (1 << a) ^ (1 << b)
                    }
                }
                GateKind::AddConst(c) => {
                    let m = targets.len();
                    let modulus = 1u64 << m;
                    let v = bits_of(i, &targets);
                    with_bits(i, &targets, (v + modulus - c % modulus) % modulus)
                }
                GateKind::CompareGeConst(c) => {
                    let r = targets.len() - 1;
                    let x = bits_of(i, &targets[..r]);
                    if x >= c {
                        i ^ (1 << targets[r])
                    } else {
                        i
                    }
                }
                GateKind::CompareGeReg => {
                    let r = (targets.len() - 1) / 2;
                    let x = bits_of(i, &targets[..r]);
                    let y = bits_of(i, &targets[r..2 * r]);
                    if x >= y {
                        i ^ (1 << targets[2 * r])
                    } else {
                        i
                    }
                }
                _ => unreachable!("not a permutation gate"),
            }
        };
        let len = self.amps.len();
        self.scratch.resize(len, ZERO);
        let src = &self.amps;
        if parallel {
            #[cfg(feature = "parallel")]
            {
                self.scratch.par_iter_mut().enumerate().for_each(|(i, o)| *o = src[source(i)]);
                std::mem::swap(&mut self.amps, &mut self.scratch);
                return;
            }
        }
        self.scratch.iter_mut().enumerate().for_each(|(i, o)| *o = src[source(i)]);
        std::mem::swap(&mut self.amps, &mut self.scratch);
    }
}

/// Runs `circuit` on `psi_in` with the default policy.
pub fn run_circuit(circuit: &Circuit, psi_in: &[Complex64]) -> Result<Vec<Complex64>> {
    run_circuit_with(circuit, psi_in, ExecPolicy::default())
}

pub fn run_circuit_with(circuit: &Circuit, psi_in: &[Complex64], policy: ExecPolicy) -> Result<Vec<Complex64>> {
    let expected = 1usize << circuit.width();
    if psi_in.len() != expected {
        return Err(Error::Dimension { expected, got: psi_in.len() });
    }
    let mut sv = StateVector::from_amplitudes(psi_in.to_vec())?;
    sv.run(circuit, policy)?;
    Ok(sv.into_amplitudes())
}

/// Projects onto basis states where `qubits` (LSB first) read `value`.
/// Returns the renormalized state and the probability.
pub fn project(psi: &[Complex64], qubits: &[usize], value: u64) -> Result<(Vec<Complex64>, f64)> {
    project_where(psi, |i| bits_of(i, qubits) == value)
}

/// Projects onto basis states selected by `keep`.
pub fn project_where(psi: &[Complex64], keep: impl Fn(usize) -> bool) -> Result<(Vec<Complex64>, f64)> {
    let mut out: Vec<Complex64> =
        psi.iter().enumerate().map(|(i, a)| if keep(i) { *a } else { ZERO }).collect();
    let p: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    if p == 0.0 {
        return Err(Error::ZeroProbability);
    }
    let s = 1.0 / p.sqrt();
    out.iter_mut().for_each(|a| *a *= s);
    Ok((out, p))
}

/// Full unitary of a small circuit, built column by column from basis inputs.
pub fn circuit_unitary(circuit: &Circuit) -> DMatrix<Complex64> {
    let w = circuit.width();
    assert!(w <= 14, "unitary extraction limited to 14 qubits");
    let d = 1usize << w;
    let mut u = DMatrix::from_element(d, d, ZERO);
    for col in 0..d {
        let mut sv = StateVector::basis(w, col);
        sv.run(circuit, ExecPolicy::Sequential).expect("width matches");
        for (row, a) in sv.amps.iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    u
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    ip.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::circuit::Register;

    fn gate_matrix(w: usize, g: &Gate) -> DMatrix<Complex64> {
        // columns are the images of basis states
        let d = 1 << w;
        let mut u = DMatrix::from_element(d, d, ZERO);
        for col in 0..d {
            let mut sv = StateVector::basis(w, col);
            sv.apply(g, ExecPolicy::Sequential);
            for row in 0..d {
                u[(row, col)] = sv.amps[row];
            }
        }
        u
    }

    fn single_qubit_reference(w: usize, t: usize, m: [Complex64; 4], controls: &[Control]) -> DMatrix<Complex64> {
        let d = 1 << w;
        let (cm, cv) = control_masks(controls);
        DMatrix::from_fn(d, d, |r, c| {
            if c & cm != cv {
                return if r == c { Complex64::new(1.0, 0.0) } else { ZERO };
            }
            if (r ^ c) & !(1 << t) != 0 {
                return ZERO;
            }
            m[((r >> t) & 1) * 2 + ((c >> t) & 1)]
        })
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::with_width(3);
        let psi: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -(i as f64)) / 20.0).collect();
        assert_eq!(run_circuit(&c, &psi).unwrap(), psi);
    }

    #[test]
    fn double_hadamard_is_identity() {
        let mut c = Circuit::with_width(1);
        c.h(0);
        c.h(0);
        let out = run_circuit(&c, &[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
        assert!((out[0] - Complex64::new(0.6, 0.0)).norm() < 1e-15);
        assert!((out[1] - Complex64::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn one_qubit_gates_match_reference_matrices() {
        let kinds = [GateKind::X, GateKind::Z, GateKind::H, GateKind::Ry(0.7), GateKind::Rz(-1.1), GateKind::Phase(0.4)];
        for kind in kinds {
            for controls in [vec![], vec![Control::on(0)], vec![Control::off(0), Control::on(3)]] {
                let g = Gate::new(kind.clone(), vec![2]).with_controls(&controls);
                let got = gate_matrix(4, &g);
                let want = single_qubit_reference(4, 2, matrix_of(&kind), &controls);
                assert!((got - want).map(|z| z.norm()).max() < 1e-15);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let (_, p) = project(&plus, &[0], 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let (_, p) = project(&plus, &[], 0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let zero = [Complex64::new(1.0, 0.0), ZERO];
        assert!(matches!(project(&zero, &[0], 1), Err(Error::ZeroProbability)));
    }

    #[test]
    fn add_constant_wraps_around() {
        let reg = Register { offset: 0, width: 3 };
        let mut c = Circuit::with_width(3);
        c.add(GateKind::AddConst(1), &reg.qubits(), &[]);
        let mut sv = StateVector::basis(3, 7);
        sv.run(&c, ExecPolicy::Sequential).unwrap();
        assert_eq!(sv.amps[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let c = Circuit::with_width(2);
        assert!(run_circuit(&c, &[ZERO; 8]).is_err());
    }
}
