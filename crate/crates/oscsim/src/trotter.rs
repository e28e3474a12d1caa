//! Pauli decomposition and second-order product formulas.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::classical::{classical_kinetic_energy, normal_modes};
use crate::error::{Error, Result};
use crate::model::{hamiltonian, initial_state_vector, SpringMassSystem};
use crate::observables::kinetic_energy;
use crate::stateprep::sparse_prepare;
use crate::statevector::{Circuit, ExecPolicy, GateKind, StateVector};

/// One Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A Pauli string; `letters[0]` acts on the most significant qubit.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
}

impl PauliString {
    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidInput(format!("bad Pauli letter '{other}'"))),
            })
            .collect::<Result<_>>()?;
        Ok(PauliString { letters })
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    /// Letter acting on qubit `q` (qubit 0 is the least significant).
    pub fn on_qubit(&self, q: usize) -> Pauli {
        self.letters[self.letters.len() - 1 - q]
    }

    /// Dense matrix of the string.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_qubits();
        let d = 1usize << n;
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for col in 0..d {
            let mut row = col;
            let mut amp = Complex64::new(1.0, 0.0);
            for q in 0..n {
                let bit = (col >> q) & 1;
                match self.on_qubit(q) {
                    Pauli::I => {}
                    Pauli::X => row ^= 1 << q,
                    Pauli::Y => {
                        row ^= 1 << q;
                        amp *= if bit == 0 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
                    }
                    Pauli::Z => {
                        if bit == 1 {
                            amp = -amp;
                        }
                    }
                }
            }
            m[(row, col)] = amp;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

/// `H = Σ h_j P_j` with real coefficients, sorted by Pauli string.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliDecomposition {
    pub n_qubits: usize,
    pub terms: Vec<(f64, PauliString)>,
}

impl PauliDecomposition {
    /// Number of terms `L`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest absolute coefficient `Λ`.
    pub fn lambda(&self) -> f64 {
        self.terms.iter().map(|(h, _)| h.abs()).fold(0.0, f64::max)
    }

    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (h, p) in &self.terms {
            m += p.matrix() * Complex64::new(*h, 0.0);
        }
        m
    }
}

type Block = BTreeMap<(usize, usize), Complex64>;

fn descend(block: Block, level: usize, prefix: &mut Vec<Pauli>, scale: f64, out: &mut Vec<(Complex64, Vec<Pauli>)>) {
    if block.is_empty() {
        return;
    }
    if level == 0 {
        let v = block.get(&(0, 0)).copied().unwrap_or_default();
        if v.norm() > 1e-14 * scale {
            out.push((v, prefix.clone()));
        }
        return;
    }
    let h = 1usize << (level - 1);
    let mut quads: [Block; 4] = Default::default();
    for ((r, c), v) in block {
        let idx = (r >= h) as usize * 2 + (c >= h) as usize;
        quads[idx].insert((r % h, c % h), v);
    }
    let [a00, a01, a10, a11] = quads;
    let combine = |a: &Block, b: &Block, sa: Complex64, sb: Complex64| -> Block {
        let mut m = Block::new();
        for (&k, &v) in a {
            *m.entry(k).or_default() += sa * v;
        }
        for (&k, &v) in b {
            *m.entry(k).or_default() += sb * v;
        }
        m.retain(|_, v| v.norm() > 1e-15 * scale);
        m
    };
    let half = Complex64::new(0.5, 0.0);
    let ihalf = Complex64::new(0.0, 0.5);
    let parts = [
        (Pauli::I, combine(&a00, &a11, half, half)),
        (Pauli::X, combine(&a01, &a10, half, half)),
        (Pauli::Y, combine(&a01, &a10, ihalf, -ihalf)),
        (Pauli::Z, combine(&a00, &a11, half, -half)),
    ];
    for (p, sub) in parts {
        prefix.push(p);
        descend(sub, level - 1, prefix, scale, out);
        prefix.pop();
    }
}

/// Decomposes a Hermitian matrix of dimension `2^q` by recursive block
/// descent over its nonzero entries.
pub fn pauli_decompose(h: &DMatrix<f64>) -> Result<PauliDecomposition> {
    let d = h.nrows();
    if d != h.ncols() || !d.is_power_of_two() {
        return Err(Error::Dimension { expected: d.next_power_of_two(), got: d });
    }
    let asym = (h - h.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::NotHermitian(asym));
    }
    let mut block = Block::new();
    for c in 0..d {
        for r in 0..d {
            if h[(r, c)] != 0.0 {
                block.insert((r, c), Complex64::new(h[(r, c)], 0.0));
            }
        }
    }
    let scale = h.abs().max().max(f64::MIN_POSITIVE);
    let n = d.trailing_zeros() as usize;
    let mut raw = Vec::new();
    descend(block, n, &mut Vec::new(), scale, &mut raw);
    let mut terms: Vec<(f64, PauliString)> =
        raw.into_iter().map(|(v, letters)| (v.re, PauliString { letters })).collect();
    terms.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(PauliDecomposition { n_qubits: n, terms })
}

/// Appends `exp(−iθP)`.
pub fn append_pauli_exponential(c: &mut Circuit, p: &PauliString, theta: f64) {
    let active: Vec<usize> = (0..p.n_qubits()).filter(|&q| p.on_qubit(q) != Pauli::I).collect();
    let Some(&last) = active.last() else {
        // e^{−iθ} as a global phase.
        c.x(0);
        c.phase(0, -theta);
        c.x(0);
        c.phase(0, -theta);
        return;
    };
    for &q in &active {
        match p.on_qubit(q) {
            Pauli::X => c.h(q),
            Pauli::Y => {
                c.phase(q, -std::f64::consts::FRAC_PI_2);
                c.h(q);
            }
            _ => {}
        }
    }
    for w in active.windows(2) {
        c.cx(w[0], w[1]);
    }
    c.add(GateKind::Rz(2.0 * theta), &[last], &[]);
    for w in active.windows(2).rev() {
        c.cx(w[0], w[1]);
    }
    for &q in &active {
        match p.on_qubit(q) {
            Pauli::X => c.h(q),
            Pauli::Y => {
                c.h(q);
                c.phase(q, std::f64::consts::FRAC_PI_2);
            }
            _ => {}
        }
    }
}

/// Smallest `r` with `(2LΛ|t|)³/(3r²)·exp(2LΛ|t|/r) ≤ ε`.
pub fn trotter_step_count(l: usize, lambda: f64, t: f64, eps: f64) -> Result<usize> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let a = 2.0 * l as f64 * lambda * t.abs();
    if a == 0.0 {
        return Ok(1);
    }
    let bound = |r: usize| {
        let r = r as f64;
        a.powi(3) / (3.0 * r * r) * (a / r).exp()
    };
    let mut hi = 1usize;
    while bound(hi) > eps {
        hi = hi.checked_mul(2).ok_or_else(|| Error::ResourceCap("Trotter step count overflow".into()))?;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    // bound(lo) > eps >= bound(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The error bound evaluated at a given step count.
pub fn trotter_bound(l: usize, lambda: f64, t: f64, r: usize) -> f64 {
    let a = 2.0 * l as f64 * lambda * t.abs();
    let r = r as f64;
    a.powi(3) / (3.0 * r * r) * (a / r).exp()
}

/// Second-order product formula for `e^{−iHt}` with `r_st` steps.
pub fn trotter_circuit(decomp: &PauliDecomposition, t: f64, r_st: usize) -> Circuit {
    let r_st = r_st.max(1);
    let mut c = Circuit::with_width(decomp.n_qubits);
    let dt = t / (2.0 * r_st as f64);
    for _ in 0..r_st {
        for (h, p) in &decomp.terms {
            append_pauli_exponential(&mut c, p, h * dt);
        }
        for (h, p) in decomp.terms.iter().rev() {
            append_pauli_exponential(&mut c, p, h * dt);
        }
    }
    c
}

/// One sample of a kinetic-energy comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub quantum: f64,
    pub classical: f64,
}

impl EnergySample {
    pub fn abs_error(&self) -> f64 {
        (self.quantum - self.classical).abs()
    }
}

/// Kinetic energy under Trotter evolution from the sparse-prepared state,
/// against the normal-mode solution.
pub fn evolve_trotter(sys: &SpringMassSystem, times: &[f64], r_st: usize) -> Result<Vec<EnergySample>> {
    let h = hamiltonian(sys).to_dense();
    let decomp = pauli_decompose(&h)?;
    let prep = sparse_prepare(&initial_state_vector(sys)?)?;
    let modes = normal_modes(sys)?;
    let t_total = sys.initial_energy();
    let evolve_one = |t: f64| -> Result<EnergySample> {
        let mut sv = StateVector::from_amplitudes(prep.prepared.clone())?;
        sv.run(&trotter_circuit(&decomp, t, r_st), ExecPolicy::Sequential)?;
        Ok(EnergySample {
            t,
            quantum: kinetic_energy(sv.amplitudes(), t_total, sys.n_osc()),
            classical: classical_kinetic_energy(sys, &modes, t),
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        times.par_iter().map(|&t| evolve_one(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        times.iter().map(|&t| evolve_one(t)).collect()
    }
}
