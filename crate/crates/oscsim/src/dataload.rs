//! Data-access oracles and amplitude encoding.
//!
//! Classical data enters circuits through compile-time lookup tables: an XOR
//! oracle writes the fixed-point encoding `ξ̃` of a value into a register by
//! multi-controlled X gates keyed on an index register. Inequality testing
//! then turns `ξ̃` into the amplitude `ξ̃/2^r`, and amplitude amplification
//! boosts the flagged component.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{encode_fixed_point, SpringMassSystem};
use crate::statevector::{Circuit, Control, ExecPolicy, GateKind, Register, RegisterLayout, StateVector};

/// Sparsity structure of a nearest-neighbor chain.
///
/// Slot `l = 0` points to the left neighbor (the right one for `j = 0`),
/// slot `l = 1` to the right neighbor of interior rows, and, when the chain
/// has wall springs, slot `l = 2` points to `j` itself. Unused slots map
/// to column 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparsityOracle {
    n_osc: usize,
    slot_bits: usize,
    walls: bool,
}

impl SparsityOracle {
    pub fn chain(sys: &SpringMassSystem) -> Result<Self> {
        if !sys.is_chain() {
            return Err(Error::UnsupportedTopology("only nearest-neighbor chains have a sparsity oracle".into()));
        }
        let walls = sys.has_walls();
        Ok(SparsityOracle { n_osc: sys.n_osc(), slot_bits: if walls { 2 } else { 1 }, walls })
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    /// Width of the slot register `l`.
    pub fn slot_bits(&self) -> usize {
        self.slot_bits
    }

    pub fn slots(&self) -> usize {
        1 << self.slot_bits
    }

    pub fn has_walls(&self) -> bool {
        self.walls
    }

    /// `f(j, l)`.
    pub fn column(&self, j: usize, l: usize) -> usize {
        let n = self.n_osc;
        match l {
            0 if j == 0 => 1,
            0 => j - 1,
            1 if j >= 1 && j + 1 < n => j + 1,
            2 if self.walls => j,
            _ => 0,
        }
    }

    /// Whether slot `l` of row `j` names a structural nonzero.
    pub fn is_valid(&self, j: usize, l: usize) -> bool {
        match l {
            0 => true,
            1 => j >= 1 && j + 1 < self.n_osc,
            2 => self.walls,
            _ => false,
        }
    }

    /// Inverse of `f` on valid slots.
    pub fn slot_of(&self, j: usize, k: usize) -> Option<usize> {
        (0..self.slots()).find(|&l| self.is_valid(j, l) && self.column(j, l) == k)
    }
}

/// Appends `O_S`: `|j⟩|l⟩|0⟩ → |j⟩|l⟩|f(j,l)⟩`, using two clean flag
/// qubits `a1 = [j > 0]` and `a2 = [j < N − 1]` that are returned to zero.
pub fn append_sparsity_oracle(
    c: &mut Circuit,
    so: &SparsityOracle,
    j: Register,
    l: Register,
    out: Register,
    (a1, a2): (usize, usize),
    controls: &[Control],
) {
    let n = so.n_osc as u64;
    let mut flags = j.qubits();
    flags.push(a1);
    c.add(GateKind::CompareGeConst(1), &flags, controls);
    let mut flags2 = j.qubits();
    flags2.push(a2);
    c.add(GateKind::CompareGeConst(n - 1), &flags2, controls);
    c.add(GateKind::X, &[a2], controls);

    let with = |extra: &[Control], slot: u64| -> Vec<Control> {
        let mut v = extra.to_vec();
        v.extend(l.pattern(slot));
        v.extend_from_slice(controls);
        v
    };
    let copy = |c: &mut Circuit, cs: &[Control]| {
        for i in 0..j.width {
            let mut cc = cs.to_vec();
            cc.push(Control::on(j.qubit(i)));
            c.add(GateKind::X, &[out.qubit(i)], &cc);
        }
    };
    let full = (1u64 << out.width) - 1;

    // j = 0, l = 0: right neighbor.
    c.add(GateKind::AddConst(1), &out.qubits(), &with(&[Control::off(a1)], 0));
    // j > 0, l = 0: left neighbor.
    let left = with(&[Control::on(a1)], 0);
    copy(c, &left);
    c.add(GateKind::AddConst(full), &out.qubits(), &left);
    // interior, l = 1: right neighbor.
    let right = with(&[Control::on(a1), Control::on(a2)], 1);
    copy(c, &right);
    c.add(GateKind::AddConst(1), &out.qubits(), &right);
    if so.walls {
        copy(c, &with(&[], 2));
    }

    c.add(GateKind::X, &[a2], controls);
    c.add(GateKind::CompareGeConst(n - 1), &flags2, controls);
    c.add(GateKind::CompareGeConst(1), &flags, controls);
}

/// Standalone `O_S` over registers `j`, `l`, `k`, `a1`, `a2`.
pub fn sparsity_oracle_circuit(so: &SparsityOracle) -> Circuit {
    let n = so.n_osc.trailing_zeros() as usize;
    let mut layout = RegisterLayout::new();
    let j = layout.add("j", n);
    let l = layout.add("l", so.slot_bits);
    let k = layout.add("k", n);
    let a1 = layout.add("a1", 1);
    let a2 = layout.add("a2", 1);
    let mut c = Circuit::new(layout);
    append_sparsity_oracle(&mut c, so, j, l, k, (a1.offset, a2.offset), &[]);
    c
}

/// A compile-time table from key to an `r`-bit value. Keys are the
/// concatenation of the key registers, first register least significant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LookupTable {
    pub value_bits: usize,
    pub entries: BTreeMap<u64, u64>,
    /// Keys whose encoding saturated at `2^r − 1`.
    pub clamped: Vec<u64>,
}

impl LookupTable {
    pub fn new(value_bits: usize) -> Self {
        LookupTable { value_bits, ..Default::default() }
    }

    /// Encodes `value` against `scale` and stores it under `key`.
    pub fn insert_encoded(&mut self, key: u64, value: f64, scale: f64) -> Result<()> {
        let fp = encode_fixed_point(value, scale, self.value_bits as u32)?;
        if fp.clamped {
            self.clamped.push(key);
        }
        if fp.raw != 0 {
            self.entries.insert(key, fp.raw);
        }
        Ok(())
    }

    pub fn get(&self, key: u64) -> u64 {
        *self.entries.get(&key).unwrap_or(&0)
    }
}

/// Which classical array an oracle loads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadKind {
    /// `m_j / m_max`, keyed on `j`.
    Mass,
    /// `κ_jk / κ_max`, keyed on `j + N·k` (walls on the diagonal).
    Spring,
}

/// Fixed-point table for the mass or spring oracle.
pub fn load_table(sys: &SpringMassSystem, kind: LoadKind, r: usize) -> Result<LookupTable> {
    let n = sys.n_osc();
    let mut t = LookupTable::new(r);
    match kind {
        LoadKind::Mass => {
            for (j, &m) in sys.masses().iter().enumerate() {
                t.insert_encoded(j as u64, m, sys.m_max())?;
            }
        }
        LoadKind::Spring => {
            let kmax = sys.kappa_max();
            if kmax > 0.0 {
                for j in 0..n {
                    for k in 0..n {
                        let kappa = sys.kappa(j, k);
                        if kappa > 0.0 {
                            t.insert_encoded((j + n * k) as u64, kappa, kmax)?;
                        }
                    }
                }
            }
        }
    }
    Ok(t)
}

fn key_pattern(keys: &[Register], mut key: u64) -> Vec<Control> {
    let mut out = Vec::new();
    for reg in keys {
        out.extend(reg.pattern(key & ((1u64 << reg.width) - 1)));
        key >>= reg.width;
    }
    out
}

/// XOR lookup: `|key⟩|z⟩ → |key⟩|z ⊕ table[key]⟩`.
pub fn append_lookup(c: &mut Circuit, keys: &[Register], table: &LookupTable, target: Register, controls: &[Control]) {
    assert!(table.value_bits <= target.width, "lookup target too narrow");
    for (&key, &value) in &table.entries {
        let mut cs = key_pattern(keys, key);
        cs.extend_from_slice(controls);
        for b in (0..table.value_bits).filter(|b| value >> b & 1 == 1) {
            c.add(GateKind::X, &[target.qubit(b)], &cs);
        }
    }
}

/// Standalone mass (`j`, `z`) or spring (`j`, `k`, `z`) oracle.
pub fn oracle_load_circuit(sys: &SpringMassSystem, kind: LoadKind, r: usize) -> Result<Circuit> {
    let table = load_table(sys, kind, r)?;
    let n = sys.n_bits();
    let mut layout = RegisterLayout::new();
    let j = layout.add("j", n);
    let keys = match kind {
        LoadKind::Mass => vec![j],
        LoadKind::Spring => vec![j, layout.add("k", n)],
    };
    let z = layout.add("z", r);
    let mut c = Circuit::new(layout);
    append_lookup(&mut c, &keys, &table, z, &[]);
    Ok(c)
}

/// Inequality testing with a loaded register: `H^r` on `x`, load `ξ̃` into
/// `z`, flip `flag` when `x ≥ z`, unload, `H^r` on `x`. The component with
/// `x = 0`, `flag = 0` (and `z` clean) has amplitude `ξ̃/2^r`.
pub fn append_inequality_encode(
    c: &mut Circuit,
    keys: &[Register],
    table: &LookupTable,
    x: Register,
    z: Register,
    flag: usize,
    controls: &[Control],
) {
    assert_eq!(x.width, z.width, "comparison registers must match");
    for q in x.qubits() {
        c.add(GateKind::H, &[q], controls);
    }
    append_lookup(c, keys, table, z, controls);
    let mut t = x.qubits();
    t.extend(z.qubits());
    t.push(flag);
    c.add(GateKind::CompareGeReg, &t, controls);
    append_lookup(c, keys, table, z, controls);
    for q in x.qubits() {
        c.add(GateKind::H, &[q], controls);
    }
}

/// Inequality testing with the loader folded into constant comparisons:
/// `flag` ends as `[x ≥ ξ̃(key)]`, so keys absent from the table are never
/// good. Same amplitude law as [`append_inequality_encode`] without the
/// `z` register.
pub fn append_inequality_encode_const(
    c: &mut Circuit,
    keys: &[Register],
    table: &LookupTable,
    x: Register,
    flag: usize,
    controls: &[Control],
) {
    for q in x.qubits() {
        c.add(GateKind::H, &[q], controls);
    }
    c.add(GateKind::X, &[flag], controls);
    let mut t = x.qubits();
    t.push(flag);
    for (&key, &value) in &table.entries {
        let mut cs = key_pattern(keys, key);
        cs.extend_from_slice(controls);
        c.add(GateKind::X, &[flag], &cs);
        c.add(GateKind::CompareGeConst(value), &t, &cs);
    }
    for q in x.qubits() {
        c.add(GateKind::H, &[q], controls);
    }
}

/// The good subspace: basis states matching every control in `pattern`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoodSubspace {
    pub pattern: Vec<Control>,
}

impl GoodSubspace {
    /// All listed qubits in `|0⟩`.
    pub fn zeros(qubits: impl IntoIterator<Item = usize>) -> Self {
        GoodSubspace { pattern: qubits.into_iter().map(Control::off).collect() }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.pattern.iter().all(|c| ((index >> c.qubit) & 1 == 1) == c.on)
    }

    pub fn probability(&self, psi: &[Complex64]) -> f64 {
        psi.iter().enumerate().filter(|(i, _)| self.contains(*i)).map(|(_, a)| a.norm_sqr()).sum()
    }
}

/// `I − 2Π` for the basis pattern `pattern`.
fn append_pattern_reflection(c: &mut Circuit, pattern: &[Control]) {
    match pattern.split_first() {
        None => append_global_minus(c, 0),
        Some((first, rest)) => {
            if !first.on {
                c.x(first.qubit);
            }
            c.add(GateKind::Z, &[first.qubit], rest);
            if !first.on {
                c.x(first.qubit);
            }
        }
    }
}

/// `−I` as `Z X Z X` on one qubit.
fn append_global_minus(c: &mut Circuit, q: usize) {
    c.x(q);
    c.z(q);
    c.x(q);
    c.z(q);
}

/// `Q = −A S₀ A† S_good`.
pub fn grover_operator(a: &Circuit, good: &GoodSubspace) -> Circuit {
    let mut q = Circuit::new(a.layout().clone());
    append_pattern_reflection(&mut q, &good.pattern);
    q.append(&a.inverse());
    let zeros: Vec<Control> = (0..a.width()).map(Control::off).collect();
    append_pattern_reflection(&mut q, &zeros);
    q.append(a);
    append_global_minus(&mut q, 0);
    q
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplificationReport {
    /// `sin θ` is the good amplitude of `A|0⟩`.
    pub theta: f64,
    pub iterations: usize,
    /// `sin²((2w + 1)θ)`.
    pub predicted_success: f64,
    /// Good-subspace probability of the simulated amplified state.
    pub measured_success: f64,
}

/// Appends `w = ⌊π/(4θ)⌋` Grover iterations to `a`, with `θ` measured by
/// simulating `A|0⟩`.
pub fn amplitude_amplify(a: &Circuit, good: &GoodSubspace, w_cap: usize) -> Result<(Circuit, AmplificationReport)> {
    let mut sv = StateVector::zero(a.width());
    sv.run(a, ExecPolicy::default())?;
    let p = good.probability(sv.amplitudes());
    if p <= 0.0 {
        return Err(Error::Amplification("good subspace has zero amplitude".into()));
    }
    let theta = p.sqrt().min(1.0).asin();
    let w = (PI / (4.0 * theta)).floor() as usize;
    if w > w_cap {
        return Err(Error::Amplification(format!("{w} iterations needed, cap is {w_cap}")));
    }
    let mut out = a.clone();
    if w > 0 {
        let q = grover_operator(a, good);
        for _ in 0..w {
            out.append(&q);
        }
    }
    let measured = if w == 0 {
        p
    } else {
        let mut sv = StateVector::zero(a.width());
        sv.run(&out, ExecPolicy::default())?;
        good.probability(sv.amplitudes())
    };
    let predicted = ((2 * w + 1) as f64 * theta).sin().powi(2);
    Ok((out, AmplificationReport { theta, iterations: w, predicted_success: predicted, measured_success: measured }))
}
