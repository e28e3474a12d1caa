//! Block encodings of `B†` and of the padded Hamiltonian.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dataload::{append_inequality_encode_const, append_lookup, append_sparsity_oracle, LookupTable, SparsityOracle};
use crate::error::{Error, Result};
use crate::model::SpringMassSystem;
use crate::statevector::{Circuit, Control, ExecPolicy, GateKind, Register, RegisterLayout, StateVector};

/// Loaded amplitudes are stored as `a/HEADROOM` so that `a = 1` is exactly
/// representable instead of saturating at `2^r − 1`.
pub const HEADROOM: f64 = 2.0;

/// A unitary whose top-left block, with every qubit above the system
/// register in `|0⟩`, equals `A/λ` up to `eps`.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub circuit: Circuit,
    /// The system register occupies qubits `0..system_qubits`.
    pub system_qubits: usize,
    pub lambda: f64,
    /// Certified max-norm error of the block against `A/λ`.
    pub eps: f64,
}

impl BlockEncoding {
    pub fn ancilla_qubits(&self) -> Vec<usize> {
        (self.system_qubits..self.circuit.width()).collect()
    }

    /// The block `⟨0_anc|U|0_anc⟩`, one simulated column per basis input.
    pub fn extract_block(&self) -> Result<DMatrix<Complex64>> {
        extract_block(&self.circuit, self.system_qubits)
    }
}

/// Columns of `⟨0_anc|U|0_anc⟩` where the ancillas are all qubits at or
/// above `system_qubits`.
pub fn extract_block(circuit: &Circuit, system_qubits: usize) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << system_qubits;
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for col in 0..dim {
        let mut sv = StateVector::basis(circuit.width(), col);
        sv.run(circuit, ExecPolicy::default())?;
        for (row, a) in sv.amplitudes()[..dim].iter().enumerate() {
            m[(row, col)] = *a;
        }
    }
    Ok(m)
}

/// Ancilla registers of `U_B†`.
#[derive(Clone, Copy, Debug)]
struct BdagAncillas {
    l: Register,
    x: Register,
    flag: usize,
    w: usize,
    a1: usize,
    a2: usize,
    /// Set when the input has `p ≠ 0`, which keeps the block supported on
    /// the velocity rows only.
    guard: usize,
}

fn add_ancillas(lay: &mut RegisterLayout, slot_bits: usize, r: usize) -> BdagAncillas {
    BdagAncillas {
        l: lay.add("l", slot_bits),
        x: lay.add("x", r),
        flag: lay.add("flag", 1).offset,
        w: lay.add("w", 1).offset,
        a1: lay.add("a1", 1).offset,
        a2: lay.add("a2", 1).offset,
        guard: lay.add("guard", 1).offset,
    }
}

/// Fixed-point tables of `U_B†`: the amplitude table keyed on `(j, l)`
/// and the slot-uncompute table keyed on `(j, k)`.
fn bdag_tables(sys: &SpringMassSystem, so: &SparsityOracle, r: usize) -> Result<(LookupTable, LookupTable, f64)> {
    let n = sys.n_osc() as u64;
    let kmax = norm_kappa(sys);
    let mut amp = LookupTable::new(r);
    let mut back = LookupTable::new(so.slot_bits());
    let mut err: f64 = 0.0;
    for j in 0..sys.n_osc() {
        for s in 0..so.slots() {
            if !so.is_valid(j, s) {
                continue;
            }
            let k = so.column(j, s);
            let kappa = sys.kappa(j, k);
            if kappa > 0.0 {
                let a = (kappa * sys.m_min() / (sys.masses()[j] * kmax)).sqrt();
                amp.insert_encoded(j as u64 + n * s as u64, a, HEADROOM)?;
                let got = amp.get(j as u64 + n * s as u64) as f64 / (1u64 << r) as f64;
                err = err.max((got - a / HEADROOM).abs());
            }
            if s != 0 {
                back.entries.insert(j as u64 + n * k as u64, s as u64);
            }
        }
    }
    Ok((amp, back, err))
}

fn norm_kappa(sys: &SpringMassSystem) -> f64 {
    let k = sys.kappa_max();
    if k > 0.0 { k } else { 1.0 }
}

/// `λ = HEADROOM·√(2Dℵ)` with `ℵ = κ_max/m_min` and `D` slot states.
pub fn bdagger_lambda(sys: &SpringMassSystem) -> Result<f64> {
    let so = SparsityOracle::chain(sys)?;
    Ok(HEADROOM * (2.0 * so.slots() as f64 * norm_kappa(sys) / sys.m_min()).sqrt())
}

fn append_bdagger(
    c: &mut Circuit,
    so: &SparsityOracle,
    amp: &LookupTable,
    back: &LookupTable,
    q: Register,
    p: Register,
    anc: &BdagAncillas,
) {
    // guard = [p ≠ 0]
    c.add(GateKind::X, &[anc.guard], &[]);
    c.add(GateKind::X, &[anc.guard], &p.pattern(0));
    c.h_all(anc.l);
    append_sparsity_oracle(c, so, q, anc.l, p, (anc.a1, anc.a2), &[]);
    append_inequality_encode_const(c, &[q, anc.l], amp, anc.x, anc.flag, &[]);
    append_lookup(c, &[q, p], back, anc.l, &[]);
    // w = [j > k] = ¬[p ≥ q]; move the smaller index into p.
    let mut cmp = p.qubits();
    cmp.extend(q.qubits());
    cmp.push(anc.w);
    c.add(GateKind::CompareGeReg, &cmp, &[]);
    c.x(anc.w);
    for i in 0..p.width {
        c.add(GateKind::Swap, &[p.qubit(i), q.qubit(i)], &[Control::off(anc.w)]);
    }
    c.z(anc.w);
    c.h(anc.w);
}

/// `U_B†` on registers `q` (velocity index in, larger pair index out),
/// `p` (smaller pair index out) and the ancillas.
///
/// Steps: uniform superposition over slots, `O_S` into `p`, amplitude
/// `√(κ_jk m_min/(m_j κ_max))` by inequality testing on `(j, l)`, slot
/// uncompute, ordering flag with a controlled swap, then `H·Z` on the flag.
pub fn block_encode_bdagger(sys: &SpringMassSystem, r: usize) -> Result<BlockEncoding> {
    if r < 2 {
        return Err(Error::InvalidInput("block encoding needs r ≥ 2".into()));
    }
    let so = SparsityOracle::chain(sys)?;
    let (amp, back, err) = bdag_tables(sys, &so, r)?;
    let n = sys.n_bits();
    let mut lay = RegisterLayout::new();
    let q = lay.add("q", n);
    let p = lay.add("p", n);
    let anc = add_ancillas(&mut lay, so.slot_bits(), r);
    let mut c = Circuit::new(lay);
    append_bdagger(&mut c, &so, &amp, &back, q, p, &anc);
    let lambda = bdagger_lambda(sys)?;
    Ok(BlockEncoding { circuit: c, system_qubits: 2 * n, lambda, eps: err / (2.0 * so.slots() as f64).sqrt() })
}

/// `U_H`: `U_B†` controlled on `b = 0`, its inverse on `b = 1`, an `X` on
/// `b` and a global sign. The block is `−(|1⟩⟨0| ⊗ B† + |0⟩⟨1| ⊗ B)/λ`,
/// which is the padded Hamiltonian over `λ`.
pub fn block_encode_hamiltonian(be_b: &BlockEncoding) -> Result<BlockEncoding> {
    let sys_b = be_b.system_qubits;
    let anc_b = be_b.circuit.width() - sys_b;
    let mut lay = RegisterLayout::new();
    let s = lay.add("s", sys_b);
    let b = lay.add("b", 1).offset;
    let anc = lay.add("anc", anc_b);
    let mut c = Circuit::new(lay);
    let map: Vec<usize> = (0..sys_b).map(|i| s.qubit(i)).chain((0..anc_b).map(|i| anc.qubit(i))).collect();
    c.append_mapped(&be_b.circuit, &map, &[Control::off(b)]);
    c.append_mapped(&be_b.circuit.inverse(), &map, &[Control::on(b)]);
    c.x(b);
    // −I = XZXZ on any qubit.
    for _ in 0..2 {
        c.x(b);
        c.z(b);
    }
    Ok(BlockEncoding { circuit: c, system_qubits: sys_b + 1, lambda: be_b.lambda, eps: be_b.eps })
}
