//! Initial-state preparation.
//!
//! Two routes prepare `|ψ(0)⟩`:
//!
//! * **sparse**: the classically computed vector is loaded directly. A dense
//!   rotation tree prepares the `s` nonzero amplitudes on `⌈log2 s⌉` qubits,
//!   then basis transpositions move each amplitude to its index.
//! * **oracle**: the vector is assembled coherently from the system data.
//!   The block qubit splits velocity and position branches; data oracles
//!   with inequality testing apply `√M` to the velocities and `B†√M` to the
//!   positions; amplitude amplification boosts the good component.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataload::{
    amplitude_amplify, append_inequality_encode, append_lookup, append_sparsity_oracle, grover_operator, AmplificationReport,
    GoodSubspace, LookupTable, SparsityOracle,
};
use crate::error::{Error, Result};
use crate::model::{initial_state_vector, SpringMassSystem};
use crate::statevector::{fidelity, Circuit, Control, ExecPolicy, GateKind, Register, RegisterLayout, StateVector};

/// Appends a transposition of basis states `a` and `b` of `reg`, exact on
/// every state supported in `support` (the occupied basis indices).
///
/// The lowest differing bit `t` is fanned out onto the other differing bits
/// so the two states differ only in `t`; an X on `t` then swaps them. The X
/// is controlled only on as many bits as are needed to separate the pair
/// from the rest of the support.
fn append_transposition(
    c: &mut Circuit,
    reg: Register,
    (a, b): (usize, usize),
    support: &BTreeSet<usize>,
    controls: &[Control],
) {
    let diff = a ^ b;
    if diff == 0 {
        return;
    }
    let t = diff.trailing_zeros() as usize;
    let fan = diff & !(1 << t);
    let others: Vec<usize> = (t + 1..reg.width).filter(|&i| fan >> i & 1 == 1).collect();
    let cx_all = |c: &mut Circuit| {
        for &i in &others {
            let mut cs = vec![Control::on(reg.qubit(t))];
            cs.extend_from_slice(controls);
            c.add(GateKind::X, &[reg.qubit(i)], &cs);
        }
    };
    // After the fan-out the partner with bit t set differs from `lo` only
    // in bit t.
    let lo = if a >> t & 1 == 0 { a } else { b };
    let mut rivals: Vec<usize> = support
        .iter()
        .map(|&x| if x >> t & 1 == 1 { x ^ fan } else { x })
        .filter(|&x| x & !(1 << t) != lo & !(1 << t))
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    while !rivals.is_empty() {
        let best = (0..reg.width)
            .filter(|&i| i != t && !chosen.contains(&i))
            .max_by_key(|&i| (rivals.iter().filter(|&&x| (x ^ lo) >> i & 1 == 1).count(), usize::MAX - i))
            .expect("distinct states differ in some bit");
        chosen.push(best);
        rivals.retain(|&x| (x ^ lo) >> best & 1 == 0);
    }
    chosen.sort_unstable();
    cx_all(c);
    let mut cs: Vec<Control> =
        chosen.iter().map(|&i| Control { qubit: reg.qubit(i), on: lo >> i & 1 == 1 }).collect();
    cs.extend_from_slice(controls);
    c.add(GateKind::X, &[reg.qubit(t)], &cs);
    cx_all(c);
}

/// Multiplies the whole (controlled) state by `e^{iφ}`.
fn append_global_phase(c: &mut Circuit, q: usize, phi: f64, controls: &[Control]) {
    c.x(q);
    c.add(GateKind::Phase(phi), &[q], controls);
    c.x(q);
    c.add(GateKind::Phase(phi), &[q], controls);
}

/// Appends a circuit mapping `|0⟩` of `reg` to `Σ a_i |i⟩`, controlled on
/// `controls`. Amplitudes are normalized first; duplicate indices are summed.
pub fn append_sparse_load(
    c: &mut Circuit,
    amps: &[(usize, Complex64)],
    reg: Register,
    controls: &[Control],
) -> Result<()> {
    let mut entries: Vec<(usize, Complex64)> = Vec::new();
    for &(i, a) in amps {
        if i >= 1 << reg.width {
            return Err(Error::Dimension { expected: 1 << reg.width, got: i + 1 });
        }
        match entries.iter_mut().find(|(j, _)| *j == i) {
            Some(e) => e.1 += a,
            None => entries.push((i, a)),
        }
    }
    entries.retain(|(_, a)| a.norm() > 0.0);
    entries.sort_by_key(|e| e.0);
    let norm: f64 = entries.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("cannot load the zero vector".into()));
    }
    let s = entries.len();

    if s == 1 {
        let (idx, a) = entries[0];
        for i in (0..reg.width).filter(|i| idx >> i & 1 == 1) {
            c.add(GateKind::X, &[reg.qubit(i)], controls);
        }
        let phi = a.arg();
        if phi != 0.0 {
            if idx == 0 {
                append_global_phase(c, reg.qubit(0), phi, controls);
            } else {
                let q = reg.qubit(idx.trailing_zeros() as usize);
                c.add(GateKind::Phase(phi), &[q], controls);
            }
        }
        return Ok(());
    }

    let m = (usize::BITS - (s - 1).leading_zeros()) as usize;
    let dense: Vec<Complex64> = entries.iter().map(|(_, a)| a / norm).collect();
    let block_norm = |lo: usize, len: usize| -> f64 {
        dense.iter().skip(lo).take(len).map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    };
    for level in (0..m).rev() {
        let half = 1usize << level;
        for prefix in 0..1usize << (m - 1 - level) {
            let lo = prefix * 2 * half;
            let total = block_norm(lo, 2 * half);
            if total == 0.0 {
                continue;
            }
            let theta = 2.0 * (block_norm(lo, half) / total).min(1.0).acos();
            if theta == 0.0 {
                continue;
            }
            let mut cs: Vec<Control> = (level + 1..m)
                .map(|b| Control { qubit: reg.qubit(b), on: prefix >> (b - level - 1) & 1 == 1 })
                .collect();
            cs.extend_from_slice(controls);
            c.add(GateKind::Ry(theta), &[reg.qubit(level)], &cs);
        }
    }
    for (i, a) in dense.iter().enumerate() {
        let phi = a.arg();
        if phi == 0.0 {
            continue;
        }
        let mut cs: Vec<Control> = (1..m).map(|b| Control { qubit: reg.qubit(b), on: i >> b & 1 == 1 }).collect();
        cs.extend_from_slice(controls);
        let q0 = reg.qubit(0);
        let flip = i & 1 == 0;
        if flip {
            c.x(q0);
        }
        c.add(GateKind::Phase(phi), &[q0], &cs);
        if flip {
            c.x(q0);
        }
    }
    // Entries are sorted, so each target index is at least its slot and
    // moving the largest first never overwrites an occupied slot.
    let mut support: BTreeSet<usize> = (0..s).collect();
    for (slot, &(target, _)) in entries.iter().enumerate().rev() {
        if slot != target {
            append_transposition(c, reg, (slot, target), &support, controls);
            support.remove(&slot);
            support.insert(target);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrepRoute {
    Sparse,
    Oracle,
}

impl PrepRoute {
    pub fn name(self) -> &'static str {
        match self {
            PrepRoute::Sparse => "sparse",
            PrepRoute::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(PrepRoute::Sparse),
            "oracle" => Ok(PrepRoute::Oracle),
            other => Err(Error::InvalidInput(format!("unknown preparation route '{other}'"))),
        }
    }
}

/// A prepared initial state.
#[derive(Clone, Debug)]
pub struct PreparedState {
    pub circuit: Circuit,
    /// The vector the circuit is meant to prepare on the system register.
    pub target: Vec<Complex64>,
    /// Renormalized system-register state after projecting onto `good`.
    pub prepared: Vec<Complex64>,
    /// `|⟨target|prepared⟩|`.
    pub fidelity: f64,
    pub route: PrepRoute,
    /// Qubits `0..system_qubits` hold the system register.
    pub system_qubits: usize,
    /// Ancilla condition marking the prepared component (empty for sparse).
    pub good: GoodSubspace,
    pub amplification: Option<AmplificationReport>,
}

/// Loads `psi0` (dimension a power of two) directly.
pub fn sparse_prepare(psi0: &[Complex64]) -> Result<PreparedState> {
    if !psi0.len().is_power_of_two() {
        return Err(Error::Dimension { expected: psi0.len().next_power_of_two(), got: psi0.len() });
    }
    let w = psi0.len().trailing_zeros() as usize;
    let mut c = Circuit::with_width(w);
    let reg = Register { offset: 0, width: w };
    let amps: Vec<(usize, Complex64)> =
        psi0.iter().enumerate().filter(|(_, a)| a.norm() > 0.0).map(|(i, a)| (i, *a)).collect();
    append_sparse_load(&mut c, &amps, reg, &[])?;
    let mut sv = StateVector::zero(w);
    sv.run(&c, ExecPolicy::default())?;
    let norm: f64 = psi0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let target: Vec<Complex64> = psi0.iter().map(|a| a / norm).collect();
    let prepared = sv.into_amplitudes();
    let fid = fidelity(&target, &prepared).sqrt();
    Ok(PreparedState {
        circuit: c,
        target,
        prepared,
        fidelity: fid,
        route: PrepRoute::Sparse,
        system_qubits: w,
        good: GoodSubspace::default(),
        amplification: None,
    })
}

/// Register layout of the oracle preparation.
#[derive(Clone, Copy, Debug)]
pub struct OraclePrepLayout {
    pub q: Register,
    pub p: Register,
    pub b: usize,
    pub l: Register,
    pub z: Register,
    pub x: Register,
    pub flag: usize,
    pub w: usize,
    pub a1: usize,
    pub a2: usize,
}

impl OraclePrepLayout {
    pub fn ancillas(&self) -> Vec<usize> {
        let mut v = self.l.qubits();
        v.extend(self.z.qubits());
        v.extend(self.x.qubits());
        v.extend([self.flag, self.w, self.a1, self.a2]);
        v
    }
}

/// The unamplified oracle preparation `A`.
#[derive(Clone, Debug)]
pub struct OraclePrepCircuit {
    pub circuit: Circuit,
    pub layout: OraclePrepLayout,
    pub good: GoodSubspace,
    /// Unnormalized good component on the system register, computed from
    /// the fixed-point tables.
    pub good_component: Vec<Complex64>,
}

impl OraclePrepCircuit {
    pub fn good_probability(&self) -> f64 {
        self.good_component.iter().map(|a| a.norm_sqr()).sum()
    }
}

fn sqrt_table(values: impl Iterator<Item = (u64, f64)>, r: usize) -> Result<LookupTable> {
    let mut t = LookupTable::new(r);
    for (k, v) in values {
        if v > 0.0 {
            t.insert_encoded(k, v.sqrt(), 1.0)?;
        }
    }
    Ok(t)
}

/// Builds `A` for the oracle route with `r`-bit data.
pub fn oracle_prepare_circuit(sys: &SpringMassSystem, r: usize) -> Result<OraclePrepCircuit> {
    let so = SparsityOracle::chain(sys)?;
    let n_osc = sys.n_osc();
    let n = sys.n_bits();
    let nn = n_osc as u64;
    let alpha = sys.v0().iter().map(|v| v * v).sum::<f64>().sqrt();
    let beta = sys.x0().iter().map(|x| x * x).sum::<f64>().sqrt();
    if alpha == 0.0 && beta == 0.0 || sys.initial_energy() == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let d_slots = so.slots() as f64;

    let mut lay = RegisterLayout::new();
    let q = lay.add("q", n);
    let p = lay.add("p", n);
    let b = lay.add("b", 1).offset;
    let l = lay.add("l", so.slot_bits());
    let z = lay.add("z", r);
    let x = lay.add("x", r);
    let flag = lay.add("flag", 1).offset;
    let w = lay.add("w", 1).offset;
    let a1 = lay.add("a1", 1).offset;
    let a2 = lay.add("a2", 1).offset;
    let layout = OraclePrepLayout { q, p, b, l, z, x, flag, w, a1, a2 };
    let mut c = Circuit::new(lay);

    let mass_t = sqrt_table(sys.masses().iter().enumerate().map(|(j, &m)| (j as u64, m / sys.m_max())), r)?;
    let kmax = sys.kappa_max();
    let mut slot_t = LookupTable::new(r);
    let mut back_t = LookupTable::new(so.slot_bits());
    for j in 0..n_osc {
        for s in 0..so.slots() {
            if !so.is_valid(j, s) {
                continue;
            }
            let k = so.column(j, s);
            let kappa = sys.kappa(j, k);
            if kappa > 0.0 {
                slot_t.insert_encoded(j as u64 + nn * s as u64, (kappa / kmax).sqrt(), 1.0)?;
            }
            if s != 0 {
                back_t.entries.insert(j as u64 + nn * k as u64, s as u64);
            }
        }
    }

    let wa = (sys.m_max()).sqrt() * alpha;
    let wb = (2.0 * kmax * d_slots).sqrt() * beta;
    let theta = 2.0 * (wa / (wa * wa + wb * wb).sqrt()).acos();
    c.ry(b, theta);
    let on_b = [Control::on(b)];
    let off_b = [Control::off(b)];
    if alpha > 0.0 {
        let amps: Vec<_> = sys.v0().iter().enumerate().map(|(j, &v)| (j, Complex64::new(v, 0.0))).collect();
        append_sparse_load(&mut c, &amps, q, &off_b)?;
    }
    if beta > 0.0 {
        let amps: Vec<_> = sys.x0().iter().enumerate().map(|(j, &v)| (j, Complex64::new(v, 0.0))).collect();
        append_sparse_load(&mut c, &amps, p, &on_b)?;
    }
    c.phase(b, FRAC_PI_2);

    // Position branch: |j⟩ → Σ_l √κ_{j f(j,l)} |j, f(j,l)⟩ with ordering.
    for qb in l.qubits() {
        c.add(GateKind::H, &[qb], &on_b);
    }
    append_sparsity_oracle(&mut c, &so, p, l, q, (a1, a2), &on_b);
    append_inequality_encode(&mut c, &[p, l], &slot_t, x, z, flag, &on_b);
    append_lookup(&mut c, &[p, q], &back_t, l, &on_b);
    let mut cmp = q.qubits();
    cmp.extend(p.qubits());
    cmp.push(w);
    c.add(GateKind::CompareGeReg, &cmp, &on_b);
    c.add(GateKind::X, &[w], &on_b);
    for i in 0..n {
        c.add(GateKind::Swap, &[p.qubit(i), q.qubit(i)], &[Control::on(b), Control::on(w)]);
    }
    c.add(GateKind::Z, &[w], &on_b);
    c.add(GateKind::H, &[w], &on_b);

    // Velocity branch: √(m_j/m_max) on |j⟩.
    append_inequality_encode(&mut c, &[q], &mass_t, x, z, flag, &off_b);

    let good = GoodSubspace::zeros(layout.ancillas());

    // Classical image of the good component.
    let scale = (1u64 << r) as f64;
    let (cb, sb) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut g = vec![Complex64::new(0.0, 0.0); 2 * n_osc * n_osc];
    if alpha > 0.0 {
        for (j, &v) in sys.v0().iter().enumerate() {
            g[j] += Complex64::new(cb * v / alpha * mass_t.get(j as u64) as f64 / scale, 0.0);
        }
    }
    if beta > 0.0 {
        let pref = sb / (beta * (2.0 * d_slots).sqrt());
        for (j, &xj) in sys.x0().iter().enumerate() {
            for s in 0..so.slots() {
                let xi = slot_t.get(j as u64 + nn * s as u64) as f64 / scale;
                if !so.is_valid(j, s) || xi == 0.0 {
                    continue;
                }
                let k = so.column(j, s);
                let (lo, hi, sign) = if j <= k { (j, k, 1.0) } else { (k, j, -1.0) };
                g[n_osc * n_osc + lo * n_osc + hi] += Complex64::new(0.0, sign * pref * xj * xi);
            }
        }
    }
    Ok(OraclePrepCircuit { circuit: c, layout, good, good_component: g })
}

/// Oracle-route preparation with amplitude amplification (at most `w_cap`
/// Grover iterations).
pub fn oracle_prepare(sys: &SpringMassSystem, r: usize, w_cap: usize) -> Result<PreparedState> {
    let prep = oracle_prepare_circuit(sys, r)?;
    let (circuit, report) = amplitude_amplify(&prep.circuit, &prep.good, w_cap)?;
    let mut sv = StateVector::zero(circuit.width());
    sv.run(&circuit, ExecPolicy::default())?;
    let sys_qubits = 2 * sys.n_bits() + 1;
    let prepared = good_system_state(sv.amplitudes(), &prep.good, sys_qubits)?;
    let target = initial_state_vector(sys)?;
    let fid = fidelity(&target, &prepared).sqrt();
    Ok(PreparedState {
        circuit,
        target,
        prepared,
        fidelity: fid,
        route: PrepRoute::Oracle,
        system_qubits: sys_qubits,
        good: prep.good,
        amplification: Some(report),
    })
}

/// The amplified oracle-route circuit without simulating it. The Grover
/// count comes from the classical image of the good component, which makes
/// this usable for resource counts beyond simulable widths.
pub fn oracle_prepare_unsimulated(sys: &SpringMassSystem, r: usize, w_cap: usize) -> Result<(Circuit, usize)> {
    let prep = oracle_prepare_circuit(sys, r)?;
    let theta = prep.good_probability().sqrt().min(1.0).asin();
    if theta == 0.0 {
        return Err(Error::Amplification("good subspace has zero amplitude".into()));
    }
    let w = (std::f64::consts::PI / (4.0 * theta)).floor() as usize;
    if w > w_cap {
        return Err(Error::Amplification(format!("{w} iterations needed, cap is {w_cap}")));
    }
    let mut c = prep.circuit.clone();
    if w > 0 {
        let q = grover_operator(&prep.circuit, &prep.good);
        for _ in 0..w {
            c.append(&q);
        }
    }
    Ok((c, w))
}

/// Projects onto `good` and returns the renormalized system-register state.
pub fn good_system_state(psi: &[Complex64], good: &GoodSubspace, system_qubits: usize) -> Result<Vec<Complex64>> {
    let dim = 1usize << system_qubits;
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (i, a) in psi.iter().enumerate() {
        if good.contains(i) {
            out[i & (dim - 1)] += *a;
        }
    }
    let nrm: f64 = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return Err(Error::ZeroProbability);
    }
    out.iter_mut().for_each(|a| *a /= nrm);
    Ok(out)
}

/// `T_max = ½ m_max Σ v_j² + ½ κ_max Σ x_j²`.
pub fn t_max(sys: &SpringMassSystem) -> f64 {
    0.5 * sys.m_max() * sys.v0().iter().map(|v| v * v).sum::<f64>()
        + 0.5 * sys.kappa_max() * sys.x0().iter().map(|x| x * x).sum::<f64>()
}

/// `√(d·T_max/T) · log2²(N·T_max/(ε·T))`.
pub fn gin_bound(sys: &SpringMassSystem, d: usize, eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let t = sys.initial_energy();
    if t == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let tm = t_max(sys);
    let f = (d as f64 * tm / t).sqrt();
    Ok(f * (sys.n_osc() as f64 * tm / (eps * t)).log2().powi(2))
}

/// Measured gate count over [`gin_bound`].
pub fn gin_bound_ratio(sys: &SpringMassSystem, d: usize, eps: f64, measured_gates: usize) -> Result<f64> {
    Ok(measured_gates as f64 / gin_bound(sys, d, eps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    #[test]
    fn basis_state_is_an_x_pattern() {
        let mut psi = vec![Complex64::new(0.0, 0.0); 8];
        psi[5] = Complex64::new(1.0, 0.0);
        let ps = sparse_prepare(&psi).unwrap();
        assert!(ps.circuit.gates().iter().all(|g| g.kind == GateKind::X && g.controls.is_empty()));
        assert_eq!(ps.circuit.len(), 2);
        assert!((ps.fidelity - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relative_and_global_phases_are_exact() {
        let k = 1.0 / 3f64.sqrt();
        let mut psi = vec![Complex64::new(0.0, 0.0); 8];
        psi[0] = Complex64::new(k, 0.0);
        psi[1] = Complex64::new(k, 0.0);
        psi[5] = Complex64::new(0.0, -k);
        let ps = sparse_prepare(&psi).unwrap();
        for (a, b) in ps.prepared.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut single = vec![Complex64::new(0.0, 0.0); 4];
        single[0] = Complex64::new(0.0, 1.0);
        let ps = sparse_prepare(&single).unwrap();
        assert!((ps.prepared[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(sparse_prepare(&[Complex64::new(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn t_max_of_impl1_chain() {
        let sys = SpringMassSystem::preset(Preset::Impl1Chain, 4).unwrap();
        // m_max = 4, κ_max = 1, Σv² = Σx² = 0.125
        assert_eq!(t_max(&sys), 0.5 * 4.0 * 0.125 + 0.5 * 0.125);
    }
}
