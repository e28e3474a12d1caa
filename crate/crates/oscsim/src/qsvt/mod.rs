//! Time evolution by quantum singular value transformation.
//!
//! `e^{−iHt}` is assembled from the cosine and sine branches of a
//! Jacobi–Anger plan. Each branch realizes the real part of a QSP
//! polynomial by averaging the phase lists `Φ` and `−Φ`, and the branches
//! are combined with the relative phase `−i`. Two select qubits driven by
//! Hadamards implement this linear combination; the block on the system
//! register is `(P_cos(H/λ) − i·P_sin(H/λ))/2`.

mod blockenc;
mod poly;

pub use blockenc::{
    bdagger_lambda, block_encode_bdagger, block_encode_hamiltonian, extract_block, BlockEncoding, HEADROOM,
};
pub use poly::{
    bessel_j, chebyshev_eval, jacobi_anger_plan, qsp_phases, qsp_reflection, qsp_wx, read_phases,
    to_reflection_phases, write_phases, QsvtPlan, POLY_SCALE, QSP_CHECK_TOL, QSP_MAX_ITER, QSP_NODE_TOL,
};

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SpringMassSystem;
use crate::statevector::{Circuit, Control, ExecPolicy, GateKind, Register, RegisterLayout, StateVector};

/// Default floor on the postselection probability.
pub const POSTSELECTION_FLOOR: f64 = 1e-6;

/// Wx phases for both branches of a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct QsvtPhases {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

pub fn plan_phases(plan: &QsvtPlan) -> Result<QsvtPhases> {
    Ok(QsvtPhases { cos: qsp_phases(&plan.cos_coeffs, 0)?, sin: qsp_phases(&plan.sin_coeffs, 1)? })
}

/// Registers of a QSVT circuit built around a block encoding.
#[derive(Clone, Copy, Debug)]
pub struct QsvtLayout {
    pub system: Register,
    pub anc: Register,
    /// Receives `[anc = 0]` during projector phases.
    pub ph: usize,
    /// Selects the sine branch.
    pub branch: usize,
    /// Selects `−Φ`.
    pub conj: usize,
}

fn qsvt_layout(be: &BlockEncoding) -> (RegisterLayout, QsvtLayout) {
    let mut lay = RegisterLayout::new();
    let system = lay.add("system", be.system_qubits);
    let anc = lay.add("anc", be.circuit.width() - be.system_qubits);
    let ph = lay.add("ph", 1).offset;
    let branch = lay.add("branch", 1).offset;
    let conj = lay.add("conj", 1).offset;
    (lay, QsvtLayout { system, anc, ph, branch, conj })
}

/// `e^{±iφ(2Π − I)}` with `Π = |0⟩⟨0|` on `anc`, the sign set by `conj`.
fn projector_phase(c: &mut Circuit, lay: &QsvtLayout, phi: f64, controls: &[Control]) {
    let zero = lay.anc.pattern(0);
    c.add(GateKind::X, &[lay.ph], &zero);
    c.cx(lay.conj, lay.ph);
    c.add(GateKind::Rz(2.0 * phi), &[lay.ph], controls);
    c.cx(lay.conj, lay.ph);
    c.add(GateKind::X, &[lay.ph], &zero);
}

/// Appends the reflection-convention sequence for Wx phases `wx`,
/// controlled on `branch = 1`. With `conj = 0` the block is `P(A)`, with
/// `conj = 1` it is `P̄(A)`, where `Re P` is the target polynomial.
fn append_branch(c: &mut Circuit, lay: &QsvtLayout, be: &BlockEncoding, wx: &[f64]) {
    let ctl = [Control::on(lay.branch)];
    let phases = to_reflection_phases(wx);
    let d = phases.len() - 1;
    let map: Vec<usize> = lay.system.qubits().into_iter().chain(lay.anc.qubits()).collect();
    let inv = be.circuit.inverse();
    // Symmetric phases make the time order irrelevant; U and U† alternate.
    for (step, phi) in phases.iter().enumerate() {
        if step > 0 {
            let u = if step % 2 == 1 { &be.circuit } else { &inv };
            c.append_mapped(u, &map, &ctl);
        }
        projector_phase(c, lay, *phi, &ctl);
    }
    // The sequence carries (−i)^d against the Wx amplitude: restore i^d on
    // conj = 0 and (−i)^d on conj = 1. A phase gate on the control qubit is
    // a global phase restricted to the branch.
    if !d.is_multiple_of(4) {
        c.phase(lay.branch, d as f64 * FRAC_PI_2);
    }
    if d % 2 == 1 {
        c.add(GateKind::Z, &[lay.conj], &ctl);
    }
}

/// The LCU circuit `(P_cos(H/λ) − i·P_sin(H/λ))/2` on the system register,
/// postselected on every other qubit being `|0⟩`.
pub fn qsvt_circuit(be: &BlockEncoding, phases: &QsvtPhases) -> Circuit {
    let (regs, lay) = qsvt_layout(be);
    let mut c = Circuit::new(regs);
    c.h(lay.branch);
    c.h(lay.conj);
    c.x(lay.branch);
    append_branch(&mut c, &lay, be, &phases.cos);
    c.x(lay.branch);
    append_branch(&mut c, &lay, be, &phases.sin);
    c.phase(lay.branch, -FRAC_PI_2);
    c.h(lay.branch);
    c.h(lay.conj);
    c
}

/// A single polynomial `Re P(A/λ)` without the branch combination.
pub fn qsvt_single_circuit(be: &BlockEncoding, wx: &[f64]) -> Circuit {
    let (regs, lay) = qsvt_layout(be);
    let mut c = Circuit::new(regs);
    c.h(lay.conj);
    c.x(lay.branch);
    append_branch(&mut c, &lay, be, wx);
    c.x(lay.branch);
    c.h(lay.conj);
    c
}

/// Result of one QSVT evolution.
#[derive(Clone, Debug)]
pub struct QsvtEvolution {
    pub t: f64,
    /// Renormalized system state after postselection.
    pub psi: Vec<Complex64>,
    pub success_probability: f64,
    pub cos_degree: usize,
    pub sin_degree: usize,
    /// `(ε_poly + degree·ε_be)/scale`, the error budget of the block
    /// relative to `e^{−iHt}`.
    pub error_budget: f64,
}

/// Everything needed to evolve one system at several times.
#[derive(Clone, Debug)]
pub struct QsvtEvolver {
    pub be_h: BlockEncoding,
    pub eps_poly: f64,
    pub floor: f64,
}

impl QsvtEvolver {
    pub fn new(sys: &SpringMassSystem, r: usize, eps_poly: f64) -> Result<Self> {
        let be_b = block_encode_bdagger(sys, r)?;
        Ok(QsvtEvolver { be_h: block_encode_hamiltonian(&be_b)?, eps_poly, floor: POSTSELECTION_FLOOR })
    }

    pub fn circuit(&self, t: f64) -> Result<(Circuit, QsvtPlan)> {
        let plan = jacobi_anger_plan(t, self.be_h.lambda, self.eps_poly)?;
        let phases = plan_phases(&plan)?;
        Ok((qsvt_circuit(&self.be_h, &phases), plan))
    }

    /// Evolves a system-register state `psi0` to time `t`.
    pub fn evolve(&self, psi0: &[Complex64], t: f64) -> Result<QsvtEvolution> {
        let (circuit, plan) = self.circuit(t)?;
        let mut sv = StateVector::embed(psi0, circuit.width())?;
        sv.run(&circuit, ExecPolicy::default())?;
        let dim = 1usize << self.be_h.system_qubits;
        let mut psi = sv.amplitudes()[..dim].to_vec();
        let p: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if p < self.floor {
            return Err(Error::Postselection { probability: p, floor: self.floor });
        }
        let nrm = p.sqrt();
        psi.iter_mut().for_each(|a| *a /= nrm);
        let k = plan.cos_degree().max(plan.sin_degree()) as f64;
        Ok(QsvtEvolution {
            t,
            psi,
            success_probability: p,
            cos_degree: plan.cos_degree(),
            sin_degree: plan.sin_degree(),
            error_budget: (plan.eps_poly + k * self.be_h.eps) / plan.scale,
        })
    }
}

/// One-shot evolution with the default postselection floor.
pub fn evolve_qsvt(sys: &SpringMassSystem, psi0: &[Complex64], t: f64, r: usize, eps_poly: f64) -> Result<QsvtEvolution> {
    QsvtEvolver::new(sys, r, eps_poly)?.evolve(psi0, t)
}
