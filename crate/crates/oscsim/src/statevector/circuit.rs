use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default qubit cap for dense simulation.
pub const DEFAULT_QUBIT_CAP: usize = 26;

/// A contiguous named register. Bit `i` of a register value lives on qubit
/// `offset + i`; qubit 0 is the least significant bit of a basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Register {
    pub offset: usize,
    pub width: usize,
}

impl Register {
    pub fn qubit(&self, i: usize) -> usize {
        assert!(i < self.width, "bit {i} outside register of width {}", self.width);
        self.offset + i
    }

    pub fn qubits(&self) -> Vec<usize> {
        (self.offset..self.offset + self.width).collect()
    }

    /// Controls selecting `value` on this register.
    pub fn pattern(&self, value: u64) -> Vec<Control> {
        (0..self.width).map(|i| Control { qubit: self.offset + i, on: value >> i & 1 == 1 }).collect()
    }

    /// Extracts this register's value from a basis index.
    pub fn value_of(&self, index: usize) -> u64 {
        ((index >> self.offset) & ((1usize << self.width) - 1)) as u64
    }
}

/// Named registers laid out from qubit 0 upwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegisterLayout {
    names: Vec<(String, Register)>,
    total: usize,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a register. Names must be unique and widths positive.
    pub fn add(&mut self, name: &str, width: usize) -> Register {
        assert!(width >= 1, "register '{name}' must have positive width");
        assert!(self.get(name).is_none(), "duplicate register name '{name}'");
        let reg = Register { offset: self.total, width };
        self.total += width;
        self.names.push((name.to_string(), reg));
        reg
    }

    pub fn get(&self, name: &str) -> Option<Register> {
        self.names.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, Register)> {
        self.names.iter().map(|(n, r)| (n.as_str(), *r))
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn check_cap(&self, cap: usize) -> Result<()> {
        if self.total > cap {
            return Err(Error::QubitCap { requested: self.total, cap });
        }
        Ok(())
    }
}

/// A control qubit with polarity: `on = true` fires on `|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    pub on: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Control { qubit, on: true }
    }

    pub fn off(qubit: usize) -> Self {
        Control { qubit, on: false }
    }
}

/// Gate kinds. Target conventions:
/// one-qubit kinds take one target; `Swap` takes two;
/// `AddConst(c)` takes a register (LSB first) and adds `c` modulo its size;
/// `CompareGeConst(c)` takes `x` bits then a flag and flips the flag when `x >= c`;
/// `CompareGeReg` takes `x` bits, `y` bits of equal width, then a flag, and
/// flips the flag when `x >= y`.
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    X,
    Z,
    H,
    Ry(f64),
    Rz(f64),
    Phase(f64),
    Swap,
    AddConst(u64),
    CompareGeConst(u64),
    CompareGeReg,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::Phase(_) => "PHASE",
            GateKind::Swap => "SWAP",
            GateKind::AddConst(_) => "ADD",
            GateKind::CompareGeConst(_) => "CMPGE",
            GateKind::CompareGeReg => "CMPGEREG",
        }
    }

    fn param(&self) -> Option<String> {
        match self {
            GateKind::Ry(v) | GateKind::Rz(v) | GateKind::Phase(v) => Some(format!("{v:.16e}")),
            GateKind::AddConst(c) | GateKind::CompareGeConst(c) => Some(c.to_string()),
            _ => None,
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(
            self,
            GateKind::X | GateKind::Z | GateKind::H | GateKind::Ry(_) | GateKind::Rz(_) | GateKind::Phase(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Gate { kind, targets, controls: Vec::new() }
    }

    pub fn with_controls(mut self, controls: &[Control]) -> Self {
        self.controls.extend_from_slice(controls);
        self
    }

    /// All qubits touched by the gate.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().copied().chain(self.controls.iter().map(|c| c.qubit))
    }

    pub fn inverse(&self) -> Gate {
        let kind = match &self.kind {
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            GateKind::Phase(t) => GateKind::Phase(-t),
            GateKind::AddConst(c) => {
                let m = self.targets.len();
                let modulus = 1u64 << m;
                GateKind::AddConst((modulus - c % modulus) % modulus)
            }
            other => other.clone(),
        };
        Gate { kind, targets: self.targets.clone(), controls: self.controls.clone() }
    }

    fn validate(&self, width: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        let arity_ok = match &self.kind {
            k if k.is_single_qubit() => self.targets.len() == 1,
            GateKind::Swap => self.targets.len() == 2,
            GateKind::AddConst(_) => !self.targets.is_empty() && self.targets.len() <= 63,
            GateKind::CompareGeConst(_) => self.targets.len() >= 2 && self.targets.len() <= 64,
            GateKind::CompareGeReg => self.targets.len() >= 3 && self.targets.len() % 2 == 1,
            _ => unreachable!(),
        };
        if !arity_ok {
            return bad(format!("{} has wrong number of targets ({})", self.kind.name(), self.targets.len()));
        }
        let mut seen = vec![false; width];
        for q in self.qubits() {
            if q >= width {
                return bad(format!("{} addresses qubit {q} outside width {width}", self.kind.name()));
            }
            if seen[q] {
                return bad(format!("{} uses qubit {q} twice", self.kind.name()));
            }
            seen[q] = true;
        }
        match &self.kind {
            GateKind::Ry(v) | GateKind::Rz(v) | GateKind::Phase(v) if !v.is_finite() => {
                bad(format!("{} parameter must be finite", self.kind.name()))
            }
            _ => Ok(()),
        }
    }
}

/// An ordered gate list over a register layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    layout: RegisterLayout,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout) -> Self {
        Circuit { layout, gates: Vec::new() }
    }

    /// A circuit over `width` anonymous qubits (one register `q`).
    pub fn with_width(width: usize) -> Self {
        let mut layout = RegisterLayout::new();
        if width > 0 {
            layout.add("q", width);
        }
        Circuit::new(layout)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.total()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate. Panics on an invalid gate, which is a construction bug.
    pub fn push(&mut self, gate: Gate) {
        if let Err(e) = gate.validate(self.width()) {
            panic!("invalid gate: {e}");
        }
        self.gates.push(gate);
    }

    /// Appends a gate, reporting validation problems.
    pub fn try_push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.width())?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn add(&mut self, kind: GateKind, targets: &[usize], controls: &[Control]) {
        self.push(Gate { kind, targets: targets.to_vec(), controls: controls.to_vec() });
    }

    pub fn x(&mut self, q: usize) {
        self.add(GateKind::X, &[q], &[]);
    }

    pub fn z(&mut self, q: usize) {
        self.add(GateKind::Z, &[q], &[]);
    }

    pub fn h(&mut self, q: usize) {
        self.add(GateKind::H, &[q], &[]);
    }

    pub fn ry(&mut self, q: usize, theta: f64) {
        self.add(GateKind::Ry(theta), &[q], &[]);
    }

    pub fn rz(&mut self, q: usize, theta: f64) {
        self.add(GateKind::Rz(theta), &[q], &[]);
    }

    pub fn phase(&mut self, q: usize, phi: f64) {
        self.add(GateKind::Phase(phi), &[q], &[]);
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        self.add(GateKind::X, &[t], &[Control::on(c)]);
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.add(GateKind::Swap, &[a, b], &[]);
    }

    /// `H` on every qubit of a register.
    pub fn h_all(&mut self, reg: Register) {
        for q in reg.qubits() {
            self.h(q);
        }
    }

    /// Appends another circuit of the same or smaller width.
    pub fn append(&mut self, other: &Circuit) {
        assert!(other.width() <= self.width(), "appended circuit is wider");
        for g in &other.gates {
            self.push(g.clone());
        }
    }

    /// Appends `other` with qubit `i` of `other` mapped to `map[i]` and every
    /// gate additionally controlled on `extra`.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[usize], extra: &[Control]) {
        assert_eq!(map.len(), other.width(), "qubit map must cover the appended circuit");
        for g in &other.gates {
            let mut controls: Vec<Control> =
                g.controls.iter().map(|c| Control { qubit: map[c.qubit], on: c.on }).collect();
            controls.extend_from_slice(extra);
            self.push(Gate {
                kind: g.kind.clone(),
                targets: g.targets.iter().map(|&t| map[t]).collect(),
                controls,
            });
        }
    }

    /// Appends `other` with every gate additionally controlled on `extra`.
    pub fn append_controlled(&mut self, other: &Circuit, extra: &[Control]) {
        let map: Vec<usize> = (0..other.width()).collect();
        self.append_mapped(other, &map, extra);
    }

    /// The adjoint circuit.
    pub fn inverse(&self) -> Circuit {
        Circuit { layout: self.layout.clone(), gates: self.gates.iter().rev().map(Gate::inverse).collect() }
    }

    /// Line-oriented text dump: `KIND targets [controls±] [param]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let targets: Vec<String> = g.targets.iter().map(|t| t.to_string()).collect();
            let _ = write!(out, "{} {}", g.kind.name(), targets.join(","));
            if !g.controls.is_empty() {
                let cs: Vec<String> = g
                    .controls
                    .iter()
                    .map(|c| format!("{}{}", c.qubit, if c.on { '+' } else { '-' }))
                    .collect();
                let _ = write!(out, " [{}]", cs.join(","));
            }
            if let Some(p) = g.kind.param() {
                let _ = write!(out, " {p}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets_are_contiguous() {
        let mut l = RegisterLayout::new();
        let a = l.add("block", 1);
        let b = l.add("j", 3);
        assert_eq!(a.offset, 0);
        assert_eq!(b.offset, 1);
        assert_eq!(l.total(), 4);
        assert_eq!(b.value_of(0b1010), 0b101);
        assert!(l.check_cap(3).is_err());
    }

    #[test]
    #[should_panic]
    fn duplicate_register_names_panic() {
        let mut l = RegisterLayout::new();
        l.add("a", 1);
        l.add("a", 2);
    }

    #[test]
    fn rejects_overlapping_target_and_control() {
        let mut c = Circuit::with_width(2);
        assert!(c.try_push(Gate::new(GateKind::X, vec![0]).with_controls(&[Control::on(0)])).is_err());
        assert!(c.try_push(Gate::new(GateKind::X, vec![2])).is_err());
        assert!(c.try_push(Gate::new(GateKind::Ry(f64::NAN), vec![0])).is_err());
    }

    #[test]
    fn dump_format_is_stable() {
        let mut c = Circuit::with_width(3);
        c.add(GateKind::Ry(0.5), &[2], &[Control::on(0), Control::off(1)]);
        c.swap(0, 1);
        c.add(GateKind::AddConst(3), &[0, 1, 2], &[]);
        assert_eq!(c.dump(), "RY 2 [0+,1-] 5.0000000000000000e-1\nSWAP 0,1\nADD 0,1,2 3\n");
    }

    #[test]
    fn inverse_negates_parameters_and_reverses() {
        let mut c = Circuit::with_width(2);
        c.ry(0, 0.3);
        c.add(GateKind::AddConst(1), &[0, 1], &[]);
        let inv = c.inverse();
        assert_eq!(inv.gates()[0].kind, GateKind::AddConst(3));
        assert_eq!(inv.gates()[1].kind, GateKind::Ry(-0.3));
    }
}
