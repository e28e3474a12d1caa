//! Spring-mass systems and the matrices derived from them.
//!
//! A system of `N = 2^n` oscillators is described by masses `m_j`, symmetric
//! couplings `κ_jk` between distinct oscillators, wall springs `κ_jj`, and the
//! initial displacements and velocities. From these we build the stiffness
//! matrix `F`, the rectangular factor `B` with `B·B† = M^{-1/2} F M^{-1/2}`,
//! and the padded Hamiltonian `H = -[[0, B], [B†, 0]]` of dimension `2N²`.
//!
//! Padded layout: index `b·N² + j·N + k`. The velocity block (`b = 0`) uses
//! the first `N` entries; the pair block (`b = 1`) stores pair `(j, k)` with
//! `j <= k` at `N² + j·N + k`. Entries with `j > k` are always zero.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named system presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Unit neighbor and wall springs; last two masses 4 when `N >= 4`.
    Impl1Chain,
    /// Neighbor springs 0.25 with a last spring of 1; no walls; last mass 4.
    Impl2Chain,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Impl1Chain => "impl1-chain",
            Preset::Impl2Chain => "impl2-chain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "impl1-chain" => Ok(Preset::Impl1Chain),
            "impl2-chain" => Ok(Preset::Impl2Chain),
            other => Err(Error::InvalidInput(format!("unknown preset '{other}'"))),
        }
    }
}

/// A classical system of coupled oscillators.
#[derive(Clone, Debug, PartialEq)]
pub struct SpringMassSystem {
    masses: Vec<f64>,
    couplings: BTreeMap<(usize, usize), f64>,
    walls: Vec<f64>,
    x0: Vec<f64>,
    v0: Vec<f64>,
    sparsity: usize,
}

fn check_power_of_two(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidSystem(format!(
            "number of oscillators must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

impl SpringMassSystem {
    /// Builds and validates a system from raw fields.
    ///
    /// `couplings` may list a pair in either order, or in both orders if the
    /// two values agree. Zero couplings are dropped.
    pub fn new(
        masses: Vec<f64>,
        couplings: &[(usize, usize, f64)],
        walls: &[(usize, f64)],
        x0: Vec<f64>,
        v0: Vec<f64>,
    ) -> Result<Self> {
        let n = masses.len();
        check_power_of_two(n)?;
        for (j, &m) in masses.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidSystem(format!("mass {j} must be positive, got {m}")));
            }
        }
        if x0.len() != n || v0.len() != n {
            return Err(Error::InvalidSystem(format!(
                "x0 and v0 must have length {n}, got {} and {}",
                x0.len(),
                v0.len()
            )));
        }
        if x0.iter().chain(&v0).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("initial data must be finite".into()));
        }
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(j, k, kappa) in couplings {
            if j >= n || k >= n {
                return Err(Error::InvalidSystem(format!("coupling ({j},{k}) out of range")));
            }
            if j == k {
                return Err(Error::InvalidSystem(format!(
                    "coupling ({j},{k}) is diagonal; use a wall spring"
                )));
            }
            if !(kappa.is_finite() && kappa >= 0.0) {
                return Err(Error::InvalidSystem(format!(
                    "spring constant ({j},{k}) must be non-negative, got {kappa}"
                )));
            }
            let key = (j.min(k), j.max(k));
            if let Some(&prev) = map.get(&key) {
                if prev != kappa {
                    return Err(Error::InvalidSystem(format!(
                        "asymmetric coupling for pair {key:?}: {prev} vs {kappa}"
                    )));
                }
            }
            map.insert(key, kappa);
        }
        map.retain(|_, v| *v != 0.0);
        let mut wall = vec![0.0; n];
        for &(j, kappa) in walls {
            if j >= n {
                return Err(Error::InvalidSystem(format!("wall spring {j} out of range")));
            }
            if !(kappa.is_finite() && kappa >= 0.0) {
                return Err(Error::InvalidSystem(format!(
                    "wall spring {j} must be non-negative, got {kappa}"
                )));
            }
            wall[j] = kappa;
        }
        let mut degree = vec![0usize; n];
        for &(j, k) in map.keys() {
            degree[j] += 1;
            degree[k] += 1;
        }
        let sparsity = degree.into_iter().max().unwrap_or(0);
        Ok(Self { masses, couplings: map, walls: wall, x0, v0, sparsity })
    }

    /// Builds a named preset with `n_osc` oscillators.
    pub fn preset(preset: Preset, n_osc: usize) -> Result<Self> {
        check_power_of_two(n_osc)?;
        let n = n_osc;
        let mut x0 = vec![0.0; n];
        let mut v0 = vec![0.0; n];
        x0[0] = 0.25;
        x0[1] = -0.25;
        v0[0] = 0.25;
        v0[1] = -0.25;
        match preset {
            Preset::Impl1Chain => {
                let mut masses = vec![1.0; n];
                if n >= 4 {
                    masses[n - 1] = 4.0;
                    masses[n - 2] = 4.0;
                }
                let couplings: Vec<_> = (0..n - 1).map(|j| (j, j + 1, 1.0)).collect();
                let walls: Vec<_> = (0..n).map(|j| (j, 1.0)).collect();
                Self::new(masses, &couplings, &walls, x0, v0)
            }
            Preset::Impl2Chain => {
                let mut masses = vec![1.0; n];
                masses[n - 1] = 4.0;
                let couplings: Vec<_> = (0..n - 1)
                    .map(|j| (j, j + 1, if j == n - 2 { 1.0 } else { 0.25 }))
                    .collect();
                Self::new(masses, &couplings, &[], x0, v0)
            }
        }
    }

    /// The two unit masses joined by one unit spring, with `x = (1, 2)` and
    /// `v = (1, 1)`.
    pub fn two_body_example() -> Self {
        Self::new(vec![1.0, 1.0], &[(0, 1, 1.0)], &[], vec![1.0, 2.0], vec![1.0, 1.0])
            .expect("two-body example is valid")
    }

    /// Returns a copy with different initial data.
    pub fn with_initial(&self, x0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        let couplings: Vec<_> = self.couplings.iter().map(|(&(j, k), &v)| (j, k, v)).collect();
        let walls: Vec<_> = self.walls.iter().copied().enumerate().collect();
        Self::new(self.masses.clone(), &couplings, &walls, x0, v0)
    }

    pub fn n_osc(&self) -> usize {
        self.masses.len()
    }

    /// `n = log2 N`.
    pub fn n_bits(&self) -> usize {
        self.n_osc().trailing_zeros() as usize
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// Nonzero couplings `(j, k) -> κ_jk` with `j < k`.
    pub fn couplings(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.couplings
    }

    /// Wall spring constants `κ_jj`, one per oscillator.
    pub fn walls(&self) -> &[f64] {
        &self.walls
    }

    pub fn has_walls(&self) -> bool {
        self.walls.iter().any(|&w| w != 0.0)
    }

    /// Symmetric spring constant; `kappa(j, j)` is the wall spring.
    pub fn kappa(&self, j: usize, k: usize) -> f64 {
        if j == k {
            self.walls[j]
        } else {
            *self.couplings.get(&(j.min(k), j.max(k))).unwrap_or(&0.0)
        }
    }

    /// Maximum number of off-diagonal couplings per oscillator.
    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn m_max(&self) -> f64 {
        self.masses.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn m_min(&self) -> f64 {
        self.masses.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Largest spring constant, walls included.
    pub fn kappa_max(&self) -> f64 {
        self.couplings.values().chain(&self.walls).copied().fold(0.0, f64::max)
    }

    /// True when every coupling joins neighbors `j` and `j + 1`.
    pub fn is_chain(&self) -> bool {
        self.couplings.keys().all(|&(j, k)| k == j + 1)
    }

    pub fn kinetic_energy(&self, v: &[f64]) -> f64 {
        0.5 * self.masses.iter().zip(v).map(|(m, v)| m * v * v).sum::<f64>()
    }

    pub fn potential_energy(&self, x: &[f64]) -> f64 {
        let walls: f64 = self.walls.iter().zip(x).map(|(k, x)| k * x * x).sum();
        let springs: f64 =
            self.couplings.iter().map(|(&(j, k), &kap)| kap * (x[j] - x[k]).powi(2)).sum();
        0.5 * (walls + springs)
    }

    pub fn total_energy(&self, x: &[f64], v: &[f64]) -> f64 {
        self.kinetic_energy(v) + self.potential_energy(x)
    }

    /// Total energy of the stored initial data.
    pub fn initial_energy(&self) -> f64 {
        self.total_energy(&self.x0, &self.v0)
    }
}

/// Stiffness matrix with `f_jj = Σ_k κ_jk` (wall included) and `f_jk = -κ_jk`.
pub fn stiffness_matrix(sys: &SpringMassSystem) -> DMatrix<f64> {
    let n = sys.n_osc();
    let mut f = DMatrix::zeros(n, n);
    for j in 0..n {
        f[(j, j)] = sys.walls[j];
    }
    for (&(j, k), &kap) in &sys.couplings {
        f[(j, j)] += kap;
        f[(k, k)] += kap;
        f[(j, k)] = -kap;
        f[(k, j)] = -kap;
    }
    f
}

/// `M^{-1/2} F M^{-1/2}`.
pub fn mass_weighted_stiffness(sys: &SpringMassSystem) -> DMatrix<f64> {
    let f = stiffness_matrix(sys);
    let n = sys.n_osc();
    DMatrix::from_fn(n, n, |i, j| f[(i, j)] / (sys.masses[i] * sys.masses[j]).sqrt())
}

/// Nonzero entries `(row j, column j·N + k, value)` of `B`, column-sorted.
pub fn b_entries(sys: &SpringMassSystem) -> Vec<(usize, usize, f64)> {
    let n = sys.n_osc();
    let mut out = Vec::new();
    for j in 0..n {
        if sys.walls[j] != 0.0 {
            out.push((j, j * n + j, (sys.walls[j] / sys.masses[j]).sqrt()));
        }
    }
    for (&(j, k), &kap) in &sys.couplings {
        let s = kap.sqrt();
        out.push((j, j * n + k, s / sys.masses[j].sqrt()));
        out.push((k, j * n + k, -s / sys.masses[k].sqrt()));
    }
    out.sort_by_key(|&(r, c, _)| (c, r));
    out
}

/// Dense `N × N²` matrix `B` in the padded pair layout.
pub fn b_matrix(sys: &SpringMassSystem) -> DMatrix<f64> {
    let n = sys.n_osc();
    let mut b = DMatrix::zeros(n, n * n);
    for (r, c, v) in b_entries(sys) {
        b[(r, c)] = v;
    }
    b
}

/// The padded Hamiltonian, stored as sorted sparse triplets.
#[derive(Clone, Debug)]
pub struct PaddedHamiltonian {
    n_osc: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl PaddedHamiltonian {
    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    /// Matrix dimension `2N²`.
    pub fn dim(&self) -> usize {
        2 * self.n_osc * self.n_osc
    }

    /// Number of qubits `2n + 1`.
    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Sorted `(row, col, value)` triplets.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for &(r, c, v) in &self.entries {
            h[(r, c)] = v;
        }
        h
    }

    /// The top-right `N² × N²` block, which holds `-B` (padded rows).
    pub fn block_b(&self) -> DMatrix<f64> {
        let nn = self.n_osc * self.n_osc;
        let mut blk = DMatrix::zeros(nn, nn);
        for &(r, c, v) in &self.entries {
            if r < nn && c >= nn {
                blk[(r, c - nn)] = v;
            }
        }
        blk
    }
}

/// Builds `H = -[[0, B], [B†, 0]]` in the padded layout.
pub fn hamiltonian(sys: &SpringMassSystem) -> PaddedHamiltonian {
    let n = sys.n_osc();
    let nn = n * n;
    let mut entries = Vec::new();
    for (r, c, v) in b_entries(sys) {
        entries.push((r, nn + c, -v));
        entries.push((nn + c, r, -v));
    }
    entries.sort_by_key(|&(r, c, _)| (r, c));
    PaddedHamiltonian { n_osc: n, entries }
}

/// Initial state `[√m·v ; i·B†√M x] / √(2T)` as sparse `(index, amplitude)`
/// pairs in ascending index order, zeros omitted.
pub fn initial_state_sparse(sys: &SpringMassSystem) -> Result<Vec<(usize, Complex64)>> {
    let t = sys.initial_energy();
    if !(t > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let n = sys.n_osc();
    let nn = n * n;
    let norm = (2.0 * t).sqrt();
    let mut out = Vec::new();
    for j in 0..n {
        let a = sys.masses[j].sqrt() * sys.v0[j] / norm;
        if a != 0.0 {
            out.push((j, Complex64::new(a, 0.0)));
        }
    }
    // (B†√M x)_{jk} = Σ_i B_{i,jk} √m_i x_i
    let mut pair: BTreeMap<usize, f64> = BTreeMap::new();
    for (r, c, v) in b_entries(sys) {
        *pair.entry(c).or_insert(0.0) += v * sys.masses[r].sqrt() * sys.x0[r];
    }
    for (c, v) in pair {
        if v != 0.0 {
            out.push((nn + c, Complex64::new(0.0, v / norm)));
        }
    }
    Ok(out)
}

/// Dense unit-norm initial state of dimension `2N²`.
pub fn initial_state_vector(sys: &SpringMassSystem) -> Result<Vec<Complex64>> {
    let n = sys.n_osc();
    let mut psi = vec![Complex64::new(0.0, 0.0); 2 * n * n];
    for (i, a) in initial_state_sparse(sys)? {
        psi[i] = a;
    }
    Ok(psi)
}

/// An `r`-bit fixed-point encoding `value ≈ scale·raw/2^r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointValue {
    pub raw: u64,
    pub bits: u32,
    pub scale: f64,
    /// Set when rounding produced `2^r`, which saturates to `2^r - 1`.
    pub clamped: bool,
}

impl FixedPointValue {
    pub fn decoded(&self) -> f64 {
        self.scale * self.raw as f64 / (1u64 << self.bits) as f64
    }
}

/// Round-to-nearest (ties up) fixed-point encoding with saturation.
pub fn encode_fixed_point(value: f64, scale: f64, bits: u32) -> Result<FixedPointValue> {
    if bits == 0 || bits > 32 {
        return Err(Error::InvalidInput(format!("precision must be in 1..=32, got {bits}")));
    }
    if !(scale > 0.0) || !value.is_finite() || value < 0.0 || value > scale {
        return Err(Error::FixedPointRange { value, scale });
    }
    let full = 1u64 << bits;
    let raw = (value / scale * full as f64 + 0.5).floor() as u64;
    let clamped = raw >= full;
    Ok(FixedPointValue { raw: raw.min(full - 1), bits, scale, clamped })
}
