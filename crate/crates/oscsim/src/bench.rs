//! Run configurations, route execution, CSV emission and resource sweeps.
//!
//! Three routes evolve the padded state: a second-order product formula
//! (`trotter`), the QSVT block-encoding pipeline (`qsvt`) and the
//! normal-mode solution re-encoded as a state (`exact`). Combined with a
//! preparation method they form the supported implementations:
//!
//! | route   | prep   | implementation |
//! |---------|--------|----------------|
//! | trotter | sparse | I              |
//! | qsvt    | oracle | II             |
//! | qsvt    | sparse | III            |
//! | exact   | sparse | reference      |
//!
//! Every command writes its CSVs and a `manifest.json` holding the full
//! command configuration; [`replay`] regenerates identical files from it.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{classical_kinetic_energy, evolve_newton, normal_modes};
use crate::error::{Error, Result};
use crate::model::{b_entries, hamiltonian, initial_state_sparse, initial_state_vector, Preset, SpringMassSystem};
use crate::observables::{
    extract_normal_frequencies, frequency_spectrum, kinetic_energy, region_energies, vibrational_thermo, wave_speed,
    EnergySeries, RegionEnergy, RegionPartition, Spectrum, Thermo, WaveSpeeds,
};
use crate::qsvt::QsvtEvolver;
use crate::stateprep::{
    gin_bound, oracle_prepare, oracle_prepare_circuit, oracle_prepare_unsimulated, sparse_prepare, PrepRoute,
};
use crate::statevector::{resource_report, Circuit, ExecPolicy, ResourceReport, StateVector, DEFAULT_QUBIT_CAP};
use crate::trotter::{pauli_decompose, trotter_bound, trotter_circuit};

/// Largest `N` for anything that builds or simulates evolution circuits.
pub const CIRCUIT_CAP: usize = 16;
/// Largest `N` for matrix-level and preparation-only work.
pub const MATRIX_CAP: usize = 256;
/// Largest simulated register.
pub const QUBIT_CAP: usize = DEFAULT_QUBIT_CAP;
pub const DEFAULT_R_ST: usize = 20;
pub const DEFAULT_W_CAP: usize = 64;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Relative allowance for floating-point roundoff in energy budgets. A
/// simulated circuit accumulates about 1e-16 per gate; the largest routes
/// run ~1e5 gates per sample.
pub const ROUNDOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Trotter,
    Qsvt,
    Exact,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Trotter => "trotter",
            Route::Qsvt => "qsvt",
            Route::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trotter" => Ok(Route::Trotter),
            "qsvt" => Ok(Route::Qsvt),
            "exact" => Ok(Route::Exact),
            other => Err(Error::InvalidInput(format!("unknown route '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Implementation {
    I,
    II,
    III,
    Reference,
}

impl Implementation {
    pub fn label(self) -> &'static str {
        match self {
            Implementation::I => "I",
            Implementation::II => "II",
            Implementation::III => "III",
            Implementation::Reference => "reference",
        }
    }
}

/// The route validity matrix.
pub fn implementation(route: Route, prep: PrepRoute) -> Result<Implementation> {
    match (route, prep) {
        (Route::Trotter, PrepRoute::Sparse) => Ok(Implementation::I),
        (Route::Qsvt, PrepRoute::Oracle) => Ok(Implementation::II),
        (Route::Qsvt, PrepRoute::Sparse) => Ok(Implementation::III),
        (Route::Exact, PrepRoute::Sparse) => Ok(Implementation::Reference),
        (r, p) => Err(Error::InvalidInput(format!(
            "route '{}' with '{}' preparation is not a supported implementation",
            r.name(),
            p.name()
        ))),
    }
}

/// Raw system description, also the JSON format of `--system FILE`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub masses: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub walls: Vec<(usize, f64)>,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<SpringMassSystem> {
        SpringMassSystem::new(self.masses.clone(), &self.couplings, &self.walls, self.x0.clone(), self.v0.clone())
    }

    pub fn from_system(sys: &SpringMassSystem) -> Self {
        SystemSpec {
            masses: sys.masses().to_vec(),
            couplings: sys.couplings().iter().map(|(&(j, k), &v)| (j, k, v)).collect(),
            walls: sys.walls().iter().copied().enumerate().filter(|(_, w)| *w != 0.0).collect(),
            x0: sys.x0().to_vec(),
            v0: sys.v0().to_vec(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSource {
    Preset { preset: Preset, n: usize },
    /// Systems read from a file are stored inline so manifests are
    /// self-contained.
    Inline(SystemSpec),
}

impl SystemSource {
    pub fn build(&self) -> Result<SpringMassSystem> {
        match self {
            SystemSource::Preset { preset, n } => SpringMassSystem::preset(*preset, *n),
            SystemSource::Inline(spec) => spec.build(),
        }
    }
}

/// Everything that determines an evolution run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemSource,
    pub route: Route,
    pub prep: PrepRoute,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    /// Fixed-point bits of the loading oracles.
    pub r_bits: usize,
    /// Polynomial error for QSVT.
    pub eps: f64,
    /// Product-formula steps; [`DEFAULT_R_ST`] when unset.
    pub r_st: Option<usize>,
    pub w_cap: usize,
}

impl RunConfig {
    /// Implementation I over `t ∈ [0, 5]` with `Δt = 0.1` and 20 steps.
    pub fn new(system: SystemSource) -> Self {
        RunConfig {
            system,
            route: Route::Trotter,
            prep: PrepRoute::Sparse,
            t0: 0.0,
            t1: 5.0,
            dt: 0.1,
            r_bits: 4,
            eps: 1e-3,
            r_st: None,
            w_cap: DEFAULT_W_CAP,
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        time_grid(self.t0, self.t1, self.dt)
    }

    /// Checks the configuration and returns the implementation it selects.
    pub fn validate(&self) -> Result<Implementation> {
        let imp = implementation(self.route, self.prep)?;
        if !(self.eps.is_finite() && self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(2..=16).contains(&self.r_bits) {
            return Err(Error::InvalidInput(format!("r-bits must lie in 2..=16, got {}", self.r_bits)));
        }
        if self.r_st == Some(0) {
            return Err(Error::InvalidInput("r-st must be at least 1".into()));
        }
        self.times()?;
        let n = self.system.build()?.n_osc();
        let cap = if self.route == Route::Exact { MATRIX_CAP } else { CIRCUIT_CAP };
        if n > cap {
            return Err(Error::ResourceCap(format!("route '{}' supports N ≤ {cap}, got {n}", self.route.name())));
        }
        Ok(imp)
    }
}

/// `t0, t0 + dt, …, t1`; `t1 − t0` must be a multiple of `dt`.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidInput(format!("invalid time range [{t0}, {t1}]")));
    }
    if t1 == t0 {
        return Ok(vec![t0]);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let steps = ((t1 - t0) / dt).round();
    if (t0 + steps * dt - t1).abs() > 1e-9 * t1.abs().max(1.0) {
        return Err(Error::InvalidInput(format!("t1 − t0 = {} is not a multiple of dt = {dt}", t1 - t0)));
    }
    Ok((0..=steps as usize).map(|k| t0 + k as f64 * dt).collect())
}

/// One evolved state.
#[derive(Clone, Debug)]
pub struct StateSample {
    pub t: f64,
    pub psi: Vec<Complex64>,
    /// Postselection probability, for QSVT.
    pub success_probability: Option<f64>,
    /// Bound on the Euclidean distance to the exactly evolved state.
    pub state_budget: f64,
}

#[derive(Clone, Debug)]
pub struct RouteRun {
    pub implementation: Implementation,
    pub samples: Vec<StateSample>,
    /// Derived parameters for the manifest.
    pub derived: serde_json::Map<String, serde_json::Value>,
}

fn map_times<T: Send>(times: &[f64], f: impl Fn(f64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        times.par_iter().map(|&t| f(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        times.iter().map(|&t| f(t)).collect()
    }
}

fn check_width(width: usize, what: &str) -> Result<()> {
    if width > QUBIT_CAP {
        return Err(Error::ResourceCap(format!("{what} needs {width} qubits, cap is {QUBIT_CAP}")));
    }
    Ok(())
}

/// `min_φ ‖a − e^{iφ}b‖`, evaluated componentwise so that tiny distances
/// are not lost to cancellation in `1 − |⟨a|b⟩|`.
fn phase_aligned_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap: Complex64 = b.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x - phase * y).norm_sqr()).sum::<f64>().sqrt()
}

/// Evolves the system along the configured route at `times`.
pub fn run_route(sys: &SpringMassSystem, cfg: &RunConfig, times: &[f64]) -> Result<RouteRun> {
    let implementation = cfg.validate()?;
    let mut derived = serde_json::Map::new();
    let samples = match cfg.route {
        Route::Exact => {
            let modes = normal_modes(sys)?;
            map_times(times, |t| {
                let (x, v) = evolve_newton(sys, &modes, t);
                let psi = initial_state_vector(&sys.with_initial(x, v)?)?;
                Ok(StateSample { t, psi, success_probability: None, state_budget: 0.0 })
            })?
        }
        Route::Trotter => {
            check_width(2 * sys.n_bits() + 1, "the product-formula circuit")?;
            let decomp = pauli_decompose(&hamiltonian(sys).to_dense())?;
            let r_st = cfg.r_st.unwrap_or(DEFAULT_R_ST);
            let prep = sparse_prepare(&initial_state_vector(sys)?)?;
            let prep_dist = phase_aligned_distance(&prep.prepared, &prep.target);
            derived.insert("r_st".into(), r_st.into());
            derived.insert("pauli_terms".into(), decomp.len().into());
            derived.insert("pauli_lambda".into(), decomp.lambda().into());
            derived.insert("prep_fidelity".into(), prep.fidelity.into());
            map_times(times, |t| {
                let mut sv = StateVector::from_amplitudes(prep.prepared.clone())?;
                sv.run(&trotter_circuit(&decomp, t, r_st), ExecPolicy::Sequential)?;
                let budget = trotter_bound(decomp.len(), decomp.lambda(), t, r_st) + prep_dist;
                Ok(StateSample { t, psi: sv.into_amplitudes(), success_probability: None, state_budget: budget })
            })?
        }
        Route::Qsvt => {
            let evolver = QsvtEvolver::new(sys, cfg.r_bits, cfg.eps)?;
            check_width(evolver.be_h.circuit.width() + 3, "the QSVT circuit")?;
            let (prep_dist, psi0, fid) = match cfg.prep {
                PrepRoute::Sparse => {
                    let p = sparse_prepare(&initial_state_vector(sys)?)?;
                    (phase_aligned_distance(&p.prepared, &p.target), p.prepared, p.fidelity)
                }
                PrepRoute::Oracle => {
                    check_width(oracle_prepare_circuit(sys, cfg.r_bits)?.circuit.width(), "oracle preparation")?;
                    let p = oracle_prepare(sys, cfg.r_bits, cfg.w_cap)?;
                    if let Some(rep) = &p.amplification {
                        derived.insert("grover_iterations".into(), rep.iterations.into());
                        derived.insert("prep_success".into(), rep.measured_success.into());
                    }
                    (phase_aligned_distance(&p.prepared, &p.target), p.prepared, p.fidelity)
                }
            };
            derived.insert("lambda".into(), evolver.be_h.lambda.into());
            derived.insert("block_encoding_eps".into(), evolver.be_h.eps.into());
            derived.insert("prep_fidelity".into(), fid.into());
            map_times(times, |t| {
                let ev = evolver.evolve(&psi0, t)?;
                // Both branches contribute; renormalizing a perturbed state
                // at most doubles the relative error.
                let delta = 2.0 * ev.error_budget;
                let budget = if delta < 1.0 { 2.0 * delta / (1.0 - delta) } else { f64::INFINITY };
                Ok(StateSample {
                    t,
                    psi: ev.psi,
                    success_probability: Some(ev.success_probability),
                    state_budget: budget + prep_dist,
                })
            })?
        }
    };
    Ok(RouteRun { implementation, samples, derived })
}

/// One row of an energy CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub quantum: f64,
    pub classical: f64,
    pub abs_error: f64,
    /// `2T` times the state budget, since `|‖Pa‖² − ‖Pb‖²| ≤ 2‖a − b‖`,
    /// plus [`ROUNDOFF`]`·T`.
    pub budget: f64,
    pub success_probability: Option<f64>,
}

pub fn energy_rows(sys: &SpringMassSystem, run: &RouteRun) -> Result<Vec<EnergyRow>> {
    let modes = normal_modes(sys)?;
    let total = sys.initial_energy();
    Ok(run
        .samples
        .iter()
        .map(|s| {
            let quantum = kinetic_energy(&s.psi, total, sys.n_osc());
            let classical = classical_kinetic_energy(sys, &modes, s.t);
            EnergyRow {
                t: s.t,
                quantum,
                classical,
                abs_error: (quantum - classical).abs(),
                budget: total * (2.0 * s.state_budget + ROUNDOFF),
                success_probability: s.success_probability,
            }
        })
        .collect())
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a CSV through a temporary file and a rename.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json_atomic(path: &Path, value: &impl Serialize) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(value)? + "\n")?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Spectrum,
    Thermo,
    Regions,
    Wavespeed,
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(Observable::Spectrum),
            "thermo" => Ok(Observable::Thermo),
            "regions" => Ok(Observable::Regions),
            "wavespeed" => Ok(Observable::Wavespeed),
            other => Err(Error::InvalidInput(format!("unknown observable '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserveConfig {
    pub what: Observable,
    /// Number of equal coarse-grained regions.
    pub regions: usize,
    pub spacing: f64,
    pub temperatures: Vec<f64>,
    /// Spatial second differences below this leave the wave speed undefined.
    pub floor: f64,
}

impl ObserveConfig {
    pub fn new(what: Observable) -> Self {
        ObserveConfig { what, regions: 2, spacing: 1.0, temperatures: vec![0.5, 1.0, 2.0], floor: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Stateprep,
    Trotter,
    Endtoend,
    Ratio,
}

impl BenchKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stateprep" => Ok(BenchKind::Stateprep),
            "trotter" => Ok(BenchKind::Trotter),
            "endtoend" => Ok(BenchKind::Endtoend),
            "ratio" => Ok(BenchKind::Ratio),
            other => Err(Error::InvalidInput(format!("unknown benchmark '{other}'"))),
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            BenchKind::Stateprep => "stateprep_bench.csv",
            BenchKind::Trotter => "trotter_scaling.csv",
            BenchKind::Endtoend => "endtoend_bench.csv",
            BenchKind::Ratio => "ratio_bench.csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub kind: BenchKind,
    pub preset: Preset,
    pub ns: Vec<usize>,
    pub r_bits: usize,
    pub eps: f64,
    pub r_st: Option<usize>,
    /// Evolution time for circuit-building benchmarks.
    pub t: f64,
    /// Sparsity in the preparation bound.
    pub d: usize,
    pub w_cap: usize,
}

impl BenchConfig {
    pub fn new(kind: BenchKind, preset: Preset, ns: Vec<usize>) -> Self {
        BenchConfig { kind, preset, ns, r_bits: 4, eps: 1e-2, r_st: None, t: 1.0, d: 2, w_cap: DEFAULT_W_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Evolve { run: RunConfig },
    Observe { run: RunConfig, observe: ObserveConfig },
    Bench { bench: BenchConfig },
    Model { system: SystemSource },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// The runs are deterministic; no random seed is involved.
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub derived: serde_json::Value,
}

fn finish(out: &Path, command: Command, outputs: Vec<String>, derived: serde_json::Value) -> Result<Manifest> {
    let m = Manifest {
        tool: "oscsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        seed: None,
        outputs,
        derived,
    };
    write_json_atomic(&out.join(MANIFEST_FILE), &m)?;
    Ok(m)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub struct EvolveReport {
    pub implementation: Implementation,
    pub rows: Vec<EnergyRow>,
    pub manifest: Manifest,
}

/// Writes `<route>_energy.csv` and the manifest into `out`.
pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> Result<EvolveReport> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let times = cfg.times()?;
    let run = run_route(&sys, cfg, &times)?;
    let rows = energy_rows(&sys, &run)?;
    fs::create_dir_all(out)?;
    let file = format!("{}_energy.csv", cfg.route.name());
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.t),
                fmt_num(r.quantum),
                fmt_num(r.classical),
                fmt_num(r.abs_error),
                fmt_num(r.budget),
                opt_num(r.success_probability),
            ]
        })
        .collect();
    write_csv(
        &out.join(&file),
        &["t", "E_quantum", "E_classical", "abs_error", "budget", "success_probability"],
        &csv_rows,
    )?;
    let mut derived = run.derived.clone();
    derived.insert("implementation".into(), run.implementation.label().into());
    let manifest = finish(out, Command::Evolve { run: cfg.clone() }, vec![file], derived.into())?;
    Ok(EvolveReport { implementation: run.implementation, rows, manifest })
}

#[derive(Clone, Debug, Default)]
pub struct ObserveReport {
    pub spectrum: Option<Spectrum>,
    /// Normal frequencies recovered from the spectrum.
    pub frequencies: Vec<f64>,
    pub thermo: Vec<Thermo>,
    pub regions: Vec<Vec<RegionEnergy>>,
    pub speeds: Option<WaveSpeeds>,
    pub outputs: Vec<String>,
}

/// Evolves inline along the configured route and writes the requested
/// observable tables.
pub fn cmd_observe(cfg: &RunConfig, obs: &ObserveConfig, out: &Path) -> Result<ObserveReport> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let times = cfg.times()?;
    let run = run_route(&sys, cfg, &times)?;
    fs::create_dir_all(out)?;
    let mut rep = ObserveReport::default();
    let total = sys.initial_energy();
    match obs.what {
        Observable::Spectrum | Observable::Thermo => {
            let values = run.samples.iter().map(|s| kinetic_energy(&s.psi, total, sys.n_osc())).collect();
            let spectrum = frequency_spectrum(&EnergySeries::new(times.clone(), values, total)?)?;
            let freqs = extract_normal_frequencies(&spectrum)?;
            if obs.what == Observable::Spectrum {
                let rows: Vec<Vec<String>> = spectrum
                    .omega
                    .iter()
                    .zip(&spectrum.values)
                    .map(|(w, z)| vec![fmt_num(*w), fmt_num(z.re), fmt_num(z.im), fmt_num(z.norm())])
                    .collect();
                write_csv(&out.join("spectrum.csv"), &["omega", "re", "im", "abs"], &rows)?;
                let classical = normal_modes(&sys)?.frequencies;
                let rows: Vec<Vec<String>> = freqs
                    .iter()
                    .map(|&w| {
                        let c = classical.iter().copied().min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs()));
                        let c = c.unwrap_or(f64::NAN);
                        vec![fmt_num(w), fmt_num(c), fmt_num((w - c).abs())]
                    })
                    .collect();
                write_csv(&out.join("modes.csv"), &["omega_quantum", "omega_classical", "abs_err"], &rows)?;
                rep.outputs = vec!["spectrum.csv".into(), "modes.csv".into()];
            } else {
                rep.thermo =
                    obs.temperatures.iter().map(|&temp| vibrational_thermo(&freqs, temp)).collect::<Result<_>>()?;
                let rows: Vec<Vec<String>> = rep
                    .thermo
                    .iter()
                    .map(|th| vec![fmt_num(th.temperature), fmt_num(th.f), fmt_num(th.u), fmt_num(th.s), fmt_num(th.c_v)])
                    .collect();
                write_csv(&out.join("thermo.csv"), &["T_temp", "F", "U", "S", "C_V"], &rows)?;
                rep.outputs = vec!["thermo.csv".into()];
            }
            rep.spectrum = Some(spectrum);
            rep.frequencies = freqs;
        }
        Observable::Regions | Observable::Wavespeed => {
            let partition = RegionPartition::uniform(sys.n_osc(), obs.regions, obs.spacing)?;
            rep.regions = run
                .samples
                .iter()
                .map(|s| region_energies(&s.psi, total, &partition, &sys))
                .collect::<Result<_>>()?;
            if obs.what == Observable::Regions {
                let mut rows = Vec::new();
                for (s, regs) in run.samples.iter().zip(&rep.regions) {
                    for (i, e) in regs.iter().enumerate() {
                        rows.push(vec![
                            fmt_num(s.t),
                            i.to_string(),
                            fmt_num(e.kinetic),
                            fmt_num(e.potential),
                            fmt_num(e.total),
                        ]);
                    }
                }
                write_csv(&out.join("regions.csv"), &["t", "region", "E", "V", "Ttot"], &rows)?;
                rep.outputs = vec!["regions.csv".into()];
            } else {
                let profile: Vec<Vec<f64>> =
                    rep.regions.iter().map(|regs| regs.iter().map(|e| e.total).collect()).collect();
                let speeds = wave_speed(&profile, &partition, cfg.dt, obs.floor)?;
                let mut rows = Vec::new();
                for (s, vs) in run.samples.iter().zip(&speeds.values) {
                    for (i, v) in vs.iter().enumerate() {
                        rows.push(vec![
                            fmt_num(s.t),
                            i.to_string(),
                            fmt_num(v.unwrap_or(f64::NAN)),
                            u8::from(v.is_some()).to_string(),
                        ]);
                    }
                }
                write_csv(&out.join("wavespeed.csv"), &["t", "region", "v", "defined_flag"], &rows)?;
                rep.speeds = Some(speeds);
                rep.outputs = vec!["wavespeed.csv".into()];
            }
        }
    }
    let mut derived = run.derived.clone();
    derived.insert("implementation".into(), run.implementation.label().into());
    finish(out, Command::Observe { run: cfg.clone(), observe: obs.clone() }, rep.outputs.clone(), derived.into())?;
    Ok(rep)
}

/// Resource counts of one benchmark row, or the reason it was skipped.
#[derive(Clone, Debug, PartialEq)]
pub enum BenchStatus {
    Ok,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Route or implementation label.
    pub label: String,
    /// Qubits of the circuit's registers. `resources.width` adds the
    /// scratch ancillas the cost model uses to lower multi-controlled gates.
    pub logical_width: usize,
    pub resources: ResourceReport,
    /// Kind-specific columns, in header order.
    pub extra: Vec<f64>,
    pub status: BenchStatus,
}

impl BenchRow {
    fn skipped(n: usize, label: &str, cap: usize, extra_len: usize) -> Self {
        BenchRow {
            n,
            label: label.into(),
            logical_width: 0,
            resources: ResourceReport::default(),
            extra: vec![f64::NAN; extra_len],
            status: BenchStatus::Skipped(format!("N > {cap}")),
        }
    }
}

/// Places `prep` on the system register and the extra ancillas above
/// `evolution`, then appends `evolution`.
pub fn compose_end_to_end(prep: &Circuit, system_qubits: usize, evolution: &Circuit) -> Circuit {
    let ew = evolution.width();
    let extra = prep.width() - system_qubits;
    let mut c = Circuit::with_width(ew + extra);
    let map: Vec<usize> = (0..system_qubits).chain(ew..ew + extra).collect();
    c.append_mapped(prep, &map, &[]);
    c.append(evolution);
    c
}

fn bench_header(kind: &BenchKind) -> Vec<&'static str> {
    let mut h = vec!["N", "label", "width", "logical_width", "depth", "gates", "cx"];
    h.extend(match kind {
        BenchKind::Stateprep => vec![],
        BenchKind::Trotter => vec!["L", "Lambda", "r_st"],
        BenchKind::Endtoend => vec!["cos_degree", "sin_degree"],
        BenchKind::Ratio => vec!["bound", "ratio"],
    });
    h.push("status");
    h
}

fn bench_rows_for(cfg: &BenchConfig, n: usize) -> Result<Vec<BenchRow>> {
    let sys = SpringMassSystem::preset(cfg.preset, n)?;
    let ok = |label: &str, c: &Circuit, extra: Vec<f64>| BenchRow {
        n,
        label: label.into(),
        logical_width: c.width(),
        resources: resource_report(c),
        extra,
        status: BenchStatus::Ok,
    };
    Ok(match cfg.kind {
        BenchKind::Stateprep => {
            let mut rows = Vec::new();
            if n <= MATRIX_CAP {
                rows.push(ok("sparse", &sparse_prepare(&initial_state_vector(&sys)?)?.circuit, vec![]));
            } else {
                rows.push(BenchRow::skipped(n, "sparse", MATRIX_CAP, 0));
            }
            if n <= CIRCUIT_CAP {
                rows.push(ok("oracle", &oracle_prepare_unsimulated(&sys, cfg.r_bits, cfg.w_cap)?.0, vec![]));
            } else {
                rows.push(BenchRow::skipped(n, "oracle", CIRCUIT_CAP, 0));
            }
            rows
        }
        BenchKind::Ratio => {
            if n > MATRIX_CAP {
                return Ok(vec![BenchRow::skipped(n, "sparse", MATRIX_CAP, 2)]);
            }
            let c = sparse_prepare(&initial_state_vector(&sys)?)?.circuit;
            let res = resource_report(&c);
            let bound = gin_bound(&sys, cfg.d, cfg.eps)?;
            vec![BenchRow {
                n,
                label: "sparse".into(),
                logical_width: c.width(),
                resources: res,
                extra: vec![bound, res.total_gates as f64 / bound],
                status: BenchStatus::Ok,
            }]
        }
        BenchKind::Trotter => {
            if n > CIRCUIT_CAP {
                return Ok(vec![BenchRow::skipped(n, "I", CIRCUIT_CAP, 3)]);
            }
            let decomp = pauli_decompose(&hamiltonian(&sys).to_dense())?;
            let r_st = cfg.r_st.unwrap_or(DEFAULT_R_ST);
            let c = trotter_circuit(&decomp, cfg.t, r_st);
            vec![ok("I", &c, vec![decomp.len() as f64, decomp.lambda(), r_st as f64])]
        }
        BenchKind::Endtoend => {
            if n > CIRCUIT_CAP {
                return Ok(vec![BenchRow::skipped(n, "II", CIRCUIT_CAP, 2), BenchRow::skipped(n, "III", CIRCUIT_CAP, 2)]);
            }
            let evolver = QsvtEvolver::new(&sys, cfg.r_bits, cfg.eps)?;
            let (qc, plan) = evolver.circuit(cfg.t)?;
            let degrees = vec![plan.cos_degree() as f64, plan.sin_degree() as f64];
            let s = evolver.be_h.system_qubits;
            let oracle = oracle_prepare_unsimulated(&sys, cfg.r_bits, cfg.w_cap)?.0;
            let sparse = sparse_prepare(&initial_state_vector(&sys)?)?.circuit;
            vec![
                ok("II", &compose_end_to_end(&oracle, s, &qc), degrees.clone()),
                ok("III", &compose_end_to_end(&sparse, s, &qc), degrees),
            ]
        }
    })
}

/// Runs a resource sweep and writes its CSV and manifest.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path) -> Result<Vec<BenchRow>> {
    if cfg.ns.is_empty() {
        return Err(Error::InvalidInput("benchmark needs at least one N".into()));
    }
    if let Some(&bad) = cfg.ns.iter().find(|&&n| n < 2 || !n.is_power_of_two()) {
        return Err(Error::InvalidInput(format!("N must be a power of two ≥ 2, got {bad}")));
    }
    if !(cfg.eps.is_finite() && cfg.eps > 0.0) || !(2..=16).contains(&cfg.r_bits) || cfg.r_st == Some(0) {
        return Err(Error::InvalidInput("eps must be positive, r-bits in 2..=16 and r-st ≥ 1".into()));
    }
    #[cfg(feature = "parallel")]
    let per_n: Vec<Vec<BenchRow>> = {
        use rayon::prelude::*;
        cfg.ns.par_iter().map(|&n| bench_rows_for(cfg, n)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_n: Vec<Vec<BenchRow>> = cfg.ns.iter().map(|&n| bench_rows_for(cfg, n)).collect::<Result<_>>()?;
    let rows: Vec<BenchRow> = per_n.into_iter().flatten().collect();
    fs::create_dir_all(out)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.n.to_string(), r.label.clone()];
            let res = &r.resources;
            match &r.status {
                BenchStatus::Ok => {
                    v.extend(
                        [res.width, r.logical_width, res.depth, res.total_gates, res.cx_gates].map(|x| x.to_string()),
                    );
                    v.extend(r.extra.iter().map(|&x| fmt_num(x)));
                    v.push("ok".into());
                }
                BenchStatus::Skipped(why) => {
                    v.extend(std::iter::repeat_n(String::new(), 5 + r.extra.len()));
                    v.push(format!("skipped: {why}"));
                }
            }
            v
        })
        .collect();
    let file = cfg.kind.file_name();
    write_csv(&out.join(file), &bench_header(&cfg.kind), &csv_rows)?;
    finish(out, Command::Bench { bench: cfg.clone() }, vec![file.into()], serde_json::Value::Null)?;
    Ok(rows)
}

/// Model summary written by `oscsim model`.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub system: SystemSpec,
    pub n_osc: usize,
    pub qubits: usize,
    pub initial_energy: f64,
    pub kinetic_energy: f64,
    pub potential_energy: f64,
    pub normal_frequencies: Vec<f64>,
    /// Nonzero entries `(row, column, value)` of `B`, columns as pair
    /// indices `j·N + k`.
    pub b_entries: Vec<(usize, usize, f64)>,
    pub hamiltonian_entries: Vec<(usize, usize, f64)>,
    /// Nonzero amplitudes `(index, re, im)` of the initial state.
    pub initial_state: Vec<(usize, f64, f64)>,
}

pub fn cmd_model(source: &SystemSource, out: &Path) -> Result<ModelSummary> {
    let sys = source.build()?;
    let summary = ModelSummary {
        system: SystemSpec::from_system(&sys),
        n_osc: sys.n_osc(),
        qubits: 2 * sys.n_bits() + 1,
        initial_energy: sys.initial_energy(),
        kinetic_energy: sys.kinetic_energy(sys.v0()),
        potential_energy: sys.potential_energy(sys.x0()),
        normal_frequencies: normal_modes(&sys)?.frequencies,
        b_entries: b_entries(&sys),
        hamiltonian_entries: hamiltonian(&sys).entries().to_vec(),
        initial_state: initial_state_sparse(&sys)?.into_iter().map(|(i, a)| (i, a.re, a.im)).collect(),
    };
    fs::create_dir_all(out)?;
    write_json_atomic(&out.join("model.json"), &summary)?;
    finish(out, Command::Model { system: source.clone() }, vec!["model.json".into()], serde_json::Value::Null)?;
    Ok(summary)
}

/// Re-runs the command recorded in a manifest, writing into `out`.
pub fn replay(manifest: &Path, out: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    match &m.command {
        Command::Evolve { run } => cmd_evolve(run, out).map(|r| r.manifest),
        Command::Observe { run, observe } => {
            cmd_observe(run, observe, out)?;
            read_manifest(out)
        }
        Command::Bench { bench } => {
            cmd_bench(bench, out)?;
            read_manifest(out)
        }
        Command::Model { system } => {
            cmd_model(system, out)?;
            read_manifest(out)
        }
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
}

/// Output paths listed in a manifest, resolved against `dir`.
pub fn manifest_outputs(m: &Manifest, dir: &Path) -> Vec<PathBuf> {
    m.outputs.iter().map(|f| dir.join(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_matrix() {
        assert_eq!(implementation(Route::Trotter, PrepRoute::Sparse).unwrap(), Implementation::I);
        assert_eq!(implementation(Route::Qsvt, PrepRoute::Oracle).unwrap(), Implementation::II);
        assert_eq!(implementation(Route::Qsvt, PrepRoute::Sparse).unwrap(), Implementation::III);
        assert!(implementation(Route::Trotter, PrepRoute::Oracle).is_err());
        assert!(implementation(Route::Exact, PrepRoute::Oracle).is_err());
    }

    #[test]
    fn time_grid_edges() {
        assert_eq!(time_grid(0.0, 0.0, 0.1).unwrap(), vec![0.0]);
        assert_eq!(time_grid(0.0, 5.0, 0.1).unwrap().len(), 51);
        assert!(time_grid(0.0, 1.0, 0.3).is_err());
        assert!(time_grid(1.0, 0.0, 0.1).is_err());
        assert!(time_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(digits.len(), 17);
        }
    }

    #[test]
    fn config_serializes_round_trip() {
        let mut cfg = RunConfig::new(SystemSource::Preset { preset: Preset::Impl2Chain, n: 4 });
        cfg.route = Route::Qsvt;
        cfg.r_st = Some(7);
        let cmd = Command::Evolve { run: cfg };
        let back: Command = serde_json::from_str(&serde_json::to_string(&cmd).unwrap()).unwrap();
        assert_eq!(back, cmd);
    }
}
