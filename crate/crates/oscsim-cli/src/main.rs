//! `oscsim`: evolve, observe, benchmark and inspect oscillator systems.
//!
//! Exit codes: 0 on success, 2 on a validation error, 3 when a resource cap
//! is exceeded, 1 for anything else (I/O, numerical failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oscsim::bench::{
    cmd_bench, cmd_evolve, cmd_model, cmd_observe, replay, BenchConfig, BenchKind, BenchStatus, ObserveConfig,
    Observable, Route, RunConfig, SystemSource, SystemSpec,
};
use oscsim::model::Preset;
use oscsim::stateprep::PrepRoute;
use oscsim::Error;

#[derive(Parser)]
#[command(name = "oscsim", version, about = "Quantum simulation of coupled oscillator chains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve a system and write the kinetic-energy series.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evolve inline and write an observable table.
    Observe {
        #[command(flatten)]
        run: RunArgs,
        /// spectrum, thermo, regions or wavespeed.
        #[arg(long)]
        what: String,
        /// Number of equal coarse-grained regions.
        #[arg(long, default_value_t = 2)]
        regions: usize,
        /// Spacing between oscillators, used by the wave speed.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        /// Temperatures for the thermodynamic table.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        temps: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        floor: f64,
    },
    /// Resource sweeps over N.
    Bench {
        /// stateprep, trotter, endtoend or ratio.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "impl1-chain")]
        preset: String,
        /// Comma-separated list of oscillator counts.
        #[arg(long = "n", value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long = "r-bits", default_value_t = 4)]
        r_bits: usize,
        #[arg(long = "r-st")]
        r_st: Option<usize>,
        /// Evolution time of the benchmarked circuits.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Sparsity used in the preparation bound.
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the model matrices and initial state as JSON.
    Model {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate the outputs recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long, default_value = "impl1-chain")]
    preset: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// JSON system description; overrides --preset and --n.
    #[arg(long)]
    system: Option<PathBuf>,
}

impl SystemArgs {
    fn source(&self) -> oscsim::Result<SystemSource> {
        match &self.system {
            Some(path) => Ok(SystemSource::Inline(SystemSpec::read(path)?)),
            None => Ok(SystemSource::Preset { preset: Preset::parse(&self.preset)?, n: self.n }),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value = "trotter")]
    route: String,
    #[arg(long, default_value = "sparse")]
    prep: String,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 5.0)]
    t1: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long = "r-bits", default_value_t = 4)]
    r_bits: usize,
    #[arg(long = "r-st")]
    r_st: Option<usize>,
    /// Largest number of Grover iterations for oracle preparation.
    #[arg(long = "w-cap", default_value_t = oscsim::bench::DEFAULT_W_CAP)]
    w_cap: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> oscsim::Result<RunConfig> {
        let mut cfg = RunConfig::new(self.system.source()?);
        cfg.route = Route::parse(&self.route)?;
        cfg.prep = PrepRoute::parse(&self.prep)?;
        cfg.t0 = self.t0;
        cfg.t1 = self.t1;
        cfg.dt = self.dt;
        cfg.eps = self.eps;
        cfg.r_bits = self.r_bits;
        cfg.r_st = self.r_st;
        cfg.w_cap = self.w_cap;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> oscsim::Result<()> {
    match cli.command {
        Cmd::Evolve { run } => {
            let rep = cmd_evolve(&run.config()?, &run.out)?;
            let worst = rep.rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
            println!(
                "implementation {}: {} samples, max |E_quantum - E_classical| = {worst:.3e}",
                rep.implementation.label(),
                rep.rows.len()
            );
        }
        Cmd::Observe { run, what, regions, spacing, temps, floor } => {
            let obs = ObserveConfig { what: Observable::parse(&what)?, regions, spacing, temperatures: temps, floor };
            let rep = cmd_observe(&run.config()?, &obs, &run.out)?;
            if !rep.frequencies.is_empty() {
                println!("normal frequencies: {:?}", rep.frequencies);
            }
            println!("wrote {}", rep.outputs.join(", "));
        }
        Cmd::Bench { kind, preset, ns, eps, r_bits, r_st, t, d, out } => {
            let mut cfg = BenchConfig::new(BenchKind::parse(&kind)?, Preset::parse(&preset)?, ns);
            cfg.eps = eps;
            cfg.r_bits = r_bits;
            cfg.r_st = r_st;
            cfg.t = t;
            cfg.d = d;
            let rows = cmd_bench(&cfg, &out)?;
            let skipped = rows.iter().filter(|r| r.status != BenchStatus::Ok).count();
            println!("wrote {} ({} rows, {skipped} skipped)", cfg.kind.file_name(), rows.len());
        }
        Cmd::Model { system, out } => {
            let s = cmd_model(&system.source()?, &out)?;
            println!("N = {}, {} qubits, T = {}", s.n_osc, s.qubits, s.initial_energy);
        }
        Cmd::Replay { manifest, out } => {
            let m = replay(&manifest, &out)?;
            println!("wrote {}", m.outputs.join(", "));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceCap(_) | Error::QubitCap { .. } => 3,
        Error::InvalidSystem(_)
        | Error::InvalidInput(_)
        | Error::ZeroEnergy
        | Error::FixedPointRange { .. }
        | Error::Dimension { .. }
        | Error::UnsupportedTopology(_)
        | Error::NotHermitian(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
