//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.
//! Runs as a plain binary so the lines are always visible.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use oscsim::bench::{
    cmd_bench, energy_rows, run_route, BenchConfig, BenchKind, BenchStatus, Route, RunConfig, SystemSource,
};
use oscsim::classical::{classical_kinetic_energy, normal_modes, ExactPropagator};
use oscsim::dataload::{
    append_inequality_encode, append_inequality_encode_const, sparsity_oracle_circuit, LookupTable, SparsityOracle,
};
use oscsim::model::{b_matrix, hamiltonian, initial_state_vector, Preset, SpringMassSystem};
use oscsim::observables::{
    extract_normal_frequencies, frequency_spectrum, kinetic_energy, region_energies, vibrational_thermo,
    EnergySeries, RegionPartition,
};
use oscsim::qsvt::{block_encode_bdagger, block_encode_hamiltonian, QsvtEvolver};
use oscsim::stateprep::{oracle_prepare, PrepRoute};
use oscsim::statevector::{circuit_unitary, fidelity, Circuit, ExecPolicy, RegisterLayout, StateVector};
use oscsim::trotter::{evolve_trotter, pauli_decompose, trotter_circuit};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

fn crit1_golden() -> Outcome {
    let sys = SpringMassSystem::two_body_example();
    // Pair columns (0,0), (0,1), (1,1) of the padded B; (1,0) is unused.
    let b = b_matrix(&sys);
    let want_b = [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]];
    for r in 0..2 {
        for (k, col) in [0usize, 1, 3].into_iter().enumerate() {
            ensure((b[(r, col)] - want_b[r][k]).abs() < 1e-12, || format!("B[{r},{col}] = {}", b[(r, col)]))?;
        }
        ensure(b[(r, 2)] == 0.0, || "unused pair column is nonzero".into())?;
    }
    let h = hamiltonian(&sys).to_dense();
    let mut want_h = DMatrix::<f64>::zeros(8, 8);
    for (r, c, v) in [(0, 5, -1.0), (1, 5, 1.0), (5, 0, -1.0), (5, 1, 1.0)] {
        want_h[(r, c)] = v;
    }
    ensure((&h - &want_h).abs().max() < 1e-12, || format!("H differs:\n{h}"))?;
    let psi = initial_state_vector(&sys).map_err(|e| e.to_string())?;
    let k = 1.0 / 3f64.sqrt();
    let want = [c64(k, 0.0), c64(k, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, -k), c64(0.0, 0.0), c64(0.0, 0.0)];
    let err = psi.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    ensure(err < 1e-12, || format!("initial state error {err:e}"))?;
    Ok("B, H and ψ(0) match to 1e-12".into())
}

fn crit2_trotter_energy() -> Outcome {
    let sys = SpringMassSystem::two_body_example();
    let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let samples = evolve_trotter(&sys, &times, 20).map_err(|e| e.to_string())?;
    let worst = samples.iter().map(|s| s.abs_error()).fold(0.0, f64::max);
    ensure(worst < 0.1, || format!("max |ΔE| = {worst}"))?;
    Ok(format!("max |E_q − E_cl| = {worst:.3e} < 0.1 over 51 points"))
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn crit3_trotter_order() -> Outcome {
    let mut report = Vec::new();
    for (name, sys) in [
        ("two-body", SpringMassSystem::two_body_example()),
        ("impl1-chain", SpringMassSystem::preset(Preset::Impl1Chain, 2).unwrap()),
        ("impl2-chain", SpringMassSystem::preset(Preset::Impl2Chain, 2).unwrap()),
    ] {
        let h = hamiltonian(&sys).to_dense();
        let decomp = pauli_decompose(&h).map_err(|e| e.to_string())?;
        let exact = ExactPropagator::new(&h).map_err(|e| e.to_string())?.unitary(1.0);
        let rs = [4usize, 8, 16, 32, 64];
        let errs: Vec<f64> =
            rs.iter().map(|&r| spectral_norm(&(circuit_unitary(&trotter_circuit(&decomp, 1.0, r)) - &exact))).collect();
        if errs.iter().all(|&e| e < 1e-13) {
            report.push(format!("{name}: commuting terms, exact"));
            continue;
        }
        let xs: Vec<f64> = rs.iter().map(|&r| (r as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let s = slope(&xs, &ys);
        ensure((-2.5..=-1.7).contains(&s), || format!("{name}: slope {s}"))?;
        report.push(format!("{name}: slope {s:.3}"));
    }
    Ok(report.join(", "))
}

fn image(c: &Circuit, input: usize) -> Result<usize, String> {
    let mut sv = StateVector::basis(c.width(), input);
    sv.run(c, ExecPolicy::default()).map_err(|e| e.to_string())?;
    let (idx, amp) =
        sv.amplitudes().iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
    ensure((amp - c64(1.0, 0.0)).norm() < 1e-12, || "not a basis permutation".into())?;
    Ok(idx)
}

fn crit4_oracle_table() -> Outcome {
    let mut checked = 0;
    for preset in [Preset::Impl1Chain, Preset::Impl2Chain] {
        for n_osc in [2usize, 4, 8, 16] {
            let sys = SpringMassSystem::preset(preset, n_osc).unwrap();
            let so = SparsityOracle::chain(&sys).map_err(|e| e.to_string())?;
            let c = sparsity_oracle_circuit(&so);
            let l = c.layout().get("l").unwrap();
            let k = c.layout().get("k").unwrap();
            for j in 0..n_osc {
                for slot in 0..so.slots() {
                    let input = j | slot << l.offset;
                    let out = image(&c, input)?;
                    ensure(out == input | so.column(j, slot) << k.offset, || format!("N={n_osc} j={j} l={slot}"))?;
                    checked += 1;
                }
            }
            ensure(so.column(0, 0) == 1, || "f(0,0) ≠ 1".into())?;
            ensure(so.column(n_osc - 1, 0) == n_osc - 2, || format!("f(N−1,0) ≠ N−2 at N={n_osc}"))?;
        }
    }
    Ok(format!("{checked} basis inputs, f(0,0)=1 and f(N−1,0)=N−2"))
}

fn inequality_amplitude(r: usize, xi: u64, fused: bool) -> f64 {
    let mut layout = RegisterLayout::new();
    let key = layout.add("key", 1);
    let x = layout.add("x", r);
    let z = layout.add("z", r);
    let f = layout.add("f", 1);
    let mut c = Circuit::new(layout);
    let mut table = LookupTable::new(r);
    if xi > 0 {
        table.entries.insert(0, xi);
    }
    if fused {
        append_inequality_encode_const(&mut c, &[key], &table, x, f.offset, &[]);
    } else {
        append_inequality_encode(&mut c, &[key], &table, x, z, f.offset, &[]);
    }
    let mut sv = StateVector::zero(c.width());
    sv.run(&c, ExecPolicy::Sequential).unwrap();
    sv.amplitudes()[0].re
}

fn crit5_inequality() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in 1..=4usize {
        for xi in 0..1u64 << r {
            for fused in [false, true] {
                let got = inequality_amplitude(r, xi, fused);
                worst = worst.max((got - xi as f64 / (1u64 << r) as f64).abs());
            }
        }
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("all ξ̃ for r ≤ 4, max deviation {worst:.1e}"))
}

fn crit6_amplification() -> Outcome {
    let sys = SpringMassSystem::preset(Preset::Impl2Chain, 4).unwrap();
    let ps = oracle_prepare(&sys, 4, 64).map_err(|e| e.to_string())?;
    let rep = ps.amplification.unwrap();
    let w = (PI / (4.0 * rep.theta)).floor() as usize;
    let law = ((2 * w + 1) as f64 * rep.theta).sin().powi(2);
    ensure(rep.iterations == w, || format!("w = {} vs ⌊π/4θ⌋ = {w}", rep.iterations))?;
    let dev = (rep.measured_success - law).abs();
    ensure(dev < 1e-10, || format!("measured {} vs law {law}", rep.measured_success))?;
    Ok(format!("θ = {:.4}, w = {w}, success {:.6}, deviation {dev:.1e}", rep.theta, rep.measured_success))
}

fn crit7_block_encoding() -> Outcome {
    let r = 4;
    let mut worst_rel: f64 = 0.0;
    for preset in [Preset::Impl1Chain, Preset::Impl2Chain] {
        for n in [2usize, 4] {
            let sys = SpringMassSystem::preset(preset, n).unwrap();
            let be = block_encode_bdagger(&sys, r).map_err(|e| e.to_string())?;
            let block = be.extract_block().map_err(|e| e.to_string())? * c64(be.lambda, 0.0);
            let b = b_matrix(&sys);
            let nn = n * n;
            let mut want = DMatrix::<Complex64>::zeros(nn, nn);
            for j in 0..n {
                for c in 0..nn {
                    want[(c, j)] = c64(b[(j, c)], 0.0);
                }
            }
            let rel = max_abs(&(block - &want)) / max_abs(&want);
            ensure(rel <= 2f64.powi(1 - r as i32), || format!("{} N={n}: U_B† relative error {rel}", preset.name()))?;
            worst_rel = worst_rel.max(rel);

            let be_h = block_encode_hamiltonian(&be).map_err(|e| e.to_string())?;
            let hb = be_h.extract_block().map_err(|e| e.to_string())?;
            let herm = max_abs(&(hb.adjoint() - &hb));
            ensure(herm < 1e-10, || format!("{} N={n}: U_H block not Hermitian ({herm:e})", preset.name()))?;
            let h = hamiltonian(&sys).to_dense().map(|v| c64(v, 0.0));
            // Best proportionality constant and the residual around it.
            let num: Complex64 = h.iter().zip(hb.iter()).map(|(a, b)| a.conj() * b).sum();
            let den: f64 = h.iter().map(|a| a.norm_sqr()).sum();
            let scale = num / den;
            let resid = max_abs(&(&hb - &h * scale));
            ensure(resid <= be_h.eps + 1e-10, || format!("{} N={n}: U_H residual {resid:e}", preset.name()))?;
            ensure((scale.re * be_h.lambda - 1.0).abs() < 1e-10 && scale.im.abs() < 1e-12, || {
                format!("{} N={n}: U_H block is {scale} × H, λ = {}", preset.name(), be_h.lambda)
            })?;
        }
    }
    Ok(format!("4 systems, worst U_B† relative error {worst_rel:.1e} ≤ 2^-3; U_H = H/λ"))
}

fn crit8_qsvt() -> Outcome {
    let mut worst: f64 = 1.0;
    for sys in [SpringMassSystem::two_body_example(), SpringMassSystem::preset(Preset::Impl1Chain, 2).unwrap()] {
        let psi0 = initial_state_vector(&sys).unwrap();
        let prop = ExactPropagator::new(&hamiltonian(&sys).to_dense()).unwrap();
        let evolver = QsvtEvolver::new(&sys, 4, 1e-4).map_err(|e| e.to_string())?;
        for t in [0.5, 1.0, 2.0] {
            let ev = evolver.evolve(&psi0, t).map_err(|e| e.to_string())?;
            let f = fidelity(&ev.psi, &prop.evolve(&psi0, t).unwrap());
            ensure(f >= 1.0 - 1e-3, || format!("t = {t}: fidelity {f}"))?;
            worst = worst.min(f);
        }
    }
    Ok(format!("worst fidelity {worst:.10} ≥ 1 − 1e-3 (two-body and impl1-chain N=2)"))
}

fn crit9_routes() -> Outcome {
    let mut report = Vec::new();
    for (route, prep) in [(Route::Trotter, PrepRoute::Sparse), (Route::Qsvt, PrepRoute::Oracle), (Route::Qsvt, PrepRoute::Sparse)]
    {
        let mut cfg = RunConfig::new(SystemSource::Preset { preset: Preset::Impl2Chain, n: 4 });
        cfg.route = route;
        cfg.prep = prep;
        cfg.dt = 0.5;
        let sys = cfg.system.build().unwrap();
        let run = run_route(&sys, &cfg, &cfg.times().unwrap()).map_err(|e| e.to_string())?;
        let rows = energy_rows(&sys, &run).map_err(|e| e.to_string())?;
        for r in &rows {
            ensure(r.abs_error <= r.budget, || {
                format!("{} t={}: error {:e} above budget {:e}", run.implementation.label(), r.t, r.abs_error, r.budget)
            })?;
        }
        let worst = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        let budget = rows.iter().map(|r| r.budget).fold(0.0, f64::max);
        report.push(format!("{}: max error {worst:.1e} (budget ≤ {budget:.1e})", run.implementation.label()));
    }
    Ok(report.join("; "))
}

fn crit10_spectrum() -> Outcome {
    let sys = SpringMassSystem::two_body_example();
    let h = hamiltonian(&sys).to_dense();
    let prop = ExactPropagator::new(&h).unwrap();
    let psi0 = initial_state_vector(&sys).unwrap();
    let times: Vec<f64> = (0..=800).map(|k| k as f64 * 0.05).collect();
    let values = times
        .iter()
        .map(|&t| kinetic_energy(&prop.evolve(&psi0, t).unwrap(), sys.initial_energy(), 2))
        .collect();
    let spec = frequency_spectrum(&EnergySeries::new(times, values, sys.initial_energy()).unwrap())
        .map_err(|e| e.to_string())?;
    let mag = spec.magnitudes();
    let peak = (1..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    ensure((spec.omega[peak] - 2.0 * 2f64.sqrt()).abs() <= spec.bin_width, || {
        format!("dominant peak at {} (bin {})", spec.omega[peak], spec.bin_width)
    })?;
    let got = extract_normal_frequencies(&spec).map_err(|e| e.to_string())?;
    ensure(got.len() == 1, || format!("extracted {got:?}"))?;
    ensure((got[0] - 2f64.sqrt()).abs() <= spec.bin_width / 2.0, || format!("ω = {}", got[0]))?;
    Ok(format!("peak at {:.4} ≈ 2√2, extracted ω = {:.4} ≈ √2", spec.omega[peak], got[0]))
}

fn ln_z(freqs: &[f64], beta: f64) -> f64 {
    freqs.iter().filter(|&&w| w > 0.0).map(|w| -beta * w / 2.0 - (-(-beta * w).exp()).ln_1p()).sum()
}

fn crit11_thermo() -> Outcome {
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for freqs in [vec![2f64.sqrt()], vec![0.0, 0.4, 1.1, 2.3]] {
        for temp in [0.3, 0.7, 1.0, 2.5, 6.0] {
            let th = vibrational_thermo(&freqs, temp).map_err(|e| e.to_string())?;
            let beta = 1.0 / temp;
            let l = |b: f64| ln_z(&freqs, b);
            let u = -(l(beta - 2.0 * h) - 8.0 * l(beta - h) + 8.0 * l(beta + h) - l(beta + 2.0 * h)) / (12.0 * h);
            let c_v = beta * beta * (l(beta + h) - 2.0 * l(beta) + l(beta - h)) / (h * h);
            let f = -temp * l(beta);
            let s = l(beta) + beta * u;
            for (got, want) in [(th.f, f), (th.u, u), (th.s, s), (th.c_v, c_v)] {
                worst = worst.max((got - want).abs());
            }
        }
    }
    ensure(worst < 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("F, U, S, C_V at 5 temperatures, max deviation {worst:.1e}"))
}

fn crit12_conservation() -> Outcome {
    let sys = SpringMassSystem::preset(Preset::Impl1Chain, 8).unwrap();
    let prop = ExactPropagator::new(&hamiltonian(&sys).to_dense()).unwrap();
    let psi0 = initial_state_vector(&sys).unwrap();
    let p = RegionPartition::uniform(8, 2, 1.0).unwrap();
    let modes = normal_modes(&sys).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..40 {
        let t = 0.25 * k as f64;
        let psi = prop.evolve(&psi0, t).unwrap();
        let regs = region_energies(&psi, sys.initial_energy(), &p, &sys).map_err(|e| e.to_string())?;
        let sum: f64 = regs.iter().map(|e| e.total).sum();
        worst = worst.max((sum - sys.initial_energy()).abs());
        let kin: f64 = regs.iter().map(|e| e.kinetic).sum();
        ensure((kin - classical_kinetic_energy(&sys, &modes, t)).abs() < 1e-8, || format!("kinetic at t={t}"))?;
    }
    ensure(worst < 1e-8, || format!("max |Σ T_R − T| = {worst:e}"))?;
    Ok(format!("40 times, max |Σ_R T_R − T| = {worst:.1e}"))
}

fn bench(kind: BenchKind, preset: Preset, ns: Vec<usize>) -> Result<Vec<oscsim::bench::BenchRow>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows = cmd_bench(&BenchConfig::new(kind, preset, ns), dir.path()).map_err(|e| e.to_string())?;
    ensure(rows.iter().all(|r| r.status == BenchStatus::Ok), || "unexpected skipped row".into())?;
    Ok(rows)
}

/// Max residual of a least-squares line through `(xs, ys)`, and its slope.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let a = slope(xs, ys);
    let n = xs.len() as f64;
    let b = (ys.iter().sum::<f64>() - a * xs.iter().sum::<f64>()) / n;
    (a, xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).abs()).fold(0.0, f64::max))
}

fn crit13_scaling() -> Outcome {
    let ns: Vec<usize> = (1..=8).map(|k| 1usize << k).collect();
    let ratio: Vec<f64> = bench(BenchKind::Ratio, Preset::Impl1Chain, ns)?.iter().map(|r| r.extra[1]).collect();
    let argmax = (0..ratio.len()).max_by(|&i, &j| ratio[i].total_cmp(&ratio[j])).unwrap();
    ensure(argmax <= 2, || format!("(a) ratio peaks at N = {}: {ratio:?}", 2usize << argmax))?;
    ensure(ratio[4..].windows(2).all(|w| w[1] <= w[0]), || format!("(a) ratio rises beyond N = 32: {ratio:?}"))?;

    let small = vec![2usize, 4, 8, 16];
    let logs: Vec<f64> = small.iter().map(|&n| (n as f64).log2()).collect();
    // Register-level widths; the cost model's lowering scratch is reported
    // separately in the bench CSVs.
    let trotter: Vec<f64> =
        bench(BenchKind::Trotter, Preset::Impl1Chain, small.clone())?.iter().map(|r| r.logical_width as f64).collect();
    let e2e = bench(BenchKind::Endtoend, Preset::Impl2Chain, small.clone())?;
    let width_ii: Vec<f64> = e2e.iter().filter(|r| r.label == "II").map(|r| r.logical_width as f64).collect();
    for (name, w) in [("Trotter", &trotter), ("end-to-end", &width_ii)] {
        let (a, resid) = line_fit(&logs, w);
        ensure(a > 0.0 && resid <= 1.0, || format!("(b) {name} widths {w:?} not linear in log2 N"))?;
    }

    let mut gates = Vec::new();
    for pair in e2e.chunks(2) {
        let (ii, iii) = (&pair[0], &pair[1]);
        ensure(ii.label == "II" && iii.label == "III", || "unexpected row order".into())?;
        ensure(iii.resources.total_gates < ii.resources.total_gates, || {
            format!("(c) N={}: III {} ≥ II {}", ii.n, iii.resources.total_gates, ii.resources.total_gates)
        })?;
        gates.push(format!("{}:{}<{}", ii.n, iii.resources.total_gates, ii.resources.total_gates));
    }
    Ok(format!(
        "(a) ratio max at N={} and non-increasing from 32; (b) widths Trotter {trotter:?}, end-to-end {width_ii:?}; (c) gates III<II {}",
        2usize << argmax,
        gates.join(" ")
    ))
}

fn main() {
    let criteria: Vec<(u32, &str, Duration, fn() -> Outcome)> = vec![
        (1, "two-body golden B, H, ψ(0)", Duration::from_secs(1), crit1_golden),
        (2, "Trotter kinetic-energy error < 0.1 (N=2, r_st=20)", Duration::from_secs(60), crit2_trotter_energy),
        (3, "Trotter order slope in [−2.5, −1.7]", Duration::from_secs(120), crit3_trotter_order),
        (4, "sparsity oracle table", Duration::from_secs(60), crit4_oracle_table),
        (5, "inequality testing law", Duration::from_secs(60), crit5_inequality),
        (6, "amplitude amplification law", Duration::from_secs(120), crit6_amplification),
        (7, "block-encoding contract", Duration::from_secs(300), crit7_block_encoding),
        (8, "QSVT fidelity ≥ 1 − 1e-3", Duration::from_secs(600), crit8_qsvt),
        (9, "route equivalence I/II/III", Duration::from_secs(900), crit9_routes),
        (10, "spectrum peak 2√2, ω = √2", Duration::from_secs(60), crit10_spectrum),
        (11, "thermodynamics vs finite differences", Duration::from_secs(1), crit11_thermo),
        (12, "coarse-grained energy conservation", Duration::from_secs(60), crit12_conservation),
        (13, "scaling-shape benchmarks", Duration::from_secs(1800), crit13_scaling),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > budget => Err(format!("took {elapsed:.1?}, budget {budget:?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 13 acceptance criteria passed");
}
