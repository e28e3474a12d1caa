use num_complex::Complex64;
use oscsim::model::{initial_state_vector, Preset, SpringMassSystem};
use oscsim::stateprep::*;
use oscsim::statevector::{resource_report, Circuit, Control, ExecPolicy, RegisterLayout, StateVector};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn two_body_vector_is_loaded_with_its_phase() {
    let sys = SpringMassSystem::two_body_example();
    let psi0 = initial_state_vector(&sys).unwrap();
    let ps = sparse_prepare(&psi0).unwrap();
    let k = 1.0 / 3f64.sqrt();
    let want = [c(k, 0.0), c(k, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -k), c(0.0, 0.0), c(0.0, 0.0)];
    for (a, b) in ps.prepared.iter().zip(want) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn sparse_route_is_exact_on_presets() {
    for preset in [Preset::Impl1Chain, Preset::Impl2Chain] {
        for n in [2usize, 4, 8, 16] {
            let sys = SpringMassSystem::preset(preset, n).unwrap();
            let ps = sparse_prepare(&initial_state_vector(&sys).unwrap()).unwrap();
            assert!(ps.fidelity >= 1.0 - 1e-8, "{preset:?} N={n}: {}", ps.fidelity);
            assert!(resource_report(&ps.circuit).total_gates > 0);
        }
    }
}

#[test]
fn oracle_good_component_matches_simulation() {
    let sys = SpringMassSystem::preset(Preset::Impl2Chain, 4).unwrap();
    let prep = oracle_prepare_circuit(&sys, 4).unwrap();
    let mut sv = StateVector::zero(prep.circuit.width());
    sv.run(&prep.circuit, ExecPolicy::default()).unwrap();
    let dim = prep.good_component.len();
    let mut got = vec![c(0.0, 0.0); dim];
    for (i, a) in sv.amplitudes().iter().enumerate() {
        if prep.good.contains(i) {
            got[i & (dim - 1)] += *a;
        }
    }
    for (a, b) in got.iter().zip(&prep.good_component) {
        assert!((a - b).norm() < 1e-12, "{a} vs {b}");
    }
    println!("p_good = {}", prep.good_probability());
}

#[test]
fn oracle_route_reproduces_the_initial_state() {
    let sys = SpringMassSystem::preset(Preset::Impl2Chain, 4).unwrap();
    let ps = oracle_prepare(&sys, 4, 8).unwrap();
    let rep = ps.amplification.unwrap();
    println!("theta={} w={} success={} fidelity={}", rep.theta, rep.iterations, rep.measured_success, ps.fidelity);
    assert!(ps.fidelity >= 0.999);
    assert!((rep.measured_success - rep.predicted_success).abs() < 1e-10);
}

fn block_norms(psi: &[Complex64], n_osc: usize) -> (f64, f64) {
    let nn = n_osc * n_osc;
    let e: f64 = psi[..nn].iter().map(|a| a.norm_sqr()).sum();
    let u: f64 = psi[nn..].iter().map(|a| a.norm_sqr()).sum();
    (e, u)
}

#[test]
fn oracle_route_energy_split() {
    let sys = SpringMassSystem::preset(Preset::Impl2Chain, 4).unwrap();
    let ps = oracle_prepare(&sys, 4, 8).unwrap();
    let t = sys.initial_energy();
    let (e, u) = block_norms(&ps.prepared, 4);
    assert!((t * e - sys.kinetic_energy(sys.v0())).abs() < 1e-10);
    assert!((t * u - sys.potential_energy(sys.x0())).abs() < 1e-10);
}

#[test]
fn oracle_route_without_velocities_has_no_velocity_branch() {
    let base = SpringMassSystem::preset(Preset::Impl2Chain, 4).unwrap();
    let sys = base.with_initial(base.x0().to_vec(), vec![0.0; 4]).unwrap();
    let ps = oracle_prepare(&sys, 4, 8).unwrap();
    let (e, _) = block_norms(&ps.prepared, 4);
    assert!(e < 1e-24);
    assert!(ps.fidelity >= 0.999);
}

#[test]
fn oracle_route_with_walls_within_precision_budget() {
    for n in [2usize, 4] {
        let sys = SpringMassSystem::preset(Preset::Impl1Chain, n).unwrap();
        for r in 2..=5usize {
            let ps = oracle_prepare(&sys, r, 8).unwrap();
            let rep = ps.amplification.unwrap();
            println!("impl1 N={n} r={r}: fidelity={:.6} theta={:.4} w={}", ps.fidelity, rep.theta, rep.iterations);
            assert!(ps.fidelity >= 1.0 - 10.0 * 2f64.powi(-(r as i32)));
        }
    }
}

#[test]
fn gin_ratio_peaks_early_and_then_decreases() {
    let mut ratios = Vec::new();
    for n in [2usize, 4, 8, 16, 32, 64, 128, 256] {
        let sys = SpringMassSystem::preset(Preset::Impl1Chain, n).unwrap();
        let ps = sparse_prepare(&initial_state_vector(&sys).unwrap()).unwrap();
        let gates = resource_report(&ps.circuit).total_gates;
        ratios.push(gin_bound_ratio(&sys, 2, 1e-2, gates).unwrap());
    }
    let argmax = (0..ratios.len()).max_by(|&i, &j| ratios[i].total_cmp(&ratios[j])).unwrap();
    assert!(argmax <= 3, "{ratios:?}");
    assert!(ratios[4..].windows(2).all(|w| w[1] <= w[0]), "{ratios:?}");
}

#[test]
fn t_max_over_t_is_constant_beyond_four_oscillators() {
    for n in [4usize, 8, 64] {
        let sys = SpringMassSystem::preset(Preset::Impl1Chain, n).unwrap();
        assert!((t_max(&sys) / sys.initial_energy() - 0.3125 / 0.28125).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sparse_loader_prepares_arbitrary_sparse_states(
        entries in proptest::collection::btree_map(0usize..64, (-1.0f64..1.0, -1.0f64..1.0), 1..10),
        controlled in any::<bool>(),
    ) {
        let amps: Vec<(usize, Complex64)> = entries.iter().map(|(&i, &(re, im))| (i, c(re, im))).collect();
        let norm: f64 = amps.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let mut layout = RegisterLayout::new();
        let reg = layout.add("s", 6);
        let ctl = layout.add("c", 1);
        let mut circ = Circuit::new(layout);
        let controls = if controlled { vec![Control::on(ctl.offset)] } else { vec![] };
        if controlled {
            circ.x(ctl.offset);
        }
        append_sparse_load(&mut circ, &amps, reg, &controls).unwrap();
        let mut sv = StateVector::zero(7);
        sv.run(&circ, ExecPolicy::Sequential).unwrap();
        let offset = if controlled { 64 } else { 0 };
        for (i, a) in &amps {
            prop_assert!((sv.amplitudes()[offset + i] - a / norm).norm() < 1e-10);
        }
    }
}
