use ndarray::Array2;
use num_complex::Complex64;
use rydberg_dsf::lattice::{build_chain_register, vdw_strength, InteractionRange, TfiParams};
use rydberg_dsf::operator::{tfi_hamiltonian, HamiltonianMatrix, RydbergSystem};
use rydberg_dsf::spectrum::{evolve_exact, Spectrum};
use rydberg_dsf::state::{expectation_z, fidelity, QuantumState};
use rydberg_dsf::state_prep::{
    optimize_hyperparameters, prepare_ground_state, qaoa_state, sample_waveforms, AdiabaticHyperparams,
    HyperparamTable, OptimizerKind, PrepSetup, QaoaParams, SweepDetuning, DEFAULT_PREP_DT,
};

/// Model-unit integration step of the numerics grid.
const NUMERICS_DT: f64 = 0.005;

fn ed_ground(l: usize) -> QuantumState {
    Spectrum::of(&tfi_hamiltonian(&TfiParams::critical(l)).unwrap()).unwrap().ground_state().state
}

fn setup(l: usize) -> PrepSetup {
    let system = RydbergSystem::new(build_chain_register(l, 1.0).unwrap(), 4.0, InteractionRange::Full).unwrap();
    PrepSetup::new(system, SweepDetuning::GlobalOnly, DEFAULT_PREP_DT).unwrap()
}

#[test]
fn sampled_waveforms_change_slowly_between_steps() {
    let table = HyperparamTable::builtin();
    let mut shapes: Vec<AdiabaticHyperparams> = table.entries.values().copied().collect();
    shapes.push(AdiabaticHyperparams::initial_guess(20.0));
    for hp in shapes {
        let samples = (hp.t_max / NUMERICS_DT).round() as usize;
        let w = sample_waveforms(&hp, samples);
        let bound = hp.p[0] / 10.0;
        for pair in w.windows(2) {
            let (d_omega, d_delta) = ((pair[1].1 - pair[0].1).abs(), (pair[1].2 - pair[0].2).abs());
            assert!(d_omega < bound && d_delta < bound, "t={:.2}: ΔΩ {d_omega:.3}, ΔΔ {d_delta:.3}, bound {bound:.3}", pair[0].0);
        }
    }
}

#[test]
fn best_so_far_trace_never_decreases() {
    let l = 3;
    for kind in [OptimizerKind::Hybrid, OptimizerKind::Nadam, OptimizerKind::NelderMead] {
        let r = optimize_hyperparameters(&setup(l), &ed_ground(l), &AdiabaticHyperparams::initial_guess(10.0), 40, kind).unwrap();
        assert!(!r.trace.is_empty() && r.trace.len() <= 40);
        let mut running = 0.0f64;
        for row in &r.trace {
            running = running.max(row.fidelity);
            assert_eq!(row.best, running, "{kind:?} evaluation {}", row.evaluation);
        }
        assert!(r.fidelity >= r.initial_fidelity);
    }
}

#[test]
fn ising_ground_state_has_zero_magnetization() {
    for l in [3, 4, 5, 7, 9] {
        let g = ed_ground(l);
        for i in 0..l {
            assert!(expectation_z(&g, i).unwrap().abs() < 1e-10, "L={l} site {i}");
        }
    }
}

#[test]
fn tabulated_fidelity_does_not_grow_with_length() {
    let table = HyperparamTable::builtin();
    let mut previous = 1.0;
    for l in [3, 5, 7, 9] {
        let hp = table.get(l).expect("tabulated length");
        let prepared = prepare_ground_state(hp, &setup(l)).unwrap();
        let f = fidelity(&prepared.state, &ed_ground(l)).unwrap();
        println!("L={l}: fidelity {f:.4}, parity residual {:.2e}", prepared.parity_residual);
        assert!(f <= previous + 0.01, "L={l}: {f:.4} after {previous:.4}");
        previous = f;
    }
}

#[test]
fn table_lookup_falls_back_to_longest_chain_only_above_it() {
    let table = HyperparamTable::builtin();
    assert_eq!(table.lookup(21), table.get(9).copied());
    assert_eq!(table.lookup(4), None);
    assert_eq!(table.lookup(5), table.get(5).copied());
    let text = table.to_toml().unwrap();
    assert_eq!(HyperparamTable::from_toml(&text).unwrap(), table);
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let mut p = AdiabaticHyperparams::initial_guess(20.0).p;
    p[0] = -1.0;
    assert!(AdiabaticHyperparams::new(p, 20.0).is_err());
    assert!(AdiabaticHyperparams::new(AdiabaticHyperparams::initial_guess(1.0).p, 0.0).is_err());
}

/// Dense oracle for the QAOA state: exponentials by diagonalization, applied last level first.
fn qaoa_dense(l: usize, c6: f64, params: &QaoaParams) -> QuantumState {
    let register = build_chain_register(l, 1.0).unwrap();
    let dim = 1usize << l;
    let mut x_sum = Array2::<Complex64>::zeros((dim, dim));
    for b in 0..dim {
        for i in 0..l {
            x_sum[[b ^ (1 << i), b]] += Complex64::new(1.0, 0.0);
        }
    }
    let z = |b: usize, i: usize| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 };
    let mut psi = QuantumState::plus(l).unwrap();
    for level in (0..params.level()).rev() {
        let hx = HamiltonianMatrix::from_array(l, x_sum.mapv(|v| v * params.gamma[level])).unwrap();
        psi = evolve_exact(&psi, &hx, 1.0).unwrap();
        let mut hzz = Array2::<Complex64>::zeros((dim, dim));
        for b in 0..dim {
            let mut e = params.beta[level] * (0..l).map(|i| z(b, i)).sum::<f64>();
            for i in 0..l {
                for j in i + 1..l {
                    e += c6 / 4.0 * vdw_strength(&register, i, j).unwrap() * (z(b, i) - 1.0) * (z(b, j) - 1.0);
                }
            }
            hzz[[b, b]] = Complex64::new(params.tau[level] * e, 0.0);
        }
        psi = evolve_exact(&psi, &HamiltonianMatrix::from_array(l, hzz).unwrap(), 1.0).unwrap();
    }
    psi
}

#[test]
fn qaoa_state_matches_dense_oracle() {
    let params = QaoaParams { gamma: vec![0.3, 1.1, -0.4], tau: vec![0.7, 0.2, 1.3], beta: vec![-0.5, 0.9, 0.1] };
    for l in [2, 4, 5] {
        let fast = qaoa_state(&build_chain_register(l, 1.0).unwrap(), 4.0, &params).unwrap();
        let dense = qaoa_dense(l, 4.0, &params);
        let overlap = fast.inner(&dense).unwrap();
        assert!((overlap - Complex64::new(1.0, 0.0)).norm() < 1e-10, "L={l}: ⟨fast|dense⟩ = {overlap}");
    }
    assert!(QaoaParams { gamma: vec![0.1], tau: vec![], beta: vec![0.2] }.validate().is_err());
}
