use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_dsf::dynamics::{evolve, evolve_with_report, EvolutionSchedule, HamiltonianSource};
use rydberg_dsf::lattice::{build_chain_register, InteractionRange};
use rydberg_dsf::operator::{rydberg_hamiltonian_at, RydbergParams, RydbergSystem, DEFAULT_DENSE_CAP};
use rydberg_dsf::pulse::{LocalDetuning, PulseProgram, Waveform};
use rydberg_dsf::spectrum::evolve_exact;
use rydberg_dsf::state::{fidelity, QuantumState};
use rydberg_dsf::state_prep::{ansatz_waveforms, AdiabaticHyperparams};

fn random_state(l: usize, rng: &mut impl Rng) -> QuantumState {
    let amps = (0..1usize << l).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut s = QuantumState::from_amplitudes(l, amps).unwrap();
    s.normalize().unwrap();
    s
}

fn system(l: usize, range: InteractionRange) -> RydbergSystem {
    RydbergSystem::new(build_chain_register(l, 1.0).unwrap(), 4.0, range).unwrap()
}

/// Flat table: constant in value but routed through the time-dependent integrator.
fn flat(v: f64, duration: f64) -> Waveform {
    Waveform::table(vec![0.0, duration], vec![v, v]).unwrap()
}

#[test]
fn stepper_matches_exact_evolution_on_random_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..10 {
        let l = rng.random_range(2..=7);
        let duration = rng.random_range(0.5..3.0);
        let (omega, phase, delta) = (rng.random_range(0.0..4.0), rng.random_range(-3.0..3.0), rng.random_range(-4.0..4.0));
        let range = if rng.random() { InteractionRange::Full } else { InteractionRange::NearestNeighbor };
        let mut program = PulseProgram::constant(duration, omega, phase, delta).with_local(LocalDetuning {
            pattern: (0..l).map(|_| rng.random_range(0.0..1.0)).collect(),
            envelope: Waveform::constant(rng.random_range(-1.0..1.0)),
        });
        if case % 2 == 1 {
            program.amplitude = flat(omega, duration);
            program.detuning = flat(delta, duration);
        }
        let register = build_chain_register(l, 1.0).unwrap();
        let h = rydberg_hamiltonian_at(&register, &RydbergParams { c6: 4.0, range, program: program.clone() }, 0.0).unwrap();
        let psi = random_state(l, &mut rng);
        let source = HamiltonianSource::Pulse { system: system(l, range), program };
        let schedule = EvolutionSchedule::new(source, duration, duration / 200.0).unwrap();
        let stepped = evolve(&psi, &schedule).unwrap();
        let exact = evolve_exact(&psi, &h, duration).unwrap();
        let f = fidelity(&stepped, &exact).unwrap();
        assert!((1.0 - f).abs() < 1e-7, "case {case} (L={l}): overlap deficit {:.2e}", 1.0 - f);
    }
}

#[test]
fn static_energy_is_conserved_over_long_runs() {
    let l = 5;
    let (duration, dt) = (20.0, 0.005);
    let mut program = PulseProgram::constant(duration, 2.0, 0.3, 1.5);
    for time_dependent_path in [false, true] {
        if time_dependent_path {
            program.amplitude = flat(2.0, duration);
        }
        let sys = system(l, InteractionRange::Full);
        let (op, _) = sys.operator_at(&program, 0.0);
        let norm = op.to_dense(DEFAULT_DENSE_CAP).unwrap().data().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let psi = random_state(l, &mut ChaCha8Rng::seed_from_u64(3));
        let schedule =
            EvolutionSchedule::new(HamiltonianSource::Pulse { system: sys, program: program.clone() }, duration, dt).unwrap();
        let (out, report) = evolve_with_report(&psi, &schedule).unwrap();
        let drift = (op.expectation(out.amplitudes()) - op.expectation(psi.amplitudes())).abs();
        assert!(drift < 1e-6 * norm, "drift {drift:.2e} vs ‖H‖ {norm:.2}");
        assert!(report.norm_drift < 1e-8);
        assert_eq!(report.steps, 4000);
    }
}

fn sweep_error(dt: f64, reference: &QuantumState, psi: &QuantumState, hp: &AdiabaticHyperparams) -> f64 {
    let program = ansatz_waveforms(hp).unwrap();
    let source = HamiltonianSource::Pulse { system: system(4, InteractionRange::Full), program };
    let out = evolve(psi, &EvolutionSchedule::new(source, hp.t_max, dt).unwrap()).unwrap();
    out.amplitudes().iter().zip(reference.amplitudes()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn step_halving_shows_fourth_order_convergence() {
    let hp = AdiabaticHyperparams::initial_guess(8.0);
    let psi = QuantumState::ground(4).unwrap();
    let program = ansatz_waveforms(&hp).unwrap();
    let source = HamiltonianSource::Pulse { system: system(4, InteractionRange::Full), program };
    let reference = evolve(&psi, &EvolutionSchedule::new(source, hp.t_max, 0.00625).unwrap()).unwrap();
    let coarse = sweep_error(0.2, &reference, &psi, &hp);
    let fine = sweep_error(0.1, &reference, &psi, &hp);
    assert!(coarse > 1e-9, "coarse error {coarse:.2e} too small to resolve the order");
    assert!(coarse / fine >= 8.0, "ratio {:.2} ({coarse:.2e} / {fine:.2e})", coarse / fine);
}

#[test]
fn zero_duration_is_identity() {
    let psi = random_state(3, &mut ChaCha8Rng::seed_from_u64(1));
    let source = HamiltonianSource::Pulse { system: system(3, InteractionRange::Full), program: PulseProgram::constant(0.0, 1.0, 0.0, 0.0) };
    let out = evolve(&psi, &EvolutionSchedule::new(source, 0.0, 0.1).unwrap()).unwrap();
    assert_eq!(out, psi);
}

#[test]
fn non_positive_step_is_rejected() {
    let source = HamiltonianSource::Pulse { system: system(3, InteractionRange::Full), program: PulseProgram::idle(1.0) };
    assert!(EvolutionSchedule::new(source.clone(), 1.0, 0.0).is_err());
    assert!(EvolutionSchedule::new(source, 1.0, -0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(16) })]

    #[test]
    fn propagation_is_unitary(
        l in 2usize..6,
        omegas in prop::collection::vec(0.0f64..6.0, 4),
        deltas in prop::collection::vec(-6.0f64..6.0, 4),
        seed in any::<u64>(),
    ) {
        let duration = 3.0;
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let mut program = PulseProgram::constant(duration, 0.0, 0.0, 0.0);
        program.amplitude = Waveform::table(times.clone(), omegas).unwrap();
        program.detuning = Waveform::table(times, deltas).unwrap();
        let psi = random_state(l, &mut ChaCha8Rng::seed_from_u64(seed));
        let source = HamiltonianSource::Pulse { system: system(l, InteractionRange::Full), program };
        let out = evolve(&psi, &EvolutionSchedule::new(source, duration, 0.01).unwrap()).unwrap();
        prop_assert!((out.norm_sqr().sqrt() - 1.0).abs() < 1e-8);
    }
}
