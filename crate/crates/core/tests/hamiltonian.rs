use proptest::prelude::*;
use rydberg_dsf::lattice::{build_chain_register, map_tfi_to_pulses, vdw_strength, InteractionRange, TfiParams};
use rydberg_dsf::operator::{rydberg_hamiltonian_at, tfi_hamiltonian, RydbergParams, RydbergSystem};
use rydberg_dsf::pulse::{mapped_program, LocalDetuning, PulseProgram, Waveform};
use rydberg_dsf::spectrum::Spectrum;

// Z eigenvalue with bit 1 = Rydberg = −1.
fn z(b: usize, i: usize) -> f64 {
    if (b >> i) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Coefficient of Z_i in a diagonal, via the Walsh projection.
fn single_z_coefficient(diag: &[f64], i: usize) -> f64 {
    diag.iter().enumerate().map(|(b, d)| d * z(b, i)).sum::<f64>() / diag.len() as f64
}

fn pair_coefficient(diag: &[f64], i: usize, j: usize) -> f64 {
    diag.iter().enumerate().map(|(b, d)| d * z(b, i) * z(b, j)).sum::<f64>() / diag.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn rydberg_hamiltonian_is_hermitian(
        l in 2usize..7,
        omega in 0.0f64..5.0,
        phase in -3.2f64..3.2,
        delta in -5.0f64..5.0,
        local in -2.0f64..2.0,
        nn in any::<bool>(),
    ) {
        let register = build_chain_register(l, 1.0).unwrap();
        let program = PulseProgram::constant(1.0, omega, phase, delta).with_local(LocalDetuning {
            pattern: (0..l).map(|i| i as f64 / l as f64).collect(),
            envelope: Waveform::constant(local),
        });
        let range = if nn { InteractionRange::NearestNeighbor } else { InteractionRange::Full };
        let h = rydberg_hamiltonian_at(&register, &RydbergParams { c6: 4.0, range, program }, 0.5).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn tfi_hamiltonian_is_hermitian(l in 2usize..8, g in 0.0f64..3.0, j in 0.1f64..3.0) {
        let h = tfi_hamiltonian(&TfiParams { j, g, sites: l }).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn mapped_detuning_cancels_single_site_fields(l in 2usize..9, spacing in 0.5f64..2.0, g in 0.0f64..3.0) {
        let c6 = 4.0;
        let mapped = map_tfi_to_pulses(l, spacing, g, c6).unwrap();
        let register = build_chain_register(l, spacing).unwrap();
        let system = RydbergSystem::new(register, c6, InteractionRange::NearestNeighbor).unwrap();
        let (op, _) = system.operator_at(&mapped_program(&mapped, l, 1.0), 0.5);
        let scale = c6 * spacing.powi(-6);
        for i in 0..l {
            let h = single_z_coefficient(op.diag(), i);
            prop_assert!(h.abs() < 1e-12 * scale.max(1.0), "site {i}: {h}");
        }
    }
}

#[test]
fn next_nearest_to_nearest_ratio_is_one_in_64() {
    let register = build_chain_register(9, 1.7).unwrap();
    for i in 0..7 {
        let ratio = vdw_strength(&register, i, i + 2).unwrap() / vdw_strength(&register, i, i + 1).unwrap();
        assert!((ratio - 1.0 / 64.0).abs() < 1e-15, "{ratio}");
    }
}

#[test]
fn full_range_pair_couplings_follow_inverse_sixth_power() {
    let l = 6;
    let c6 = 4.0;
    let system = RydbergSystem::new(build_chain_register(l, 1.0).unwrap(), c6, InteractionRange::Full).unwrap();
    let (op, _) = system.operator_at(&PulseProgram::idle(1.0), 0.0);
    for i in 0..l {
        for j in i + 1..l {
            // n_i n_j = (1 − Z_i)(1 − Z_j)/4, so the ZZ coefficient is V/4.
            let expected = c6 * ((j - i) as f64).powi(-6) / 4.0;
            assert!((pair_coefficient(op.diag(), i, j) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn nearest_neighbour_mapping_reproduces_ising_spectrum() {
    for (l, spacing, g) in [(3, 1.0, 1.0), (5, 1.0, 0.7), (6, 0.9, 1.3), (7, 1.2, 1.0)] {
        let c6 = 4.0;
        let mapped = map_tfi_to_pulses(l, spacing, g, c6).unwrap();
        let register = build_chain_register(l, spacing).unwrap();
        let params = RydbergParams {
            c6,
            range: InteractionRange::NearestNeighbor,
            program: mapped_program(&mapped, l, 1.0),
        };
        let rydberg = Spectrum::of(&rydberg_hamiltonian_at(&register, &params, 0.5).unwrap()).unwrap();
        let j = c6 * spacing.powi(-6) / 4.0;
        let ising = Spectrum::of(&tfi_hamiltonian(&TfiParams { j, g: mapped.omega / j, sites: l }).unwrap()).unwrap();
        let shift = rydberg.energies()[0] - ising.energies()[0];
        for (a, b) in rydberg.energies().iter().zip(ising.energies()) {
            assert!((a - b - shift).abs() < 1e-10, "L={l}: {a} vs {b} + {shift}");
        }
    }
}
