use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_dsf::config::{DsfMode, ExperimentConfig};
use rydberg_dsf::pipeline::{classification, ed_reference, mode_greens, structure_factor};
use rydberg_dsf::qfi::{
    classify_depth, depth_threshold, qfi_bound_fn, qfi_result, sum_rule_normalize, DensityOperator, GeneratorSpec,
};
use rydberg_dsf::spectral::{fourier_dsf, momentum_grid};
use rydberg_dsf::state::QuantumState;

fn random_state(l: usize, rng: &mut impl Rng) -> QuantumState {
    let amps = (0..1usize << l).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut s = QuantumState::from_amplitudes(l, amps).unwrap();
    s.normalize().unwrap();
    s
}

fn generator_value(c: &[f64], b: usize) -> f64 {
    c.iter().enumerate().map(|(i, ci)| if (b >> i) & 1 == 0 { *ci } else { -*ci }).sum()
}

fn variance(state: &QuantumState, c: &[f64]) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (b, a) in state.amplitudes().iter().enumerate() {
        let x = generator_value(c, b);
        m1 += a.norm_sqr() * x;
        m2 += a.norm_sqr() * x * x;
    }
    m2 - m1 * m1
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn pure_state_bound_equals_four_variances(l in 1usize..=8, seed in any::<u64>(), staggered in any::<bool>()) {
        let psi = random_state(l, &mut ChaCha8Rng::seed_from_u64(seed));
        let g = if staggered { GeneratorSpec::staggered(l) } else { GeneratorSpec::uniform(l) };
        let target = 4.0 * variance(&psi, &g.coefficients);
        for n in 0..5 {
            let f = qfi_bound_fn(&DensityOperator::Pure(psi.clone()), &g, n).unwrap();
            prop_assert!((f - target).abs() < 1e-8, "n={}: {} vs {}", n, f, target);
        }
    }

    #[test]
    fn thresholds_do_not_decrease_with_block_size(n in 1usize..80) {
        let t: Vec<f64> = (1..=n).map(|k| depth_threshold(n, k).unwrap()).collect();
        prop_assert_eq!(t[0], 1.0);
        prop_assert_eq!(t[n - 1], n as f64);
        for w in t.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }
}

#[test]
fn pure_state_through_the_mixed_route_matches_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for l in [2, 3, 5] {
        let psi = random_state(l, &mut rng);
        let a = psi.amplitudes();
        let rho = Array2::from_shape_fn((a.len(), a.len()), |(r, c)| a[r] * a[c].conj());
        let g = GeneratorSpec::staggered(l);
        let target = 4.0 * variance(&psi, &g.coefficients);
        let mixed = DensityOperator::mixed(l, rho).unwrap();
        for n in 0..4 {
            let f = qfi_bound_fn(&mixed, &g, n).unwrap();
            assert!((f - target).abs() < 1e-8, "L={l} n={n}: {f} vs {target}");
        }
    }
}

/// 2 Σ (p_a − p_b)²/(p_a + p_b) |A_ab|² for ρ = Σ p_a |a⟩⟨a| with random eigenvectors.
#[test]
fn mixed_state_bounds_stay_below_the_fisher_information() {
    let l = 3;
    let dim = 1 << l;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = GeneratorSpec::staggered(l);
    for _ in 0..5 {
        let vecs: Vec<QuantumState> = (0..dim).map(|_| random_state(l, &mut rng)).collect();
        // Gram–Schmidt to an orthonormal basis.
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for v in &vecs {
            let mut w = v.amplitudes().to_vec();
            for u in &basis {
                let proj: Complex64 = u.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(u).for_each(|(y, x)| *y -= proj * x);
            }
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            basis.push(w.into_iter().map(|x| x / norm).collect());
        }
        let mut p: Vec<f64> = (0..dim).map(|_| rng.random::<f64>().powi(3)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let rho = Array2::from_shape_fn((dim, dim), |(r, c)| (0..dim).map(|a| p[a] * basis[a][r] * basis[a][c].conj()).sum());
        let a_ab = |a: usize, b: usize| -> Complex64 {
            (0..dim).map(|s| basis[a][s].conj() * generator_value(&g.coefficients, s) * basis[b][s]).sum()
        };
        let mut fq = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                if p[a] + p[b] > 0.0 {
                    fq += 2.0 * (p[a] - p[b]).powi(2) / (p[a] + p[b]) * a_ab(a, b).norm_sqr();
                }
            }
        }
        let rho = DensityOperator::mixed(l, rho).unwrap();
        let bounds: Vec<f64> = (0..6).map(|n| qfi_bound_fn(&rho, &g, n).unwrap()).collect();
        for (n, f) in bounds.iter().enumerate() {
            assert!(*f <= fq + 1e-10, "F_{n} = {f} exceeds F_Q = {fq}");
        }
        assert!(bounds[5] >= bounds[0] - 1e-12);
    }
}

#[test]
fn invalid_density_matrices_are_rejected() {
    let mut rho = Array2::<Complex64>::zeros((4, 4));
    rho[[0, 0]] = Complex64::new(0.5, 0.0);
    assert!(DensityOperator::mixed(2, rho.clone()).is_err());
    rho[[1, 1]] = Complex64::new(0.5, 0.0);
    rho[[0, 1]] = Complex64::new(0.1, 0.0);
    assert!(DensityOperator::mixed(2, rho).is_err());
}

#[test]
fn dsf_route_and_variance_route_agree_on_small_chains() {
    let mut worst = Vec::new();
    for l in [3, 5, 7] {
        let cfg = ExperimentConfig::for_sites(l);
        let reference = ed_reference(&cfg).unwrap();
        let s = structure_factor(&cfg, &mode_greens(&cfg, DsfMode::ExactSpExactTe, None).unwrap()).unwrap();
        let k = s.momentum_index(PI).unwrap();
        let r = qfi_result(&s, k, 0.0, cfg.qfi.omega_max, reference.normalization, l).unwrap();
        let direct = 4.0 * variance(&reference.ground.state, &GeneratorSpec::staggered(l).coefficients) / l as f64;
        let gap = (r.f_q - direct).abs() / direct;
        println!("L={l}: f_Q {:.4}, 4Var/L {direct:.4}, gap {:.1}%", r.f_q, 100.0 * gap);
        worst.push((l, gap));
    }
    assert!(worst.iter().all(|(_, g)| *g <= 0.15), "{worst:?}");
}

#[test]
fn normalizing_twice_gives_unit_constant() {
    let l = 5;
    let cfg = ExperimentConfig::for_sites(l);
    let reference = ed_reference(&cfg).unwrap();
    let omegas: Vec<f64> = (0..256).map(|w| 25.0 * w as f64 / 255.0).collect();
    let s: Vec<_> = reference
        .tables
        .iter()
        .map(|t| fourier_dsf(t, cfg.evolution.eta, &omegas, &momentum_grid(l)).unwrap())
        .collect();
    let c = sum_rule_normalize([&s[0], &s[1], &s[2]], 25.0).unwrap();
    let scaled: Vec<_> = s.iter().map(|x| x.scaled(c)).collect();
    let again = sum_rule_normalize([&scaled[0], &scaled[1], &scaled[2]], 25.0).unwrap();
    assert!((again - 1.0).abs() < 1e-10, "{again}");
}

#[test]
fn zero_spectrum_has_no_defined_normalization() {
    let l = 3;
    let cfg = ExperimentConfig::for_sites(l);
    let reference = ed_reference(&cfg).unwrap();
    let s = fourier_dsf(&reference.tables[2], 0.2, &[0.0, 1.0, 2.0], &momentum_grid(l)).unwrap().scaled(0.0);
    assert!(sum_rule_normalize([&s, &s, &s], 2.0).is_err());
}

#[test]
fn depth_classification_boundaries() {
    assert_eq!(classify_depth(0.0, 11), 1);
    assert_eq!(classify_depth(1.0, 11), 1);
    assert_eq!(classify_depth(1.0001, 11), 2);
    let t2 = depth_threshold(11, 2).unwrap();
    assert_eq!(classify_depth(t2, 11), 2);
    assert_eq!(classify_depth(t2 + 1e-9, 11), 3);
    assert_eq!(classify_depth(100.0, 11), 12);
    assert_eq!(classification(1), "separable-consistent");
    assert_eq!(classification(3), "depth >= 3");
    assert!(depth_threshold(5, 0).is_err() && depth_threshold(5, 6).is_err());
}

#[test]
fn ground_state_is_unique_for_odd_chains() {
    for l in [3, 5, 7] {
        let reference = ed_reference(&ExperimentConfig::for_sites(l)).unwrap();
        assert!(!reference.ground.is_degenerate());
        assert!(reference.gap > 0.0);
    }
}
