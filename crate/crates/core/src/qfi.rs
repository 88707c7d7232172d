//! Quantum Fisher information density from the structure factor, sum-rule
//! normalization, entanglement-depth thresholds and the F_n bound on ρ.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectrum::eigh_complex;
use crate::error::{invalid, Error, Result};
use crate::greens::GreensTable;
use crate::operator::{check_dense, z_value, DEFAULT_DENSE_CAP};
use crate::spectral::{fourier_weights, SpectralGrid};
use crate::state::QuantumState;

/// S̃(k, ω) = S(k, ω) + S(k, −ω) on the non-negative frequencies of the grid.
/// Frequencies without a mirrored partner contribute S(k, ω) alone.
pub fn symmetrize_dsf(s: &SpectralGrid) -> Result<SpectralGrid> {
    let omegas = s.omegas();
    let keep: Vec<usize> = (0..omegas.len()).filter(|&w| omegas[w] >= 0.0).collect();
    let tol = 1e-9 * omegas.iter().fold(1.0f64, |m, w| m.max(w.abs()));
    let mirror: Vec<Option<usize>> = keep
        .iter()
        .map(|&w| omegas.iter().position(|&x| (x + omegas[w]).abs() <= tol))
        .collect();
    let mut values = Vec::with_capacity(s.momenta().len() * keep.len());
    for k in 0..s.momenta().len() {
        for (i, &w) in keep.iter().enumerate() {
            values.push(s.get(k, w) + mirror[i].map_or(0.0, |m| s.get(k, m)));
        }
    }
    SpectralGrid::from_values(s.momenta().to_vec(), keep.iter().map(|&w| omegas[w]).collect(), values, s.eta())
}

/// Trapezoid weights over the grid points in [0, ω_max].
pub fn trapezoid_weights(omegas: &[f64], omega_max: f64) -> Result<Vec<f64>> {
    let top = omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if omega_max > top * (1.0 + 1e-12) + 1e-12 {
        return invalid(format!("ω_max = {omega_max} lies beyond the grid maximum {top}"));
    }
    let inside = |w: f64| w >= 0.0 && w <= omega_max * (1.0 + 1e-12) + 1e-15;
    let mut weights = vec![0.0; omegas.len()];
    for i in 1..omegas.len() {
        if inside(omegas[i - 1]) && inside(omegas[i]) {
            let h = 0.5 * (omegas[i] - omegas[i - 1]);
            weights[i - 1] += h;
            weights[i] += h;
        }
    }
    Ok(weights)
}

fn thermal_factor(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        1.0
    } else {
        (omega / (2.0 * temperature)).tanh().powi(2)
    }
}

/// f_Q = (4/π) ∫₀^{ω_max} tanh²(ω/2T) S̃(k, ω) dω at momentum index `k`.
/// Frequencies below zero are ignored by the integral.
pub fn qfi_density(s: &SpectralGrid, k: usize, temperature: f64, omega_max: f64) -> Result<f64> {
    if k >= s.momenta().len() {
        return invalid("momentum index out of range");
    }
    if !(temperature >= 0.0) {
        return invalid("temperature must be non-negative");
    }
    // At T = 0 only ω > 0 carries weight and S̃ = S there.
    let sym = if temperature > 0.0 { symmetrize_dsf(s)? } else { s.clone() };
    let weights = trapezoid_weights(sym.omegas(), omega_max)?;
    let integral: f64 = sym
        .row(k)
        .iter()
        .zip(&weights)
        .zip(sym.omegas())
        .map(|((v, w), om)| v * w * thermal_factor(*om, temperature))
        .sum();
    Ok(4.0 / PI * integral)
}

/// (1/πN_k) Σ_k ∫₀^{ω_max} S(k, ω) dω: the per-site spectral weight of one channel.
///
/// The 1/π matches the 4/π of the QFI integral, so that a correctly normalized
/// S^zz gives f_Q(k) equal to 4/L times the variance of the k-modulated generator.
pub fn spectral_weight(s: &SpectralGrid, omega_max: f64) -> Result<f64> {
    let weights = trapezoid_weights(s.omegas(), omega_max)?;
    let nk = s.momenta().len();
    if nk == 0 {
        return invalid("spectral grid has no momenta");
    }
    let total: f64 = (0..nk)
        .map(|k| s.row(k).iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>())
        .sum();
    Ok(total / (PI * nk as f64))
}

/// Constant c with c·Σ_α weight(S^αα) = 3.
pub fn sum_rule_normalize(components: [&SpectralGrid; 3], omega_max: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in components {
        total += spectral_weight(s, omega_max)?;
    }
    if total == 0.0 || !total.is_finite() {
        return Err(Error::UndefinedNormalization(format!("total spectral weight is {total}")));
    }
    Ok(3.0 / total)
}

/// f̃ threshold above which depth k + 1 is certified: (⌊N/k⌋k² + (N − ⌊N/k⌋k)²)/N.
pub fn depth_threshold(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return invalid(format!("depth parameter k = {k} must lie in 1..={n}"));
    }
    let full = n / k;
    let rest = n - full * k;
    Ok((full * k * k + rest * rest) as f64 / n as f64)
}

/// Entanglement depth certified by normalized density `f`: k + 1 for the largest
/// k with f > threshold(N, k), or 1 when no threshold is exceeded.
pub fn classify_depth(f: f64, n: usize) -> usize {
    (1..=n)
        .filter(|&k| f > depth_threshold(n, k).expect("k in range"))
        .max()
        .map_or(1, |k| k + 1)
}

/// A = Σ_i c_i Z_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub coefficients: Vec<f64>,
}

/// Which generator probes the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Σ (−1)^i Z_i, momentum π.
    #[default]
    Staggered,
    /// Σ Z_i, momentum 0.
    Uniform,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, sites: usize) -> Self {
        match kind {
            GeneratorKind::Staggered => Self::staggered(sites),
            GeneratorKind::Uniform => Self::uniform(sites),
        }
    }

    pub fn uniform(sites: usize) -> Self {
        Self { coefficients: vec![1.0; sites] }
    }

    pub fn staggered(sites: usize) -> Self {
        Self { coefficients: (0..sites).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect() }
    }

    /// (h_max − h_min)² of the local Pauli probe.
    pub fn spread_squared(&self) -> f64 {
        4.0
    }

    /// Eigenvalue of A on a basis state.
    pub fn diag(&self, basis: usize) -> f64 {
        self.coefficients.iter().enumerate().map(|(i, c)| c * z_value(basis, i)).sum()
    }

    /// Var(A) in a pure state.
    pub fn variance(&self, state: &QuantumState) -> f64 {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (b, a) in state.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            let x = self.diag(b);
            m1 += p * x;
            m2 += p * x * x;
        }
        m2 - m1 * m1
    }
}

/// (4/L)·Var(A), the QFI density of a pure state.
pub fn variance_density(state: &QuantumState, generator: &GeneratorSpec) -> f64 {
    4.0 * generator.variance(state) / state.sites() as f64
}

/// Pure or mixed state for the F_n bound.
#[derive(Debug, Clone)]
pub enum DensityOperator {
    Pure(QuantumState),
    Mixed { sites: usize, rho: Array2<Complex64> },
}

impl DensityOperator {
    pub fn mixed(sites: usize, rho: Array2<Complex64>) -> Result<Self> {
        check_dense(sites, DEFAULT_DENSE_CAP)?;
        let dim = 1usize << sites;
        if rho.shape() != [dim, dim] {
            return invalid("density matrix shape does not match the site count");
        }
        let herm = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .fold(0.0f64, |m, (r, c)| m.max((rho[[r, c]] - rho[[c, r]].conj()).norm()));
        if herm > 1e-10 {
            return invalid(format!("density matrix is not Hermitian (deviation {herm:.2e})"));
        }
        let trace: Complex64 = (0..dim).map(|i| rho[[i, i]]).sum();
        if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return invalid(format!("density matrix trace is {trace}, not 1"));
        }
        Ok(Self::Mixed { sites, rho })
    }

    pub fn sites(&self) -> usize {
        match self {
            DensityOperator::Pure(s) => s.sites(),
            DensityOperator::Mixed { sites, .. } => *sites,
        }
    }
}

fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || k > n || n < 0 {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// C_m^(q) = C(q, m) − 2C(q, m−1) + C(q, m−2).
pub fn bound_coefficient(q: usize, m: usize) -> f64 {
    let (q, m) = (q as i64, m as i64);
    binomial(q, m) - 2.0 * binomial(q, m - 1) + binomial(q, m - 2)
}

/// F_n = 2 Σ_{q=0}^{n} C(n+1, q+1)(−1)^q Σ_{m=0}^{q+2} C_m^(q) Tr(ρ^{q+2−m} A ρ^m A), with ρ⁰ = 1.
pub fn qfi_bound_fn(rho: &DensityOperator, generator: &GeneratorSpec, n: usize) -> Result<f64> {
    if generator.coefficients.len() != rho.sites() {
        return invalid("generator and state differ in site count");
    }
    let trace_term: Box<dyn Fn(usize, usize) -> f64> = match rho {
        DensityOperator::Pure(state) => {
            let (mut m1, mut m2) = (0.0, 0.0);
            for (b, a) in state.amplitudes().iter().enumerate() {
                let x = generator.diag(b);
                m1 += a.norm_sqr() * x;
                m2 += a.norm_sqr() * x * x;
            }
            // ρ^x = ρ for x ≥ 1 and 1 for x = 0.
            Box::new(move |x, y| if x >= 1 && y >= 1 { m1 * m1 } else { m2 })
        }
        DensityOperator::Mixed { rho, .. } => {
            let (p, v) = eigh_complex(rho)?;
            if let Some(neg) = p.iter().find(|x| **x < -1e-10) {
                return invalid(format!("density matrix is not positive semidefinite (eigenvalue {neg:.2e})"));
            }
            let p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
            let dim = p.len();
            let diag: Vec<f64> = (0..dim).map(|b| generator.diag(b)).collect();
            // |A_ab|² in the eigenbasis of ρ.
            let mut a2 = Array2::<f64>::zeros((dim, dim));
            for a in 0..dim {
                for b in 0..dim {
                    let x: Complex64 = (0..dim).map(|s| v[[s, a]].conj() * diag[s] * v[[s, b]]).sum();
                    a2[[a, b]] = x.norm_sqr();
                }
            }
            let pow = |x: f64, e: usize| if e == 0 { 1.0 } else { x.powi(e as i32) };
            Box::new(move |x, y| {
                let mut t = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        t += pow(p[a], x) * a2[[a, b]] * pow(p[b], y);
                    }
                }
                t
            })
        }
    };
    let mut total = 0.0;
    for q in 0..=n {
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        let inner: f64 = (0..=q + 2).map(|m| bound_coefficient(q, m) * trace_term(q + 2 - m, m)).sum();
        total += binomial(n as i64 + 1, q as i64 + 1) * sign * inner;
    }
    Ok(2.0 * total)
}

/// QFI witness from one structure-factor row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiResult {
    pub f_q: f64,
    pub f_q_normalized: f64,
    /// Standard deviation of the normalized density, when shot errors are known.
    pub sigma_normalized: Option<f64>,
    pub momentum: f64,
    pub temperature: f64,
    pub omega_max: f64,
    pub normalization: f64,
    pub depth: usize,
    /// Depth parameters k whose threshold is exceeded.
    pub thresholds_crossed: Vec<usize>,
}

/// Normalized QFI at momentum index `k` of `s` for an `n`-site chain.
pub fn qfi_result(
    s: &SpectralGrid,
    k: usize,
    temperature: f64,
    omega_max: f64,
    normalization: f64,
    n: usize,
) -> Result<QfiResult> {
    if !(normalization > 0.0) {
        return invalid("normalization constant must be positive");
    }
    let f_q = normalization * qfi_density(s, k, temperature, omega_max)?;
    let f_q_normalized = f_q / 4.0;
    let thresholds_crossed =
        (1..=n).filter(|&kk| f_q_normalized > depth_threshold(n, kk).expect("k in range")).collect();
    Ok(QfiResult {
        f_q,
        f_q_normalized,
        sigma_normalized: None,
        momentum: s.momenta()[k],
        temperature,
        omega_max,
        normalization,
        depth: classify_depth(f_q_normalized, n),
        thresholds_crossed,
    })
}

/// Standard deviation of f̃_Q propagated from independent per-entry errors of the
/// Green's table, through the linear Fourier and quadrature maps.
pub fn qfi_sigma(
    stderr: &GreensTable,
    eta: f64,
    omegas: &[f64],
    momentum: f64,
    temperature: f64,
    omega_max: f64,
    normalization: f64,
) -> Result<f64> {
    let weights = trapezoid_weights(omegas, omega_max)?;
    let mut grad = vec![0.0; stderr.values().len()];
    for (w, om) in weights.iter().zip(omegas) {
        if *w == 0.0 {
            continue;
        }
        let scale = 4.0 / PI * normalization * w * thermal_factor(*om, temperature) / 4.0;
        for (g, x) in grad.iter_mut().zip(fourier_weights(stderr, eta, *om, momentum)) {
            *g += scale * x;
        }
    }
    let var: f64 = grad.iter().zip(stderr.values()).map(|(g, s)| (g * s).powi(2)).sum();
    Ok(var.sqrt())
}
