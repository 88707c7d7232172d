//! Retarded Green's function: measurement protocol and exact commutator oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{invalid, Result};
use crate::operator::{z_value, HamiltonianMatrix, C0};
use crate::spectrum::Spectrum;
use crate::state::{z_profile, QuantumState};

/// Uniform sampling times t_n = n·δ for n = 1…N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub delta: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(delta: f64, steps: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return invalid(format!("time step must be positive, got {delta}"));
        }
        if steps == 0 {
            return invalid("time grid needs at least one step");
        }
        Ok(Self { delta, steps })
    }

    /// δ = 0.005, N = 4000.
    pub fn numerics() -> Self {
        Self { delta: 0.005, steps: 4000 }
    }

    /// N = 15 steps of 0.2, spanning T = 3.
    pub fn experiment() -> Self {
        Self { delta: 0.2, steps: 15 }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.delta
    }

    pub fn total(&self) -> f64 {
        self.steps as f64 * self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.steps).map(|n| self.time(n)).collect()
    }
}

/// Zero-based centre site: the middle atom for odd L, the left of the two middle atoms for even L.
pub fn center_site(sites: usize) -> usize {
    if sites % 2 == 1 {
        (sites - 1) / 2
    } else {
        sites / 2 - 1
    }
}

/// Real G(i, t_n) for all sites and steps, perturbed at the centre site.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensTable {
    sites: usize,
    center: usize,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GreensTable {
    pub fn zeros(sites: usize, center: usize, grid: TimeGrid) -> Result<Self> {
        if center >= sites {
            return invalid(format!("centre site {center} out of range for {sites} sites"));
        }
        Ok(Self { sites, center, grid, values: vec![0.0; sites * grid.steps] })
    }

    pub fn from_values(sites: usize, center: usize, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != sites * grid.steps {
            return invalid("Green's table size does not match sites × steps");
        }
        let mut t = Self::zeros(sites, center, grid)?;
        t.values = values;
        Ok(t)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Value at site `i`, step index `n` (0-based, time t_{n+1}).
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.values[i * self.grid.steps + n]
    }

    pub fn set(&mut self, i: usize, n: usize, v: f64) {
        self.values[i * self.grid.steps + n] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn site_row(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.steps..(i + 1) * self.grid.steps]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Σ |self − other| over all entries.
    pub fn cumulative_error(&self, other: &GreensTable) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return invalid("Green's tables have different shapes");
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum())
    }
}

/// e^{−iπZ_j/4}: phase e^{−iπ/4} on |0⟩_j and e^{+iπ/4} on |1⟩_j.
pub fn apply_uj(state: &QuantumState, j: usize) -> Result<QuantumState> {
    if j >= state.sites() {
        return invalid(format!("site {j} out of range for {} sites", state.sites()));
    }
    let mut out = state.clone();
    let p0 = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    let p1 = p0.conj();
    for (b, a) in out.amplitudes_mut().iter_mut().enumerate() {
        *a *= if (b >> j) & 1 == 0 { p0 } else { p1 };
    }
    Ok(out)
}

/// ⟨Z_i⟩ in U(t_n)·U_c|ψ₀⟩ for every site and step.
pub fn greens_protocol(
    ground: &QuantumState,
    evolution: &dyn Propagator,
    center: usize,
    grid: TimeGrid,
) -> Result<GreensTable> {
    if ground.sites() != evolution.sites() {
        return invalid("ground state does not match the evolution");
    }
    let mut table = GreensTable::zeros(ground.sites(), center, grid)?;
    let mut state = apply_uj(ground, center)?;
    let mut t_prev = 0.0;
    for n in 0..grid.steps {
        let t = grid.time(n + 1);
        state = evolution.propagate(&state, t_prev, t)?;
        t_prev = t;
        for (i, z) in z_profile(&state).into_iter().enumerate() {
            table.set(i, n, z);
        }
    }
    Ok(table)
}

/// max over sites and steps of |⟨ψ₀|Z_i(t_n)|ψ₀⟩|, without the rotation.
pub fn symmetry_residual(ground: &QuantumState, evolution: &dyn Propagator, grid: TimeGrid) -> Result<f64> {
    let mut worst = z_profile(ground).iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let mut state = ground.clone();
    let mut t_prev = 0.0;
    for n in 1..=grid.steps {
        let t = grid.time(n);
        state = evolution.propagate(&state, t_prev, t)?;
        t_prev = t;
        worst = z_profile(&state).iter().fold(worst, |m, z| m.max(z.abs()));
    }
    Ok(worst)
}

/// Single-site Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// P_site·ψ.
    pub fn apply(self, site: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let m = 1usize << site;
        let mut out = vec![C0; psi.len()];
        for (b, a) in psi.iter().enumerate() {
            match self {
                Pauli::Z => out[b] = a * z_value(b, site),
                Pauli::X => out[b ^ m] = *a,
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩.
                Pauli::Y => {
                    let f = if b & m == 0 { Complex64::i() } else { -Complex64::i() };
                    out[b ^ m] = a * f;
                }
            }
        }
        out
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Exact −(i/2)⟨[P_i(t), P_j]⟩ from a diagonalized Hamiltonian.
#[derive(Debug, Clone)]
pub struct GreensOracle {
    spectrum: Spectrum,
    ground: QuantumState,
}

impl GreensOracle {
    pub fn new(spectrum: Spectrum, ground: QuantumState) -> Result<Self> {
        if spectrum.sites() != ground.sites() {
            return invalid("ground state does not match the Hamiltonian");
        }
        Ok(Self { spectrum, ground })
    }

    pub fn from_hamiltonian(h: &HamiltonianMatrix, ground: QuantumState) -> Result<Self> {
        Self::new(Spectrum::of(h)?, ground)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// −(i/2)(⟨P_i(t)P_j⟩ − ⟨P_j P_i(t)⟩), both orderings evaluated separately.
    pub fn greens(&self, pauli: Pauli, i: usize, j: usize, t: f64) -> Result<Complex64> {
        let l = self.ground.sites();
        if i >= l || j >= l {
            return invalid("site index out of range");
        }
        let psi = self.ground.amplitudes();
        let bj_psi = QuantumState::from_amplitudes(l, pauli.apply(j, psi))?;
        let psi_t = self.spectrum.evolve(&self.ground, t)?;
        let phi_t = self.spectrum.evolve(&bj_psi, t)?;
        // ⟨ψ|P_i(t)P_j|ψ⟩ = ⟨ψ(t)|P_i|φ(t)⟩ and ⟨ψ|P_j P_i(t)|ψ⟩ = ⟨φ(t)|P_i|ψ(t)⟩.
        let forward = dot(psi_t.amplitudes(), &pauli.apply(i, phi_t.amplitudes()));
        let backward = dot(phi_t.amplitudes(), &pauli.apply(i, psi_t.amplitudes()));
        Ok(Complex64::new(0.0, -0.5) * (forward - backward))
    }

    /// Real part of the oracle on the whole grid, perturbing site `center`.
    ///
    /// When the reference state is an eigenstate the time dependence reduces to
    /// phases in the eigenbasis, which keeps L = 11 with thousands of steps cheap.
    pub fn table(&self, pauli: Pauli, center: usize, grid: TimeGrid) -> Result<GreensTable> {
        let l = self.ground.sites();
        let mut table = GreensTable::zeros(l, center, grid)?;
        let psi = self.ground.amplitudes();
        let h_psi = self.spectrum.from_eigenbasis(
            &self
                .spectrum
                .to_eigenbasis(psi)
                .iter()
                .zip(self.spectrum.energies())
                .map(|(c, e)| c * *e)
                .collect::<Vec<_>>(),
        );
        let e0: f64 = dot(psi, &h_psi).re;
        let residual: f64 = h_psi.iter().zip(psi).map(|(h, p)| (h - p * e0).norm_sqr()).sum::<f64>().sqrt();
        if residual < 1e-9 {
            let c = self.spectrum.to_eigenbasis(&pauli.apply(center, psi));
            let d: Vec<Vec<Complex64>> =
                (0..l).map(|i| self.spectrum.to_eigenbasis(&pauli.apply(i, psi))).collect();
            let energies = self.spectrum.energies();
            for n in 0..grid.steps {
                let t = grid.time(n + 1);
                let evolved: Vec<Complex64> = c
                    .iter()
                    .zip(energies)
                    .map(|(x, e)| x * Complex64::from_polar(1.0, -(e - e0) * t))
                    .collect();
                for (i, di) in d.iter().enumerate() {
                    // ⟨ψ|P_i(t)P_c|ψ⟩ = e^{iE₀t}⟨P_iψ|e^{−iHt}|P_cψ⟩.
                    let forward = dot(di, &evolved);
                    table.set(i, n, forward.im);
                }
            }
        } else {
            for n in 0..grid.steps {
                for i in 0..l {
                    table.set(i, n, self.greens(pauli, i, center, grid.time(n + 1))?.re);
                }
            }
        }
        Ok(table)
    }
}

/// −(i/2)⟨ψ₀|[Z_i(t), Z_j]|ψ₀⟩ by diagonalizing `h`.
pub fn greens_exact(ground: &QuantumState, h: &HamiltonianMatrix, i: usize, j: usize, t: f64) -> Result<Complex64> {
    GreensOracle::from_hamiltonian(h, ground.clone())?.greens(Pauli::Z, i, j, t)
}
