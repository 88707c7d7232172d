//! Exact diagonalization of dense Hamiltonians.

use faer::{Mat, Side};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::operator::{HamiltonianMatrix, C0};
use crate::state::QuantumState;

#[derive(Debug, Clone)]
enum Vectors {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    sites: usize,
    energies: Vec<f64>,
    vectors: Vectors,
}

impl Spectrum {
    pub fn of(h: &HamiltonianMatrix) -> Result<Self> {
        let (energies, vectors) = if h.is_real() {
            let (e, v) = eigh_real(&h.data().mapv(|z| z.re))?;
            (e, Vectors::Real(v))
        } else {
            let (e, v) = eigh_complex(h.data())?;
            (e, Vectors::Complex(v))
        };
        Ok(Self { sites: h.sites(), energies, vectors })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Largest |E|, the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Amplitude ⟨basis|n⟩ of eigenvector `n`.
    pub fn component(&self, basis: usize, n: usize) -> Complex64 {
        match &self.vectors {
            Vectors::Real(v) => Complex64::new(v[[basis, n]], 0.0),
            Vectors::Complex(v) => v[[basis, n]],
        }
    }

    pub fn eigenvector(&self, n: usize) -> QuantumState {
        let amps = (0..self.dim()).map(|b| self.component(b, n)).collect();
        QuantumState::from_amplitudes(self.sites, amps).expect("eigenvector dimension matches")
    }

    /// V†ψ.
    pub fn to_eigenbasis(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = vec![C0; d];
        match &self.vectors {
            Vectors::Real(v) => {
                for (b, p) in psi.iter().enumerate() {
                    for (o, x) in out.iter_mut().zip(v.row(b)) {
                        *o += p * *x;
                    }
                }
            }
            Vectors::Complex(v) => {
                for (b, p) in psi.iter().enumerate() {
                    for (o, x) in out.iter_mut().zip(v.row(b)) {
                        *o += x.conj() * p;
                    }
                }
            }
        }
        out
    }

    /// Vc.
    pub fn from_eigenbasis(&self, c: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        match &self.vectors {
            Vectors::Real(v) => (0..d)
                .map(|b| v.row(b).iter().zip(c).map(|(x, y)| y * *x).sum())
                .collect(),
            Vectors::Complex(v) => (0..d)
                .map(|b| v.row(b).iter().zip(c).map(|(x, y)| x * y).sum())
                .collect(),
        }
    }

    /// e^{−iHt}ψ.
    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.sites() != self.sites {
            return invalid("state dimension does not match the Hamiltonian");
        }
        if t == 0.0 {
            return Ok(state.clone());
        }
        let mut c = self.to_eigenbasis(state.amplitudes());
        for (x, e) in c.iter_mut().zip(&self.energies) {
            *x *= Complex64::from_polar(1.0, -e * t);
        }
        QuantumState::from_amplitudes(self.sites, self.from_eigenbasis(&c))
    }

    /// Lowest eigenpair with the phase convention applied.
    pub fn ground_state(&self) -> GroundState {
        let e0 = self.energies[0];
        let tol = 1e-9 * e0.abs().max(1.0);
        let degeneracy = self.energies.iter().take_while(|e| **e - e0 <= tol).count();
        let mut state = self.eigenvector(0);
        state.fix_phase();
        GroundState { energy: e0, state, degeneracy }
    }
}

/// Lowest eigenpair. `degeneracy > 1` flags a degenerate ground space.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: QuantumState,
    pub degeneracy: usize,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy > 1
    }
}

/// Ground state by full diagonalization.
pub fn ground_state_ed(h: &HamiltonianMatrix) -> Result<GroundState> {
    let gs = Spectrum::of(h)?.ground_state();
    if gs.is_degenerate() {
        crate::diagnostics::warn(format!("ground space is {}-fold degenerate; returning one member", gs.degeneracy));
    }
    Ok(gs)
}

/// e^{−iHt}ψ by spectral decomposition.
pub fn evolve_exact(state: &QuantumState, h: &HamiltonianMatrix, t: f64) -> Result<QuantumState> {
    if state.sites() != h.sites() {
        return invalid("state dimension does not match the Hamiltonian");
    }
    Spectrum::of(h)?.evolve(state, t)
}

fn linalg_error(e: impl std::fmt::Debug) -> Error {
    Error::Linalg(format!("eigendecomposition failed: {e:?}"))
}

/// Ascending eigenvalues and column eigenvectors of a real symmetric matrix (lower triangle read).
pub(crate) fn eigh_real(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(linalg_error)?;
    let s = eig.S().column_vector();
    let u = eig.U();
    Ok(((0..n).map(|i| s[i]).collect(), Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)])))
}

/// Ascending eigenvalues and column eigenvectors of a Hermitian matrix (lower triangle read).
pub(crate) fn eigh_complex(a: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let n = a.nrows();
    let m = Mat::<Complex64>::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(linalg_error)?;
    let s = eig.S().column_vector();
    let u = eig.U();
    Ok(((0..n).map(|i| s[i].re).collect(), Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)])))
}
