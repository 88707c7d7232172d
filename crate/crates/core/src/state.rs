//! Dense state vectors.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::operator::{occupation, z_value, C0, MAX_STATE_SITES};

/// Normalized amplitude vector over the 2^L computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    sites: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        if sites > MAX_STATE_SITES {
            return Err(Error::Capacity { sites, cap: MAX_STATE_SITES });
        }
        if amps.len() != 1usize << sites {
            return invalid(format!("{} amplitudes for {sites} sites", amps.len()));
        }
        Ok(Self { sites, amps })
    }

    /// Basis state with the given bit pattern (bit i = 1 puts site i in the Rydberg state).
    pub fn basis(sites: usize, index: usize) -> Result<Self> {
        if sites > MAX_STATE_SITES {
            return Err(Error::Capacity { sites, cap: MAX_STATE_SITES });
        }
        if index >> sites != 0 {
            return invalid("basis index out of range");
        }
        let mut amps = vec![C0; 1 << sites];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { sites, amps })
    }

    /// |0…0⟩, all atoms in the ground state.
    pub fn ground(sites: usize) -> Result<Self> {
        Self::basis(sites, 0)
    }

    /// |+⟩^⊗L.
    pub fn plus(sites: usize) -> Result<Self> {
        let dim = 1usize << sites;
        Self::from_amplitudes(sites, vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim])
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NumericalInstability { drift: 1.0, suggested_dt: 0.0 });
        }
        let inv = n.recip();
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        if self.sites != other.sites {
            return invalid("state dimensions differ");
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that `site` is in the Rydberg state.
    pub fn excitation(&self, site: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(b, a)| occupation(b, site) * a.norm_sqr())
            .sum()
    }

    /// Multiplies the global phase so the largest-magnitude amplitude (first on ties) is real positive.
    pub fn fix_phase(&mut self) {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, a) in self.amps.iter().enumerate() {
            let n = a.norm_sqr();
            if n > best_norm * (1.0 + 1e-12) {
                best = i;
                best_norm = n;
            }
        }
        let a = self.amps[best];
        if a.norm() > 0.0 {
            let phase = a.conj() / a.norm();
            self.amps.iter_mut().for_each(|x| *x *= phase);
        }
    }
}

/// ⟨Z_site⟩ from populations.
pub fn expectation_z(state: &QuantumState, site: usize) -> Result<f64> {
    if site >= state.sites {
        return invalid(format!("site {site} out of range for {} sites", state.sites));
    }
    Ok(state
        .amps
        .iter()
        .enumerate()
        .map(|(b, a)| z_value(b, site) * a.norm_sqr())
        .sum())
}

/// ⟨Z_i⟩ for every site in one pass.
pub fn z_profile(state: &QuantumState) -> Vec<f64> {
    let mut out = vec![0.0; state.sites];
    for (b, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        for (i, o) in out.iter_mut().enumerate() {
            *o += z_value(b, i) * p;
        }
    }
    out
}

/// |⟨a|b⟩|².
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}
