//! Atom registers, van der Waals couplings and the Rydberg-to-Ising parameter map.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Van der Waals coefficient for the hardware Rydberg level, rad·μm⁶/μs.
pub const DEFAULT_C6: f64 = 5.42e6;

/// Chain pitch used when physical units are requested without an explicit spacing, μm.
pub const REFERENCE_SPACING_UM: f64 = 9.8;

/// Collinear (or general planar) arrangement of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRegister {
    positions: Vec<(f64, f64)>,
    spacing: f64,
}

impl AtomRegister {
    /// Register from explicit coordinates. `spacing` is the nominal nearest-neighbour pitch.
    pub fn from_positions(positions: Vec<(f64, f64)>, spacing: f64) -> Result<Self> {
        if positions.len() < 2 {
            return invalid("a register needs at least two atoms");
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return invalid(format!("spacing must be positive, got {spacing}"));
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if distance(positions[i], positions[j]) <= 0.0 {
                    return invalid(format!("atoms {i} and {j} coincide"));
                }
            }
        }
        Ok(Self { positions, spacing })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.positions[i], self.positions[j])
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.len() as f64;
        let (sx, sy) = self
            .positions
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
        (sx / n, sy / n)
    }

    /// Largest pairwise distance.
    pub fn extent(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// `sites` atoms at (i·a, 0).
pub fn build_chain_register(sites: usize, spacing: f64) -> Result<AtomRegister> {
    if sites < 2 {
        return invalid(format!("chain needs L >= 2, got {sites}"));
    }
    AtomRegister::from_positions((0..sites).map(|i| (i as f64 * spacing, 0.0)).collect(), spacing)
}

/// r⁻⁶ between atoms `i` and `j`.
pub fn vdw_strength(register: &AtomRegister, i: usize, j: usize) -> Result<f64> {
    let n = register.len();
    if i >= n || j >= n {
        return invalid(format!("site index out of range for {n} atoms"));
    }
    if i == j {
        return invalid("self-interaction is undefined");
    }
    let dx = register.positions[i].0 - register.positions[j].0;
    let dy = register.positions[i].1 - register.positions[j].1;
    Ok((dx * dx + dy * dy).powi(-3))
}

/// Which pairs of atoms interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionRange {
    /// Every pair, with the full r⁻⁶ tail.
    #[default]
    Full,
    /// Only pairs within 1.5 pitches, i.e. chain neighbours.
    NearestNeighbor,
}

impl InteractionRange {
    pub fn includes(self, register: &AtomRegister, i: usize, j: usize) -> bool {
        match self {
            InteractionRange::Full => true,
            InteractionRange::NearestNeighbor => register.distance(i, j) <= 1.5 * register.spacing(),
        }
    }
}

/// Ising chain H = J(Σ Z_i Z_{i+1} + g Σ X_i), open boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfiParams {
    pub j: f64,
    pub g: f64,
    pub sites: usize,
}

impl TfiParams {
    pub fn critical(sites: usize) -> Self {
        Self { j: 1.0, g: 1.0, sites }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0) {
            return invalid(format!("J must be positive (antiferromagnetic), got {}", self.j));
        }
        if !self.g.is_finite() || self.g < 0.0 {
            return invalid(format!("g must be finite and non-negative, got {}", self.g));
        }
        if self.sites < 2 {
            return invalid(format!("L must be at least 2, got {}", self.sites));
        }
        Ok(())
    }
}

/// Constant pulse parameters that reproduce the Ising chain on the atom array.
///
/// `omega` is the coefficient of ΣX in the mapped Hamiltonian. The Rabi frequency
/// entering the drive term (Ω/2)(X cosφ − Y sinφ) is therefore `2·omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedPulse {
    pub omega: f64,
    pub delta_interior: f64,
    pub delta_endpoint: f64,
    pub j: f64,
    pub g: f64,
}

impl MappedPulse {
    /// Rabi frequency to program into the drive term.
    pub fn rabi_frequency(&self) -> f64 {
        2.0 * self.omega
    }

    pub fn tfi(&self, sites: usize) -> TfiParams {
        TfiParams { j: self.j, g: self.g, sites }
    }
}

/// Chain parameters at pitch `spacing` and field `g` for interaction constant `c6`.
pub fn map_tfi_to_pulses(sites: usize, spacing: f64, g: f64, c6: f64) -> Result<MappedPulse> {
    if sites < 2 {
        return invalid(format!("chain needs L >= 2, got {sites}"));
    }
    if !(spacing > 0.0) || !(c6 > 0.0) || !(g >= 0.0) {
        return invalid("spacing and C6 must be positive and g non-negative");
    }
    let nn = c6 * spacing.powi(-6);
    let j = nn / 4.0;
    Ok(MappedPulse {
        omega: g * j,
        delta_interior: nn,
        delta_endpoint: nn / 2.0,
        j,
        g,
    })
}

/// Unit convention for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    /// J = 1, dimensionless time; register pitch 1 with C6 = 4.
    #[default]
    Model,
    /// rad/μs, μm, μs.
    Physical,
}

/// Register pitch and C6 for a unit mode, plus the model/physical conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub mode: UnitMode,
    /// Hardware interaction constant, rad·μm⁶/μs.
    pub c6_physical: f64,
    /// Hardware chain pitch, μm.
    pub spacing_physical: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::new(UnitMode::Model, DEFAULT_C6, REFERENCE_SPACING_UM)
    }
}

impl UnitSystem {
    pub fn new(mode: UnitMode, c6_physical: f64, spacing_physical: f64) -> Self {
        Self { mode, c6_physical, spacing_physical }
    }

    /// Physical coupling J in rad/μs for the hardware pitch.
    pub fn coupling_physical(&self) -> f64 {
        self.c6_physical * self.spacing_physical.powi(-6) / 4.0
    }

    /// rad/μs per simulation energy unit.
    pub fn energy_scale(&self) -> f64 {
        match self.mode {
            UnitMode::Model => self.coupling_physical(),
            UnitMode::Physical => 1.0,
        }
    }

    /// μm per simulation length unit.
    pub fn length_scale(&self) -> f64 {
        match self.mode {
            UnitMode::Model => self.spacing_physical,
            UnitMode::Physical => 1.0,
        }
    }

    /// μs per simulation time unit.
    pub fn time_scale(&self) -> f64 {
        1.0 / self.energy_scale()
    }

    /// C6 in simulation units.
    pub fn c6(&self) -> f64 {
        match self.mode {
            UnitMode::Model => 4.0,
            UnitMode::Physical => self.c6_physical,
        }
    }

    /// Chain pitch in simulation units.
    pub fn spacing(&self) -> f64 {
        match self.mode {
            UnitMode::Model => 1.0,
            UnitMode::Physical => self.spacing_physical,
        }
    }

    /// Default adiabatic sweep duration in simulation time units.
    pub fn default_sweep_time(&self) -> f64 {
        match self.mode {
            UnitMode::Model => 20.0,
            UnitMode::Physical => 4.0,
        }
    }
}

impl AtomRegister {
    /// Copy with every coordinate and the pitch multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<AtomRegister> {
        AtomRegister::from_positions(
            self.positions.iter().map(|&(x, y)| (x * factor, y * factor)).collect(),
            self.spacing * factor,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardware_coupling_matches_the_reference_pitch() {
        let u = UnitSystem::default();
        assert!((u.coupling_physical() - 1.5296).abs() < 1e-3);
        assert_eq!(u.c6(), 4.0);
        assert!((u.time_scale() * u.energy_scale() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mapped_detunings_cancel_the_interaction_field() {
        let m = map_tfi_to_pulses(5, 1.0, 1.0, 4.0).unwrap();
        assert_eq!((m.j, m.omega, m.delta_interior, m.delta_endpoint), (1.0, 1.0, 4.0, 2.0));
        assert_eq!(m.rabi_frequency(), 2.0);
    }
}
