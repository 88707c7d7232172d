//! Green's-function experiment: preparation, centre rotation, evolution and
//! readout, either ideal or as noisy Monte Carlo shots.

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{HamiltonianSource, Stepper};
use crate::error::{invalid, Result};
use crate::greens::{apply_uj, GreensTable, TimeGrid};
use crate::lattice::UnitSystem;
use crate::mitigation::{sample_haar_unitary, CalibrationRecords};
use crate::noise::{
    amplitude_factors, apply_readout_errors, doppler_shifts, sample_bitstring, sample_missing, KrausChannel,
    NoiseConfig, TrajectorySeed,
};
use crate::operator::{RydbergSystem, SiteModifiers};
use crate::pulse::PulseProgram;
use crate::state::{z_profile, QuantumState};

/// How the initial state is produced.
#[derive(Debug, Clone)]
pub enum PrepStage {
    /// |0…0⟩ driven by a pulse program on the array.
    Sweep { program: PulseProgram, dt: f64 },
    /// A given state; noise then acts only from the rotation onwards.
    State(QuantumState),
}

/// Everything needed to measure G(i, t_n) on the simulated device.
#[derive(Debug, Clone)]
pub struct GreensExperiment {
    pub system: RydbergSystem,
    pub units: UnitSystem,
    pub prep: PrepStage,
    /// Static program applied after the rotation.
    pub evolution: PulseProgram,
    pub evolution_dt: f64,
    pub center: usize,
    pub grid: TimeGrid,
}

impl GreensExperiment {
    pub fn validate(&self) -> Result<()> {
        let l = self.system.sites();
        if self.center >= l {
            return invalid(format!("centre site {} out of range", self.center));
        }
        self.evolution.validate(l)?;
        if !self.evolution.is_static() {
            return invalid("the post-rotation evolution must be time independent");
        }
        let ratio = self.grid.delta / self.evolution_dt;
        if !(self.evolution_dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return invalid("evolution step must divide the sampling step");
        }
        match &self.prep {
            PrepStage::Sweep { program, dt } => {
                program.validate(l)?;
                if !(*dt > 0.0) {
                    return invalid("preparation step must be positive");
                }
            }
            PrepStage::State(s) => {
                if s.sites() != l {
                    return invalid("initial state does not match the register");
                }
            }
        }
        Ok(())
    }

    fn prepare(&self, system: &RydbergSystem) -> Result<QuantumState> {
        match &self.prep {
            PrepStage::State(s) => Ok(s.clone()),
            PrepStage::Sweep { program, dt } => {
                let mut state = QuantumState::ground(system.sites())?;
                let steps = (program.duration / dt).round().max(1.0);
                let stepper = Stepper::new(
                    HamiltonianSource::Pulse { system: system.clone(), program: program.clone() },
                    program.duration / steps,
                );
                stepper.run(state.amplitudes_mut(), 0.0, program.duration)?;
                Ok(state)
            }
        }
    }

    fn stepper(&self, system: &RydbergSystem) -> Stepper {
        Stepper::new(
            HamiltonianSource::Pulse { system: system.clone(), program: self.evolution.clone() },
            self.evolution_dt,
        )
    }

    /// Exact ⟨Z_i⟩ on the ideal device.
    pub fn ideal_table(&self) -> Result<GreensTable> {
        self.validate()?;
        let mut table = GreensTable::zeros(self.system.sites(), self.center, self.grid)?;
        let mut state = apply_uj(&self.prepare(&self.system)?, self.center)?;
        let stepper = self.stepper(&self.system);
        for n in 0..self.grid.steps {
            stepper.run(state.amplitudes_mut(), self.grid.time(n), self.grid.time(n + 1))?;
            for (i, z) in z_profile(&state).into_iter().enumerate() {
                table.set(i, n, z);
            }
        }
        Ok(table)
    }

    /// Per-shot deviations for one trajectory.
    pub fn draw_modifiers(&self, cfg: &NoiseConfig, rng: &mut impl Rng) -> Result<(SiteModifiers, Vec<bool>)> {
        let l = self.system.sites();
        let missing = sample_missing(l, cfg, rng);
        let doppler = doppler_shifts(cfg, l, rng);
        let physical = self.system.register().scaled(self.units.length_scale())?;
        let amplitude = amplitude_factors(&physical, cfg, rng);
        let scale = self.units.energy_scale();
        let modifiers = SiteModifiers {
            amplitude,
            detuning: doppler.iter().map(|d| d / scale).collect(),
            present: missing.iter().map(|m| !m).collect(),
        };
        Ok((modifiers, missing))
    }

    fn trajectory(&self, cfg: &NoiseConfig, kraus: &KrausChannel, seed: TrajectorySeed) -> Result<Vec<u64>> {
        let mut rng = seed.rng();
        let l = self.system.sites();
        let (modifiers, missing) = self.draw_modifiers(cfg, &mut rng)?;
        let system = self.system.with_modifiers(modifiers)?;
        let mut state = apply_uj(&self.prepare(&system)?, self.center)?;
        let stepper = self.stepper(&system);
        let mut shots = Vec::with_capacity(self.grid.steps);
        let with_kraus = cfg.has_kraus();
        for n in 0..self.grid.steps {
            stepper.run(state.amplitudes_mut(), self.grid.time(n), self.grid.time(n + 1))?;
            let shot = if cfg.kraus_per_step && with_kraus {
                for q in (0..l).filter(|q| !missing[*q]) {
                    kraus.apply(&mut state, q, &mut rng);
                }
                state.clone()
            } else {
                let mut copy = state.clone();
                if with_kraus {
                    for q in (0..l).filter(|q| !missing[*q]) {
                        kraus.apply(&mut copy, q, &mut rng);
                    }
                }
                copy
            };
            let bits = sample_bitstring(&shot, &mut rng);
            shots.push(apply_readout_errors(bits, l, &missing, cfg, &mut rng));
        }
        Ok(shots)
    }

    /// `cfg.samples` independent noisy trajectories, one shot per time step each.
    pub fn noisy_run(&self, cfg: &NoiseConfig, master_seed: u64) -> Result<NoisyRun> {
        noisy_pipeline_run(self, cfg, master_seed)
    }
}

/// Bitstrings from a noisy run: `shots[trajectory][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRun {
    pub sites: usize,
    pub center: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub shots: Vec<Vec<u64>>,
}

/// Noisy Monte Carlo run of the experiment.
pub fn noisy_pipeline_run(experiment: &GreensExperiment, cfg: &NoiseConfig, master_seed: u64) -> Result<NoisyRun> {
    cfg.validate()?;
    experiment.validate()?;
    if experiment.system.sites() > 64 {
        return invalid("bitstrings are limited to 64 sites");
    }
    let kraus = KrausChannel::from_config(cfg)?;
    let shots = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|t| experiment.trajectory(cfg, &kraus, TrajectorySeed::new(master_seed, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoisyRun {
        sites: experiment.system.sites(),
        center: experiment.center,
        grid: experiment.grid,
        seed: master_seed,
        shots,
    })
}

/// Sum with pairwise splitting, so the result depends only on the input order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Mean and standard error of ⟨Z⟩ per (site, step). Standard errors are NaN with one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimates {
    pub mean: GreensTable,
    pub stderr: GreensTable,
    pub samples: usize,
}

impl NoisyRun {
    pub fn samples(&self) -> usize {
        self.shots.len()
    }

    /// Bitstrings recorded at step index `n`.
    pub fn shots_at(&self, n: usize) -> Vec<u64> {
        self.shots.iter().map(|s| s[n]).collect()
    }

    pub fn z_estimates(&self) -> Result<ZEstimates> {
        let mut mean = GreensTable::zeros(self.sites, self.center, self.grid)?;
        let mut stderr = GreensTable::zeros(self.sites, self.center, self.grid)?;
        let m = self.samples() as f64;
        for n in 0..self.grid.steps {
            let shots = self.shots_at(n);
            for i in 0..self.sites {
                let z: Vec<f64> = shots.iter().map(|b| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 }).collect();
                let mu = pairwise_sum(&z) / m;
                let var = pairwise_sum(&z.iter().map(|v| (v - mu).powi(2)).collect::<Vec<_>>()) / (m - 1.0);
                mean.set(i, n, mu);
                stderr.set(i, n, if self.samples() > 1 { (var / m).sqrt() } else { f64::NAN });
            }
        }
        Ok(ZEstimates { mean, stderr, samples: self.samples() })
    }
}

/// Randomized-measurement calibration on |0…0⟩ under the same readout, missing-atom
/// and Kraus noise as the experiment. Qubits are independent in this circuit, so
/// each is simulated as its own two-level system.
pub fn simulate_calibration(
    sites: usize,
    cfg: &NoiseConfig,
    n_u: usize,
    n_m: usize,
    master_seed: u64,
) -> Result<CalibrationRecords> {
    cfg.validate()?;
    if n_u == 0 || n_m == 0 {
        return invalid("calibration needs N_U ≥ 1 and N_M ≥ 1");
    }
    let kraus = KrausChannel::from_config(cfg)?;
    // Streams above 2^40 keep calibration draws apart from trajectory draws.
    let rounds = (0..n_u as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<_>, Vec<f64>)> {
            let mut rng = TrajectorySeed::new(master_seed, (1u64 << 40) + r).rng();
            let unitaries: Vec<_> = (0..sites).map(|_| sample_haar_unitary(&mut rng)).collect();
            let prepared: Vec<QuantumState> = unitaries
                .iter()
                .map(|u| {
                    let m = u.matrix();
                    QuantumState::from_amplitudes(1, vec![m[0][0], m[1][0]])
                })
                .collect::<Result<_>>()?;
            let mut ones = vec![0usize; sites];
            for _ in 0..n_m {
                let missing = sample_missing(sites, cfg, &mut rng);
                let mut bits = 0u64;
                for (j, psi) in prepared.iter().enumerate() {
                    if missing[j] {
                        continue;
                    }
                    let mut q = psi.clone();
                    if cfg.has_kraus() {
                        kraus.apply(&mut q, 0, &mut rng);
                    }
                    bits |= sample_bitstring(&q, &mut rng) << j;
                }
                let read = apply_readout_errors(bits, sites, &missing, cfg, &mut rng);
                for (j, c) in ones.iter_mut().enumerate() {
                    *c += ((read >> j) & 1) as usize;
                }
            }
            Ok((unitaries, ones.iter().map(|c| *c as f64 / n_m as f64).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (unitaries, frequencies) = rounds.into_iter().unzip();
    Ok(CalibrationRecords { sites, shots_per_unitary: n_m, unitaries, frequencies })
}
