//! Ground-state preparation: the adiabatic sweep ansatz, its optimizer and the QAOA circuit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionReport, HamiltonianSource, Stepper};
use crate::error::{invalid, Error, Result};
use crate::lattice::{vdw_strength, AtomRegister};
use crate::operator::{occupation, z_value, RydbergSystem};
use crate::pulse::{endpoint_pattern, LocalDetuning, PulseProgram, Waveform};
use crate::state::{fidelity, z_profile, QuantumState};

/// Sweep shape parameters p₀…p₇ and duration. p₇ is carried but unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticHyperparams {
    pub p: [f64; 8],
    pub t_max: f64,
}

impl AdiabaticHyperparams {
    pub fn new(p: [f64; 8], t_max: f64) -> Result<Self> {
        let hp = Self { p, t_max };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.iter().any(|x| !x.is_finite()) {
            return invalid("hyperparameters must be finite");
        }
        if !(self.p[0] > 0.0) {
            return invalid(format!("p0 (peak amplitude) must be positive, got {}", self.p[0]));
        }
        if !(self.p[3] > 0.0) {
            return invalid(format!("p3 (plateau sharpness) must be positive, got {}", self.p[3]));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return invalid(format!("t_max must be positive, got {}", self.t_max));
        }
        Ok(())
    }

    /// Generic starting point for a sweep of length `t_max` in model units:
    /// a smooth plateau, a detuning ramp through resonance and a final
    /// amplitude bump that lands the drive near the critical field.
    pub fn initial_guess(t_max: f64) -> Self {
        Self { p: [2.0, 0.3, 4.0, 60.0, t_max, 1.6, 0.0, 0.0], t_max }
    }
}

/// Global sweep waveforms: amplitude, zero phase and arctangent detuning.
pub fn ansatz_waveforms(hp: &AdiabaticHyperparams) -> Result<PulseProgram> {
    hp.validate()?;
    let program = PulseProgram {
        duration: hp.t_max,
        amplitude: Waveform::SweepAmplitude { p: hp.p, t_max: hp.t_max },
        phase: Waveform::zero(),
        detuning: Waveform::SweepDetuning { p: hp.p, t_max: hp.t_max },
        local: None,
    };
    let samples = 1000;
    let negative = (0..=samples)
        .filter(|k| program.amplitude.at(hp.t_max * *k as f64 / samples as f64) < 0.0)
        .count();
    if negative > 0 {
        crate::diagnostics::warn(format!("sweep amplitude negative on {negative} of {} samples; clamped to zero", samples + 1));
    }
    Ok(program)
}

/// How the sweep detuning is distributed over the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDetuning {
    /// Same detuning on every atom.
    #[default]
    GlobalOnly,
    /// End atoms get half the bulk detuning, as in the Ising mapping.
    Mapped,
}

/// Array, detuning layout and step used to run a sweep.
#[derive(Debug, Clone)]
pub struct PrepSetup {
    pub system: RydbergSystem,
    pub detuning: SweepDetuning,
    pub dt: f64,
}

impl PrepSetup {
    pub fn new(system: RydbergSystem, detuning: SweepDetuning, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid(format!("dt must be positive, got {dt}"));
        }
        Ok(Self { system, detuning, dt })
    }

    /// Full pulse program for the given hyperparameters.
    pub fn program(&self, hp: &AdiabaticHyperparams) -> Result<PulseProgram> {
        let mut program = ansatz_waveforms(hp)?;
        if self.detuning == SweepDetuning::Mapped {
            // End atoms see half the global ramp: add −½Δ_global on them.
            let mut half = hp.p;
            half[2] *= -0.5;
            program.local = Some(LocalDetuning {
                pattern: endpoint_pattern(self.system.sites()),
                envelope: Waveform::SweepDetuning { p: half, t_max: hp.t_max },
            });
        }
        Ok(program)
    }
}

/// Prepared state and run diagnostics.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: QuantumState,
    pub report: EvolutionReport,
    /// max_i |⟨Z_i⟩|, zero for a parity-symmetric state.
    pub parity_residual: f64,
}

/// Evolves |0…0⟩ through the sweep.
pub fn prepare_ground_state(hp: &AdiabaticHyperparams, setup: &PrepSetup) -> Result<PreparedState> {
    let program = setup.program(hp)?;
    let l = setup.system.sites();
    let mut state = QuantumState::ground(l)?;
    let steps = (hp.t_max / setup.dt).round().max(1.0);
    let stepper = Stepper::new(
        HamiltonianSource::Pulse { system: setup.system.clone(), program },
        hp.t_max / steps,
    );
    let report = stepper.run(state.amplitudes_mut(), 0.0, hp.t_max)?;
    let parity_residual = z_profile(&state).iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Ok(PreparedState { state, report, parity_residual })
}

/// Optimization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Nesterov-accelerated Adam on finite-difference gradients, handing over to
    /// Nelder–Mead once progress stalls.
    #[default]
    Hybrid,
    Nadam,
    NelderMead,
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub evaluation: usize,
    pub fidelity: f64,
    pub best: f64,
    pub p: [f64; 8],
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub hp: AdiabaticHyperparams,
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
    /// False when the budget ran out without beating the initial point.
    pub improved: bool,
}

impl OptimizationResult {
    /// First evaluation at which the best fidelity reached `level`.
    pub fn evaluations_to_reach(&self, level: f64) -> Option<usize> {
        self.trace.iter().find(|r| r.best >= level).map(|r| r.evaluation)
    }
}

/// Parameters the optimizer moves; p₇ stays fixed.
const ACTIVE: usize = 7;
const MIN_SCALE: [f64; ACTIVE] = [0.5, 0.05, 0.5, 5.0, 1.0, 0.5, 0.05];

struct Objective<'a> {
    setup: &'a PrepSetup,
    target: &'a QuantumState,
    base: AdiabaticHyperparams,
    scale: [f64; ACTIVE],
    budget: usize,
    trace: Vec<TraceRow>,
    best: (f64, AdiabaticHyperparams),
}

impl Objective<'_> {
    fn decode(&self, x: &[f64]) -> AdiabaticHyperparams {
        let mut hp = self.base;
        for k in 0..ACTIVE {
            hp.p[k] = x[k] * self.scale[k];
        }
        hp
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Infidelity at scaled point `x`; invalid points score 1.
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let hp = self.decode(x);
        let f = if hp.validate().is_ok() {
            fidelity(&prepare_ground_state(&hp, self.setup)?.state, self.target)?
        } else {
            0.0
        };
        if f > self.best.0 {
            self.best = (f, hp);
        }
        self.trace.push(TraceRow { evaluation: self.trace.len() + 1, fidelity: f, best: self.best.0, p: hp.p });
        Ok(1.0 - f)
    }
}

/// Maximizes the overlap of the prepared state with `target` within `budget` evaluations.
pub fn optimize_hyperparameters(
    setup: &PrepSetup,
    target: &QuantumState,
    initial: &AdiabaticHyperparams,
    budget: usize,
    kind: OptimizerKind,
) -> Result<OptimizationResult> {
    initial.validate()?;
    if target.sites() != setup.system.sites() {
        return invalid("target state does not match the register");
    }
    let initial_fidelity = fidelity(&prepare_ground_state(initial, setup)?.state, target)?;
    let mut scale = [0.0; ACTIVE];
    for k in 0..ACTIVE {
        scale[k] = initial.p[k].abs().max(MIN_SCALE[k]);
    }
    let mut obj = Objective {
        setup,
        target,
        base: *initial,
        scale,
        budget,
        trace: Vec::new(),
        best: (initial_fidelity, *initial),
    };
    let x0: Vec<f64> = (0..ACTIVE).map(|k| initial.p[k] / scale[k]).collect();
    match kind {
        OptimizerKind::Nadam => {
            nadam(&mut obj, &x0, usize::MAX)?;
        }
        OptimizerKind::NelderMead => nelder_mead(&mut obj, &x0)?,
        OptimizerKind::Hybrid => {
            let x = nadam(&mut obj, &x0, 6)?;
            nelder_mead(&mut obj, &x)?;
        }
    }
    let (best_f, best_hp) = obj.best;
    let improved = best_f > initial_fidelity;
    if !improved && budget > 0 {
        crate::diagnostics::warn(format!("optimizer budget of {budget} evaluations exhausted without improvement"));
    }
    Ok(OptimizationResult {
        hp: if improved { best_hp } else { *initial },
        fidelity: best_f.max(initial_fidelity),
        initial_fidelity,
        evaluations: obj.trace.len(),
        trace: obj.trace,
        improved,
    })
}

/// Nadam with forward-difference gradients. Stops after `patience` iterations
/// without a new best, or when the budget runs out; returns the best point.
fn nadam(obj: &mut Objective, x0: &[f64], patience: usize) -> Result<Vec<f64>> {
    let (lr, b1, b2, eps, h) = (0.02, 0.9, 0.999, 1e-8, 1e-5);
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut best_x = x.clone();
    let mut best_f = f64::INFINITY;
    let mut stale = 0;
    let mut iter = 0;
    while obj.trace.len() + n + 1 <= obj.budget {
        iter += 1;
        let f = obj.eval(&x)?;
        if f < best_f - 1e-6 {
            best_f = f;
            best_x = x.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let mut xp = x.clone();
            xp[k] += h;
            grad[k] = (obj.eval(&xp)? - f) / h;
        }
        for k in 0..n {
            m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
            v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
            let m_hat = b1 * m[k] / (1.0 - b1.powi(iter + 1)) + (1.0 - b1) * grad[k] / (1.0 - b1.powi(iter));
            let v_hat = v[k] / (1.0 - b2.powi(iter));
            x[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(best_x)
}

/// Nelder–Mead simplex search until the budget runs out or the simplex collapses.
fn nelder_mead(obj: &mut Objective, x0: &[f64]) -> Result<()> {
    let n = x0.len();
    if obj.exhausted() {
        return Ok(());
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = obj.eval(x0)?;
    simplex.push((x0.to_vec(), f0));
    for k in 0..n {
        if obj.exhausted() {
            return Ok(());
        }
        let mut x = x0.to_vec();
        x[k] += if x[k] != 0.0 { 0.05 * x[k] } else { 0.05 };
        let f = obj.eval(&x)?;
        simplex.push((x, f));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while !obj.exhausted() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 < 1e-10 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|s| s.0[k]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[n].0.clone();
        let xr = toward(-alpha, &worst);
        let fr = obj.eval(&xr)?;
        if fr < simplex[0].1 {
            if obj.exhausted() {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = toward(-gamma, &worst);
            let fe = obj.eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if obj.exhausted() {
                break;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = toward(-rho, &worst);
                let fc = obj.eval(&xc)?;
                (xc, fc)
            } else {
                let xc = toward(rho, &worst);
                let fc = obj.eval(&xc)?;
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    if obj.exhausted() {
                        return Ok(());
                    }
                    let x: Vec<f64> = best.iter().zip(&s.0).map(|(b, x)| b + sigma * (x - b)).collect();
                    let f = obj.eval(&x)?;
                    *s = (x, f);
                }
            }
        }
    }
    Ok(())
}

/// Optimized hyperparameters keyed by chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HyperparamTable {
    #[serde(default)]
    pub entries: BTreeMap<String, AdiabaticHyperparams>,
}

impl HyperparamTable {
    /// Table shipped with the library (model units, global detuning, t_max = 20).
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../resources/hp_table.toml")).expect("built-in table parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn insert(&mut self, sites: usize, hp: AdiabaticHyperparams) {
        self.entries.insert(sites.to_string(), hp);
    }

    pub fn get(&self, sites: usize) -> Option<&AdiabaticHyperparams> {
        self.entries.get(&sites.to_string())
    }

    fn lengths(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.keys().filter_map(|k| k.parse().ok()).collect();
        v.sort_unstable();
        v
    }

    /// Exact entry, or the entry of the longest recorded chain when `sites` exceeds it.
    pub fn lookup(&self, sites: usize) -> Option<AdiabaticHyperparams> {
        if let Some(hp) = self.get(sites) {
            return Some(*hp);
        }
        let lengths = self.lengths();
        let longest = *lengths.last()?;
        (sites > longest).then(|| *self.get(longest).expect("key exists"))
    }
}

/// QAOA angles per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
}

impl QaoaParams {
    pub fn level(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.gamma.len();
        if p == 0 || self.tau.len() != p || self.beta.len() != p {
            return invalid("QAOA angle vectors must share a length of at least 1");
        }
        Ok(())
    }
}

/// Π_{i=1..p} e^{−iH_ZZ[τ_i,β_i]} e^{−iH_X[γ_i]} |+⟩^⊗L with the product written
/// left to right, so level p acts first on the initial state and level 1 last.
///
/// H_X[γ] = γΣX_i and H_ZZ[τ,β] = τ[βΣZ_i + (C6/4)Σ_{i<j} V_ij (Z_i − 1)(Z_j − 1)].
pub fn qaoa_state(register: &AtomRegister, c6: f64, params: &QaoaParams) -> Result<QuantumState> {
    params.validate()?;
    let l = register.len();
    let mut state = QuantumState::plus(l)?;
    let dim = state.dim();
    let mut zz = vec![0.0; dim];
    let mut zsum = vec![0.0; dim];
    for i in 0..l {
        for j in i + 1..l {
            let v = c6 * vdw_strength(register, i, j)?;
            for (b, x) in zz.iter_mut().enumerate() {
                *x += v * occupation(b, i) * occupation(b, j);
            }
        }
    }
    for (b, x) in zsum.iter_mut().enumerate() {
        *x = (0..l).map(|i| z_value(b, i)).sum();
    }
    for level in (0..params.level()).rev() {
        let (c, s) = (params.gamma[level].cos(), params.gamma[level].sin());
        let amps = state.amplitudes_mut();
        for i in 0..l {
            let m = 1usize << i;
            for b in (0..dim).filter(|b| b & m == 0) {
                let (a0, a1) = (amps[b], amps[b | m]);
                let mis = Complex64::new(0.0, -s);
                amps[b] = a0 * c + a1 * mis;
                amps[b | m] = a1 * c + a0 * mis;
            }
        }
        let (tau, beta) = (params.tau[level], params.beta[level]);
        for (b, a) in amps.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, -tau * (beta * zsum[b] + zz[b]));
        }
    }
    Ok(state)
}

/// Sweep amplitude and detuning on a uniform grid of `samples + 1` points.
pub fn sample_waveforms(hp: &AdiabaticHyperparams, samples: usize) -> Vec<(f64, f64, f64)> {
    (0..=samples)
        .map(|k| {
            let t = hp.t_max * k as f64 / samples.max(1) as f64;
            let omega = crate::pulse::sweep_amplitude(&hp.p, hp.t_max, t).max(0.0);
            (t, omega, crate::pulse::sweep_detuning(&hp.p, hp.t_max, t))
        })
        .collect()
}

/// Model-unit default sweep length.
pub const DEFAULT_SWEEP_TIME: f64 = 20.0;

/// Default sweep step in model units.
pub const DEFAULT_PREP_DT: f64 = 0.05;

