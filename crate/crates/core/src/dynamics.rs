//! Time-ordered propagation of state vectors.
//!
//! Each step uses the two-exponential commutator-free Magnus scheme of order
//! four with the Hamiltonian sampled at the two Gauss points of the step.
//! Every exponential is applied matrix-free by a Taylor series summed to
//! machine precision, so the only discretization error is the Magnus one.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::operator::{RydbergSystem, SpinOperator, C0};
use crate::pulse::PulseProgram;
use crate::spectrum::Spectrum;
use crate::state::QuantumState;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Gauss-point offsets within a step.
const NODE_1: f64 = 0.5 - SQRT3 / 6.0;
const NODE_2: f64 = 0.5 + SQRT3 / 6.0;
/// Mixing weights of the two exponentials.
const WEIGHT_SMALL: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const WEIGHT_LARGE: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// Norm drift above which a run is rejected.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// exp(−iτH)ψ.
pub fn expm_apply(op: &SpinOperator, tau: f64, psi: &[Complex64]) -> Vec<Complex64> {
    let mut out = psi.to_vec();
    expm_apply_in_place(op, tau, &mut out);
    out
}

pub(crate) fn expm_apply_in_place(op: &SpinOperator, tau: f64, psi: &mut [Complex64]) {
    if tau == 0.0 {
        return;
    }
    let (lo, hi) = op.diag_range();
    let centre = 0.5 * (lo + hi);
    let shifted = op.shifted(-centre);
    let bound = shifted.norm_bound() * tau.abs();
    let pieces = bound.ceil().max(1.0) as usize;
    let h = tau / pieces as f64;
    let dim = psi.len();
    let mut term = vec![C0; dim];
    let mut next = vec![C0; dim];
    for _ in 0..pieces {
        term.copy_from_slice(psi);
        for k in 1..64 {
            shifted.apply_into(&term, &mut next);
            let coef = Complex64::new(0.0, -h / k as f64);
            let mut size = 0.0f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * coef;
                size = size.max(t.norm_sqr());
            }
            for (p, t) in psi.iter_mut().zip(&term) {
                *p += t;
            }
            if size < 1e-34 {
                break;
            }
        }
    }
    let phase = Complex64::from_polar(1.0, -centre * tau);
    psi.iter_mut().for_each(|p| *p *= phase);
}

/// Where H(t) comes from.
#[derive(Debug, Clone)]
pub enum HamiltonianSource {
    /// Time-independent operator, e.g. the ideal Ising chain.
    Static(SpinOperator),
    /// Rydberg array driven by a pulse program (program time starts at 0).
    Pulse { system: RydbergSystem, program: PulseProgram },
}

impl HamiltonianSource {
    pub fn sites(&self) -> usize {
        match self {
            HamiltonianSource::Static(op) => op.sites(),
            HamiltonianSource::Pulse { system, .. } => system.sites(),
        }
    }

    fn is_static(&self) -> bool {
        match self {
            HamiltonianSource::Static(_) => true,
            HamiltonianSource::Pulse { program, .. } => program.is_static(),
        }
    }

    /// H(t) and whether the amplitude was clamped.
    pub fn at(&self, t: f64) -> (SpinOperator, bool) {
        match self {
            HamiltonianSource::Static(op) => (op.clone(), false),
            HamiltonianSource::Pulse { system, program } => system.operator_at(program, t),
        }
    }
}

/// Hamiltonian source, duration and step.
#[derive(Debug, Clone)]
pub struct EvolutionSchedule {
    pub source: HamiltonianSource,
    pub duration: f64,
    pub dt: f64,
}

impl EvolutionSchedule {
    pub fn new(source: HamiltonianSource, duration: f64, dt: f64) -> Result<Self> {
        let s = Self { source, duration, dt };
        s.steps()?;
        if let HamiltonianSource::Pulse { system, program } = &s.source {
            program.validate(system.sites())?;
        }
        Ok(s)
    }

    /// Whole number of steps covering the duration.
    pub fn steps(&self) -> Result<usize> {
        step_count(self.duration, self.dt)
    }

    pub fn stepper(&self) -> Stepper {
        Stepper { source: self.source.clone(), dt: self.dt }
    }
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    if !(span >= 0.0) || !span.is_finite() {
        return invalid(format!("duration must be finite and non-negative, got {span}"));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return invalid(format!("duration {span} is not a whole number of steps of {dt}"));
    }
    Ok(n as usize)
}

/// Diagnostics from a propagation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolutionReport {
    pub steps: usize,
    /// Hamiltonian samples at which a negative amplitude was clamped to zero.
    pub clamp_events: usize,
    /// | ‖ψ‖ − 1 | at the end.
    pub norm_drift: f64,
}

/// Anything that maps ψ(t0) to ψ(t1).
pub trait Propagator {
    fn sites(&self) -> usize;
    fn propagate(&self, state: &QuantumState, t0: f64, t1: f64) -> Result<QuantumState>;
}

impl Propagator for Spectrum {
    fn sites(&self) -> usize {
        Spectrum::sites(self)
    }

    fn propagate(&self, state: &QuantumState, t0: f64, t1: f64) -> Result<QuantumState> {
        self.evolve(state, t1 - t0)
    }
}

/// Fixed-step integrator over a Hamiltonian source.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub source: HamiltonianSource,
    pub dt: f64,
}

impl Stepper {
    pub fn new(source: HamiltonianSource, dt: f64) -> Self {
        Self { source, dt }
    }

    /// Evolves from `t0` to `t1` in place; the span must be a whole number of steps.
    pub fn run(&self, psi: &mut [Complex64], t0: f64, t1: f64) -> Result<EvolutionReport> {
        let steps = step_count(t1 - t0, self.dt)?;
        let mut report = EvolutionReport { steps, ..Default::default() };
        if steps == 0 {
            return Ok(report);
        }
        let h = (t1 - t0) / steps as f64;
        if self.source.is_static() {
            let (op, clamped) = self.source.at(t0);
            report.clamp_events += clamped as usize;
            for _ in 0..steps {
                expm_apply_in_place(&op, h, psi);
            }
        } else {
            for n in 0..steps {
                let t = t0 + n as f64 * h;
                let (h1, c1) = self.source.at(t + NODE_1 * h);
                let (h2, c2) = self.source.at(t + NODE_2 * h);
                report.clamp_events += c1 as usize + c2 as usize;
                expm_apply_in_place(&h1.combine(WEIGHT_LARGE, &h2, WEIGHT_SMALL), h, psi);
                expm_apply_in_place(&h1.combine(WEIGHT_SMALL, &h2, WEIGHT_LARGE), h, psi);
            }
        }
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        report.norm_drift = (norm - 1.0).abs();
        if report.norm_drift > NORM_TOLERANCE || !norm.is_finite() {
            return Err(Error::NumericalInstability { drift: report.norm_drift, suggested_dt: h / 2.0 });
        }
        Ok(report)
    }
}

impl Propagator for Stepper {
    fn sites(&self) -> usize {
        self.source.sites()
    }

    fn propagate(&self, state: &QuantumState, t0: f64, t1: f64) -> Result<QuantumState> {
        if state.sites() != self.sites() {
            return invalid("state dimension does not match the Hamiltonian");
        }
        let mut out = state.clone();
        self.run(out.amplitudes_mut(), t0, t1)?;
        Ok(out)
    }
}

/// Evolves `state` through the whole schedule.
pub fn evolve(state: &QuantumState, schedule: &EvolutionSchedule) -> Result<QuantumState> {
    evolve_with_report(state, schedule).map(|(s, _)| s)
}

pub fn evolve_with_report(state: &QuantumState, schedule: &EvolutionSchedule) -> Result<(QuantumState, EvolutionReport)> {
    if state.sites() != schedule.source.sites() {
        return invalid(format!(
            "state has {} sites but the Hamiltonian has {}",
            state.sites(),
            schedule.source.sites()
        ));
    }
    let mut out = state.clone();
    let report = schedule.stepper().run(out.amplitudes_mut(), 0.0, schedule.duration)?;
    if report.clamp_events > 0 {
        crate::diagnostics::warn(format!("negative amplitude clamped to zero at {} samples", report.clamp_events));
    }
    Ok((out, report))
}
