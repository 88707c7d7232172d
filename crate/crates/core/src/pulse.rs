//! Pulse programs: amplitude, phase, global detuning and a local detuning pattern.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A scalar control signal over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Waveform {
    Constant { value: f64 },
    /// Piecewise-linear interpolation; held constant outside the table.
    Table { times: Vec<f64>, values: Vec<f64> },
    /// Adiabatic sweep amplitude with bump terms near `p[4]` and `t = 0`.
    SweepAmplitude { p: [f64; 8], t_max: f64 },
    /// Arctangent detuning ramp centred at `t_max / 2`.
    SweepDetuning { p: [f64; 8], t_max: f64 },
}

impl Waveform {
    pub fn zero() -> Self {
        Waveform::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        Waveform::Constant { value }
    }

    pub fn table(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return invalid("waveform table needs matching, non-empty time and value columns");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("waveform table times must be strictly increasing");
        }
        Ok(Waveform::Table { times, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Table { times, values } => interpolate(times, values, t),
            Waveform::SweepAmplitude { p, t_max } => sweep_amplitude(p, *t_max, t),
            Waveform::SweepDetuning { p, t_max } => sweep_detuning(p, *t_max, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Waveform::Constant { .. })
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// Unclamped sweep amplitude.
pub fn sweep_amplitude(p: &[f64; 8], t_max: f64, t: f64) -> f64 {
    let s = (PI * t / t_max).sin();
    let plateau = 1.0 - (1.0 - s * s).max(0.0).powf(p[3] / 2.0);
    p[0] * plateau + p[5] * (-5.0 * (t - p[4]).powi(4)).exp() + p[6] * (-5.0 * t.powi(4)).exp()
}

pub fn sweep_detuning(p: &[f64; 8], t_max: f64, t: f64) -> f64 {
    2.0 / PI * p[2] * (p[1] * (t - t_max / 2.0)).atan()
}

/// Per-site weights times one shared time-dependent envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDetuning {
    pub pattern: Vec<f64>,
    pub envelope: Waveform,
}

/// Controls evaluated at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSample {
    /// Rabi frequency after clamping to be non-negative.
    pub omega: f64,
    pub phase: f64,
    pub delta_global: f64,
    pub envelope: f64,
    /// True when the raw amplitude was negative and got clamped.
    pub clamped: bool,
}

/// Drive program for the Rydberg Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub duration: f64,
    pub amplitude: Waveform,
    pub phase: Waveform,
    pub detuning: Waveform,
    pub local: Option<LocalDetuning>,
}

impl PulseProgram {
    /// Everything off for `duration`.
    pub fn idle(duration: f64) -> Self {
        Self {
            duration,
            amplitude: Waveform::zero(),
            phase: Waveform::zero(),
            detuning: Waveform::zero(),
            local: None,
        }
    }

    /// Constant controls for `duration`.
    pub fn constant(duration: f64, omega: f64, phase: f64, delta: f64) -> Self {
        Self {
            duration,
            amplitude: Waveform::constant(omega),
            phase: Waveform::constant(phase),
            detuning: Waveform::constant(delta),
            local: None,
        }
    }

    pub fn with_local(mut self, local: LocalDetuning) -> Self {
        self.local = Some(local);
        self
    }

    pub fn validate(&self, sites: usize) -> Result<()> {
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return invalid(format!("pulse duration must be finite and non-negative, got {}", self.duration));
        }
        if let Some(local) = &self.local {
            if local.pattern.len() != sites {
                return invalid(format!(
                    "local detuning pattern has {} entries for {sites} sites",
                    local.pattern.len()
                ));
            }
        }
        Ok(())
    }

    /// True when no control changes with time.
    pub fn is_static(&self) -> bool {
        self.amplitude.is_constant()
            && self.phase.is_constant()
            && self.detuning.is_constant()
            && self.local.as_ref().is_none_or(|l| l.envelope.is_constant())
    }

    pub fn sample(&self, t: f64) -> PulseSample {
        let raw = self.amplitude.at(t);
        PulseSample {
            omega: raw.max(0.0),
            phase: self.phase.at(t),
            delta_global: self.detuning.at(t),
            envelope: self.local.as_ref().map_or(0.0, |l| l.envelope.at(t)),
            clamped: raw < 0.0,
        }
    }

    /// Site detunings Δ_i at `t`.
    pub fn site_detunings(&self, t: f64, sites: usize) -> Vec<f64> {
        let s = self.sample(t);
        (0..sites)
            .map(|i| s.delta_global + self.local.as_ref().map_or(0.0, |l| l.pattern[i] * s.envelope))
            .collect()
    }
}

/// Endpoint indicator pattern for a chain: 1 on the two end atoms, 0 inside.
pub fn endpoint_pattern(sites: usize) -> Vec<f64> {
    (0..sites).map(|i| if i == 0 || i + 1 == sites { 1.0 } else { 0.0 }).collect()
}

/// Constant program realizing the Ising chain from mapped pulse parameters.
pub fn mapped_program(mapped: &crate::lattice::MappedPulse, sites: usize, duration: f64) -> PulseProgram {
    PulseProgram::constant(duration, mapped.rabi_frequency(), 0.0, mapped.delta_interior).with_local(LocalDetuning {
        pattern: endpoint_pattern(sites),
        envelope: Waveform::constant(mapped.delta_endpoint - mapped.delta_interior),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_holds_the_ends() {
        let w = Waveform::table(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, -2.0]).unwrap();
        assert_eq!(w.at(-1.0), 0.0);
        assert_eq!(w.at(0.5), 1.0);
        assert_eq!(w.at(2.0), 0.0);
        assert_eq!(w.at(9.0), -2.0);
        assert!(Waveform::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn detuning_ramp_is_odd_about_the_midpoint() {
        let p = [1.0, 0.4, 3.0, 10.0, 5.0, 1.0, 0.0, 0.0];
        for t in [0.0, 1.3, 4.0] {
            assert!((sweep_detuning(&p, 10.0, t) + sweep_detuning(&p, 10.0, 10.0 - t)).abs() < 1e-14);
        }
    }
}
