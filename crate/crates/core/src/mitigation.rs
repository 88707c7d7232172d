//! Readout-error mitigation: per-qubit confusion inversion and the
//! randomized-measurement survival-probability rescaling of ⟨Z⟩.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::Mat2;

/// Per-qubit column-stochastic readout model [[1−ε, ε′], [ε, 1−ε′]].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionModel {
    pub eps: Vec<f64>,
    pub eps_prime: Vec<f64>,
}

impl ConfusionModel {
    pub fn uniform(sites: usize, eps: f64, eps_prime: f64) -> Result<Self> {
        let m = Self { eps: vec![eps; sites], eps_prime: vec![eps_prime; sites] };
        m.validate()?;
        Ok(m)
    }

    pub fn sites(&self) -> usize {
        self.eps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.len() != self.eps_prime.len() {
            return Err(Error::InvalidConfig("confusion rates differ in length".into()));
        }
        for (q, (e, f)) in self.eps.iter().zip(&self.eps_prime).enumerate() {
            if !(0.0..=1.0).contains(e) || !(0.0..=1.0).contains(f) {
                return Err(Error::InvalidConfig(format!("qubit {q}: readout rates must be probabilities")));
            }
            if e + f >= 1.0 {
                return Err(Error::InvalidConfig(format!("qubit {q}: ε + ε′ = {} makes the confusion matrix singular", e + f)));
            }
        }
        Ok(())
    }

    /// Column-stochastic matrix C with C[observed][true].
    pub fn matrix(&self, q: usize) -> [[f64; 2]; 2] {
        let (e, f) = (self.eps[q], self.eps_prime[q]);
        [[1.0 - e, f], [e, 1.0 - f]]
    }

    /// Expected observed P(1) for a true P(1).
    pub fn forward_p1(&self, q: usize, p1: f64) -> f64 {
        self.eps[q] + (1.0 - self.eps[q] - self.eps_prime[q]) * p1
    }
}

/// Corrected marginals and the probability mass removed by clipping to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedMarginals {
    pub p1: Vec<f64>,
    pub clipped_mass: f64,
}

impl CorrectedMarginals {
    pub fn z(&self) -> Vec<f64> {
        self.p1.iter().map(|p| 1.0 - 2.0 * p).collect()
    }
}

/// Inverts the per-qubit confusion matrices on observed P(1) marginals.
pub fn confusion_correct(p1_observed: &[f64], model: &ConfusionModel) -> Result<CorrectedMarginals> {
    model.validate()?;
    if p1_observed.len() != model.sites() {
        return invalid("marginals and confusion model differ in qubit count");
    }
    let mut clipped_mass = 0.0;
    let p1 = p1_observed
        .iter()
        .enumerate()
        .map(|(q, p)| {
            let raw = (p - model.eps[q]) / (1.0 - model.eps[q] - model.eps_prime[q]);
            let c = raw.clamp(0.0, 1.0);
            clipped_mass += (raw - c).abs();
            c
        })
        .collect();
    Ok(CorrectedMarginals { p1, clipped_mass })
}

/// Confusion correction on ⟨Z⟩ estimates, one per qubit of `model`.
pub fn confusion_correct_z(z_observed: &[f64], model: &ConfusionModel) -> Result<CorrectedMarginals> {
    let p1: Vec<f64> = z_observed.iter().map(|z| (1.0 - z) / 2.0).collect();
    confusion_correct(&p1, model)
}

/// Single-qubit unitary R_Z(ω)R_Y(θ)R_Z(φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarUnitary {
    pub phi: f64,
    pub theta: f64,
    pub omega: f64,
}

impl HaarUnitary {
    pub fn matrix(&self) -> Mat2 {
        let rz = |a: f64| -> Mat2 {
            let z = Complex64::new(0.0, 0.0);
            [[Complex64::from_polar(1.0, -a / 2.0), z], [z, Complex64::from_polar(1.0, a / 2.0)]]
        };
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        let ry: Mat2 = [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ];
        mat_mul(&rz(self.omega), &mat_mul(&ry, &rz(self.phi)))
    }

    /// P(s | u) = |⟨s|u|0⟩|².
    pub fn outcome_probability(&self, s: usize) -> f64 {
        let h = self.theta / 2.0;
        if s == 0 {
            h.cos().powi(2)
        } else {
            h.sin().powi(2)
        }
    }
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Haar-random single-qubit unitary: φ, ω uniform on [0, 2π), θ = arccos(1 − 2u).
pub fn sample_haar_unitary(rng: &mut impl Rng) -> HaarUnitary {
    let phi = 2.0 * PI * rng.random::<f64>();
    let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
    let omega = 2.0 * PI * rng.random::<f64>();
    HaarUnitary { phi, theta, omega }
}

/// Outcome statistics of randomized measurements on a register prepared in |0…0⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecords {
    pub sites: usize,
    pub shots_per_unitary: usize,
    /// unitaries[r][j]: local unitary on qubit j for round r.
    pub unitaries: Vec<Vec<HaarUnitary>>,
    /// frequencies[r][j]: empirical P̂(s_j = 1) for round r.
    pub frequencies: Vec<Vec<f64>>,
}

impl CalibrationRecords {
    pub fn rounds(&self) -> usize {
        self.unitaries.len()
    }

    /// Same records with confusion-corrected frequencies.
    pub fn confusion_corrected(&self, model: &ConfusionModel) -> Result<Self> {
        let mut out = self.clone();
        for row in out.frequencies.iter_mut() {
            *row = confusion_correct(row, model)?.p1;
        }
        Ok(out)
    }
}

/// G_j = 12/(5N_U) Σ_r Σ_{s_j} P̂(s_j|r) P(s_j|u_j^{(r)}) − 4/5, per qubit.
///
/// A perfect device averages to 4/5 and a fully depolarized readout to 2/5.
pub fn survival_probability(records: &CalibrationRecords, n_u: usize) -> Result<Vec<f64>> {
    if n_u == 0 {
        return invalid("N_U must be at least 1");
    }
    if records.unitaries.len() < n_u || records.frequencies.len() < n_u {
        return Err(Error::IncompleteCalibration(format!(
            "{} unitary records for N_U = {n_u}",
            records.unitaries.len().min(records.frequencies.len())
        )));
    }
    for r in 0..n_u {
        if records.unitaries[r].len() != records.sites || records.frequencies[r].len() != records.sites {
            return Err(Error::IncompleteCalibration(format!("round {r} does not cover every qubit")));
        }
    }
    Ok((0..records.sites)
        .map(|j| {
            let sum: f64 = (0..n_u)
                .map(|r| {
                    let u = &records.unitaries[r][j];
                    let p1 = records.frequencies[r][j];
                    (1.0 - p1) * u.outcome_probability(0) + p1 * u.outcome_probability(1)
                })
                .sum();
            12.0 / (5.0 * n_u as f64) * sum - 0.8
        })
        .collect())
}

/// Value of the survival estimator for an error-free device.
pub const PERFECT_SURVIVAL: f64 = 0.8;

/// Direction of the rescale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationMode {
    /// G/(2 − G).
    Scale,
    /// (2 − G)/G.
    #[default]
    InverseScale,
}

/// Per-qubit survival probabilities and the settings that produced them.
///
/// `survival` is the raw estimator divided by `reference`, so an error-free
/// device maps to 1 and the rescale factor to 1 in either mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationCalibration {
    pub survival: Vec<f64>,
    pub raw_survival: Vec<f64>,
    pub reference: f64,
    pub n_u: usize,
    pub n_m: usize,
    pub mode: MitigationMode,
    pub seed: u64,
}

impl MitigationCalibration {
    pub fn from_records(records: &CalibrationRecords, n_u: usize, mode: MitigationMode, seed: u64) -> Result<Self> {
        let raw = survival_probability(records, n_u)?;
        Ok(Self {
            survival: raw.iter().map(|g| g / PERFECT_SURVIVAL).collect(),
            raw_survival: raw,
            reference: PERFECT_SURVIVAL,
            n_u,
            n_m: records.shots_per_unitary,
            mode,
            seed,
        })
    }

    /// Calibration with given survival values used directly.
    pub fn with_survival(survival: Vec<f64>, mode: MitigationMode) -> Self {
        Self {
            raw_survival: survival.iter().map(|g| g * PERFECT_SURVIVAL).collect(),
            survival,
            reference: PERFECT_SURVIVAL,
            n_u: 0,
            n_m: 0,
            mode,
            seed: 0,
        }
    }

    pub fn factor(&self, j: usize, mode: MitigationMode) -> Result<f64> {
        rescale_factor(self.survival[j], mode).ok_or(Error::SingularCalibration { qubit: j })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Multiplier on ⟨Z⟩ for survival probability `g`; None where it is singular.
pub fn rescale_factor(g: f64, mode: MitigationMode) -> Option<f64> {
    match mode {
        MitigationMode::Scale => (g != 2.0).then(|| g / (2.0 - g)),
        MitigationMode::InverseScale => (g != 0.0 && g != 2.0).then(|| (2.0 - g) / g),
    }
}

/// (1/N_M) Σ_shots factor·(−1)^{s_j}.
pub fn mitigated_z(shots: &[u64], calib: &MitigationCalibration, j: usize, mode: MitigationMode) -> Result<f64> {
    if j >= calib.survival.len() {
        return invalid(format!("qubit {j} not covered by the calibration"));
    }
    if shots.is_empty() {
        return invalid("no shots to average");
    }
    let f = calib.factor(j, mode)?;
    let sum: f64 = shots.iter().map(|s| if (s >> j) & 1 == 0 { f } else { -f }).sum();
    Ok(sum / shots.len() as f64)
}

/// Confusion correction (optional) then rescaling of per-qubit ⟨Z⟩ estimates and their errors.
pub fn mitigate_estimates(
    z: &[f64],
    stderr: &[f64],
    confusion: Option<&ConfusionModel>,
    calib: &MitigationCalibration,
    mode: MitigationMode,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (z, stderr, clipped) = match confusion {
        Some(model) => {
            let c = confusion_correct_z(z, model)?;
            let se = stderr
                .iter()
                .enumerate()
                .map(|(q, s)| s / (1.0 - model.eps[q] - model.eps_prime[q]))
                .collect();
            (c.z(), se, c.clipped_mass)
        }
        None => (z.to_vec(), stderr.to_vec(), 0.0),
    };
    let mut out = Vec::with_capacity(z.len());
    let mut out_se = Vec::with_capacity(z.len());
    for q in 0..z.len() {
        let f = calib.factor(q, mode)?;
        out.push(f * z[q]);
        out_se.push(f.abs() * stderr[q]);
    }
    Ok((out, out_se, clipped))
}
