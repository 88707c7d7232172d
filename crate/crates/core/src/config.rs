//! Experiment configuration file: sections, defaults and validation.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{InteractionRange, UnitMode, UnitSystem, DEFAULT_C6, REFERENCE_SPACING_UM};
use crate::mitigation::MitigationMode;
use crate::noise::NoiseConfig;
use crate::qfi::GeneratorKind;
use crate::state_prep::{OptimizerKind, QaoaParams, SweepDetuning, DEFAULT_PREP_DT};

/// A section that may be switched off with the string `"off"`.
#[derive(Debug, Clone, PartialEq)]
pub enum Toggle<T> {
    Off,
    On(T),
}

impl<T> Toggle<T> {
    pub fn as_ref(&self) -> Option<&T> {
        match self {
            Toggle::Off => None,
            Toggle::On(t) => Some(t),
        }
    }
}

impl<T: Serialize> Serialize for Toggle<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Toggle::Off => s.serialize_str("off"),
            Toggle::On(t) => t.serialize(s),
        }
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Toggle<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match toml::Value::deserialize(d)? {
            toml::Value::String(s) if s == "off" => Ok(Toggle::Off),
            toml::Value::String(s) => Err(D::Error::custom(format!("expected a table or \"off\", found \"{s}\""))),
            other => T::deserialize(other).map(Toggle::On).map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub sites: usize,
    /// Chain pitch in simulation units; 1 in model mode and the hardware pitch in physical mode when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub units: UnitMode,
    /// Transverse field ratio g.
    #[serde(default = "one")]
    pub g: f64,
    /// Hardware C6, rad·μm⁶/μs.
    #[serde(default = "default_c6")]
    pub c6_physical: f64,
    /// Hardware pitch, μm.
    #[serde(default = "default_pitch")]
    pub spacing_physical: f64,
}

fn one() -> f64 {
    1.0
}

fn default_c6() -> f64 {
    DEFAULT_C6
}

fn default_pitch() -> f64 {
    REFERENCE_SPACING_UM
}

/// Ground-state preparation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrepMethod {
    #[default]
    Adiabatic,
    Qaoa,
    /// ED ground state of the Ising chain.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePrepSection {
    #[serde(default)]
    pub method: PrepMethod,
    /// Explicit sweep parameters; otherwise taken from the hyperparameter table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp: Option<[f64; 8]>,
    /// Table file replacing the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_table: Option<String>,
    /// Table entry to use instead of the chain length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_key: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Fidelity evaluations for the optimizer; 0 keeps the starting point.
    #[serde(default)]
    pub budget: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub detuning: SweepDetuning,
    #[serde(default = "default_prep_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qaoa: Option<QaoaParams>,
}

fn default_prep_dt() -> f64 {
    DEFAULT_PREP_DT
}

impl Default for StatePrepSection {
    fn default() -> Self {
        Self {
            method: PrepMethod::default(),
            hp: None,
            hp_table: None,
            hp_key: None,
            t_max: None,
            budget: 0,
            optimizer: OptimizerKind::default(),
            detuning: SweepDetuning::default(),
            dt: DEFAULT_PREP_DT,
            qaoa: None,
        }
    }
}

/// Which state preparation and time evolution feed the Green's function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DsfMode {
    /// ED ground state, Ising evolution.
    ExactSpExactTe,
    /// Prepared state, Ising evolution.
    ApproxSpExactTe,
    /// Prepared state, Rydberg evolution with the configured interaction range.
    ApproxSpApproxTe,
}

impl DsfMode {
    pub const ALL: [DsfMode; 3] = [DsfMode::ExactSpExactTe, DsfMode::ApproxSpExactTe, DsfMode::ApproxSpApproxTe];

    pub fn label(self) -> &'static str {
        match self {
            DsfMode::ExactSpExactTe => "exact-sp-exact-te",
            DsfMode::ApproxSpExactTe => "approx-sp-exact-te",
            DsfMode::ApproxSpApproxTe => "approx-sp-approx-te",
        }
    }
}

impl fmt::Display for DsfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    /// Sampling step δ.
    pub delta: f64,
    /// Number of samples N.
    pub steps: usize,
    /// Integration step; the largest divisor of δ not above 0.05 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub range: InteractionRange,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_omega_points")]
    pub omega_points: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<DsfMode>,
}

fn default_eta() -> f64 {
    crate::spectral::DEFAULT_ETA
}

fn default_omega_max() -> f64 {
    crate::spectral::DEFAULT_OMEGA_MAX
}

fn default_omega_points() -> usize {
    crate::spectral::DEFAULT_OMEGA_POINTS
}

fn default_modes() -> Vec<DsfMode> {
    DsfMode::ALL.to_vec()
}

impl EvolutionSection {
    pub fn integration_step(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.delta / (self.delta / 0.05).ceil().max(1.0))
    }
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            delta: 0.005,
            steps: 4000,
            dt: None,
            range: InteractionRange::default(),
            eta: default_eta(),
            omega_max: default_omega_max(),
            omega_points: default_omega_points(),
            modes: default_modes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationSection {
    #[serde(default)]
    pub mode: MitigationMode,
    #[serde(default = "default_n_u")]
    pub n_u: usize,
    #[serde(default = "default_n_m")]
    pub n_m: usize,
    /// Invert the readout confusion matrix before rescaling.
    #[serde(default = "yes")]
    pub confusion: bool,
}

fn default_n_u() -> usize {
    100
}

fn default_n_m() -> usize {
    200
}

fn yes() -> bool {
    true
}

impl Default for MitigationSection {
    fn default() -> Self {
        Self { mode: MitigationMode::default(), n_u: 100, n_m: 200, confusion: true }
    }
}

/// Where the sum-rule constant comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationSource {
    /// Exact diagonalization of the Ising chain; needs L within the dense cap.
    #[default]
    Ed,
    /// A given multiplier.
    Constant(f64),
}

/// Input of the QFI stage: a DSF mode, or the noisy or mitigated Green's table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QfiSource {
    #[default]
    ExactSpExactTe,
    ApproxSpExactTe,
    ApproxSpApproxTe,
    Noisy,
    Mitigated,
}

impl QfiSource {
    pub fn mode(self) -> Option<DsfMode> {
        match self {
            QfiSource::ExactSpExactTe => Some(DsfMode::ExactSpExactTe),
            QfiSource::ApproxSpExactTe => Some(DsfMode::ApproxSpExactTe),
            QfiSource::ApproxSpApproxTe => Some(DsfMode::ApproxSpApproxTe),
            QfiSource::Noisy | QfiSource::Mitigated => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfiSection {
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default)]
    pub generator: GeneratorKind,
    #[serde(default)]
    pub normalization: NormalizationSource,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub temperature: f64,
    /// Spectrum that is integrated.
    #[serde(default)]
    pub source: QfiSource,
    /// Highest order of the F_n bound reported for L within the dense cap.
    #[serde(default = "one_usize")]
    pub bound_order: usize,
}

fn default_momentum() -> f64 {
    PI
}

fn one_usize() -> usize {
    1
}

impl Default for QfiSection {
    fn default() -> Self {
        Self {
            omega_max: default_omega_max(),
            generator: GeneratorKind::default(),
            normalization: NormalizationSource::default(),
            momentum: PI,
            temperature: 0.0,
            source: QfiSource::default(),
            bound_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    /// Overrides `noise.samples` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
}

fn default_output() -> String {
    "out".into()
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, output: default_output(), trajectories: None }
    }
}

/// Whole experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    #[serde(default)]
    pub state_prep: StatePrepSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default = "noise_off")]
    pub noise: Toggle<NoiseConfig>,
    #[serde(default = "mitigation_off")]
    pub mitigation: Toggle<MitigationSection>,
    #[serde(default)]
    pub qfi: QfiSection,
    #[serde(default)]
    pub run: RunSection,
}

fn noise_off() -> Toggle<NoiseConfig> {
    Toggle::Off
}

fn mitigation_off() -> Toggle<MitigationSection> {
    Toggle::Off
}

impl ExperimentConfig {
    /// Defaults for a chain of `sites` atoms.
    pub fn for_sites(sites: usize) -> Self {
        Self {
            lattice: LatticeSection {
                sites,
                spacing: None,
                units: UnitMode::Model,
                g: 1.0,
                c6_physical: DEFAULT_C6,
                spacing_physical: REFERENCE_SPACING_UM,
            },
            state_prep: StatePrepSection::default(),
            evolution: EvolutionSection::default(),
            noise: Toggle::Off,
            mitigation: Toggle::Off,
            qfi: QfiSection::default(),
            run: RunSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::new(self.lattice.units, self.lattice.c6_physical, self.lattice.spacing_physical)
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.spacing.unwrap_or_else(|| self.units().spacing())
    }

    pub fn t_max(&self) -> f64 {
        self.state_prep.t_max.unwrap_or_else(|| self.units().default_sweep_time())
    }

    /// Noise settings with the run's trajectory override applied.
    pub fn noise(&self) -> Option<NoiseConfig> {
        self.noise.as_ref().map(|n| NoiseConfig { samples: self.run.trajectories.unwrap_or(n.samples), ..*n })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidConfig(format!("{field}: {msg}")));
        let l = &self.lattice;
        if l.sites < 2 {
            return bad("lattice.sites", format!("need at least 2 atoms, got {}", l.sites));
        }
        if l.sites > crate::operator::MAX_STATE_SITES {
            return bad("lattice.sites", format!("{} exceeds the state-vector limit", l.sites));
        }
        if let Some(a) = l.spacing {
            if !(a > 0.0) || !a.is_finite() {
                return bad("lattice.spacing", format!("must be positive, got {a}"));
            }
        }
        if !l.g.is_finite() {
            return bad("lattice.g", "must be finite".into());
        }
        if !(l.c6_physical > 0.0) || !(l.spacing_physical > 0.0) {
            return bad("lattice", "c6_physical and spacing_physical must be positive".into());
        }
        let sp = &self.state_prep;
        if !(sp.dt > 0.0) {
            return bad("state_prep.dt", format!("must be positive, got {}", sp.dt));
        }
        if let Some(t) = sp.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return bad("state_prep.t_max", format!("must be positive, got {t}"));
            }
        }
        if sp.method == PrepMethod::Qaoa {
            match &sp.qaoa {
                None => return bad("state_prep.qaoa", "required for method = \"qaoa\"".into()),
                Some(q) => q.validate().map_err(|e| Error::InvalidConfig(format!("state_prep.qaoa: {e}")))?,
            }
        }
        let ev = &self.evolution;
        if !(ev.delta > 0.0) || !ev.delta.is_finite() {
            return bad("evolution.delta", format!("must be positive, got {}", ev.delta));
        }
        if ev.steps == 0 {
            return bad("evolution.steps", "zero-duration evolution".into());
        }
        let dt = ev.integration_step();
        let ratio = ev.delta / dt;
        if !(dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad("evolution.dt", format!("{dt} does not divide delta = {}", ev.delta));
        }
        if !(ev.eta > 0.0) {
            return bad("evolution.eta", format!("must be positive, got {}", ev.eta));
        }
        if !(ev.omega_max > 0.0) || ev.omega_points < 2 {
            return bad("evolution.omega_max", "need ω_max > 0 and at least two frequency points".into());
        }
        if ev.modes.is_empty() {
            return bad("evolution.modes", "at least one mode is required".into());
        }
        if let Some(n) = self.noise() {
            n.validate().map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
        }
        if let Toggle::On(m) = &self.mitigation {
            if m.n_u == 0 || m.n_m == 0 {
                return bad("mitigation", "n_u and n_m must be at least 1".into());
            }
        }
        let q = &self.qfi;
        if !(q.omega_max > 0.0) {
            return bad("qfi.omega_max", format!("must be positive, got {}", q.omega_max));
        }
        if !(q.temperature >= 0.0) {
            return bad("qfi.temperature", format!("must be non-negative, got {}", q.temperature));
        }
        if let NormalizationSource::Constant(c) = q.normalization {
            if !(c > 0.0) || !c.is_finite() {
                return bad("qfi.normalization", format!("constant must be positive, got {c}"));
            }
        }
        if self.run.trajectories == Some(0) {
            return bad("run.trajectories", "must be at least 1".into());
        }
        Ok(())
    }
}
