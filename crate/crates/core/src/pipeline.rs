//! Stage orchestration. Each stage reads the config and earlier artifacts from
//! the output directory, writes its files atomically and ends with a manifest.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DsfMode, ExperimentConfig, NormalizationSource, PrepMethod, QfiSource, Toggle};
use crate::diagnostics::{self, warn};
use crate::error::{Error, Result};
use crate::experiment::{GreensExperiment, PrepStage};
use crate::greens::{center_site, greens_protocol, GreensOracle, GreensTable, Pauli, TimeGrid};
use crate::io::{
    atomic_write, csv_text, greens_csv, meta, parse_csv, parse_greens_csv, parse_spectral_csv, shots_csv, spectral_csv,
    trace_csv,
};
use crate::lattice::{build_chain_register, map_tfi_to_pulses, AtomRegister, InteractionRange, MappedPulse, TfiParams, UnitMode, UnitSystem};
use crate::mitigation::{mitigate_estimates, ConfusionModel, MitigationCalibration};
use crate::operator::{tfi_hamiltonian_capped, RydbergSystem, DEFAULT_DENSE_CAP};
use crate::pulse::mapped_program;
use crate::qfi::{qfi_bound_fn, qfi_result, qfi_sigma, sum_rule_normalize, variance_density, DensityOperator, GeneratorSpec, QfiResult};
use crate::spectral::{fourier_dsf, momentum_grid, omega_grid, SpectralGrid};
use crate::spectrum::{GroundState, Spectrum};
use crate::state::{fidelity, QuantumState};
use crate::state_prep::{
    optimize_hyperparameters, prepare_ground_state, qaoa_state, AdiabaticHyperparams, HyperparamTable,
    OptimizationResult, PrepSetup,
};

/// Largest chain for which the QFI stage derives the sum-rule constant by ED.
pub const ED_NORMALIZATION_CAP: usize = 12;

/// Pipeline stages, one per CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prepare,
    Dsf,
    Noise,
    Mitigate,
    Qfi,
    Oracle,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Prepare, Stage::Dsf, Stage::Noise, Stage::Mitigate, Stage::Qfi, Stage::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Dsf => "dsf",
            Stage::Noise => "noise",
            Stage::Mitigate => "mitigate",
            Stage::Qfi => "qfi",
            Stage::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one completed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: Stage,
    pub code_version: String,
    pub config_hash: String,
    /// Digest of everything except the timestamps.
    pub manifest_hash: String,
    /// Unix seconds.
    pub started: f64,
    pub finished: f64,
    pub warnings: Vec<String>,
    pub files: Vec<OutputFile>,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    fn digest(stage: Stage, config_hash: &str, warnings: &[String], files: &[OutputFile]) -> String {
        let mut h = Sha256::new();
        h.update(stage.name());
        h.update(env!("CARGO_PKG_VERSION"));
        h.update(config_hash);
        for w in warnings {
            h.update(w);
            h.update([0]);
        }
        for f in files {
            h.update(&f.name);
            h.update(&f.sha256);
        }
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Messages in first-seen order, repeats folded into a count.
fn fold_repeats(raw: Vec<String>) -> Vec<String> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for w in raw {
        match out.iter_mut().find(|(m, _)| *m == w) {
            Some((_, n)) => *n += 1,
            None => out.push((w, 1)),
        }
    }
    out.into_iter().map(|(m, n)| if n == 1 { m } else { format!("{m} (x{n})") }).collect()
}

/// Files written by the running stage.
struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        atomic_write(&self.dir.join(name), text.as_bytes())?;
        let entry = OutputFile { name: name.to_string(), sha256: sha256(text.as_bytes()), bytes: text.len() as u64 };
        match self.files.iter_mut().find(|f| f.name == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }
}

fn read_artifact(dir: &Path, name: &str, producer: Stage) -> Result<String> {
    fs::read_to_string(dir.join(name)).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::InvalidArgument(format!(
            "missing artifact {name} in {}; run the {} stage first",
            dir.display(),
            producer.name()
        )),
        _ => Error::Io(e),
    })
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>> {
    match fs::read_to_string(dir.join(name)) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Runs one stage into `cfg.run.output`. A failure leaves `FAILED-<stage>` behind
/// and no manifest; success replaces any earlier marker.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.run.output);
    fs::create_dir_all(&dir)?;
    let marker = dir.join(format!("FAILED-{}", stage.name()));
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let started = unix_now();
    let config_text = cfg.to_toml()?;
    let config_hash = sha256(config_text.as_bytes());
    let mut out = Outputs { dir: dir.clone(), files: Vec::new() };
    let (result, warnings) = diagnostics::capture(|| -> Result<()> {
        out.write(&format!("config-{}.toml", stage.name()), &config_text)?;
        match stage {
            Stage::Prepare => stage_prepare(cfg, &mut out),
            Stage::Dsf => stage_dsf(cfg, &mut out),
            Stage::Noise => stage_noise(cfg, &mut out),
            Stage::Mitigate => stage_mitigate(cfg, &mut out),
            Stage::Qfi => stage_qfi(cfg, &mut out),
            Stage::Oracle => stage_oracle(cfg, &mut out),
        }
    });
    if let Err(e) = result {
        let text = format!("stage = {:?}\nerror = {:?}\ntime = {}\n", stage.name(), e.to_string(), unix_now());
        atomic_write(&marker, text.as_bytes())?;
        return Err(e);
    }
    let warnings = fold_repeats(warnings);
    let manifest = RunManifest {
        stage,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        manifest_hash: RunManifest::digest(stage, &config_hash, &warnings, &out.files),
        config_hash,
        started,
        finished: unix_now(),
        warnings,
        files: out.files,
    };
    atomic_write(&dir.join(format!("manifest-{}.toml", stage.name())), manifest.to_toml()?.as_bytes())?;
    Ok(manifest)
}

/// Register, interaction constant and Ising mapping of a config.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub sites: usize,
    pub units: UnitSystem,
    pub c6: f64,
    pub register: AtomRegister,
    pub mapped: MappedPulse,
}

impl ChainModel {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let units = cfg.units();
        let sites = cfg.lattice.sites;
        let register = build_chain_register(sites, cfg.spacing())?;
        let mapped = map_tfi_to_pulses(sites, cfg.spacing(), cfg.lattice.g, units.c6())?;
        Ok(Self { sites, units, c6: units.c6(), register, mapped })
    }

    pub fn tfi(&self) -> TfiParams {
        self.mapped.tfi(self.sites)
    }

    pub fn rydberg(&self, range: InteractionRange) -> Result<RydbergSystem> {
        RydbergSystem::new(self.register.clone(), self.c6, range)
    }

    pub fn within_cap(&self) -> bool {
        self.sites <= DEFAULT_DENSE_CAP
    }

    pub fn ising_spectrum(&self) -> Result<Spectrum> {
        Spectrum::of(&tfi_hamiltonian_capped(&self.tfi(), DEFAULT_DENSE_CAP)?)
    }
}

fn time_grid(cfg: &ExperimentConfig) -> Result<TimeGrid> {
    TimeGrid::new(cfg.evolution.delta, cfg.evolution.steps)
}

/// Lattice momenta with π added when the chain length is odd.
pub fn dsf_momenta(sites: usize) -> Vec<f64> {
    let mut k = momentum_grid(sites);
    if !k.iter().any(|x| (x - PI).abs() < 1e-12) {
        k.push(PI);
        k.sort_by(f64::total_cmp);
    }
    k
}

fn frequencies(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    omega_grid(cfg.evolution.omega_max, cfg.evolution.omega_points)
}

/// Result of the preparation stage.
#[derive(Debug, Clone)]
pub struct PrepOutcome {
    pub state: QuantumState,
    pub method: PrepMethod,
    pub hp: Option<AdiabaticHyperparams>,
    pub hp_source: String,
    /// Overlap with the Ising ground state, when ED is within the cap.
    pub fidelity: Option<f64>,
    pub ground_energy: Option<f64>,
    pub optimization: Option<OptimizationResult>,
}

fn resolve_hp(cfg: &ExperimentConfig) -> Result<(AdiabaticHyperparams, String)> {
    let sp = &cfg.state_prep;
    let l = cfg.lattice.sites;
    if let Some(p) = sp.hp {
        return Ok((AdiabaticHyperparams::new(p, cfg.t_max())?, "config".into()));
    }
    if cfg.lattice.units == UnitMode::Physical {
        return Err(Error::Unsupported(
            "the hyperparameter table is in model units; set state_prep.hp for a physical-unit run".into(),
        ));
    }
    let table = match &sp.hp_table {
        Some(path) => HyperparamTable::from_toml(&fs::read_to_string(path)?)?,
        None => HyperparamTable::builtin(),
    };
    let key = sp.hp_key.unwrap_or(l);
    if let Some(hp) = table.get(key) {
        return Ok((*hp, format!("table entry {key}")));
    }
    if sp.hp_key.is_some() {
        return Err(Error::InvalidConfig(format!("state_prep.hp_key: no table entry for {key}")));
    }
    if l > DEFAULT_DENSE_CAP {
        return Err(Error::Unsupported(format!(
            "no hyperparameter entry for L = {l}, and L exceeds the dense cap of {DEFAULT_DENSE_CAP} needed to optimize one; \
             set state_prep.hp or state_prep.hp_key"
        )));
    }
    match table.lookup(l) {
        Some(hp) => {
            warn(format!("no hyperparameter entry for L = {l}; using the longest recorded chain"));
            Ok((hp, "table extrapolation".into()))
        }
        None => {
            warn(format!("no hyperparameter entry for L = {l}; using the generic starting point"));
            Ok((AdiabaticHyperparams::initial_guess(cfg.t_max()), "initial guess".into()))
        }
    }
}

fn prep_setup(cfg: &ExperimentConfig, model: &ChainModel) -> Result<PrepSetup> {
    // The device always carries the full van der Waals tail during preparation.
    PrepSetup::new(model.rydberg(InteractionRange::Full)?, cfg.state_prep.detuning, cfg.state_prep.dt)
}

/// Prepares the initial state as configured, optimizing the sweep first when a budget is set.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PrepOutcome> {
    let model = ChainModel::from_config(cfg)?;
    let sp = &cfg.state_prep;
    let ground: Option<GroundState> = if model.within_cap() { Some(model.ising_spectrum()?.ground_state()) } else { None };
    let mut hp = None;
    let mut hp_source = String::new();
    let mut optimization = None;
    let state = match sp.method {
        PrepMethod::Exact => match &ground {
            Some(g) => g.state.clone(),
            None => {
                return Err(Error::Capacity { sites: model.sites, cap: DEFAULT_DENSE_CAP });
            }
        },
        PrepMethod::Qaoa => {
            let params = sp.qaoa.as_ref().ok_or_else(|| Error::InvalidConfig("state_prep.qaoa: missing".into()))?;
            qaoa_state(&model.register, model.c6, params)?
        }
        PrepMethod::Adiabatic => {
            let setup = prep_setup(cfg, &model)?;
            let (mut chosen, mut source) = resolve_hp(cfg)?;
            if sp.budget > 0 {
                let target = ground.as_ref().ok_or_else(|| {
                    Error::Unsupported(format!(
                        "optimizing the sweep needs the ED ground state, and L = {} exceeds the dense cap",
                        model.sites
                    ))
                })?;
                let r = optimize_hyperparameters(&setup, &target.state, &chosen, sp.budget, sp.optimizer)?;
                chosen = r.hp;
                source.push_str(", optimized");
                optimization = Some(r);
            }
            let prepared = prepare_ground_state(&chosen, &setup)?;
            if prepared.report.clamp_events > 0 {
                warn(format!("sweep amplitude clamped at {} integrator samples", prepared.report.clamp_events));
            }
            hp = Some(chosen);
            hp_source = source;
            prepared.state
        }
    };
    let fidelity = ground.as_ref().map(|g| fidelity(&state, &g.state)).transpose()?;
    Ok(PrepOutcome {
        state,
        method: sp.method,
        hp,
        hp_source,
        fidelity,
        ground_energy: ground.map(|g| g.energy),
        optimization,
    })
}

/// Digest of everything that determines the prepared state.
fn prep_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(toml::to_string(&cfg.lattice).map_err(|e| Error::Parse(e.to_string()))?);
    h.update(toml::to_string(&cfg.state_prep).map_err(|e| Error::Parse(e.to_string()))?);
    if let Some(path) = &cfg.state_prep.hp_table {
        h.update(fs::read(path)?);
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PrepareReport {
    sites: usize,
    method: PrepMethod,
    prep_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hp: Option<AdiabaticHyperparams>,
    hp_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_fidelity: Option<f64>,
    evaluations: usize,
}

fn stage_prepare(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let outcome = prepare(cfg)?;
    let hash = prep_hash(cfg)?;
    let rows = outcome
        .state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| vec![b.to_string(), a.re.to_string(), a.im.to_string()]);
    let m = meta(&[("L", cfg.lattice.sites.to_string()), ("prep_hash", hash.clone())]);
    out.write("prepared_state.csv", &csv_text(&m, &["basis", "re", "im"], rows)?)?;
    let report = PrepareReport {
        sites: cfg.lattice.sites,
        method: outcome.method,
        prep_hash: hash,
        fidelity: outcome.fidelity,
        ground_energy: outcome.ground_energy,
        hp: outcome.hp,
        hp_source: outcome.hp_source.clone(),
        initial_fidelity: outcome.optimization.as_ref().map(|o| o.initial_fidelity),
        evaluations: outcome.optimization.as_ref().map_or(0, |o| o.evaluations),
    };
    out.write("prepare_report.toml", &toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
    if let Some(opt) = &outcome.optimization {
        out.write("optimizer_trace.csv", &trace_csv(&opt.trace, &meta(&[("L", cfg.lattice.sites.to_string())]))?)?;
    }
    if let Some(f) = outcome.fidelity {
        log::info!("prepared L = {} with fidelity {f:.4}", cfg.lattice.sites);
    }
    Ok(())
}

/// Prepared state and sweep parameters from the prepare stage's artifacts when
/// they match the config, otherwise prepared afresh.
fn load_or_prepare(cfg: &ExperimentConfig, dir: &Path) -> Result<(QuantumState, Option<AdiabaticHyperparams>)> {
    let hash = prep_hash(cfg)?;
    if let (Some(csv), Some(report)) = (read_optional(dir, "prepared_state.csv")?, read_optional(dir, "prepare_report.toml")?) {
        let report: PrepareReport = toml::from_str(&report).map_err(|e| Error::Parse(e.to_string()))?;
        let (m, rows) = parse_csv(&csv)?;
        if report.prep_hash == hash && m.get("prep_hash") == Some(&hash) {
            let amps = rows
                .iter()
                .map(|r| {
                    let re: f64 = r.get(1).and_then(|x| x.parse().ok()).ok_or_else(|| Error::Parse("bad amplitude".into()))?;
                    let im: f64 = r.get(2).and_then(|x| x.parse().ok()).ok_or_else(|| Error::Parse("bad amplitude".into()))?;
                    Ok(Complex64::new(re, im))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((QuantumState::from_amplitudes(cfg.lattice.sites, amps)?, report.hp));
        }
        warn("prepared_state.csv does not match the config; preparing afresh");
    }
    let outcome = prepare(cfg)?;
    Ok((outcome.state, outcome.hp))
}

/// Green's table of one DSF mode from the given prepared state.
///
/// The exact-SP/exact-TE mode starts from an eigenstate, so the eigenbasis
/// phase evaluation is used instead of stepping the state.
/// The other modes need `prepared`.
pub fn mode_greens(cfg: &ExperimentConfig, mode: DsfMode, prepared: Option<&QuantumState>) -> Result<GreensTable> {
    let model = ChainModel::from_config(cfg)?;
    let prepared = || prepared.ok_or_else(|| Error::InvalidArgument(format!("mode {mode} needs a prepared state")));
    let grid = time_grid(cfg)?;
    let center = center_site(model.sites);
    match mode {
        DsfMode::ExactSpExactTe => {
            let spectrum = model.ising_spectrum()?;
            let ground = spectrum.ground_state();
            if ground.is_degenerate() {
                warn(format!("Ising ground space is {}-fold degenerate", ground.degeneracy));
            }
            GreensOracle::new(spectrum, ground.state)?.table(Pauli::Z, center, grid)
        }
        DsfMode::ApproxSpExactTe => greens_protocol(prepared()?, &model.ising_spectrum()?, center, grid),
        DsfMode::ApproxSpApproxTe => {
            let experiment = GreensExperiment {
                system: model.rydberg(cfg.evolution.range)?,
                units: model.units,
                prep: PrepStage::State(prepared()?.clone()),
                evolution: mapped_program(&model.mapped, model.sites, grid.total()),
                evolution_dt: cfg.evolution.integration_step(),
                center,
                grid,
            };
            experiment.ideal_table()
        }
    }
}

/// S(k, ω) on the configured frequency grid at the lattice momenta and π.
pub fn structure_factor(cfg: &ExperimentConfig, table: &GreensTable) -> Result<SpectralGrid> {
    fourier_dsf(table, cfg.evolution.eta, &frequencies(cfg)?, &dsf_momenta(table.sites()))
}

fn flag_negativity(label: &str, s: &SpectralGrid) {
    let r = s.negative_weight_ratio();
    if r > 0.0 {
        warn(format!("{label}: negative spectral weight ratio {r:.4}"));
    }
}

fn stage_dsf(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let needs_prepared = cfg.evolution.modes.iter().any(|m| *m != DsfMode::ExactSpExactTe);
    let prepared = if needs_prepared { Some(load_or_prepare(cfg, &out.dir)?.0) } else { None };
    let mut kpi: Vec<(DsfMode, Vec<f64>, f64)> = Vec::new();
    let mut modes = cfg.evolution.modes.clone();
    modes.sort();
    modes.dedup();
    for mode in modes {
        let table = mode_greens(cfg, mode, prepared.as_ref())?;
        let s = structure_factor(cfg, &table)?;
        flag_negativity(&format!("dsf {mode}"), &s);
        let extra = meta(&[("mode", mode.label().to_string())]);
        out.write(&format!("greens_{}.csv", mode.label()), &greens_csv(&table, &extra)?)?;
        out.write(&format!("dsf_{}.csv", mode.label()), &spectral_csv(&s, &extra)?)?;
        let k = s.momentum_index(PI).expect("π is always on the DSF momentum list");
        kpi.push((mode, s.row(k).to_vec(), s.peak_omega(k)));
    }
    let omegas = frequencies(cfg)?;
    let mut m = meta(&[("k", PI.to_string())]);
    for (mode, _, peak) in &kpi {
        m.push((format!("peak_{}", mode.label()), peak.to_string()));
    }
    let mut header = vec!["omega"];
    header.extend(kpi.iter().map(|(mode, _, _)| mode.label()));
    let rows = omegas.iter().enumerate().map(|(w, om)| {
        let mut row = vec![om.to_string()];
        row.extend(kpi.iter().map(|(_, v, _)| v[w].to_string()));
        row
    });
    out.write("dsf_kpi.csv", &csv_text(&m, &header, rows)?)?;
    Ok(())
}

fn noise_section(cfg: &ExperimentConfig) -> Result<crate::noise::NoiseConfig> {
    cfg.noise().ok_or_else(|| Error::InvalidConfig("noise: the section is \"off\"".into()))
}

/// The configured experiment as it runs on the emulated device.
pub fn device_experiment(cfg: &ExperimentConfig, prepared: &QuantumState, hp: Option<AdiabaticHyperparams>) -> Result<GreensExperiment> {
    let model = ChainModel::from_config(cfg)?;
    let grid = time_grid(cfg)?;
    let prep = match (cfg.state_prep.method, hp) {
        (PrepMethod::Adiabatic, Some(hp)) => {
            PrepStage::Sweep { program: prep_setup(cfg, &model)?.program(&hp)?, dt: cfg.state_prep.dt }
        }
        _ => PrepStage::State(prepared.clone()),
    };
    Ok(GreensExperiment {
        system: model.rydberg(cfg.evolution.range)?,
        units: model.units,
        prep,
        evolution: mapped_program(&model.mapped, model.sites, grid.total()),
        evolution_dt: cfg.evolution.integration_step(),
        center: center_site(model.sites),
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NoiseReport {
    samples: usize,
    seed: u64,
    err_raw: f64,
    stderr_defined: bool,
}

fn stage_noise(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let noise = noise_section(cfg)?;
    let (prepared, hp) = load_or_prepare(cfg, &out.dir)?;
    let experiment = device_experiment(cfg, &prepared, hp)?;
    let ideal = experiment.ideal_table()?;
    let run = experiment.noisy_run(&noise, cfg.run.seed)?;
    let est = run.z_estimates()?;
    if est.samples < 2 {
        warn("one trajectory: standard errors are undefined and written as NaN");
    }
    let err_raw = est.mean.cumulative_error(&ideal)?;
    let seed = meta(&[("seed", cfg.run.seed.to_string()), ("samples", est.samples.to_string())]);
    out.write("greens_noiseless.csv", &greens_csv(&ideal, &meta(&[("kind", "noiseless".into())]))?)?;
    let mut m = seed.clone();
    m.push(("err_raw".into(), err_raw.to_string()));
    out.write("greens_noisy.csv", &greens_csv(&est.mean, &m)?)?;
    out.write("greens_noisy_stderr.csv", &greens_csv(&est.stderr, &seed)?)?;
    out.write("shots.csv", &shots_csv(&run, &meta(&[]))?)?;
    let report = NoiseReport { samples: est.samples, seed: cfg.run.seed, err_raw, stderr_defined: est.samples > 1 };
    out.write("noise_report.toml", &toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MitigationReport {
    err_raw: f64,
    err_mitigated: f64,
    ratio: f64,
    clipped_mass: f64,
}

fn stage_mitigate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let settings = match &cfg.mitigation {
        Toggle::On(m) => m.clone(),
        Toggle::Off => return Err(Error::InvalidConfig("mitigation: the section is \"off\"".into())),
    };
    let noise = noise_section(cfg)?;
    let l = cfg.lattice.sites;
    let ideal = parse_greens_csv(&read_artifact(&out.dir, "greens_noiseless.csv", Stage::Noise)?)?;
    let noisy = parse_greens_csv(&read_artifact(&out.dir, "greens_noisy.csv", Stage::Noise)?)?;
    let noisy_se = parse_greens_csv(&read_artifact(&out.dir, "greens_noisy_stderr.csv", Stage::Noise)?)?;
    if noisy.sites() != l || noisy.grid() != time_grid(cfg)? {
        return Err(Error::InvalidArgument("noise artifacts do not match the config; rerun the noise stage".into()));
    }
    let records = crate::experiment::simulate_calibration(l, &noise, settings.n_u, settings.n_m, cfg.run.seed)?;
    let confusion = ConfusionModel::uniform(l, noise.eps, noise.eps_prime)?;
    let records = if settings.confusion { records.confusion_corrected(&confusion)? } else { records };
    let calib = MitigationCalibration::from_records(&records, settings.n_u, settings.mode, cfg.run.seed)?;
    warn(format!(
        "calibration survival G_j = [{}]",
        calib.survival.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ")
    ));
    out.write("calibration.toml", &calib.to_toml()?)?;

    let grid = noisy.grid();
    let mut mitigated = GreensTable::zeros(l, noisy.center(), grid)?;
    let mut mitigated_se = GreensTable::zeros(l, noisy.center(), grid)?;
    let mut clipped = 0.0;
    for n in 0..grid.steps {
        let z: Vec<f64> = (0..l).map(|i| noisy.get(i, n)).collect();
        let se: Vec<f64> = (0..l).map(|i| noisy_se.get(i, n)).collect();
        let (zm, sm, c) = mitigate_estimates(&z, &se, settings.confusion.then_some(&confusion), &calib, settings.mode)?;
        clipped += c;
        for i in 0..l {
            mitigated.set(i, n, zm[i]);
            mitigated_se.set(i, n, sm[i]);
        }
    }
    if clipped > 0.0 {
        warn(format!("confusion inversion clipped a total probability mass of {clipped:.4}"));
    }
    let err_raw = noisy.cumulative_error(&ideal)?;
    let err_mitigated = mitigated.cumulative_error(&ideal)?;
    let m = meta(&[
        ("mode", format!("{:?}", settings.mode)),
        ("err_raw", err_raw.to_string()),
        ("err_mitigated", err_mitigated.to_string()),
    ]);
    out.write("greens_mitigated.csv", &greens_csv(&mitigated, &m)?)?;
    out.write("greens_mitigated_stderr.csv", &greens_csv(&mitigated_se, &meta(&[]))?)?;
    let rows = (0..l).flat_map(|i| {
        let (ideal, noisy, noisy_se, mitigated, mitigated_se) = (&ideal, &noisy, &noisy_se, &mitigated, &mitigated_se);
        (0..grid.steps).map(move |n| {
            vec![
                i.to_string(),
                (n + 1).to_string(),
                grid.time(n + 1).to_string(),
                ideal.get(i, n).to_string(),
                noisy.get(i, n).to_string(),
                noisy_se.get(i, n).to_string(),
                mitigated.get(i, n).to_string(),
                mitigated_se.get(i, n).to_string(),
            ]
        })
    });
    out.write(
        "triplet.csv",
        &csv_text(
            &m,
            &["i", "n", "t", "noiseless", "noisy", "noisy_stderr", "mitigated", "mitigated_stderr"],
            rows,
        )?,
    )?;
    let report = MitigationReport { err_raw, err_mitigated, ratio: err_mitigated / err_raw, clipped_mass: clipped };
    out.write("mitigation_report.toml", &toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(())
}

/// ED ground state, its X, Y and Z Green's tables on the configured grid, and the sum-rule constant.
pub struct EdReference {
    pub ground: GroundState,
    pub gap: f64,
    pub tables: [GreensTable; 3],
    pub normalization: f64,
}

pub fn ed_reference(cfg: &ExperimentConfig) -> Result<EdReference> {
    let model = ChainModel::from_config(cfg)?;
    let spectrum = model.ising_spectrum()?;
    let ground = spectrum.ground_state();
    let gap = spectrum.energies().get(ground.degeneracy).map_or(0.0, |e| e - ground.energy);
    let oracle = GreensOracle::new(spectrum, ground.state.clone())?;
    let grid = time_grid(cfg)?;
    let center = center_site(model.sites);
    let tables = [
        oracle.table(Pauli::X, center, grid)?,
        oracle.table(Pauli::Y, center, grid)?,
        oracle.table(Pauli::Z, center, grid)?,
    ];
    let omegas = frequencies(cfg)?;
    let momenta = momentum_grid(model.sites);
    let s = tables
        .iter()
        .map(|t| fourier_dsf(t, cfg.evolution.eta, &omegas, &momenta))
        .collect::<Result<Vec<_>>>()?;
    let normalization = sum_rule_normalize([&s[0], &s[1], &s[2]], cfg.qfi.omega_max)?;
    Ok(EdReference { ground, gap, tables, normalization })
}

fn normalization_constant(cfg: &ExperimentConfig) -> Result<(f64, String)> {
    match cfg.qfi.normalization {
        NormalizationSource::Constant(c) => Ok((c, "constant".into())),
        NormalizationSource::Ed => {
            let l = cfg.lattice.sites;
            if l > ED_NORMALIZATION_CAP {
                return Err(Error::UndefinedNormalization(format!(
                    "L = {l} is beyond ED (L <= {ED_NORMALIZATION_CAP}); set qfi.normalization = {{ constant = ... }}"
                )));
            }
            Ok((ed_reference(cfg)?.normalization, "ed".into()))
        }
    }
}

/// Text label of a certified depth.
pub fn classification(depth: usize) -> String {
    if depth <= 1 {
        "separable-consistent".into()
    } else {
        format!("depth >= {depth}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub source: QfiSource,
    pub normalization_source: String,
    pub classification: String,
    pub result: QfiResult,
    /// 4Var(A)/L on the state behind the source, when L is within the dense cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_density: Option<f64>,
    /// F_n/L for n = 0..=bound_order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bound_densities: Vec<f64>,
    /// |f_Q(DSF) − 4Var/L| / (4Var/L).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route_gap: Option<f64>,
}

/// QFI of the configured source from the artifacts in `dir`.
pub fn qfi_report(cfg: &ExperimentConfig, dir: &Path) -> Result<QfiReport> {
    let l = cfg.lattice.sites;
    let q = &cfg.qfi;
    let (c, norm_source) = normalization_constant(cfg)?;
    let (s, stderr) = match q.source.mode() {
        Some(mode) => {
            let name = format!("dsf_{}.csv", mode.label());
            (parse_spectral_csv(&read_artifact(dir, &name, Stage::Dsf)?)?, None)
        }
        None => {
            let (stem, producer) = match q.source {
                QfiSource::Noisy => ("greens_noisy", Stage::Noise),
                _ => ("greens_mitigated", Stage::Mitigate),
            };
            let table = parse_greens_csv(&read_artifact(dir, &format!("{stem}.csv"), producer)?)?;
            let se = parse_greens_csv(&read_artifact(dir, &format!("{stem}_stderr.csv"), producer)?)?;
            let s = fourier_dsf(&table, cfg.evolution.eta, &frequencies(cfg)?, &[q.momentum])?;
            (s, Some(se))
        }
    };
    if s.momenta().len() == 0 || s.row(0).len() == 0 {
        return Err(Error::InvalidArgument("empty structure factor".into()));
    }
    let k = s.momentum_index(q.momentum).ok_or_else(|| {
        Error::InvalidConfig(format!("qfi.momentum: {} is not on the stored momentum list", q.momentum))
    })?;
    let mut result = qfi_result(&s, k, q.temperature, q.omega_max, c, l)?;
    if let Some(se) = &stderr {
        let sigma = qfi_sigma(se, s.eta(), s.omegas(), q.momentum, q.temperature, q.omega_max, c)?;
        result.sigma_normalized = sigma.is_finite().then_some(sigma);
        if !sigma.is_finite() {
            warn("QFI standard deviation undefined: the Green's table has no standard errors");
        }
    }
    let (variance, bounds) = if l <= DEFAULT_DENSE_CAP {
        let state = match q.source {
            QfiSource::ExactSpExactTe => ChainModel::from_config(cfg)?.ising_spectrum()?.ground_state().state,
            _ => load_or_prepare(cfg, dir)?.0,
        };
        let generator = GeneratorSpec::new(q.generator, l);
        let rho = DensityOperator::Pure(state.clone());
        let bounds = (0..=q.bound_order)
            .map(|n| qfi_bound_fn(&rho, &generator, n).map(|f| f / l as f64))
            .collect::<Result<Vec<_>>>()?;
        (Some(variance_density(&state, &generator)), bounds)
    } else {
        (None, Vec::new())
    };
    let route_gap = variance.filter(|v| *v > 0.0).map(|v| (result.f_q - v).abs() / v);
    Ok(QfiReport {
        source: q.source,
        normalization_source: norm_source,
        classification: classification(result.depth),
        result,
        variance_density: variance,
        bound_densities: bounds,
        route_gap,
    })
}

fn stage_qfi(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let report = qfi_report(cfg, &out.dir)?;
    out.write("qfi.toml", &toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OracleReport {
    sites: usize,
    center: usize,
    ground_energy: f64,
    degeneracy: usize,
    gap: f64,
    normalization: f64,
}

fn stage_oracle(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let l = cfg.lattice.sites;
    if l > DEFAULT_DENSE_CAP {
        return Err(Error::Capacity { sites: l, cap: DEFAULT_DENSE_CAP });
    }
    let ed = ed_reference(cfg)?;
    for (pauli, table) in ["x", "y", "z"].iter().zip(&ed.tables) {
        out.write(&format!("oracle_greens_{pauli}.csv"), &greens_csv(table, &meta(&[("pauli", pauli.to_string())]))?)?;
    }
    let report = OracleReport {
        sites: l,
        center: center_site(l),
        ground_energy: ed.ground.energy,
        degeneracy: ed.ground.degeneracy,
        gap: ed.gap,
        normalization: ed.normalization,
    };
    out.write("oracle.toml", &toml::to_string(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(())
}
