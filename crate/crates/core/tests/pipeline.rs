use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rydberg_dsf::config::{
    DsfMode, ExperimentConfig, MitigationSection, NormalizationSource, QfiSource, Toggle,
};
use rydberg_dsf::diagnostics;
use rydberg_dsf::error::Error;
use rydberg_dsf::io::{meta, parse_greens_csv, spectral_csv};
use rydberg_dsf::lattice::{InteractionRange, UnitMode};
use rydberg_dsf::mitigation::MitigationMode;
use rydberg_dsf::noise::NoiseConfig;
use rydberg_dsf::pipeline::{dsf_momenta, qfi_report, run_stage, RunManifest, Stage};
use rydberg_dsf::spectral::{omega_grid, SpectralGrid};

/// Small L = 3 run with every stage switched on.
fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_sites(3);
    cfg.evolution.delta = 0.2;
    cfg.evolution.steps = 15;
    cfg.evolution.omega_points = 128;
    cfg.noise = Toggle::On(NoiseConfig { samples: 64, ..NoiseConfig::default() });
    cfg.mitigation = Toggle::On(MitigationSection { n_u: 20, n_m: 50, ..MitigationSection::default() });
    cfg.run.seed = 99;
    cfg.run.output = dir.to_string_lossy().into_owned();
    cfg
}

fn run_all(cfg: &ExperimentConfig) -> Vec<RunManifest> {
    Stage::ALL.iter().map(|s| run_stage(cfg, *s).unwrap()).collect()
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (cfg_a, cfg_b) = (small_config(a.path()), small_config(b.path()));
    let ma = run_all(&cfg_a);
    let mb = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_all(&cfg_b));
    let (fa, fb) = (dir_contents(a.path()), dir_contents(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        // Config copies record the output directory, which differs.
        if name.starts_with("manifest-") || name.starts_with("config-") {
            continue;
        }
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
    for (x, y) in ma.iter().zip(&mb) {
        let data = |m: &RunManifest| m.files.iter().filter(|f| !f.name.starts_with("config-")).cloned().collect::<Vec<_>>();
        assert_eq!(data(x), data(y));
        assert_eq!(x.warnings, y.warnings);
    }
    // Same directory, same config: identical manifest hashes.
    let again = run_all(&cfg_a);
    for (x, y) in ma.iter().zip(&again) {
        assert_eq!(x.manifest_hash, y.manifest_hash, "{:?}", x.stage);
    }
}

#[test]
fn every_output_is_listed_in_exactly_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifests = run_all(&small_config(dir.path()));
    let mut owners: BTreeMap<String, usize> = BTreeMap::new();
    for m in &manifests {
        let on_disk = RunManifest::from_toml(&fs::read_to_string(dir.path().join(format!("manifest-{}.toml", m.stage.name()))).unwrap()).unwrap();
        assert_eq!(&on_disk, m);
        for f in &m.files {
            *owners.entry(f.name.clone()).or_default() += 1;
            let bytes = fs::read(dir.path().join(&f.name)).unwrap();
            assert_eq!(bytes.len() as u64, f.bytes, "{}", f.name);
        }
    }
    for name in dir_contents(dir.path()).keys() {
        if name.starts_with("manifest-") {
            continue;
        }
        assert_eq!(owners.get(name), Some(&1), "{name}");
    }
}

/// Drops the "(xN)" repeat suffix.
fn unfold(manifest_warnings: &[String]) -> Vec<String> {
    manifest_warnings.iter().map(|w| w.rsplit_once(" (x").map_or(w.clone(), |(m, _)| m.to_string())).collect()
}

#[test]
fn raised_warnings_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.noise = Toggle::On(NoiseConfig { samples: 1, ..NoiseConfig::default() });
    for stage in [Stage::Dsf, Stage::Noise, Stage::Mitigate, Stage::Qfi] {
        let (m, raised) = diagnostics::capture(|| run_stage(&cfg, stage).unwrap());
        let listed = unfold(&m.warnings);
        for w in &raised {
            assert!(listed.contains(w), "{stage:?}: {w} missing from {listed:?}");
        }
        assert_eq!(listed.len(), m.warnings.len());
        if stage == Stage::Noise {
            assert!(listed.iter().any(|w| w.contains("one trajectory")), "{listed:?}");
        }
    }
    let stderr = parse_greens_csv(&fs::read_to_string(dir.path().join("greens_noisy_stderr.csv")).unwrap()).unwrap();
    assert!(stderr.values().iter().all(|v| v.is_nan()));
}

#[test]
fn failed_stage_leaves_a_marker_and_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(run_stage(&cfg, Stage::Mitigate).is_err());
    assert!(dir.path().join("FAILED-mitigate").exists());
    assert!(!dir.path().join("manifest-mitigate.toml").exists());
    run_stage(&cfg, Stage::Noise).unwrap();
    run_stage(&cfg, Stage::Mitigate).unwrap();
    assert!(!dir.path().join("FAILED-mitigate").exists());
    assert!(dir.path().join("manifest-mitigate.toml").exists());
}

#[test]
fn mitigation_off_writes_no_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.mitigation = Toggle::Off;
    run_stage(&cfg, Stage::Noise).unwrap();
    assert!(matches!(run_stage(&cfg, Stage::Mitigate), Err(Error::InvalidConfig(_))));
    assert!(!dir.path().join("calibration.toml").exists());
    assert!(!dir.path().join("greens_mitigated.csv").exists());
}

#[test]
fn long_chain_without_table_entry_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_sites(15);
    cfg.run.output = dir.path().to_string_lossy().into_owned();
    cfg.state_prep.hp_table = Some(dir.path().join("empty.toml").to_string_lossy().into_owned());
    fs::write(dir.path().join("empty.toml"), "").unwrap();
    assert!(matches!(run_stage(&cfg, Stage::Prepare), Err(Error::Unsupported(_))));
    assert!(dir.path().join("FAILED-prepare").exists());
}

#[test]
fn physical_units_need_explicit_sweep_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_sites(3);
    cfg.lattice.units = UnitMode::Physical;
    cfg.run.output = dir.path().to_string_lossy().into_owned();
    assert!(matches!(run_stage(&cfg, Stage::Prepare), Err(Error::Unsupported(_))));
}

#[test]
fn missing_table_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_sites(5);
    cfg.state_prep.hp_key = Some(4);
    cfg.run.output = dir.path().to_string_lossy().into_owned();
    assert!(matches!(run_stage(&cfg, Stage::Prepare), Err(Error::InvalidConfig(_))));
}

#[test]
fn zero_steps_are_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.evolution.steps = 0;
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    assert!(run_stage(&cfg, Stage::Dsf).is_err());
    assert!(dir_contents(dir.path()).is_empty());
}

#[test]
fn normalization_beyond_ed_needs_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_sites(13);
    cfg.run.output = dir.path().to_string_lossy().into_owned();
    assert!(matches!(qfi_report(&cfg, dir.path()), Err(Error::UndefinedNormalization(_))));
}

#[test]
fn vanishing_spectrum_classifies_as_separable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_sites(5);
    cfg.evolution.omega_points = 64;
    cfg.run.output = dir.path().to_string_lossy().into_owned();
    cfg.qfi.normalization = NormalizationSource::Constant(1.0);
    let omegas = omega_grid(cfg.evolution.omega_max, 64).unwrap();
    let momenta = dsf_momenta(5);
    let zeros = SpectralGrid::from_values(momenta.clone(), omegas, vec![0.0; momenta.len() * 64], 0.2).unwrap();
    fs::write(dir.path().join("dsf_exact-sp-exact-te.csv"), spectral_csv(&zeros, &meta(&[])).unwrap()).unwrap();
    let report = qfi_report(&cfg, dir.path()).unwrap();
    assert_eq!(report.result.f_q_normalized, 0.0);
    assert_eq!(report.result.depth, 1);
    assert_eq!(report.classification, "separable-consistent");
    assert!(report.result.thresholds_crossed.is_empty());
}

#[test]
fn fifteen_steps_give_fifteen_rows_per_site() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.evolution.modes = vec![DsfMode::ExactSpExactTe];
    run_stage(&cfg, Stage::Dsf).unwrap();
    let text = fs::read_to_string(dir.path().join("greens_exact-sp-exact-te.csv")).unwrap();
    let table = parse_greens_csv(&text).unwrap();
    assert_eq!(table.grid().steps, 15);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    for site in 0..3 {
        let n = rows.iter().filter(|r| r.split(',').next() == Some(&site.to_string())).count();
        assert_eq!(n, 15, "site {site}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut text = ExperimentConfig::for_sites(5).to_toml().unwrap();
    text.push_str("\n[evolution_typo]\nsteps = 3\n");
    assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::InvalidConfig(_))));
    let text = ExperimentConfig::for_sites(5).to_toml().unwrap().replace("[lattice]", "[lattice]\nsitez = 4");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

fn qfi_source() -> impl Strategy<Value = QfiSource> {
    prop_oneof![
        Just(QfiSource::ExactSpExactTe),
        Just(QfiSource::ApproxSpExactTe),
        Just(QfiSource::ApproxSpApproxTe),
        Just(QfiSource::Noisy),
        Just(QfiSource::Mitigated),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn config_survives_a_text_round_trip(
        sites in 2usize..20,
        g in 0.0f64..3.0,
        delta in 0.01f64..1.0,
        steps in 1usize..5000,
        eta in 0.01f64..2.0,
        seed in any::<u64>(),
        noisy in any::<bool>(),
        eps in 0.0f64..0.2,
        samples in 1usize..10000,
        mitigate in any::<bool>(),
        inverse in any::<bool>(),
        source in qfi_source(),
        constant in prop::option::of(0.1f64..500.0),
        full in any::<bool>(),
        hp in prop::option::of(prop::array::uniform8(0.1f64..10.0)),
    ) {
        let mut cfg = ExperimentConfig::for_sites(sites);
        cfg.lattice.g = g;
        cfg.evolution.delta = delta;
        cfg.evolution.dt = Some(delta);
        cfg.evolution.steps = steps;
        cfg.evolution.eta = eta;
        cfg.evolution.range = if full { InteractionRange::Full } else { InteractionRange::NearestNeighbor };
        cfg.run.seed = seed;
        cfg.state_prep.hp = hp;
        if noisy {
            cfg.noise = Toggle::On(NoiseConfig { eps, samples, ..NoiseConfig::default() });
        }
        if mitigate {
            let mode = if inverse { MitigationMode::InverseScale } else { MitigationMode::Scale };
            cfg.mitigation = Toggle::On(MitigationSection { mode, ..MitigationSection::default() });
        }
        cfg.qfi.source = source;
        if let Some(c) = constant {
            cfg.qfi.normalization = NormalizationSource::Constant(c);
        }
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}
