use std::fs;
use std::path::Path;

use rascache::attacks::{AttackKind, AttackParams};
use rascache::harness::{run, sweep, ExperimentConfig};
use rascache::workloads::LocalityModel;
use rascache::DefenseMode;

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn rerun_identical(cfg: ExperimentConfig) -> Vec<(String, Vec<u8>)> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg.clone().with_output_dir(a.path())).unwrap();
    run(&cfg.with_output_dir(b.path())).unwrap();
    let (oa, ob) = (outputs(a.path()), outputs(b.path()));
    assert_eq!(oa, ob);
    oa
}

#[test]
fn attack_outputs_are_byte_identical() {
    for (kind, defense) in [
        (AttackKind::SpectreFr, DefenseMode::ras_spec_default()),
        (AttackKind::AesPp, DefenseMode::ras_plus_default()),
        (AttackKind::AesCollision, DefenseMode::sa_random()),
    ] {
        let p = AttackParams { trials: 2, seed: 11, ..Default::default() };
        let files = rerun_identical(ExperimentConfig::attack(kind, defense, p));
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["heatmap.svg", "matrix.csv", "metrics.json", "verdict.json"]);
    }
}

#[test]
fn trace_outputs_are_byte_identical() {
    let cfg = ExperimentConfig::trace_model(DefenseMode::random_fill(4), LocalityModel::default(), 3_000, 5);
    rerun_identical(cfg);
}

#[test]
fn seed_changes_outputs() {
    let cfg = |seed| ExperimentConfig::trace_model(DefenseMode::ras_spec_default(), LocalityModel::default(), 3_000, seed);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg(1).with_output_dir(a.path())).unwrap();
    run(&cfg(2).with_output_dir(b.path())).unwrap();
    assert_ne!(outputs(a.path()), outputs(b.path()));
}

#[test]
fn sweep_is_identical_across_runs_and_thread_counts() {
    let configs: Vec<_> = [1, 4, 16]
        .into_iter()
        .flat_map(|w| {
            [1, 2].map(|seed| {
                ExperimentConfig::trace_model(DefenseMode::ras_spec(3, 1, w), LocalityModel::default(), 3_000, seed)
            })
        })
        .collect();
    let first = sweep(&configs, 4).unwrap();
    assert_eq!(first, sweep(&configs, 4).unwrap());
    assert_eq!(first, sweep(&configs, 1).unwrap());
    assert_eq!(first.lines().count(), 2 + configs.len());
}
