use std::fs;
use std::path::Path;

use nlkg::pipeline::{analyze, simulate, sweep, AnalyzeOptions, RunOutcome, SimulateOptions, CHECKPOINT_FILE};
use nlkg::{Error, SimConfig};

fn small(extra: &str) -> SimConfig {
    SimConfig::from_toml_str(&format!(
        r#"
        epsilon = 0.5
        beta = 1.0
        half_length = 25.6
        n_points = 1024
        dt = 0.02
        t_end = 14.0
        rho_samples = "geom(2, 10, 1.1)"
        y_spacing = 0.02
        {extra}
        "#
    ))
    .unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

const DETERMINISTIC: [&str; 5] = ["slices.jsonl", "reports.jsonl", "reports.csv", "energy.csv", "config.toml"];

#[test]
fn completes_and_lists_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("");
    let res = simulate(&cfg, dir.path(), SimulateOptions::default()).unwrap().completed().unwrap();
    let m = &res.manifest;
    assert_eq!(m.diagnostics.slices_total, cfg.rho_samples.len());
    assert_eq!(m.diagnostics.slices_completed, cfg.rho_samples.len());
    assert!(m.diagnostics.sobolev_holds);
    assert!(m.diagnostics.energy_drift < 1e-4, "{}", m.diagnostics.energy_drift);
    for a in &m.artifacts {
        assert!(dir.path().join(&a.path).exists(), "{}", a.path.display());
    }
    let listed: Vec<_> = m.artifacts.iter().map(|a| a.path.clone()).collect();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert!(listed.iter().any(|p| p.as_os_str() == name), "{name:?} not listed");
    }
    assert_eq!(m.artifacts[0].records, cfg.rho_samples.len());
}

#[test]
fn zero_data_give_zero_slices() {
    let dir = tempfile::tempdir().unwrap();
    let res = simulate(&small("").with_override("epsilon", "0").unwrap(), dir.path(), SimulateOptions::default())
        .unwrap()
        .completed()
        .unwrap();
    assert!(res.slices.iter().all(|s| s.v.iter().all(|v| *v == 0.0)));
    assert!(res.reports.iter().all(|r| r.energy.unwrap_or(0.0) == 0.0 && r.norms_l2k == [0.0; 4]));

    let out = dir.path().join("analysis");
    let a = analyze(&dir.path().join("slices.jsonl"), &out, &AnalyzeOptions::default()).unwrap();
    assert!(a.profile.a.iter().all(|a| *a == 0.0));
    assert!(a.fits.is_empty());
    assert!(a.rejected[0].reason.contains("degenerate modulus"));
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small("");
    simulate(&cfg, a.path(), SimulateOptions::default()).unwrap();
    simulate(&cfg, b.path(), SimulateOptions::default()).unwrap();
    for f in DETERMINISTIC {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let cfg = small("checkpoint_every = 150");
    let full = tempfile::tempdir().unwrap();
    simulate(&cfg, full.path(), SimulateOptions::default()).unwrap();

    let part = tempfile::tempdir().unwrap();
    let halted = simulate(&cfg, part.path(), SimulateOptions { halt_at_step: Some(301), ..Default::default() }).unwrap();
    let RunOutcome::Halted { step, checkpoint } = halted else { panic!("run did not halt") };
    assert_eq!(step, 301);
    assert!(!part.path().join("slices.jsonl").exists());

    let resumed = simulate(&cfg, part.path(), SimulateOptions { resume: Some(checkpoint), ..Default::default() })
        .unwrap()
        .completed()
        .unwrap();
    assert_eq!(resumed.manifest.resumed_from_step, Some(301));
    for f in DETERMINISTIC {
        assert_eq!(read(full.path(), f), read(part.path(), f), "{f}");
    }
    // The periodic checkpoints themselves are reproducible byte for byte.
    assert_eq!(read(full.path(), CHECKPOINT_FILE), read(part.path(), CHECKPOINT_FILE));
}

#[test]
fn checkpoint_of_another_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("");
    let RunOutcome::Halted { checkpoint, .. } =
        simulate(&cfg, dir.path(), SimulateOptions { halt_at_step: Some(10), ..Default::default() }).unwrap()
    else {
        panic!()
    };
    let other = cfg.with_override("beta", "2").unwrap();
    let err = simulate(&other, dir.path(), SimulateOptions { resume: Some(checkpoint), ..Default::default() }).unwrap_err();
    assert!(matches!(err, Error::Checkpoint(_)), "{err}");
}

#[test]
fn blow_up_reports_last_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    // Linear growth from a large initial velocity crosses the amplitude limit after a few steps.
    let cfg = small("checkpoint_every = 3\nprofile = \"bump(c0=0, c1=1)\"")
        .with_override("beta", "0")
        .unwrap()
        .with_override("epsilon", "3000")
        .unwrap();
    let err = simulate(&cfg, dir.path(), SimulateOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let Error::BlowUp { checkpoint, step, .. } = err else { panic!("{err}") };
    assert!(step > 3);
    assert_eq!(checkpoint, Some(dir.path().join(CHECKPOINT_FILE)));
}

#[test]
fn analysis_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(&small(""), dir.path(), SimulateOptions::default()).unwrap();
    let out = dir.path().join("analysis");
    let opts = AnalyzeOptions { y0: vec![0.0, 0.5], svg: true, ..Default::default() };
    let a = analyze(&dir.path().join("slices.jsonl"), &out, &opts).unwrap();
    assert_eq!(a.beta, 1.0);
    assert_eq!(a.fits.len(), 2);
    assert!(a.profile.modulus_mismatch < 1e-8);
    for f in ["profile.json", "fits.json", "phase_lemma.json", "phase_y0.svg", "phase_y0.5.svg", "profile.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let bad = dir.path().join("bad.jsonl");
    let text = fs::read_to_string(dir.path().join("slices.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(0, 1);
    fs::write(&bad, lines.join("\n")).unwrap();
    let err = analyze(&bad, &out, &AnalyzeOptions { beta: Some(1.0), ..Default::default() }).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    let err = analyze(&dir.path().join("missing.jsonl"), &out, &AnalyzeOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn sweep_runs_each_combination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("")
        .with_override("rho_samples", "\"geom(2, 5, 1.2)\"")
        .unwrap()
        .with_override("t_end", "6.0")
        .unwrap();
    let axes = vec![("beta".to_string(), vec!["0".into(), "1".into()]), ("epsilon".to_string(), vec!["0.1".into(), "0.2".into()])];
    let entries = sweep(&cfg, &axes, dir.path(), 3).unwrap();
    assert_eq!(entries.len(), 4);
    assert!(entries.iter().all(|e| e.exit_code == 0 && e.dir.join("manifest.json").exists()));
    assert_eq!(entries[3].overrides, vec![("beta".into(), "1".into()), ("epsilon".into(), "0.2".into())]);
    assert!(dir.path().join("sweep.json").exists());
    let bad = vec![("beta".to_string(), vec!["-1".into()])];
    assert_eq!(sweep(&cfg, &bad, dir.path(), 1).unwrap_err().exit_code(), 2);
}
