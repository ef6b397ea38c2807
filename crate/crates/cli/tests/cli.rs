use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
epsilon = 0.5
beta = 1.0
half_length = 25.6
n_points = 1024
dt = 0.02
t_end = 14.0
rho_samples = "geom(2, 10, 1.1)"
y_spacing = 0.02
"#;

fn nlkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlkg"))
        .args(args)
        .env_remove("NLKG_OUT_DIR")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = nlkg(&["--config", &cfg, "--out", out, "simulate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("slices"));
    assert!(Path::new(out).join("manifest.json").exists());

    let o = nlkg(&["--out", out, "-q", "analyze", "--y0", "0", "--y0", "0.5", "--svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    for f in ["profile.json", "fits.json", "phase_y0.svg", "phase_y0.5.svg", "profile.svg"] {
        assert!(Path::new(out).join("analysis").join(f).exists(), "{f}");
    }

    let o = nlkg(&["--config", &cfg, "--out", out, "oracle", "--profile", &format!("{out}/analysis/profile.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("a_lin.csv").exists());
    assert!(Path::new(out).join("oracle_comparison.json").exists());
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &SMALL.replace("t_end = 14.0", "t_end = 6.0").replace("geom(2, 10, 1.1)", "geom(2, 5, 1.2)"));
    let env_out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_nlkg"))
        .args(["--config", &cfg, "--quiet", "simulate"])
        .env("NLKG_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
    assert!(env_out.join("slices.jsonl").exists());
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL.replace("n_points = 1024", "n_points = 1000"));
    let o = nlkg(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_points"));

    let o = nlkg(&["--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(code(&o), 2);
    let o = nlkg(&["--config", "/nonexistent.toml", "simulate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn blow_up_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("epsilon = 0.5", "epsilon = 3000.0").replace("beta = 1.0", "beta = 0.0")
        + "profile = \"bump(c0=0, c1=1)\"\ncheckpoint_every = 3\n";
    let cfg = write_config(dir.path(), "hot.toml", &text);
    let o = nlkg(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("checkpoint.bin"), "{err}");
}

#[test]
fn bad_analysis_input_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let slices = dir.path().join("slices.jsonl");
    fs::write(&slices, "{\"rho\": 2.0}\nnot json\n").unwrap();
    let o = nlkg(&["--out", dir.path().to_str().unwrap(), "analyze", "--slices", slices.to_str().unwrap(), "--beta", "1"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("slices.jsonl:1:"));
    let o = nlkg(&["--out", dir.path().to_str().unwrap(), "analyze", "--beta", "1"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn ode_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nlkg(&["--out", out, "ode", "--beta", "5", "--g0", "0.1", "--rho-end", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("holds"));
    let report = fs::read_to_string(dir.path().join("ode_report.json")).unwrap();
    assert!(report.contains("\"bound_holds\": true"), "{report}");
    assert!(dir.path().join("ode.csv").exists());

    let table = dir.path().join("f.csv");
    fs::write(&table, "rho,F\n1,0.01\n100,0.0001\n").unwrap();
    let o = nlkg(&["--out", out, "-q", "ode", "--forcing", "table", "--table", table.to_str().unwrap(), "--rho-end", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = nlkg(&["--out", out, "ode", "--rho0", "5", "--rho-end", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_runs_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &SMALL.replace("t_end = 14.0", "t_end = 6.0").replace("geom(2, 10, 1.1)", "geom(2, 5, 1.2)"));
    let out = dir.path().join("sweep");
    let o = nlkg(&["--config", &cfg, "--out", out.to_str().unwrap(), "-q", "sweep", "--set", "beta=0,1", "--set", "epsilon=0.1,0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..4 {
        assert!(out.join(format!("run_{k:03}")).join("manifest.json").exists());
    }
    assert!(out.join("sweep.json").exists());

    let o = nlkg(&["--config", &cfg, "--out", out.to_str().unwrap(), "sweep", "--set", "dt=0.02,-1"]);
    assert_eq!(code(&o), 2);
}
