use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::Serialize;

use super::simulate::{simulate, SimulateOptions};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{make_initial_data, Grid};
use crate::model_ode::{integrate, lemma21_check, lemma21_rows, Lemma21Report, OdeParams, OdeState};
use crate::oracle::{stationary_phase_profile, FreeProfile};
use crate::output::{read_csv, write_csv, write_json};

/// `a_lin` for the data of `cfg` on `|y| ≤ y_max` with the config's y spacing.
pub fn oracle_profile(cfg: &SimConfig, y_max: f64) -> Result<FreeProfile> {
    let grid = Grid::new(cfg.n_points, cfg.half_length);
    let data = make_initial_data(&cfg.profile, cfg.epsilon, grid)?;
    let j = (y_max / cfg.y_spacing + 1e-9).floor() as i64;
    let ys: Vec<f64> = (-j..=j).map(|k| k as f64 * cfg.y_spacing).collect();
    Ok(stationary_phase_profile(&data, &ys))
}

const ORACLE_HEADER: [&str; 5] = ["y", "xi", "a_lin", "u_plus_re", "u_plus_im"];

pub fn write_oracle_csv(path: &Path, p: &FreeProfile) -> Result<usize> {
    write_csv(
        path,
        &ORACLE_HEADER,
        (0..p.y_grid.len()).map(|i| vec![p.y_grid[i], p.xi_grid[i], p.a_lin[i], p.u_plus_hat[i].re, p.u_plus_hat[i].im]),
    )
}

pub fn read_oracle_csv(path: &Path) -> Result<FreeProfile> {
    let (header, rows) = read_csv(path)?;
    if header != ORACLE_HEADER {
        return Err(Error::Input(format!(
            "{}: expected columns {}",
            path.display(),
            ORACLE_HEADER.join(",")
        )));
    }
    Ok(FreeProfile {
        y_grid: rows.iter().map(|r| r[0]).collect(),
        xi_grid: rows.iter().map(|r| r[1]).collect(),
        a_lin: rows.iter().map(|r| r[2]).collect(),
        u_plus_hat: rows.iter().map(|r| Complex64::new(r[3], r[4])).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OdeRun {
    pub report: Lemma21Report,
    pub warning: Option<String>,
    pub rows: usize,
}

/// Integrates the model ODE and writes `ode.csv` and `ode_report.json`.
pub fn run_ode(
    params: &OdeParams,
    initial: OdeState,
    rho_end: f64,
    h0: f64,
    h_max: f64,
    out_dir: &Path,
) -> Result<OdeRun> {
    let traj = integrate(initial, params, rho_end, h0, h_max)?;
    let rows = lemma21_rows(&traj, params)?;
    let report = lemma21_check(&traj, params)?;
    fs::create_dir_all(out_dir)?;
    let n = write_csv(
        &out_dir.join("ode.csv"),
        &["rho", "g", "gdot", "M", "lhs", "rhs"],
        rows.iter().map(|r| vec![r.rho, r.g, r.gdot, r.m, r.lhs, r.rhs]),
    )?;
    let run = OdeRun {
        report,
        warning: crate::model_ode::smallness_warning(&initial, params),
        rows: n,
    };
    write_json(&out_dir.join("ode_report.json"), &run)?;
    Ok(run)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub dir: PathBuf,
    pub overrides: Vec<(String, String)>,
    pub exit_code: i32,
    pub message: String,
}

/// Runs every combination of `axes` as an independent simulation in its own
/// subdirectory, `threads` at a time, and writes `sweep.json`.
pub fn sweep(base: &SimConfig, axes: &[(String, Vec<String>)], out_dir: &Path, threads: usize) -> Result<Vec<SweepEntry>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        if values.is_empty() {
            return Err(Error::config(format!("sweep axis `{key}` has no values")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    // Every configuration is validated before any run starts.
    let configs = combos
        .iter()
        .map(|c| c.iter().try_fold(base.clone(), |cfg, (k, v)| cfg.with_override(k, v)))
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(out_dir)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepEntry>>> = Mutex::new(vec![None; configs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(configs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(k) else { break };
                let dir = out_dir.join(format!("run_{k:03}"));
                let (exit_code, message) = match simulate(cfg, &dir, SimulateOptions::default()) {
                    Ok(_) => (0, "completed".to_string()),
                    Err(e) => (e.exit_code(), e.to_string()),
                };
                let entry = SweepEntry { dir, overrides: combos[k].clone(), exit_code, message };
                results.lock().unwrap()[k] = Some(entry);
            });
        }
    });
    let entries: Vec<SweepEntry> = results.into_inner().unwrap().into_iter().flatten().collect();
    write_json(&out_dir.join("sweep.json"), &entries)?;
    Ok(entries)
}
