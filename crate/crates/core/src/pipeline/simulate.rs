use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{flat_energy, make_initial_data, CauchyState, Grid, TimeWindow};
use crate::hyperboloid::{fit_growth_exponent, Collector, EnergyReport, HyperboloidSlice};
use crate::output::{
    unix_time, write_csv, write_json, write_jsonl, Artifact, Diagnostics, EnergyRow, RunManifest,
};
use crate::solver::{Evolution, Observer};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
/// Steps between flat-energy log entries.
pub const ENERGY_EVERY: u64 = 100;

/// Logs the flat energy and the light-cone leakage every `every` steps and
/// at the final step.
pub struct EnergyLogger {
    grid: Grid,
    beta: f64,
    every: u64,
    pub rows: Vec<EnergyRow>,
}

impl EnergyLogger {
    pub fn new(grid: Grid, beta: f64, every: u64) -> Self {
        EnergyLogger { grid, beta, every: every.max(1), rows: Vec::new() }
    }

    fn record(&mut self, window: &TimeWindow) {
        let Some(l) = window.newest() else { return };
        if self.rows.last().is_some_and(|r| r.step == l.step) {
            return;
        }
        let state = CauchyState { t: l.t, v: l.v.clone(), w: l.w.clone() };
        self.rows.push(EnergyRow {
            step: l.step,
            t: l.t,
            energy: flat_energy(&state, &self.grid, self.beta),
            leakage: state.light_cone_leakage(&self.grid),
        });
    }

    /// `max |E − E₀| / E₀`, zero for zero energy.
    pub fn drift(&self) -> f64 {
        let Some(e0) = self.rows.first().map(|r| r.energy) else { return 0.0 };
        if e0 == 0.0 {
            return 0.0;
        }
        self.rows.iter().map(|r| ((r.energy - e0) / e0).abs()).fold(0.0, f64::max)
    }
}

impl Observer for EnergyLogger {
    fn on_step(&mut self, window: &TimeWindow) -> Result<()> {
        if window.newest().is_some_and(|l| l.step % self.every == 0) {
            self.record(window);
        }
        Ok(())
    }

    fn finish(&mut self, window: &TimeWindow) -> Result<()> {
        self.record(window);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub step: u64,
    pub total: u64,
    pub t: f64,
}

#[derive(Default)]
pub struct SimulateOptions<'a> {
    /// Continue from this checkpoint instead of the initial data.
    pub resume: Option<PathBuf>,
    /// Stop after this step, leaving a checkpoint behind.
    pub halt_at_step: Option<u64>,
    pub progress: Option<Box<dyn FnMut(Progress) + 'a>>,
}

#[derive(Debug)]
pub struct RunResult {
    pub manifest: RunManifest,
    pub slices: Vec<HyperboloidSlice>,
    pub reports: Vec<EnergyReport>,
    pub energy_log: Vec<EnergyRow>,
}

#[derive(Debug)]
pub enum RunOutcome {
    Completed(Box<RunResult>),
    Halted { step: u64, checkpoint: PathBuf },
}

impl RunOutcome {
    pub fn completed(self) -> Result<RunResult> {
        match self {
            RunOutcome::Completed(r) => Ok(*r),
            RunOutcome::Halted { step, .. } => Err(Error::State(format!("run halted at step {step}"))),
        }
    }
}

fn save_checkpoint(
    path: &Path,
    cfg: &SimConfig,
    evo: &Evolution,
    collector: &Collector,
    logger: &EnergyLogger,
) -> Result<()> {
    let s = evo.state();
    Checkpoint {
        grid: *evo.grid(),
        dt: evo.dt(),
        t: s.t,
        epsilon: cfg.epsilon,
        beta: cfg.beta,
        v: s.v.clone(),
        w: s.w.clone(),
        step: evo.step(),
        t0: evo.t0(),
        config_hash: cfg.hash(),
        window: evo.window().levels().cloned().collect(),
        slices: collector.slices().to_vec(),
        energy_log: logger.rows.clone(),
    }
    .write_atomic(path)
}

/// Runs the evolution described by `cfg` and writes its outputs to `out_dir`.
pub fn simulate(cfg: &SimConfig, out_dir: &Path, mut opts: SimulateOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let started_at = unix_time();
    let grid = Grid::new(cfg.n_points, cfg.half_length);
    let ck_path = out_dir.join(CHECKPOINT_FILE);
    let mut last_checkpoint = None;

    let (mut evo, mut collector, mut logger, resumed_from_step) = match &opts.resume {
        Some(path) => {
            let cp = Checkpoint::read(path)?;
            if cp.config_hash != cfg.hash() {
                return Err(Error::Checkpoint(format!(
                    "{} was written for a different configuration",
                    path.display()
                )));
            }
            if cp.grid != grid || cp.dt != cfg.dt {
                return Err(Error::Checkpoint("grid or time step differs from the configuration".into()));
            }
            let evo = Evolution::resume(cp.time_window()?, cp.t0, grid, cfg.dt, cfg.beta, true)?;
            let collector = Collector::from_slices(grid, cp.slices);
            let mut logger = EnergyLogger::new(grid, cfg.beta, ENERGY_EVERY);
            logger.rows = cp.energy_log;
            last_checkpoint = Some(path.clone());
            (evo, collector, logger, Some(cp.step))
        }
        None => {
            let data = make_initial_data(&cfg.profile, cfg.epsilon, grid)?;
            let evo = Evolution::new(CauchyState::from_data(&data, cfg.t_start), grid, cfg.dt, cfg.beta, true)?;
            let collector = Collector::new(grid, &cfg.rho_samples, cfg.y_spacing, cfg.t_end);
            let mut logger = EnergyLogger::new(grid, cfg.beta, ENERGY_EVERY);
            logger.record(evo.window());
            (evo, collector, logger, None)
        }
    };

    let total = cfg.n_steps();
    let every = cfg.checkpoint_every;
    while evo.step() < total {
        let mut target = total;
        if every > 0 {
            target = target.min((evo.step() / every + 1) * every);
        }
        if opts.progress.is_some() {
            target = target.min(evo.step() + (total / 20).max(1));
        }
        if let Some(h) = opts.halt_at_step.filter(|&h| h > evo.step()) {
            target = target.min(h);
        }
        if let Err(e) = evo.advance(target - evo.step(), &mut [&mut collector, &mut logger]) {
            return Err(match e {
                Error::BlowUp { step, t, .. } => Error::BlowUp { step, t, checkpoint: last_checkpoint },
                other => other,
            });
        }
        if let Some(cb) = opts.progress.as_mut() {
            cb(Progress { step: evo.step(), total, t: evo.state().t });
        }
        let step = evo.step();
        let halting = opts.halt_at_step == Some(step) && step < total;
        if (every > 0 && step % every == 0 && step < total) || halting {
            save_checkpoint(&ck_path, cfg, &evo, &collector, &logger)?;
            last_checkpoint = Some(ck_path.clone());
        }
        if halting {
            return Ok(RunOutcome::Halted { step, checkpoint: ck_path });
        }
    }
    evo.finish(&mut [&mut collector, &mut logger])?;

    let slices = collector.into_slices();
    let mut reports = slices
        .iter()
        .filter(|s| s.is_complete())
        .map(EnergyReport::from_slice)
        .collect::<Result<Vec<_>>>()?;
    let growth = fit_growth_exponent(&mut reports);

    let mut artifacts = Vec::new();
    let mut emit = |name: &str, records: usize| artifacts.push(Artifact { path: name.into(), records });
    let records: Vec<_> = slices.iter().map(|s| s.to_record()).collect();
    emit("slices.jsonl", write_jsonl(&out_dir.join("slices.jsonl"), &records)?);
    emit("reports.jsonl", write_jsonl(&out_dir.join("reports.jsonl"), &reports)?);
    let n = write_csv(
        &out_dir.join("reports.csv"),
        &["rho", "E", "L2k0", "L2k1", "L2k2", "L2k3", "supV"],
        reports.iter().map(|r| {
            let mut row = vec![r.rho, r.energy.unwrap_or(f64::NAN)];
            row.extend(r.norms_l2k);
            row.push(r.sup_v);
            row
        }),
    )?;
    emit("reports.csv", n);
    let n = write_csv(
        &out_dir.join("energy.csv"),
        &["step", "t", "E", "leakage"],
        logger.rows.iter().map(|r| vec![r.step as f64, r.t, r.energy, r.leakage]),
    )?;
    emit("energy.csv", n);
    if ck_path.exists() {
        emit(CHECKPOINT_FILE, 1);
    }

    let diagnostics = Diagnostics {
        steps: evo.step(),
        final_t: evo.state().t,
        energy_drift: logger.drift(),
        max_leakage: logger.rows.iter().map(|r| r.leakage).fold(0.0, f64::max),
        slices_completed: slices.iter().filter(|s| s.is_complete()).count(),
        slices_total: slices.len(),
        sobolev_holds: reports.iter().all(|r| r.sobolev.is_none_or(|c| c.holds)),
        growth_exponent: growth,
    };
    fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    artifacts.push(Artifact { path: "config.toml".into(), records: 1 });
    artifacts.push(Artifact { path: "manifest.json".into(), records: 1 });
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.into(),
        started_at,
        finished_at: unix_time(),
        resumed_from_step,
        artifacts,
        diagnostics,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    Ok(RunOutcome::Completed(Box::new(RunResult {
        manifest,
        slices,
        reports,
        energy_log: logger.rows,
    })))
}
