mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use nlkg::model_ode::{Forcing, OdeParams, OdeState};
use nlkg::output::{read_csv, read_json, write_json};
use nlkg::pipeline::{self, AnalyzeOptions, RunOutcome, SimulateOptions};
use nlkg::{Error, Result, SimConfig};

use args::{AnalyzeArgs, Cli, Command, ForcingKind, OdeArgs, OracleArgs, SimulateArgs, SweepArgs};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("this subcommand needs --config PATH"))?;
    SimConfig::from_file(path)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Analyze(a) => analyze(cli, a),
        Command::Ode(a) => ode(cli, a),
        Command::Oracle(a) => oracle(cli, a),
        Command::Sweep(a) => sweep(cli, a),
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let quiet = cli.quiet;
    let opts = SimulateOptions {
        resume: a.resume.clone(),
        halt_at_step: a.halt_at_step,
        progress: (!quiet).then(|| {
            Box::new(|p: pipeline::Progress| eprintln!("step {:>8}/{} t = {:.2}", p.step, p.total, p.t))
                as Box<dyn FnMut(pipeline::Progress)>
        }),
    };
    match pipeline::simulate(&cfg, &cli.out, opts)? {
        RunOutcome::Halted { step, checkpoint } => {
            if !quiet {
                println!("halted at step {step}; checkpoint {}", checkpoint.display());
            }
        }
        RunOutcome::Completed(res) => {
            if !quiet {
                let d = &res.manifest.diagnostics;
                println!(
                    "{} steps to t = {}; {}/{} slices; energy drift {:.3e}; outputs in {}",
                    d.steps,
                    d.final_t,
                    d.slices_completed,
                    d.slices_total,
                    d.energy_drift,
                    cli.out.display()
                );
            }
        }
    }
    Ok(())
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<()> {
    let slices = a.slices.clone().unwrap_or_else(|| cli.out.join("slices.jsonl"));
    let opts = AnalyzeOptions {
        beta: a.beta,
        y0: a.y0.clone(),
        rho_window: a.rho_min.zip(a.rho_max).map(|(lo, hi)| [lo, hi]),
        oracle: a.oracle.clone(),
        oracle_y_range: a.oracle_y_range,
        svg: a.svg,
    };
    let out = cli.out.join("analysis");
    let res = pipeline::analyze(&slices, &out, &opts)?;
    if !cli.quiet {
        for f in &res.fits {
            println!(
                "y0 = {}: slope {:.6e}, predicted {:.6e}, residual rms {:.3e} over {} slices",
                f.y0, f.slope, f.predicted, f.residual_rms, f.n_records
            );
        }
        for n in &res.rejected {
            println!("y0 = {}: no fit ({})", n.y0, n.reason);
        }
        println!("profile tail {:.3e}", res.profile.cauchy_tail);
        if let Some(c) = &res.oracle {
            println!("oracle ratio {:.6} varies by {:.3e} over |y| <= {}", c.constant, c.relative_variation, c.y_range);
        }
        println!("results in {}", out.display());
    }
    Ok(())
}

fn forcing(a: &OdeArgs) -> Result<Forcing> {
    Ok(match a.forcing {
        ForcingKind::Zero => Forcing::Zero,
        ForcingKind::Power => Forcing::Power { c: a.c, p: a.p },
        ForcingKind::Table => {
            let path = a.table.as_deref().ok_or_else(|| Error::config("--forcing table needs --table"))?;
            let (header, rows) = read_csv(path).map_err(|e| Error::config(e.to_string()))?;
            if header.len() != 2 {
                return Err(Error::config(format!("{}: expected columns rho,F", path.display())));
            }
            Forcing::tabulated(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
                .map_err(|e| Error::config(e.to_string()))?
        }
    })
}

fn ode(cli: &Cli, a: &OdeArgs) -> Result<()> {
    if !(a.rho0 >= 1.0 && a.rho_end > a.rho0 && a.h0 > 0.0 && a.h_max > 0.0) {
        return Err(Error::config("need 1 <= rho0 < rho_end and positive step sizes"));
    }
    let params = OdeParams { alpha: a.alpha, beta: a.beta, forcing: forcing(a)? };
    let initial = OdeState { rho: a.rho0, g: a.g0, gdot: a.gdot0 };
    let res = pipeline::run_ode(&params, initial, a.rho_end, a.h0, a.h_max, &cli.out)?;
    if let Some(w) = &res.warning {
        eprintln!("warning: {w}");
    }
    if !cli.quiet {
        let r = &res.report;
        println!(
            "{} steps; bound ratio max {:.4} ({}); M excess max {:.3e} ({})",
            r.steps,
            r.worst_ratio,
            if r.bound_holds { "holds" } else { "VIOLATED" },
            r.worst_m_excess,
            if r.m_ok { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}

fn oracle(cli: &Cli, a: &OracleArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let free = pipeline::oracle_profile(&cfg, a.y_max)?;
    std::fs::create_dir_all(&cli.out)?;
    let table = cli.out.join("a_lin.csv");
    pipeline::write_oracle_csv(&table, &free)?;
    if let Some(p) = &a.profile {
        let measured = read_json(p)?;
        let cmp = nlkg::oracle::compare_profiles(&measured, &free, a.y_range)?;
        write_json(&cli.out.join("oracle_comparison.json"), &cmp)?;
        if !cli.quiet {
            println!("ratio {:.6}, relative variation {:.3e} over |y| <= {}", cmp.constant, cmp.relative_variation, cmp.y_range);
        }
    }
    if !cli.quiet {
        println!("wrote {}", table.display());
    }
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let base = load_config(cli)?;
    let entries = pipeline::sweep(&base, &a.axes, &cli.out, a.threads)?;
    let failed = entries.iter().filter(|e| e.exit_code != 0).count();
    if !cli.quiet {
        for e in &entries {
            let tags: Vec<String> = e.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("{}  [{}]  {}", display(&e.dir), tags.join(" "), e.message);
        }
    }
    if failed > 0 {
        return Err(Error::Internal(format!("{failed} of {} sweep runs failed", entries.len())));
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
