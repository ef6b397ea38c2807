use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "nlkg", version, about = "Cubic Klein-Gordon simulations on hyperboloids")]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, env = "NLKG_OUT_DIR", default_value = "out")]
    pub out: PathBuf,

    /// Suppress progress and summary output
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve the configured data and collect hyperboloid slices
    Simulate(SimulateArgs),
    /// Extract the asymptotic profile and fit the logarithmic phase
    Analyze(AnalyzeArgs),
    /// Integrate the scalar model equation and check its a-priori bound
    Ode(OdeArgs),
    /// Tabulate the stationary-phase profile of the free solution
    Oracle(OracleArgs),
    /// Run a grid of configurations side by side
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Continue from a checkpoint written by an earlier run of the same config
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// Stop after this step and leave a checkpoint
    #[arg(long)]
    pub halt_at_step: Option<u64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Slice file; defaults to <out>/slices.jsonl
    #[arg(long)]
    pub slices: Option<PathBuf>,

    /// Cubic coupling; read from the run manifest when omitted
    #[arg(long)]
    pub beta: Option<f64>,

    /// Probe point for a phase fit (repeatable)
    #[arg(long = "y0", default_values_t = [0.0])]
    pub y0: Vec<f64>,

    #[arg(long, requires = "rho_max")]
    pub rho_min: Option<f64>,

    #[arg(long, requires = "rho_min")]
    pub rho_max: Option<f64>,

    /// a_lin table from the oracle subcommand
    #[arg(long)]
    pub oracle: Option<PathBuf>,

    /// Half-width of the y range used for the oracle comparison
    #[arg(long, default_value_t = 1.0)]
    pub oracle_y_range: f64,

    /// Also write SVG plots
    #[arg(long)]
    pub svg: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ForcingKind {
    Zero,
    Power,
    Table,
}

#[derive(Args, Debug)]
pub struct OdeArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = ForcingKind::Zero)]
    pub forcing: ForcingKind,
    /// Amplitude c of the forcing c*rho^-p
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Exponent p of the forcing c*rho^-p
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// CSV with columns rho,F for a tabulated forcing
    #[arg(long, required_if_eq("forcing", "table"))]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub g0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gdot0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 1e4)]
    pub rho_end: f64,
    /// Step at rho = 1; steps grow in proportion to rho
    #[arg(long, default_value_t = 1e-3)]
    pub h0: f64,
    #[arg(long, default_value_t = 0.02)]
    pub h_max: f64,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Largest |y| tabulated
    #[arg(long, default_value_t = 2.0)]
    pub y_max: f64,

    /// profile.json from analyze to compare against
    #[arg(long)]
    pub profile: Option<PathBuf>,

    #[arg(long, default_value_t = 1.0)]
    pub y_range: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// key=v1,v2,... ; every combination of the given axes is run
    #[arg(long = "set", required = true, value_parser = parse_axis)]
    pub axes: Vec<(String, Vec<String>)>,

    #[arg(long, default_value_t = 2)]
    pub threads: usize,
}

fn parse_axis(s: &str) -> Result<(String, Vec<String>), String> {
    let (key, values) = s.split_once('=').ok_or_else(|| format!("expected key=v1,v2,... but got `{s}`"))?;
    let values = split_top_level(values);
    if key.trim().is_empty() || values.is_empty() {
        return Err(format!("expected key=v1,v2,... but got `{s}`"));
    }
    Ok((key.trim().to_string(), values))
}

/// Splits on commas outside parentheses and quotes, so profile strings survive.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let (mut depth, mut quoted, mut cur) = (0i32, false, String::new());
    for ch in s.chars() {
        match ch {
            '"' => quoted = !quoted,
            '(' | '[' if !quoted => depth += 1,
            ')' | ']' if !quoted => depth -= 1,
            ',' if depth == 0 && !quoted => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out.retain(|v| !v.is_empty());
    out
}
