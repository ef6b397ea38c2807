//! Run orchestration behind the command-line subcommands.

mod analyze;
mod simulate;
mod tools;

pub use analyze::{analyze, analyze_slices, read_slices, Analysis, AnalyzeOptions, FitNote};
pub use simulate::{
    simulate, EnergyLogger, Progress, RunOutcome, RunResult, SimulateOptions, CHECKPOINT_FILE, ENERGY_EVERY,
};
pub use tools::{oracle_profile, read_oracle_csv, run_ode, sweep, write_oracle_csv, OdeRun, SweepEntry};
