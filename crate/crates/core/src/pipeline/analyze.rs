use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tools::read_oracle_csv;
use crate::asymptotics::{
    build_records, extract_profile, fit_log_phase, phase_lemma_check, AsymptoticRecord, PhaseFit,
    PhaseLemmaReport, ProfileEstimate,
};
use crate::error::{Error, Result};
use crate::hyperboloid::{EnergyReport, HyperboloidSlice, SliceRecord};
use crate::oracle::{compare_profiles, OracleComparison};
use crate::output::{read_json, read_jsonl, write_json, RunManifest};
use crate::svg;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    /// Coupling used for the phase density; read from the run manifest when absent.
    pub beta: Option<f64>,
    pub y0: Vec<f64>,
    /// Defaults to the full sampled range.
    pub rho_window: Option<[f64; 2]>,
    /// `a_lin` table written by the oracle subcommand.
    pub oracle: Option<PathBuf>,
    pub oracle_y_range: f64,
    pub svg: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            beta: None,
            y0: vec![0.0],
            rho_window: None,
            oracle: None,
            oracle_y_range: 1.0,
            svg: false,
        }
    }
}

/// A requested fit that could not be made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitNote {
    pub y0: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub beta: f64,
    pub profile: ProfileEstimate,
    pub fits: Vec<PhaseFit>,
    pub rejected: Vec<FitNote>,
    pub phase_lemma: PhaseLemmaReport,
    pub oracle: Option<OracleComparison>,
    #[serde(skip)]
    pub records: Vec<AsymptoticRecord>,
}

fn as_input(e: Error) -> Error {
    match e {
        Error::Argument(m) | Error::State(m) => Error::Input(m),
        other => other,
    }
}

pub fn read_slices(path: &Path) -> Result<Vec<HyperboloidSlice>> {
    let records: Vec<SliceRecord> = read_jsonl(path)?;
    records.into_iter().map(HyperboloidSlice::from_record).collect()
}

/// The measurement pipeline on slices already in memory.
pub fn analyze_slices(slices: &[HyperboloidSlice], beta: f64, opts: &AnalyzeOptions) -> Result<Analysis> {
    if slices.is_empty() {
        return Err(Error::Input("no slices to analyse".into()));
    }
    for s in slices {
        s.require_complete().map_err(as_input)?;
    }
    let records = build_records(slices, beta).map_err(as_input)?;
    let profile = extract_profile(&records).map_err(as_input)?;
    let window = opts
        .rho_window
        .unwrap_or([records[0].rho, records[records.len() - 1].rho]);

    let mut fits = Vec::new();
    let mut rejected = Vec::new();
    for &y0 in &opts.y0 {
        match fit_log_phase(&records, y0, window, beta, &profile) {
            Ok(f) => fits.push(f),
            Err(e @ Error::DegenerateModulus { .. }) => rejected.push(FitNote { y0, reason: e.to_string() }),
            Err(e) => return Err(as_input(e)),
        }
    }

    let bounds = slices
        .iter()
        .map(|s| EnergyReport::from_slice(s).map(|r| r.forcing_sup))
        .collect::<Result<Vec<_>>>()?;
    let phase_lemma = phase_lemma_check(&records, &bounds, 0.0).map_err(as_input)?;

    let oracle = match &opts.oracle {
        Some(path) => Some(compare_profiles(&profile, &read_oracle_csv(path)?, opts.oracle_y_range)?),
        None => None,
    };
    Ok(Analysis { beta, profile, fits, rejected, phase_lemma, oracle, records })
}

#[derive(Serialize)]
struct FitsFile<'a> {
    beta: f64,
    rho_window: Option<[f64; 2]>,
    fits: &'a [PhaseFit],
    rejected: &'a [FitNote],
}

/// Reads `slices_path`, analyses it and writes the results to `out_dir`.
pub fn analyze(slices_path: &Path, out_dir: &Path, opts: &AnalyzeOptions) -> Result<Analysis> {
    let slices = read_slices(slices_path)?;
    let beta = match opts.beta {
        Some(b) => b,
        None => {
            let manifest_path = slices_path.with_file_name("manifest.json");
            let manifest: RunManifest = read_json(&manifest_path).map_err(|_| {
                Error::Input(format!(
                    "no beta given and no readable manifest at {}",
                    manifest_path.display()
                ))
            })?;
            manifest.config.beta
        }
    };
    let analysis = analyze_slices(&slices, beta, opts)?;

    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("profile.json"), &analysis.profile)?;
    write_json(
        &out_dir.join("fits.json"),
        &FitsFile { beta, rho_window: opts.rho_window, fits: &analysis.fits, rejected: &analysis.rejected },
    )?;
    write_json(&out_dir.join("phase_lemma.json"), &analysis.phase_lemma)?;
    if let Some(c) = &analysis.oracle {
        write_json(&out_dir.join("oracle_comparison.json"), c)?;
    }
    if opts.svg {
        for fit in &analysis.fits {
            let j = (fit.y0 / analysis.records[0].y_spacing).round() as i64;
            let pts: Vec<(f64, f64)> = analysis
                .records
                .iter()
                .filter(|r| r.rho >= fit.rho_window[0] * (1.0 - 1e-9) && r.rho <= fit.rho_window[1] * (1.0 + 1e-9))
                .filter_map(|r| r.index_of(j).map(|i| (r.rho.ln(), r.theta[i])))
                .collect();
            fs::write(
                out_dir.join(format!("phase_y{}.svg", fit.y0)),
                svg::phase_plot(fit.y0, &pts, fit.slope, fit.intercept),
            )?;
        }
        let measured: Vec<(f64, f64)> = analysis.profile.y_grid.iter().copied().zip(analysis.profile.a.iter().copied()).collect();
        let linear = match (&opts.oracle, &analysis.oracle) {
            (Some(path), Some(c)) => {
                let free = read_oracle_csv(path)?;
                Some(free.y_grid.iter().zip(&free.a_lin).map(|(&y, &a)| (y, a * c.constant)).collect::<Vec<_>>())
            }
            _ => None,
        };
        fs::write(out_dir.join("profile.svg"), svg::profile_plot(&measured, linear.as_deref()))?;
    }
    Ok(analysis)
}
