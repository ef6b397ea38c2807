//! Half-wave decomposition of the hyperboloid data and the logarithmic phase law.
//!
//! `V₊ = e^{−iρ}(∂ρV + iV)` isolates the `e^{iρ}` oscillation of `V`. Its phase
//! drifts at rate `g = (3β/8ρ)|V₊|² + 1/(8ρ²)`; removing the accumulated
//! `G = ∫g dρ` leaves `W = V₊e^{−iG}`, which converges to the scattering profile.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperboloid::HyperboloidSlice;

/// Minimum number of records for profile extraction and the Cauchy tail.
pub const TAIL_RECORDS: usize = 5;
/// Minimum number of records inside a phase-fit window.
pub const MIN_FIT_RECORDS: usize = 10;

const DEGENERATE_MODULUS: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRecord {
    pub rho: f64,
    pub y_spacing: f64,
    pub y_grid: Vec<f64>,
    #[serde(rename = "V_plus")]
    pub v_plus: Vec<Complex64>,
    pub modulus: Vec<f64>,
    /// Phase of `V₊`, continued in `ρ` at each fixed `y`.
    pub theta: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(rename = "G")]
    pub big_g: Vec<f64>,
}

impl AsymptoticRecord {
    /// Builds `V₊`, its modulus and phase from samples of `V` and `∂ρV` on the
    /// grid `y_i = (i − J)h`. The phase is continued from `previous` wherever
    /// that record has the same `y`.
    pub fn from_samples(
        rho: f64,
        y_spacing: f64,
        v: &[f64],
        v_rho: &[f64],
        previous: Option<&AsymptoticRecord>,
    ) -> Result<Self> {
        if v.len() != v_rho.len() || v.len() % 2 == 0 {
            return Err(Error::Argument("V and V_rho must share a symmetric odd-length grid".into()));
        }
        if let Some(p) = previous {
            if (p.y_spacing - y_spacing).abs() > 1e-12 * y_spacing {
                return Err(Error::Argument("records must share the y spacing".into()));
            }
        }
        let n = v.len();
        let half = n / 2;
        let rot = Complex64::from_polar(1.0, -rho);
        let mut rec = AsymptoticRecord {
            rho,
            y_spacing,
            y_grid: (0..n).map(|i| (i as f64 - half as f64) * y_spacing).collect(),
            v_plus: Vec::with_capacity(n),
            modulus: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            g: vec![0.0; n],
            big_g: vec![0.0; n],
        };
        for i in 0..n {
            let vp = rot * Complex64::new(v_rho[i], v[i]);
            let arg = vp.arg();
            let j = i as i64 - half as i64;
            let theta = match previous.and_then(|p| p.index_of(j).map(|k| p.theta[k])) {
                Some(prev) => prev + wrap(arg - prev),
                None => arg,
            };
            rec.v_plus.push(vp);
            rec.modulus.push(v_rho[i].hypot(v[i]));
            rec.theta.push(theta);
        }
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.y_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_grid.is_empty()
    }

    pub fn half_count(&self) -> usize {
        self.len() / 2
    }

    /// Position of `y = j·h` in this record.
    pub fn index_of(&self, j: i64) -> Option<usize> {
        let i = j + self.half_count() as i64;
        (0..self.len() as i64).contains(&i).then_some(i as usize)
    }

    /// `V₊e^{−iG}` at position `i`.
    pub fn w(&self, i: usize) -> Complex64 {
        self.v_plus[i] * Complex64::from_polar(1.0, -self.big_g[i])
    }
}

/// Principal value in `(−π, π]`.
fn wrap(d: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = d - two_pi * (d / two_pi).round();
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

pub fn decompose(slice: &HyperboloidSlice, previous: Option<&AsymptoticRecord>) -> Result<AsymptoticRecord> {
    slice.require_complete()?;
    AsymptoticRecord::from_samples(slice.rho, slice.y_spacing, &slice.v, &slice.v_rho, previous)
}

/// `g(y) = (3β/(8ρ))|V₊|² + 1/(8ρ²)`.
pub fn phase_density(record: &AsymptoticRecord, beta: f64) -> Vec<f64> {
    let rho = record.rho;
    record
        .modulus
        .iter()
        .map(|m| 3.0 * beta / (8.0 * rho) * m * m + 1.0 / (8.0 * rho * rho))
        .collect()
}

fn check_order(rhos: impl Iterator<Item = f64>) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for rho in rhos {
        if !(rho > last) {
            return Err(Error::Argument(format!(
                "records must be strictly increasing in rho ({last} then {rho})"
            )));
        }
        last = rho;
    }
    Ok(())
}

/// Fills `g` and the trapezoid integral `G` on every record. `G` starts at
/// zero where a given `y` first appears.
pub fn accumulate_phase(records: &mut [AsymptoticRecord], beta: f64) -> Result<()> {
    if records.len() < 2 {
        return Err(Error::Argument("phase accumulation needs at least two records".into()));
    }
    check_order(records.iter().map(|r| r.rho))?;
    for r in records.iter_mut() {
        r.g = phase_density(r, beta);
    }
    records[0].big_g.iter_mut().for_each(|v| *v = 0.0);
    for k in 1..records.len() {
        let (done, rest) = records.split_at_mut(k);
        let prev = &done[k - 1];
        let cur = &mut rest[0];
        let drho = cur.rho - prev.rho;
        let half = cur.half_count() as i64;
        for i in 0..cur.len() {
            cur.big_g[i] = match prev.index_of(i as i64 - half) {
                Some(p) => prev.big_g[p] + 0.5 * drho * (prev.g[p] + cur.g[i]),
                None => 0.0,
            };
        }
    }
    Ok(())
}

/// Decomposes slices in order of `ρ` and accumulates their phase.
pub fn build_records(slices: &[HyperboloidSlice], beta: f64) -> Result<Vec<AsymptoticRecord>> {
    check_order(slices.iter().map(|s| s.rho))?;
    let mut out: Vec<AsymptoticRecord> = Vec::with_capacity(slices.len());
    for s in slices {
        let rec = decompose(s, out.last())?;
        out.push(rec);
    }
    accumulate_phase(&mut out, beta)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    pub y_grid: Vec<f64>,
    /// `|V₊|` at the largest sampled `ρ` that reaches each `y`.
    pub a: Vec<f64>,
    pub a_plus: Vec<Complex64>,
    /// The `ρ` each entry of `a` was read from.
    pub rho_source: Vec<f64>,
    /// `max_k ‖W(ρ_k) − W(ρ_last)‖_∞` over the final records, on the `y`
    /// points they share.
    pub cauchy_tail: f64,
    /// `‖W(ρ_{n−5}) − W(ρ_{n−6})‖_∞` on the same points, when available.
    pub prior_gap: Option<f64>,
    /// `‖|a_plus| − a‖_∞`.
    pub modulus_mismatch: f64,
}

impl ProfileEstimate {
    pub fn a_at(&self, y: f64) -> Option<f64> {
        let h = self.y_grid.get(1).map(|y1| y1 - self.y_grid[0])?;
        let i = ((y - self.y_grid[0]) / h).round();
        (i >= 0.0 && (i as usize) < self.a.len() && (self.y_grid[i as usize] - y).abs() < 1e-9)
            .then(|| self.a[i as usize])
    }
}

pub fn extract_profile(records: &[AsymptoticRecord]) -> Result<ProfileEstimate> {
    let n = records.len();
    if n < TAIL_RECORDS {
        return Err(Error::Argument(format!(
            "profile extraction needs at least {TAIL_RECORDS} records, got {n}"
        )));
    }
    check_order(records.iter().map(|r| r.rho))?;
    let h = records[0].y_spacing;
    let big_j = records.iter().map(|r| r.half_count()).max().unwrap_or(0) as i64;

    let mut est = ProfileEstimate {
        y_grid: Vec::new(),
        a: Vec::new(),
        a_plus: Vec::new(),
        rho_source: Vec::new(),
        cauchy_tail: 0.0,
        prior_gap: None,
        modulus_mismatch: 0.0,
    };
    for j in -big_j..=big_j {
        let Some((r, i)) = records.iter().rev().find_map(|r| r.index_of(j).map(|i| (r, i))) else {
            continue;
        };
        let ap = r.w(i);
        est.y_grid.push(j as f64 * h);
        est.a.push(r.modulus[i]);
        est.a_plus.push(ap);
        est.rho_source.push(r.rho);
        est.modulus_mismatch = est.modulus_mismatch.max((ap.norm() - r.modulus[i]).abs());
    }

    let span = if n > TAIL_RECORDS { TAIL_RECORDS + 1 } else { TAIL_RECORDS };
    let tail = &records[n - span..];
    let common = tail.iter().map(|r| r.half_count()).min().unwrap_or(0) as i64;
    let gap = |a: &AsymptoticRecord, b: &AsymptoticRecord| {
        (-common..=common)
            .map(|j| (a.w(a.index_of(j).unwrap()) - b.w(b.index_of(j).unwrap())).norm())
            .fold(0.0, f64::max)
    };
    let last = &records[n - 1];
    est.cauchy_tail = records[n - TAIL_RECORDS..n - 1]
        .iter()
        .map(|r| gap(r, last))
        .fold(0.0, f64::max);
    if n > TAIL_RECORDS {
        est.prior_gap = Some(gap(&records[n - TAIL_RECORDS], &records[n - TAIL_RECORDS - 1]));
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub y0: f64,
    pub rho_window: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub predicted: f64,
    pub n_records: usize,
    /// `|slope|·ln(ρ₂/ρ₁)` over the records actually used.
    pub total_change: f64,
}

/// Least-squares fit of `θ(ρ, y0)` against `ln ρ` over `rho_window`.
pub fn fit_log_phase(
    records: &[AsymptoticRecord],
    y0: f64,
    rho_window: [f64; 2],
    beta: f64,
    profile: &ProfileEstimate,
) -> Result<PhaseFit> {
    let h = records
        .first()
        .map(|r| r.y_spacing)
        .ok_or_else(|| Error::Argument("no records to fit".into()))?;
    let j0 = (y0 / h).round();
    if (j0 * h - y0).abs() > 1e-9 * (1.0 + y0.abs()) {
        return Err(Error::Argument(format!("y0 = {y0} is not a point of the y grid (spacing {h})")));
    }
    let j0 = j0 as i64;
    let [lo, hi] = rho_window;
    let tol = 1e-9 * hi.abs().max(1.0);
    let pts: Vec<(f64, f64, f64)> = records
        .iter()
        .filter(|r| r.rho >= lo - tol && r.rho <= hi + tol)
        .filter_map(|r| r.index_of(j0).map(|i| (r.rho.ln(), r.theta[i], r.modulus[i])))
        .collect();
    if pts.len() < MIN_FIT_RECORDS {
        return Err(Error::Argument(format!(
            "phase fit at y0 = {y0} needs {MIN_FIT_RECORDS} records in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    if pts.iter().any(|p| p.2 < DEGENERATE_MODULUS) {
        return Err(Error::DegenerateModulus { y: y0 });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Argument("degenerate fit window: all rho equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let a0 = profile
        .a_at(y0)
        .ok_or_else(|| Error::Argument(format!("profile has no value at y0 = {y0}")))?;
    let span = pts.last().unwrap().0 - pts[0].0;
    Ok(PhaseFit {
        y0,
        rho_window,
        slope,
        intercept,
        residual_rms: (rss / m).sqrt(),
        predicted: 0.375 * beta * a0 * a0,
        n_records: pts.len(),
        total_change: slope.abs() * span,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLemmaReport {
    /// `min (2·forcing + slack − lhs)` over pairs and `y`; negative means violated.
    pub worst_margin: f64,
    pub worst_rho: f64,
    pub pairs_checked: usize,
    pub holds: bool,
}

/// Compares `|Δ|V₊||/Δρ + |Δ(V₊e^{−iG})|/Δρ` between consecutive records
/// with `2·max(F_k, F_{k+1})`, where `forcing_bounds[k]` bounds the forcing
/// on record `k`.
pub fn phase_lemma_check(
    records: &[AsymptoticRecord],
    forcing_bounds: &[f64],
    slack: f64,
) -> Result<PhaseLemmaReport> {
    if forcing_bounds.len() != records.len() {
        return Err(Error::Argument("one forcing bound per record is required".into()));
    }
    check_order(records.iter().map(|r| r.rho))?;
    let mut report = PhaseLemmaReport {
        worst_margin: f64::INFINITY,
        worst_rho: f64::NAN,
        pairs_checked: 0,
        holds: true,
    };
    for k in 1..records.len() {
        let (a, b) = (&records[k - 1], &records[k]);
        let drho = b.rho - a.rho;
        let bound = 2.0 * forcing_bounds[k - 1].max(forcing_bounds[k]) + slack;
        let common = a.half_count().min(b.half_count()) as i64;
        for j in -common..=common {
            let (ia, ib) = (a.index_of(j).unwrap(), b.index_of(j).unwrap());
            let lhs = ((b.modulus[ib] - a.modulus[ia]).abs() + (b.w(ib) - a.w(ia)).norm()) / drho;
            let margin = bound - lhs;
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_rho = b.rho;
            }
        }
        report.pairs_checked += 1;
    }
    report.holds = report.worst_margin >= 0.0;
    if report.pairs_checked == 0 {
        report.worst_margin = 0.0;
    }
    Ok(report)
}
