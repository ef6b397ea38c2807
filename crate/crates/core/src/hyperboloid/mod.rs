//! Sampling on the hyperboloids `H_ρ = {t² − x² = ρ²}` and the quantities
//! measured there.
//!
//! In the coordinates `t = ρ cosh y`, `x = ρ sinh y` the compactly supported
//! solution lives in `|y| ≤ ln ρ` on `H_ρ`. A slice stores the rescaled
//! field `V = ρ^{1/2} v` together with `∂ρV`, `∂yV` and the raw Cartesian
//! samples `u, uₜ, uₓ` at each point of a uniform y-grid.

mod collect;
mod norms;

pub use collect::{interpolate_window, Collector, WindowSample};
pub use norms::{
    energy_density, energy_density_split, fd_derivatives, fit_growth_exponent, hyperboloid_energy,
    interpolation_ratios, sobolev_check, weighted_norm, weighted_norm_values, EnergyReport, NormOrder,
    SobolevCheck,
};

use serde::{Deserialize, Serialize};

use crate::config::Y_MARGIN;
use crate::error::{Error, Result};

/// `(t, x) ↦ (ρ, y)` with `ρ = sqrt(t² − x²)`, `y = artanh(x/t)`.
pub fn to_hyperbolic(t: f64, x: f64) -> Result<(f64, f64)> {
    if !(t > x.abs()) {
        return Err(Error::Domain(format!(
            "(t, x) = ({t}, {x}) is not inside the forward light cone"
        )));
    }
    // (t − x)(t + x) avoids cancellation near the cone.
    let rho = ((t - x) * (t + x)).sqrt();
    let y = 0.5 * ((t + x) / (t - x)).ln();
    Ok((rho, y))
}

/// `(ρ, y) ↦ (ρ cosh y, ρ sinh y)`.
pub fn from_hyperbolic(rho: f64, y: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    Ok((rho * y.cosh(), rho * y.sinh()))
}

/// `(u_ρ, u_y) = ((t uₜ + x uₓ)/ρ, x uₜ + t uₓ)`.
pub fn hyperbolic_derivatives(rho: f64, t: f64, x: f64, ut: f64, ux: f64) -> (f64, f64) {
    ((t * ut + x * ux) / rho, x * ut + t * ux)
}

/// `(V, ∂ρV, ∂yV)` at a point of `H_ρ` from the Cartesian `u, uₜ, uₓ` there.
pub fn rescaled_sample(rho: f64, t: f64, x: f64, u: f64, ut: f64, ux: f64) -> (f64, f64, f64) {
    let sqrt_rho = rho.sqrt();
    let (u_rho, u_y) = hyperbolic_derivatives(rho, t, x, ut, ux);
    let v = sqrt_rho * u;
    let v_rho = sqrt_rho * u_rho + v / (2.0 * rho);
    let v_y = sqrt_rho * u_y;
    (v, v_rho, v_y)
}

/// The largest y-extent a slice at `rho` can have when the evolution stops at
/// `t_end`: the support bound `ln ρ + margin`, cut where `ρ cosh y = t_end`.
pub fn slice_extent(rho: f64, t_end: f64) -> (f64, bool) {
    let support = rho.ln() + Y_MARGIN;
    let reach = (t_end / rho).max(1.0).acosh();
    if support <= reach {
        (support, true)
    } else {
        (reach, false)
    }
}

/// One hyperboloid, sampled on `y_j = j·h`, `|j| ≤ half_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperboloidSlice {
    pub rho: f64,
    pub y_spacing: f64,
    pub half_count: usize,
    /// Whether the grid reaches `ln ρ + margin`, i.e. spans the whole support.
    pub cap_complete: bool,
    pub v: Vec<f64>,
    pub v_rho: Vec<f64>,
    pub v_y: Vec<f64>,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_x: Vec<f64>,
    pub fill_mask: Vec<bool>,
}

impl HyperboloidSlice {
    pub fn new(rho: f64, y_spacing: f64, y_max: f64, cap_complete: bool) -> Self {
        let half_count = (y_max / y_spacing + 1e-9).floor() as usize;
        let n = 2 * half_count + 1;
        HyperboloidSlice {
            rho,
            y_spacing,
            half_count,
            cap_complete,
            v: vec![0.0; n],
            v_rho: vec![0.0; n],
            v_y: vec![0.0; n],
            u: vec![0.0; n],
            u_t: vec![0.0; n],
            u_x: vec![0.0; n],
            fill_mask: vec![false; n],
        }
    }

    /// Slice sized for a run ending at `t_end`.
    pub fn planned(rho: f64, y_spacing: f64, t_end: f64) -> Self {
        let (y_max, complete) = slice_extent(rho, t_end);
        Self::new(rho, y_spacing, y_max, complete)
    }

    pub fn len(&self) -> usize {
        self.fill_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fill_mask.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        (i as f64 - self.half_count as f64) * self.y_spacing
    }

    pub fn y_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.y(i)).collect()
    }

    pub fn y_max(&self) -> f64 {
        self.half_count as f64 * self.y_spacing
    }

    /// Index of grid point `y = j·h`.
    pub fn index_of(&self, j: i64) -> Option<usize> {
        let i = j + self.half_count as i64;
        (0..self.len() as i64).contains(&i).then_some(i as usize)
    }

    pub fn is_complete(&self) -> bool {
        self.fill_mask.iter().all(|&f| f)
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            let missing = self.fill_mask.iter().filter(|f| !**f).count();
            Err(Error::State(format!(
                "slice at rho = {} has {missing} uncollected points",
                self.rho
            )))
        }
    }

    /// Stores the Cartesian sample at point `i` and derives the rescaled quantities.
    pub fn fill(&mut self, i: usize, u: f64, ut: f64, ux: f64) {
        let (t, x) = (self.rho * self.y(i).cosh(), self.rho * self.y(i).sinh());
        let (v, v_rho, v_y) = rescaled_sample(self.rho, t, x, u, ut, ux);
        self.u[i] = u;
        self.u_t[i] = ut;
        self.u_x[i] = ux;
        self.v[i] = v;
        self.v_rho[i] = v_rho;
        self.v_y[i] = v_y;
        self.fill_mask[i] = true;
    }

    pub fn to_record(&self) -> SliceRecord {
        SliceRecord {
            rho: self.rho,
            y_spacing: self.y_spacing,
            cap_complete: self.cap_complete,
            y_grid: self.y_grid(),
            v: self.v.clone(),
            v_rho: self.v_rho.clone(),
            v_y: self.v_y.clone(),
            u: self.u.clone(),
            u_t: self.u_t.clone(),
            u_x: self.u_x.clone(),
            fill_mask: self.fill_mask.clone(),
        }
    }

    pub fn from_record(r: SliceRecord) -> Result<Self> {
        let n = r.y_grid.len();
        if n % 2 == 0 || !(r.y_spacing > 0.0) {
            return Err(Error::Input(format!(
                "slice at rho = {}: y_grid must be symmetric with odd length",
                r.rho
            )));
        }
        let lens = [r.v.len(), r.v_rho.len(), r.v_y.len(), r.u.len(), r.u_t.len(), r.u_x.len(), r.fill_mask.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Input(format!("slice at rho = {}: array lengths differ", r.rho)));
        }
        let half_count = n / 2;
        let s = HyperboloidSlice {
            rho: r.rho,
            y_spacing: r.y_spacing,
            half_count,
            cap_complete: r.cap_complete,
            v: r.v,
            v_rho: r.v_rho,
            v_y: r.v_y,
            u: r.u,
            u_t: r.u_t,
            u_x: r.u_x,
            fill_mask: r.fill_mask,
        };
        for (i, &y) in r.y_grid.iter().enumerate() {
            if (y - s.y(i)).abs() > 1e-9 * (1.0 + y.abs()) {
                return Err(Error::Input(format!(
                    "slice at rho = {}: y_grid is not the uniform grid j*{}",
                    s.rho, s.y_spacing
                )));
            }
        }
        Ok(s)
    }
}

/// Line format of a slice in the JSONL output.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SliceRecord {
    pub rho: f64,
    pub y_spacing: f64,
    pub cap_complete: bool,
    pub y_grid: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(rename = "V_rho")]
    pub v_rho: Vec<f64>,
    #[serde(rename = "V_y")]
    pub v_y: Vec<f64>,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_x: Vec<f64>,
    pub fill_mask: Vec<bool>,
}
