//! Exact linear evolution by Fourier synthesis and the stationary-phase profile
//! of the free solution.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::asymptotics::ProfileEstimate;
use crate::config::T_START;
use crate::error::{Error, Result};
use crate::grid::{CauchyState, InitialData};

/// The free Klein–Gordon solution at time `t` for data given at `t = 2`.
pub fn free_solution(data: &InitialData, t: f64) -> Result<CauchyState> {
    let grid = data.grid;
    let n = grid.n;
    if data.u0.len() != n || data.u1.len() != n {
        return Err(Error::Argument("initial data does not match its grid".into()));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = data.u0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut b: Vec<Complex64> = data.u1.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    let s = t - T_START;
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let k = grid.wavenumber(j);
        let om = (1.0 + k * k).sqrt();
        let (sn, cs) = (om * s).sin_cos();
        v[j] = a[j] * cs + b[j] * (sn / om);
        w[j] = -a[j] * (om * sn) + b[j] * cs;
    }
    inv.process(&mut v);
    inv.process(&mut w);
    let scale = 1.0 / n as f64;
    Ok(CauchyState {
        t,
        v: v.iter().map(|z| z.re * scale).collect(),
        w: w.iter().map(|z| z.re * scale).collect(),
    })
}

/// `û₊(ξ) = (û₀ − i(1+ξ²)^{−1/2}û₁)/2` sampled at `ξ = −sinh y`, and
/// `a_lin(y) = cosh y·|û₊(−sinh y)|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeProfile {
    pub y_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    pub u_plus_hat: Vec<Complex64>,
    pub a_lin: Vec<f64>,
}

/// `∫ f(x) e^{−ixξ} dx` by the trapezoid rule over the data grid.
fn transform(f: &[f64], nodes: &[f64], dx: f64, xi: f64) -> Complex64 {
    nodes
        .iter()
        .zip(f)
        .filter(|(_, v)| **v != 0.0)
        .map(|(&x, &v)| Complex64::from_polar(v, -x * xi))
        .sum::<Complex64>()
        * dx
}

pub fn stationary_phase_profile(data: &InitialData, y_grid: &[f64]) -> FreeProfile {
    let grid = data.grid;
    let nodes: Vec<f64> = grid.nodes().collect();
    let dx = grid.dx();
    let mut out = FreeProfile {
        y_grid: y_grid.to_vec(),
        xi_grid: Vec::with_capacity(y_grid.len()),
        u_plus_hat: Vec::with_capacity(y_grid.len()),
        a_lin: Vec::with_capacity(y_grid.len()),
    };
    for &y in y_grid {
        let xi = -y.sinh();
        let u0 = transform(&data.u0, &nodes, dx, xi);
        let u1 = transform(&data.u1, &nodes, dx, xi);
        let up = (u0 - Complex64::i() * u1 / (1.0 + xi * xi).sqrt()) * 0.5;
        out.xi_grid.push(xi);
        out.u_plus_hat.push(up);
        out.a_lin.push(y.cosh() * up.norm());
    }
    out
}

/// How well `a_meas(y) / a_lin(y)` is a constant over `|y| ≤ y_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub y_range: f64,
    /// Mean of the ratio, i.e. the fitted normalisation constant.
    pub constant: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `(max − min) / mean`.
    pub relative_variation: f64,
    pub n_points: usize,
    /// Smallest `ρ` the measured values were read from.
    pub rho: f64,
}

pub fn compare_profiles(measured: &ProfileEstimate, free: &FreeProfile, y_range: f64) -> Result<OracleComparison> {
    let mut ratios = Vec::new();
    let mut rho = f64::INFINITY;
    for (i, &y) in measured.y_grid.iter().enumerate() {
        if y.abs() > y_range + 1e-12 {
            continue;
        }
        let Some(k) = free.y_grid.iter().position(|&yy| (yy - y).abs() < 1e-9) else {
            return Err(Error::Input(format!("oracle profile has no value at y = {y}")));
        };
        if !(free.a_lin[k] > 0.0) {
            return Err(Error::Input(format!("oracle profile vanishes at y = {y}")));
        }
        ratios.push(measured.a[i] / free.a_lin[k]);
        rho = rho.min(measured.rho_source[i]);
    }
    if ratios.is_empty() {
        return Err(Error::Input(format!("no common y points within |y| <= {y_range}")));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleComparison {
        y_range,
        constant: mean,
        min_ratio: min,
        max_ratio: max,
        relative_variation: if mean != 0.0 { (max - min) / mean.abs() } else { f64::INFINITY },
        n_points: ratios.len(),
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;
    use crate::grid::{make_initial_data, Grid};
    use crate::solver::{linear_flow, SpectralWorkspace};

    fn data(profile: Profile, eps: f64) -> InitialData {
        make_initial_data(&profile, eps, Grid::new(2048, 51.2)).unwrap()
    }

    #[test]
    fn reproduces_data_at_start() {
        let d = data(Profile::AsymBump { c0: 1.0, c1: 0.6 }, 0.3);
        let s = free_solution(&d, T_START).unwrap();
        for j in 0..d.grid.n {
            assert!((s.v[j] - d.u0[j]).abs() < 1e-10);
            assert!((s.w[j] - d.u1[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn agrees_with_spectral_stepping() {
        let d = data(Profile::Bump { c0: 1.0, c1: 0.5 }, 0.1);
        let mut ws = SpectralWorkspace::new(d.grid, 0.5);
        let mut s = CauchyState::from_data(&d, T_START);
        for _ in 0..36 {
            linear_flow(&mut s, &mut ws).unwrap();
        }
        let exact = free_solution(&d, 20.0).unwrap();
        let err = s.v.iter().zip(&exact.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn even_data_stay_even() {
        let d = data(Profile::Bump { c0: 1.0, c1: -0.4 }, 0.2);
        let s = free_solution(&d, 13.0).unwrap();
        let r = s.reflected();
        for j in 0..d.grid.n {
            assert!((s.v[j] - r.v[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_symmetries() {
        let ys: Vec<f64> = (-100..=100).map(|j| j as f64 * 0.01).collect();
        let z = stationary_phase_profile(&data(Profile::Zero, 1.0), &ys);
        assert!(z.a_lin.iter().all(|a| *a == 0.0));
        let p = stationary_phase_profile(&data(Profile::Bump { c0: 1.0, c1: 0.0 }, 0.1), &ys);
        for i in 0..ys.len() {
            let k = ys.len() - 1 - i;
            assert!(p.u_plus_hat[i].im.abs() < 1e-14);
            assert!((p.a_lin[i] - p.a_lin[k]).abs() < 1e-15);
        }
        // û₊(0) = ½∫u₀ for u₁ = 0.
        let d = data(Profile::Bump { c0: 1.0, c1: 0.0 }, 0.1);
        let mass: f64 = d.u0.iter().sum::<f64>() * d.grid.dx();
        assert!((p.a_lin[100] - 0.5 * mass).abs() < 1e-15);
    }
}
