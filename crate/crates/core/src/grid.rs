//! Cartesian grid, initial data, the evolving Cauchy state and the short
//! history window used for space-time interpolation.

use std::collections::VecDeque;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::config::{Profile, SimConfig};
use crate::error::{Error, Result};

/// Uniform periodic grid `x_j = −L + j·dx`, `j = 0..N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub half_length: f64,
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Self {
        Grid { n, half_length }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Grid::new(cfg.n_points, cfg.half_length)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    /// Angular wavenumber of FFT bin `j`; the Nyquist bin gets `−π/dx`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        std::f64::consts::PI * m as f64 / self.half_length
    }
}

/// `(ε u0, ε u1)` sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub grid: Grid,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
}

pub fn make_initial_data(profile: &Profile, epsilon: f64, grid: Grid) -> Result<InitialData> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!("epsilon = {epsilon} must be finite and >= 0")));
    }
    let (u0, u1) = grid
        .nodes()
        .map(|x| {
            if x.abs() >= 1.0 {
                return (0.0, 0.0);
            }
            let (a, b) = profile.eval(x);
            (epsilon * a, epsilon * b)
        })
        .unzip();
    Ok(InitialData { grid, u0, u1 })
}

/// Field `v` and its time derivative `w = ∂ₜv` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyState {
    pub t: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl CauchyState {
    pub fn from_data(data: &InitialData, t: f64) -> Self {
        CauchyState {
            t,
            v: data.u0.clone(),
            w: data.u1.clone(),
        }
    }

    pub fn zeros(n: usize, t: f64) -> Self {
        CauchyState {
            t,
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.w).all(|x| x.is_finite())
    }

    /// Largest `|v|` or `|w|` on nodes with `|x| > t − 1 + 2dx`.
    ///
    /// The exact solution vanishes there; what remains is spectral leakage
    /// from the finite resolution of the initial bump.
    pub fn light_cone_leakage(&self, grid: &Grid) -> f64 {
        let edge = self.t - 1.0 + 2.0 * grid.dx();
        grid.nodes()
            .zip(self.v.iter().zip(&self.w))
            .filter(|(x, _)| x.abs() > edge)
            .map(|(_, (v, w))| v.abs().max(w.abs()))
            .fold(0.0, f64::max)
    }

    pub fn reflected(&self) -> Self {
        // x_j -> -x_j maps node j to N - j (node 0 is its own image mod N).
        let n = self.v.len();
        let idx = |j: usize| (n - j) % n;
        CauchyState {
            t: self.t,
            v: (0..n).map(|j| self.v[idx(j)]).collect(),
            w: (0..n).map(|j| self.w[idx(j)]).collect(),
        }
    }
}

/// Conserved energy `∫ ½(w² + vₓ² + v²) + (β/4)v⁴ dx` of the periodic problem.
///
/// The gradient term is evaluated in Fourier space (Parseval) with `k²` on
/// every bin, Nyquist included, so the exact linear flow conserves this
/// quantity to rounding.
pub fn flat_energy(state: &CauchyState, grid: &Grid, beta: f64) -> f64 {
    let n = grid.n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = state
        .v
        .iter()
        .zip(&state.w)
        .map(|(&v, &w)| Complex64::new(v, w))
        .collect();
    fft.process(&mut buf);
    spectral_energy(&buf, &state.v, grid, beta)
}

/// Energy from the packed transform `Z = FFT(v + i w)` and the physical `v`.
pub(crate) fn spectral_energy(z: &[Complex64], v: &[f64], grid: &Grid, beta: f64) -> f64 {
    let n = grid.n;
    let dx = grid.dx();
    let mut quad = 0.0;
    for j in 0..n {
        let jm = (n - j) % n;
        let vh = (z[j] + z[jm].conj()) * 0.5;
        let wh = (z[j] - z[jm].conj()) * Complex64::new(0.0, -0.5);
        let k = grid.wavenumber(j);
        quad += wh.norm_sqr() + (1.0 + k * k) * vh.norm_sqr();
    }
    let quartic: f64 = v.iter().map(|v| v.powi(4)).sum();
    0.5 * quad * dx / n as f64 + 0.25 * beta * quartic * dx
}

/// One time level kept for interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub step: u64,
    pub t: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Spectral `∂ₓv`; empty when the solver was not asked for it.
    pub vx: Vec<f64>,
}

/// Ring buffer of the most recent time levels, oldest first.
#[derive(Clone, Debug, Default)]
pub struct TimeWindow {
    levels: VecDeque<Level>,
}

impl TimeWindow {
    pub const DEPTH: usize = 4;

    pub fn new() -> Self {
        TimeWindow {
            levels: VecDeque::with_capacity(Self::DEPTH),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.levels.len() == Self::DEPTH
    }

    pub fn level(&self, i: usize) -> &Level {
        &self.levels[i]
    }

    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter()
    }

    pub fn newest(&self) -> Option<&Level> {
        self.levels.back()
    }

    /// Appends a level, recycling the oldest allocation once full.
    pub fn push(&mut self, step: u64, t: f64, v: &[f64], w: &[f64], vx: &[f64]) -> Result<()> {
        if let Some(last) = self.levels.back() {
            if step != last.step + 1 || !(t > last.t) {
                return Err(Error::State(format!(
                    "time window levels must be consecutive: step {} then {step}",
                    last.step
                )));
            }
        }
        let mut level = if self.levels.len() == Self::DEPTH {
            self.levels.pop_front().unwrap()
        } else {
            Level {
                step,
                t,
                v: Vec::new(),
                w: Vec::new(),
                vx: Vec::new(),
            }
        };
        level.step = step;
        level.t = t;
        copy_into(&mut level.v, v);
        copy_into(&mut level.w, w);
        copy_into(&mut level.vx, vx);
        self.levels.push_back(level);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.levels.clear();
    }
}

fn copy_into(dst: &mut Vec<f64>, src: &[f64]) {
    dst.clear();
    dst.extend_from_slice(src);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1024, 25.6)
    }

    /// Independent reference: composite Simpson on a refined grid with
    /// finite-difference-free analytic derivative of the bump.
    fn refined_quadrature_energy(eps: f64, beta: f64, refine: usize) -> f64 {
        let g = grid();
        let h = g.dx() / refine as f64;
        let n = (2.0 / h).round() as usize; // integrate over the support [-1, 1]
        let f = |x: f64| {
            let b = crate::config::unit_bump(x);
            let db = if x.abs() < 1.0 {
                b * (-2.0 * x / (x * x - 1.0).powi(2))
            } else {
                0.0
            };
            let v = eps * b;
            let vx = eps * db;
            0.5 * (vx * vx + v * v) + 0.25 * beta * v.powi(4)
        };
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        s * h / 3.0
    }

    #[test]
    fn zero_profile_gives_zero_data() {
        let d = make_initial_data(&Profile::Zero, 0.1, grid()).unwrap();
        assert!(d.u0.iter().chain(&d.u1).all(|&x| x == 0.0));
    }

    #[test]
    fn bump_normalisation_and_support() {
        let g = grid();
        let d = make_initial_data(&Profile::Bump { c0: 1.0, c1: 0.0 }, 1.0, g).unwrap();
        assert_eq!(d.u0[g.n / 2], 1.0);
        for (x, u) in g.nodes().zip(&d.u0) {
            if x.abs() >= 1.0 {
                assert_eq!(*u, 0.0);
            }
        }
        let d = make_initial_data(&Profile::Bump { c0: 1.0, c1: 1.0 }, 0.5, g).unwrap();
        assert_eq!(d.u1[g.n / 2], 0.5);
        assert!(make_initial_data(&Profile::Zero, f64::NAN, g).is_err());
    }

    #[test]
    fn flat_energy_trivial_cases() {
        let g = grid();
        assert_eq!(flat_energy(&CauchyState::zeros(g.n, 2.0), &g, 1.0), 0.0);
        // v = 0, w = eps u1: only the kinetic term survives.
        let d = make_initial_data(&Profile::Bump { c0: 0.0, c1: 1.0 }, 0.1, g).unwrap();
        let s = CauchyState::from_data(&d, 2.0);
        let kinetic: f64 = 0.5 * d.u1.iter().map(|u| u * u).sum::<f64>() * g.dx();
        let e = flat_energy(&s, &g, 1.0);
        assert!((e - kinetic).abs() < 1e-14 * kinetic.max(1.0), "{e} vs {kinetic}");
    }

    #[test]
    fn flat_energy_matches_refined_quadrature() {
        let g = grid();
        let d = make_initial_data(&Profile::Bump { c0: 1.0, c1: 0.0 }, 0.1, g).unwrap();
        let e = flat_energy(&CauchyState::from_data(&d, 2.0), &g, 1.0);
        let reference = refined_quadrature_energy(0.1, 1.0, 4);
        // Adaptive 30-digit quadrature of the same integrand (computed once, frozen).
        let frozen = 2.006_840_377_425_509_8e-2;
        assert!((reference - frozen).abs() < 1e-7 * frozen, "{reference:.16e}");
        assert!((e - reference).abs() < 1e-4 * reference, "{e} vs {reference}");
        // The bump is resolved spectrally once the grid is fine enough.
        let fine = Grid::new(8192, 25.6);
        let d = make_initial_data(&Profile::Bump { c0: 1.0, c1: 0.0 }, 0.1, fine).unwrap();
        let e = flat_energy(&CauchyState::from_data(&d, 2.0), &fine, 1.0);
        assert!((e - frozen).abs() < 1e-8 * frozen, "{e:.16e}");
    }

    #[test]
    fn flat_energy_reflection_and_scaling() {
        let g = grid();
        let d = make_initial_data(&Profile::AsymBump { c0: 1.0, c1: 0.7 }, 0.3, g).unwrap();
        let s = CauchyState::from_data(&d, 2.0);
        let e = flat_energy(&s, &g, 2.0);
        let er = flat_energy(&s.reflected(), &g, 2.0);
        assert!((e - er).abs() < 1e-13 * e);

        let d2 = make_initial_data(&Profile::AsymBump { c0: 1.0, c1: 0.7 }, 0.6, g).unwrap();
        let e1 = flat_energy(&s, &g, 0.0);
        let e2 = flat_energy(&CauchyState::from_data(&d2, 2.0), &g, 0.0);
        assert!((e2 / e1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn window_keeps_four_consecutive_levels() {
        let mut w = TimeWindow::new();
        for s in 0..6u64 {
            let t = 2.0 + s as f64 * 0.1;
            w.push(s, t, &[s as f64], &[0.0], &[]).unwrap();
        }
        assert!(w.is_full());
        let steps: Vec<u64> = w.levels().map(|l| l.step).collect();
        assert_eq!(steps, vec![2, 3, 4, 5]);
        assert_eq!(w.level(0).v, vec![2.0]);
        assert!(w.push(9, 10.0, &[0.0], &[0.0], &[]).is_err());
    }
}
