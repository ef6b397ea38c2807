//! Split-step evolution of `□v + v = −βv³` on the periodic grid.
//!
//! The linear part is propagated exactly mode by mode; the cubic term is a
//! pointwise kick on `∂ₜv`. Strang composition gives a time-reversible,
//! second-order scheme whose only phase error comes from the splitting.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{spectral_energy, CauchyState, Grid, TimeWindow};

/// States with `|v|` above this are treated as blown up.
pub const BLOWUP_AMPLITUDE: f64 = 1e3;

/// Dispersion tables and FFT buffers for one grid and one time step.
pub struct SpectralWorkspace {
    grid: Grid,
    dt: f64,
    k: Vec<f64>,
    omega: Vec<f64>,
    /// Propagator acting on the packed transform `Z = FFT(v + i w)`:
    /// `Z'_j = a_j Z_j + b_j conj(Z_{−j})`.
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    buf: Vec<Complex64>,
    dbuf: Vec<Complex64>,
    half: Vec<Complex64>,
    scratch: Vec<Complex64>,
    c2r_scratch: Vec<Complex64>,
}

impl SpectralWorkspace {
    pub fn new(grid: Grid, dt: f64) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let c2r = RealFftPlanner::new().plan_fft_inverse(n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let k: Vec<f64> = (0..n).map(|j| grid.wavenumber(j)).collect();
        let omega: Vec<f64> = k.iter().map(|k| (1.0 + k * k).sqrt()).collect();
        let mut ws = SpectralWorkspace {
            grid,
            dt: f64::NAN,
            k,
            omega,
            a: vec![Complex64::default(); n],
            b: vec![Complex64::default(); n],
            fft,
            ifft,
            half: c2r.make_input_vec(),
            c2r_scratch: c2r.make_scratch_vec(),
            c2r,
            buf: vec![Complex64::default(); n],
            dbuf: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        };
        ws.set_dt(dt);
        ws
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Regenerates the propagator tables when `dt` changes.
    pub fn set_dt(&mut self, dt: f64) {
        if dt == self.dt {
            return;
        }
        self.dt = dt;
        for j in 0..self.grid.n {
            let w = self.omega[j];
            let (s, c) = (w * dt).sin_cos();
            let (so, mos) = (s / w, -w * s);
            self.a[j] = Complex64::new(c, 0.5 * (mos - so));
            self.b[j] = Complex64::new(0.0, 0.5 * (mos + so));
        }
    }

    fn check(&self, state: &CauchyState) -> Result<()> {
        if state.v.len() != self.grid.n || state.w.len() != self.grid.n {
            return Err(Error::Internal(format!(
                "workspace built for N = {} but state has {} / {} samples",
                self.grid.n,
                state.v.len(),
                state.w.len()
            )));
        }
        Ok(())
    }

    /// Exact free Klein–Gordon flow over `dt` between two kicks
    /// `w ← w − kick·v³`, optionally returning `∂ₓv` of the result in `vx`.
    /// Returns the largest `|v|` afterwards, or NaN if any sample of `v` or
    /// `w` is not finite.
    fn flow(&mut self, state: &mut CauchyState, vx: Option<&mut Vec<f64>>, kick: f64) -> Result<f64> {
        self.check(state)?;
        let n = self.grid.n;
        for (z, (&v, &w)) in self.buf.iter_mut().zip(state.v.iter().zip(&state.w)) {
            *z = Complex64::new(v, w - kick * v * v * v);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);

        // The multipliers are even in k, so each (j, −j) pair mixes only
        // with itself; both members are updated from the old values.
        let (buf, a, b) = (&mut self.buf[..], &self.a[..], &self.b[..]);
        for j in [0, n / 2] {
            let z = buf[j];
            buf[j] = a[j] * z + b[j] * z.conj();
        }
        for j in 1..n / 2 {
            let (zj, zm) = (buf[j], buf[n - j]);
            buf[j] = a[j] * zj + b[j] * zm.conj();
            buf[n - j] = a[j] * zm + b[j] * zj.conj();
        }

        if let Some(vx) = vx {
            // v̂_j = (Z_j + conj Z_{−j})/2; derivative symbol i k, zero at Nyquist.
            self.half[0] = Complex64::default();
            self.half[n / 2] = Complex64::default();
            for j in 1..n / 2 {
                let vh = (buf[j] + buf[n - j].conj()) * 0.5;
                self.half[j] = Complex64::new(-vh.im, vh.re) * self.k[j];
            }
            vx.resize(n, 0.0);
            self.c2r
                .process_with_scratch(&mut self.half, vx, &mut self.c2r_scratch)
                .map_err(|e| Error::Internal(format!("inverse real FFT: {e}")))?;
            let inv = 1.0 / n as f64;
            vx.iter_mut().for_each(|x| *x *= inv);
        }

        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv = 1.0 / n as f64;
        let (mut peak, mut sum) = (0.0f64, 0.0f64);
        for (z, (v, w)) in self.buf.iter().zip(state.v.iter_mut().zip(state.w.iter_mut())) {
            *v = z.re * inv;
            *w = z.im * inv - kick * *v * *v * *v;
            peak = peak.max(v.abs());
            sum += *v * 0.0 + *w * 0.0;
        }
        Ok(if sum == 0.0 { peak } else { f64::NAN })
    }

    /// Spectral `∂ₓv`.
    pub fn derivative(&mut self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        for (z, &x) in self.dbuf.iter_mut().zip(v) {
            *z = Complex64::new(x, 0.0);
        }
        self.fft.process_with_scratch(&mut self.dbuf, &mut self.scratch);
        for j in 0..n {
            let k = if 2 * j == n { 0.0 } else { self.k[j] };
            self.dbuf[j] *= Complex64::new(0.0, k);
        }
        self.ifft.process_with_scratch(&mut self.dbuf, &mut self.scratch);
        let inv = 1.0 / n as f64;
        self.dbuf.iter().map(|z| z.re * inv).collect()
    }

    /// Same quantity as [`crate::grid::flat_energy`], reusing this workspace's plans.
    pub fn flat_energy(&mut self, state: &CauchyState, beta: f64) -> f64 {
        for (z, (&v, &w)) in self.dbuf.iter_mut().zip(state.v.iter().zip(&state.w)) {
            *z = Complex64::new(v, w);
        }
        self.fft.process_with_scratch(&mut self.dbuf, &mut self.scratch);
        spectral_energy(&self.dbuf, &state.v, &self.grid, beta)
    }
}

/// Exact free flow over the workspace's `dt`: per mode
/// `v̂ ← cos(ωdt)v̂ + sin(ωdt)/ω ŵ`, `ŵ ← −ω sin(ωdt)v̂ + cos(ωdt)ŵ`.
pub fn linear_flow(state: &mut CauchyState, workspace: &mut SpectralWorkspace) -> Result<()> {
    workspace.flow(state, None, 0.0)?;
    state.t += workspace.dt;
    Ok(())
}

/// `w ← w − dt·β·v³`; `v` is unchanged.
pub fn nonlinear_kick(state: &mut CauchyState, dt: f64, beta: f64) {
    if beta == 0.0 {
        return;
    }
    let c = dt * beta;
    for (w, &v) in state.w.iter_mut().zip(&state.v) {
        *w -= c * v * v * v;
    }
}

/// `kick(dt/2) ∘ flow(dt) ∘ kick(dt/2)`. Fills `vx` with `∂ₓv` of the new
/// state when given. `step` is only used to label a blow-up.
pub fn strang_step(
    state: &mut CauchyState,
    beta: f64,
    workspace: &mut SpectralWorkspace,
    vx: Option<&mut Vec<f64>>,
    step: u64,
) -> Result<()> {
    let dt = workspace.dt;
    let peak = workspace.flow(state, vx, 0.5 * dt * beta)?;
    state.t += dt;
    if !(peak <= BLOWUP_AMPLITUDE) {
        return Err(Error::BlowUp {
            step,
            t: state.t,
            checkpoint: None,
        });
    }
    Ok(())
}

/// Receives every accepted time step.
pub trait Observer {
    fn on_step(&mut self, window: &TimeWindow) -> Result<()>;

    /// Called once after the last step of a run.
    fn finish(&mut self, _window: &TimeWindow) -> Result<()> {
        Ok(())
    }
}

/// A run in progress: state, step counter and interpolation window.
pub struct Evolution {
    state: CauchyState,
    step: u64,
    t0: f64,
    beta: f64,
    workspace: SpectralWorkspace,
    window: TimeWindow,
    with_derivative: bool,
    vx: Vec<f64>,
}

impl Evolution {
    /// Starts at `state.t` (step 0). With `with_derivative` every window level
    /// carries spectral `∂ₓv`, which costs one extra inverse transform per step.
    pub fn new(state: CauchyState, grid: Grid, dt: f64, beta: f64, with_derivative: bool) -> Result<Self> {
        let mut workspace = SpectralWorkspace::new(grid, dt);
        workspace.check(&state)?;
        let vx = if with_derivative {
            workspace.derivative(&state.v)
        } else {
            Vec::new()
        };
        let mut window = TimeWindow::new();
        window.push(0, state.t, &state.v, &state.w, &vx)?;
        Ok(Evolution {
            t0: state.t,
            state,
            step: 0,
            beta,
            workspace,
            window,
            with_derivative,
            vx,
        })
    }

    /// Rebuilds a run from a saved window (oldest level first). The newest
    /// level becomes the current state.
    pub fn resume(window: TimeWindow, t0: f64, grid: Grid, dt: f64, beta: f64, with_derivative: bool) -> Result<Self> {
        let newest = window
            .newest()
            .ok_or_else(|| Error::Checkpoint("empty time window".into()))?
            .clone();
        let state = CauchyState {
            t: newest.t,
            v: newest.v,
            w: newest.w,
        };
        let workspace = SpectralWorkspace::new(grid, dt);
        workspace.check(&state)?;
        if with_derivative && newest.vx.len() != grid.n {
            return Err(Error::Checkpoint("saved window lacks spatial derivatives".into()));
        }
        Ok(Evolution {
            state,
            step: newest.step,
            t0,
            beta,
            workspace,
            window,
            with_derivative,
            vx: newest.vx,
        })
    }

    pub fn state(&self) -> &CauchyState {
        &self.state
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn grid(&self) -> &Grid {
        &self.workspace.grid
    }

    pub fn dt(&self) -> f64 {
        self.workspace.dt
    }

    pub fn workspace_mut(&mut self) -> &mut SpectralWorkspace {
        &mut self.workspace
    }

    pub fn flat_energy(&mut self) -> f64 {
        let beta = self.beta;
        self.workspace.flat_energy(&self.state, beta)
    }

    /// Number of steps from the current time to `t_target`.
    pub fn steps_to(&self, t_target: f64) -> Result<u64> {
        let dt = self.workspace.dt;
        let span = t_target - self.state.t;
        let n = (span / dt).round();
        if n < 0.0 || (n * dt - span).abs() > 1e-9 * t_target.abs().max(1.0) {
            return Err(Error::Argument(format!(
                "cannot reach t = {t_target} from t = {} in whole steps of {dt}",
                self.state.t
            )));
        }
        Ok(n as u64)
    }

    /// Steps until `t_target`, notifying each observer after every step.
    pub fn evolve(&mut self, t_target: f64, observers: &mut [&mut dyn Observer]) -> Result<()> {
        let n = self.steps_to(t_target)?;
        self.advance(n, observers)
    }

    pub fn advance(&mut self, n: u64, observers: &mut [&mut dyn Observer]) -> Result<()> {
        for _ in 0..n {
            let next = self.step + 1;
            let vx = self.with_derivative.then_some(&mut self.vx);
            strang_step(&mut self.state, self.beta, &mut self.workspace, vx, next)?;
            self.step = next;
            // Times are recomputed from the step count so they never drift.
            self.state.t = self.t0 + next as f64 * self.workspace.dt;
            self.window
                .push(next, self.state.t, &self.state.v, &self.state.w, &self.vx)?;
            for obs in observers.iter_mut() {
                obs.on_step(&self.window).map_err(|e| Error::Observer {
                    step: next,
                    source: Box::new(e),
                })?;
            }
        }
        Ok(())
    }

    pub fn finish(&mut self, observers: &mut [&mut dyn Observer]) -> Result<()> {
        for obs in observers.iter_mut() {
            obs.finish(&self.window).map_err(|e| Error::Observer {
                step: self.step,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;
    use crate::grid::make_initial_data;

    fn bump_state(grid: Grid, eps: f64) -> CauchyState {
        let d = make_initial_data(&Profile::Bump { c0: 1.0, c1: 0.5 }, eps, grid).unwrap();
        CauchyState::from_data(&d, 2.0)
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(256, 12.8);
        let mut ws = SpectralWorkspace::new(g, 0.02);
        let mut s = CauchyState::zeros(g.n, 2.0);
        linear_flow(&mut s, &mut ws).unwrap();
        assert!(s.v.iter().chain(&s.w).all(|&x| x == 0.0));
    }

    #[test]
    fn constant_mode_rotates_at_unit_frequency() {
        let g = Grid::new(64, 3.2);
        let mut ws = SpectralWorkspace::new(g, std::f64::consts::FRAC_PI_2);
        let mut s = CauchyState {
            t: 0.0,
            v: vec![1.0; g.n],
            w: vec![0.0; g.n],
        };
        linear_flow(&mut s, &mut ws).unwrap();
        assert!(s.v.iter().all(|v| v.abs() < 1e-14));
        assert!(s.w.iter().all(|w| (w + 1.0).abs() < 1e-14));
    }

    #[test]
    fn linear_flow_is_reversible() {
        let g = Grid::new(1024, 25.6);
        let s0 = bump_state(g, 1.0);
        let mut s = s0.clone();
        let mut ws = SpectralWorkspace::new(g, 0.37);
        linear_flow(&mut s, &mut ws).unwrap();
        ws.set_dt(-0.37);
        linear_flow(&mut s, &mut ws).unwrap();
        assert!(max_diff(&s.v, &s0.v) < 1e-12);
        assert!(max_diff(&s.w, &s0.w) < 1e-12);
    }

    #[test]
    fn mismatched_workspace_is_an_internal_error() {
        let mut ws = SpectralWorkspace::new(Grid::new(64, 3.2), 0.01);
        let mut s = CauchyState::zeros(32, 0.0);
        assert!(matches!(linear_flow(&mut s, &mut ws), Err(Error::Internal(_))));
    }

    #[test]
    fn kick_arithmetic() {
        let mut s = CauchyState {
            t: 0.0,
            v: vec![2.0, -1.0],
            w: vec![0.0, 1.0],
        };
        let before = s.clone();
        nonlinear_kick(&mut s, 0.1, 0.0);
        assert_eq!(s, before);
        nonlinear_kick(&mut s, 0.1, 1.0);
        assert!((s.w[0] + 0.8).abs() < 1e-15);
        let mut s = CauchyState {
            t: 0.0,
            v: vec![-1.0],
            w: vec![1.0],
        };
        nonlinear_kick(&mut s, 0.5, 2.0);
        assert_eq!(s.w[0], 2.0);
        assert_eq!(s.v[0], -1.0);
    }

    #[test]
    fn strang_reduces_to_linear_flow_without_coupling() {
        let g = Grid::new(512, 12.8);
        let mut a = bump_state(g, 0.5);
        let mut b = a.clone();
        let mut ws = SpectralWorkspace::new(g, 0.02);
        strang_step(&mut a, 0.0, &mut ws, None, 1).unwrap();
        linear_flow(&mut b, &mut ws).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strang_step_is_reversible() {
        let g = Grid::new(1024, 25.6);
        let s0 = bump_state(g, 0.5);
        let mut s = s0.clone();
        let mut ws = SpectralWorkspace::new(g, 0.02);
        for i in 0..50 {
            strang_step(&mut s, 1.0, &mut ws, None, i).unwrap();
        }
        ws.set_dt(-0.02);
        for i in 0..50 {
            strang_step(&mut s, 1.0, &mut ws, None, i).unwrap();
        }
        let scale = s0.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max_diff(&s.v, &s0.v) < 1e-10 * scale);
        assert!(max_diff(&s.w, &s0.w) < 1e-10 * scale);
    }

    #[test]
    fn derivative_of_a_sine() {
        let g = Grid::new(128, std::f64::consts::PI * 2.0);
        let mut ws = SpectralWorkspace::new(g, 0.1);
        let v: Vec<f64> = g.nodes().map(|x| (3.0 * x / 2.0).sin()).collect();
        let d = ws.derivative(&v);
        for (x, dv) in g.nodes().zip(&d) {
            assert!((dv - 1.5 * (1.5 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn blow_up_is_detected() {
        let g = Grid::new(64, 3.2);
        let mut ws = SpectralWorkspace::new(g, 0.01);
        let mut s = CauchyState {
            t: 0.0,
            v: vec![2e3; g.n],
            w: vec![0.0; g.n],
        };
        let err = strang_step(&mut s, 0.0, &mut ws, None, 7).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 7, .. }));
        let mut s = CauchyState {
            t: 0.0,
            v: vec![f64::NAN; g.n],
            w: vec![0.0; g.n],
        };
        assert!(strang_step(&mut s, 1.0, &mut ws, None, 1).is_err());
    }

    struct Counter(usize);
    impl Observer for Counter {
        fn on_step(&mut self, _w: &TimeWindow) -> Result<()> {
            self.0 += 1;
            Ok(())
        }
    }

    struct Failing;
    impl Observer for Failing {
        fn on_step(&mut self, _w: &TimeWindow) -> Result<()> {
            Err(Error::State("disk full".into()))
        }
    }

    #[test]
    fn evolve_notifies_once_per_step() {
        let g = Grid::new(128, 6.4);
        let mut ev = Evolution::new(bump_state(g, 0.1), g, 0.02, 1.0, true).unwrap();
        let mut c = Counter(0);
        ev.evolve(2.0, &mut [&mut c]).unwrap();
        assert_eq!(c.0, 0);
        ev.evolve(2.04, &mut [&mut c]).unwrap();
        assert_eq!(c.0, 2);
        assert_eq!(ev.step(), 2);
        assert!(ev.evolve(2.05, &mut [&mut c]).is_err());
        assert!(ev.evolve(1.0, &mut [&mut c]).is_err());
        let mut f = Failing;
        match ev.evolve(2.06, &mut [&mut f]) {
            Err(Error::Observer { step: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
