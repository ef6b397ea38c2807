//! Streaming collection of hyperboloid samples while the Cauchy evolution runs.
//!
//! Every sample point `(τ, x) = (ρ cosh y, ρ sinh y)` is queued in order of
//! `τ`. Each time the solver has four consecutive levels `t₀ … t₀+3dt` the
//! points with `τ ∈ [t₀+dt, t₀+2dt)` are filled by cubic Lagrange
//! interpolation in `t` and in `x`, so interpolation always happens in the
//! central interval of the stencil. The first window also takes `[t₀, t₀+dt)`
//! and the last one flushes everything up to its final level.

use std::cmp::Ordering;

use super::HyperboloidSlice;
use crate::error::{Error, Result};
use crate::grid::{Grid, TimeWindow};
use crate::solver::Observer;

/// `(u, uₜ, uₓ)` at one space-time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSample {
    pub u: f64,
    pub ut: f64,
    pub ux: f64,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    tau: f64,
    x: f64,
    slice: usize,
    index: usize,
}

pub struct Collector {
    grid: Grid,
    slices: Vec<HyperboloidSlice>,
    pending: Vec<Pending>,
    next: usize,
}

fn cubic_weights(s: f64) -> [f64; 4] {
    [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ]
}

/// Cubic interpolation of a full four-level window at `(tau, x)`.
pub fn interpolate_window(window: &TimeWindow, grid: &Grid, tau: f64, x: f64) -> Result<WindowSample> {
    if !window.is_full() {
        return Err(Error::State("interpolation needs four time levels".into()));
    }
    let t0 = window.level(0).t;
    let dt = (window.level(3).t - t0) / 3.0;
    let tw = cubic_weights((tau - t0) / dt);

    let n = grid.n;
    let pos = (x + grid.half_length) / grid.dx();
    let base = pos.floor();
    let xw = cubic_weights(pos - base + 1.0);
    let base = base as i64 - 1;
    let mut nodes = [0usize; 4];
    for (m, node) in nodes.iter_mut().enumerate() {
        *node = (base + m as i64).rem_euclid(n as i64) as usize;
    }

    let mut out = WindowSample { u: 0.0, ut: 0.0, ux: 0.0 };
    for (i, level) in window.levels().enumerate() {
        if level.vx.len() != n || level.v.len() != n {
            return Err(Error::Internal(
                "hyperboloid collection needs levels carrying the spatial derivative".into(),
            ));
        }
        let (mut u, mut ut, mut ux) = (0.0, 0.0, 0.0);
        for (m, &j) in nodes.iter().enumerate() {
            u += xw[m] * level.v[j];
            ut += xw[m] * level.w[j];
            ux += xw[m] * level.vx[j];
        }
        out.u += tw[i] * u;
        out.ut += tw[i] * ut;
        out.ux += tw[i] * ux;
    }
    Ok(out)
}

impl Collector {
    /// Empty slices at each `rho`, sized for a run ending at `t_end`.
    pub fn new(grid: Grid, rhos: &[f64], y_spacing: f64, t_end: f64) -> Self {
        let slices = rhos
            .iter()
            .map(|&rho| HyperboloidSlice::planned(rho, y_spacing, t_end))
            .collect();
        Self::from_slices(grid, slices)
    }

    /// Continues collection into partially filled slices.
    pub fn from_slices(grid: Grid, slices: Vec<HyperboloidSlice>) -> Self {
        let mut pending = Vec::new();
        for (k, s) in slices.iter().enumerate() {
            for i in 0..s.len() {
                if !s.fill_mask[i] {
                    let y = s.y(i);
                    pending.push(Pending {
                        tau: s.rho * y.cosh(),
                        x: s.rho * y.sinh(),
                        slice: k,
                        index: i,
                    });
                }
            }
        }
        pending.sort_by(|a, b| {
            a.tau
                .total_cmp(&b.tau)
                .then(a.slice.cmp(&b.slice))
                .then(a.index.cmp(&b.index))
        });
        Collector {
            grid,
            slices,
            pending,
            next: 0,
        }
    }

    pub fn slices(&self) -> &[HyperboloidSlice] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<HyperboloidSlice> {
        self.slices
    }

    pub fn remaining(&self) -> usize {
        self.pending.len() - self.next
    }

    fn collect(&mut self, window: &TimeWindow, lo: f64, hi: f64, inclusive: bool) -> Result<()> {
        let slack = 1e-9 * hi.abs().max(1.0);
        while let Some(p) = self.pending.get(self.next).copied() {
            let before_hi = match p.tau.partial_cmp(&hi) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => inclusive,
                _ => inclusive && p.tau <= hi + slack,
            };
            if !before_hi {
                break;
            }
            if p.tau < lo - slack {
                return Err(Error::State(format!(
                    "hyperboloid point at t = {} was passed before it could be collected",
                    p.tau
                )));
            }
            let s = interpolate_window(window, &self.grid, p.tau, p.x)?;
            self.slices[p.slice].fill(p.index, s.u, s.ut, s.ux);
            self.next += 1;
        }
        Ok(())
    }
}

impl Observer for Collector {
    fn on_step(&mut self, window: &TimeWindow) -> Result<()> {
        if !window.is_full() {
            return Ok(());
        }
        let first = window.level(0);
        let lo = if first.step == 0 { first.t } else { window.level(1).t };
        let hi = window.level(2).t;
        self.collect(window, lo, hi, false)
    }

    fn finish(&mut self, window: &TimeWindow) -> Result<()> {
        if self.remaining() == 0 {
            return Ok(());
        }
        if !window.is_full() {
            return Err(Error::State(
                "evolution ended before four time levels were available".into(),
            ));
        }
        let first = window.level(0);
        let lo = if first.step == 0 { first.t } else { window.level(1).t };
        let hi = window.level(3).t;
        self.collect(window, lo, hi, true)
    }
}
