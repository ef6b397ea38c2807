//! The scalar model `g̈ + (1 + αρ^{−1/2}g + βρ^{−1}g² + 1/(4ρ²))g = F(ρ)` and its
//! Lyapunov functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per unit `ρ`, the increase of `M` tolerated beyond `|F|`.
pub const M_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    /// `c·ρ^{−p}`
    Power { c: f64, p: f64 },
    /// Piecewise linear through the given points, zero outside them.
    Tabulated { rho: Vec<f64>, value: Vec<f64> },
}

impl Forcing {
    pub fn tabulated(rho: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if rho.len() != value.len() || rho.len() < 2 {
            return Err(Error::Argument("tabulated forcing needs two or more (rho, F) pairs".into()));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("tabulated forcing abscissae must increase".into()));
        }
        Ok(Forcing::Tabulated { rho, value })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Power { c, p } => c * rho.powf(-p),
            Forcing::Tabulated { rho: xs, value } => {
                if rho < xs[0] || rho > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&x| x <= rho).clamp(1, xs.len() - 1);
                let s = (rho - xs[k - 1]) / (xs[k] - xs[k - 1]);
                value[k - 1] + s * (value[k] - value[k - 1])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeParams {
    pub alpha: f64,
    pub beta: f64,
    pub forcing: Forcing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub rho: f64,
    pub g: f64,
    pub gdot: f64,
}

fn accel(params: &OdeParams, rho: f64, g: f64) -> f64 {
    let coeff = 1.0 + params.alpha * rho.powf(-0.5) * g + params.beta / rho * g * g + 0.25 / (rho * rho);
    params.forcing.eval(rho) - coeff * g
}

/// One classical Runge–Kutta step of size `h`.
pub fn ode_step(state: OdeState, params: &OdeParams, h: f64) -> Result<OdeState> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("step size h = {h} must be positive")));
    }
    let OdeState { rho, g, gdot } = state;
    let (k1g, k1v) = (gdot, accel(params, rho, g));
    let (k2g, k2v) = (gdot + 0.5 * h * k1v, accel(params, rho + 0.5 * h, g + 0.5 * h * k1g));
    let (k3g, k3v) = (gdot + 0.5 * h * k2v, accel(params, rho + 0.5 * h, g + 0.5 * h * k2g));
    let (k4g, k4v) = (gdot + h * k3v, accel(params, rho + h, g + h * k3g));
    let next = OdeState {
        rho: rho + h,
        g: g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g),
        gdot: gdot + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    };
    if !(next.g.is_finite() && next.gdot.is_finite()) {
        return Err(Error::BlowUp {
            step: 0,
            t: rho,
            checkpoint: None,
        });
    }
    Ok(next)
}

/// `M = (ġ² + g² + (2α/3)ρ^{−1/2}g³ + (β/2ρ)g⁴ + g²/(4ρ²))^{1/2}`.
pub fn m_functional(state: &OdeState, params: &OdeParams) -> Result<f64> {
    let OdeState { rho, g, gdot } = *state;
    let radicand = gdot * gdot
        + g * g
        + 2.0 * params.alpha / 3.0 * rho.powf(-0.5) * g.powi(3)
        + params.beta / (2.0 * rho) * g.powi(4)
        + g * g / (4.0 * rho * rho);
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "M is undefined at rho = {rho}, g = {g}, gdot = {gdot}: radicand {radicand} < 0"
        )));
    }
    Ok(radicand.sqrt())
}

/// Step size used at `ρ`: geometric growth from `h0` at `ρ = 1`, capped at `h_max`.
pub fn step_size(rho: f64, h0: f64, h_max: f64) -> f64 {
    (h0 * rho).min(h_max)
}

/// Integrates from `initial` to `rho_end`; the trajectory includes both ends.
pub fn integrate(initial: OdeState, params: &OdeParams, rho_end: f64, h0: f64, h_max: f64) -> Result<Vec<OdeState>> {
    if !(rho_end >= initial.rho) {
        return Err(Error::Argument(format!("rho_end = {rho_end} precedes the start {}", initial.rho)));
    }
    if !(h0 > 0.0 && h_max > 0.0) {
        return Err(Error::Argument("step sizes must be positive".into()));
    }
    let mut out = vec![initial];
    let mut s = initial;
    let mut step = 0u64;
    while s.rho < rho_end {
        let mut h = step_size(s.rho, h0, h_max);
        if s.rho + h > rho_end || rho_end - (s.rho + h) < 1e-9 * h {
            h = rho_end - s.rho;
        }
        s = ode_step(s, params, h).map_err(|e| match e {
            Error::BlowUp { t, .. } => Error::BlowUp { step, t, checkpoint: None },
            other => other,
        })?;
        if s.rho > rho_end - 1e-12 * rho_end {
            s.rho = rho_end;
        }
        out.push(s);
        step += 1;
    }
    Ok(out)
}

/// Warning text when the `α ≠ 0` branch starts from data that is not small.
pub fn smallness_warning(initial: &OdeState, params: &OdeParams) -> Option<String> {
    if params.alpha == 0.0 {
        return None;
    }
    match m_functional(initial, params) {
        Ok(m) if m < 0.1 => None,
        Ok(m) => Some(format!("alpha != 0 and M = {m:.3e} >= 0.1 at the start: the bound is not guaranteed")),
        Err(e) => Some(format!("alpha != 0 and {e}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdeRow {
    pub rho: f64,
    pub g: f64,
    pub gdot: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma21Report {
    pub worst_ratio: f64,
    pub bound_holds: bool,
    /// `max (ΔM/h − max|F|)` over steps; at most [`M_TOLERANCE`] when `M` behaves.
    pub worst_m_excess: f64,
    pub m_ok: bool,
    pub forcing_integral: f64,
    pub steps: usize,
}

/// Both sides of `|ġ| + |g| ≤ 2(|ġ(1)| + |g(1)| + |g(1)|² + ∫|F|)` and `M` along a trajectory.
pub fn lemma21_rows(trajectory: &[OdeState], params: &OdeParams) -> Result<Vec<OdeRow>> {
    let Some(first) = trajectory.first() else {
        return Ok(Vec::new());
    };
    let base = first.gdot.abs() + first.g.abs() + first.g * first.g;
    let mut integral = 0.0;
    let mut rows = Vec::with_capacity(trajectory.len());
    for (k, s) in trajectory.iter().enumerate() {
        if k > 0 {
            let p = &trajectory[k - 1];
            integral += 0.5 * (s.rho - p.rho) * (params.forcing.eval(p.rho).abs() + params.forcing.eval(s.rho).abs());
        }
        rows.push(OdeRow {
            rho: s.rho,
            g: s.g,
            gdot: s.gdot,
            m: m_functional(s, params)?,
            lhs: s.gdot.abs() + s.g.abs(),
            rhs: 2.0 * (base + integral),
        });
    }
    Ok(rows)
}

pub fn lemma21_check(trajectory: &[OdeState], params: &OdeParams) -> Result<Lemma21Report> {
    let rows = lemma21_rows(trajectory, params)?;
    let mut rep = Lemma21Report {
        worst_ratio: 0.0,
        bound_holds: true,
        worst_m_excess: f64::NEG_INFINITY,
        m_ok: true,
        forcing_integral: rows.last().map_or(0.0, |r| r.rhs / 2.0)
            - trajectory.first().map_or(0.0, |s| s.gdot.abs() + s.g.abs() + s.g * s.g),
        steps: rows.len().saturating_sub(1),
    };
    for (k, r) in rows.iter().enumerate() {
        let ratio = if r.rhs > 0.0 {
            r.lhs / r.rhs
        } else if r.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        rep.worst_ratio = rep.worst_ratio.max(ratio);
        if k > 0 {
            let p = &rows[k - 1];
            let h = r.rho - p.rho;
            let f = params.forcing.eval(p.rho).abs().max(params.forcing.eval(r.rho).abs());
            rep.worst_m_excess = rep.worst_m_excess.max((r.m - p.m) / h - f);
        }
    }
    if rep.steps == 0 {
        rep.worst_m_excess = 0.0;
    }
    rep.bound_holds = rep.worst_ratio <= 1.0;
    rep.m_ok = rep.worst_m_excess <= M_TOLERANCE;
    Ok(rep)
}
