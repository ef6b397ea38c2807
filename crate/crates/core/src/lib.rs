//! Numerical laboratory for the one-dimensional cubic Klein–Gordon equation
//! `□v + v = −βv³` with small compactly supported data.
//!
//! The pipeline evolves Cauchy data from `t = 2` with a split-step spectral
//! scheme, samples the solution on hyperboloids `t² − x² = ρ²`, and measures
//! the long-range behaviour there: the half-wave amplitude `V₊`, its
//! logarithmic phase drift `(3/8)β a(y)² ln ρ`, the asymptotic profile
//! `a(y)`, hyperboloid energies and weighted norms. A model ODE with its
//! Lyapunov functional and an exact Fourier-synthesis solution of the free
//! equation serve as independent checks.

pub mod asymptotics;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod grid;
pub mod hyperboloid;
pub mod model_ode;
pub mod oracle;
pub mod output;
pub mod pipeline;
pub mod solver;
pub mod svg;

pub use config::{Profile, SimConfig};
pub use error::{Error, Result};
