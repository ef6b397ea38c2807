//! Energies and weighted Sobolev norms on a hyperboloid slice.

use serde::{Deserialize, Serialize};

use super::HyperboloidSlice;
use crate::error::{Error, Result};

/// Exponent `p` of a weighted norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormOrder {
    P(u32),
    Inf,
}

impl NormOrder {
    fn validate(self) -> Result<()> {
        match self {
            NormOrder::P(2 | 3 | 4 | 6) | NormOrder::Inf => Ok(()),
            NormOrder::P(p) => Err(Error::Argument(format!("unsupported norm exponent p = {p}"))),
        }
    }
}

/// Integrand of the hyperboloid energy in `y`:
/// `(uₜ² + uₓ² + 2 tanh y · uₜuₓ + u²) · ρ cosh y`.
pub fn energy_density(rho: f64, y: f64, u: f64, ut: f64, ux: f64) -> f64 {
    (ut * ut + ux * ux + 2.0 * y.tanh() * ut * ux + u * u) * rho * y.cosh()
}

/// The same density in hyperbolic variables:
/// `ρ cosh y (u_ρ² + u_y²/ρ² + u²) − 2 sinh y · u_ρ u_y`.
pub fn energy_density_split(rho: f64, y: f64, u: f64, u_rho: f64, u_y: f64) -> f64 {
    rho * y.cosh() * (u_rho * u_rho + u_y * u_y / (rho * rho) + u * u) - 2.0 * y.sinh() * u_rho * u_y
}

/// `E(ρ)` with `E² = ∫ density dy` by the trapezoid rule.
pub fn hyperboloid_energy(slice: &HyperboloidSlice) -> Result<f64> {
    slice.require_complete()?;
    let h = slice.y_spacing;
    let n = slice.len();
    let mut sum = 0.0;
    for i in 0..n {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        sum += w * energy_density(slice.rho, slice.y(i), slice.u[i], slice.u_t[i], slice.u_x[i]);
    }
    Ok((sum * h).sqrt())
}

/// Fornberg's weights for derivatives `0..=m` at `z` on nodes `x`.
fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

const STENCIL: usize = 7;

/// `∂ᵐ values` for `m = 0..=k` on a uniform grid of spacing `h`, by seven-point
/// finite differences (centred in the interior, shifted near the ends).
pub fn fd_derivatives(values: &[f64], h: f64, k: usize) -> Vec<Vec<f64>> {
    let n = values.len();
    let mut out = vec![values.to_vec()];
    if k == 0 {
        return out;
    }
    out.extend((0..k).map(|_| vec![0.0; n]));
    let width = STENCIL.min(n);
    if width < 2 {
        return out;
    }
    let half = width / 2;
    let nodes: Vec<f64> = (0..width).map(|q| q as f64).collect();
    let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; width];
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - width);
        let offset = i - start;
        let w = cache[offset].get_or_insert_with(|| fornberg(offset as f64, &nodes, k));
        for m in 1..=k {
            let scale = h.powi(m as i32);
            let d: f64 = (0..width).map(|q| w[m][q] * values[start + q]).sum();
            out[m][i] = d / scale;
        }
    }
    out
}

/// `‖f‖_{L^{p,k}}` with weight `e^{|y|}` over the symmetric grid `y_i = (i − J)h`.
pub fn weighted_norm_values(values: &[f64], h: f64, p: NormOrder, k: usize) -> Result<f64> {
    p.validate()?;
    if k > 3 {
        return Err(Error::Argument(format!("derivative order k = {k} exceeds 3")));
    }
    if values.len() % 2 == 0 {
        return Err(Error::Argument("weighted norms need a symmetric odd-length grid".into()));
    }
    let half = (values.len() / 2) as f64;
    let derivs = fd_derivatives(values, h, k);
    match p {
        NormOrder::Inf => Ok(derivs
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))),
        NormOrder::P(p) => {
            let n = values.len();
            let mut total = 0.0;
            for d in &derivs {
                for (i, v) in d.iter().enumerate() {
                    let y = (i as f64 - half) * h;
                    let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                    total += w * v.abs().powi(p as i32) * y.abs().exp();
                }
            }
            Ok((total * h).powf(1.0 / p as f64))
        }
    }
}

/// `‖V(ρ)‖_{L^{p,k}}` on a collected slice.
pub fn weighted_norm(slice: &HyperboloidSlice, p: NormOrder, k: usize) -> Result<f64> {
    slice.require_complete()?;
    weighted_norm_values(&slice.v, slice.y_spacing, p, k)
}

/// `sup|V|² ≤ ‖V‖_{L²}·‖∂yV‖_{L²}` with the weighted norms, using the
/// collected `∂yV`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn sobolev_check(slice: &HyperboloidSlice) -> Result<SobolevCheck> {
    slice.require_complete()?;
    let h = slice.y_spacing;
    let sup = slice.v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lhs = sup * sup;
    let rhs = weighted_norm_values(&slice.v, h, NormOrder::P(2), 0)?
        * weighted_norm_values(&slice.v_y, h, NormOrder::P(2), 0)?;
    Ok(SobolevCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-8),
    })
}

/// `‖V‖^{k/j}_{L^{2k/j, j}} / (‖V‖_∞^{k/j − 1} ‖V‖_{L^{2,k}})` for
/// `(k, j) ∈ {(2,1), (3,1), (3,2)}`; zero when the field vanishes.
pub fn interpolation_ratios(values: &[f64], h: f64) -> Result<[f64; 3]> {
    let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = [0.0; 3];
    for (slot, (k, j)) in [(2u32, 1u32), (3, 1), (3, 2)].into_iter().enumerate() {
        let r = k as f64 / j as f64;
        let num = weighted_norm_values(values, h, NormOrder::P(2 * k / j), j as usize)?.powf(r);
        let den = sup.powf(r - 1.0) * weighted_norm_values(values, h, NormOrder::P(2), k as usize)?;
        out[slot] = if den > 0.0 { num / den } else { 0.0 };
    }
    Ok(out)
}

/// Per-slice summary written to `reports.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rho: f64,
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    #[serde(rename = "norms_L2k")]
    pub norms_l2k: [f64; 4],
    #[serde(rename = "sup_V")]
    pub sup_v: f64,
    #[serde(rename = "sup_Vrho")]
    pub sup_vrho: f64,
    pub growth_exponent_fit: Option<f64>,
    pub cap_complete: bool,
    pub sobolev: Option<SobolevCheck>,
    pub interpolation_ratios: [f64; 3],
    /// `sup |ρ⁻² ∂²_y V|`, the size of the forcing in the model ODE.
    pub forcing_sup: f64,
}

impl EnergyReport {
    /// Energy and Sobolev data are only meaningful when the slice spans the
    /// whole support, so they are left empty otherwise.
    pub fn from_slice(slice: &HyperboloidSlice) -> Result<Self> {
        slice.require_complete()?;
        let h = slice.y_spacing;
        let mut norms = [0.0; 4];
        for (k, n) in norms.iter_mut().enumerate() {
            *n = weighted_norm_values(&slice.v, h, NormOrder::P(2), k)?;
        }
        let sup = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d2 = fd_derivatives(&slice.v, h, 2);
        let rho2 = slice.rho * slice.rho;
        Ok(EnergyReport {
            rho: slice.rho,
            energy: if slice.cap_complete { Some(hyperboloid_energy(slice)?) } else { None },
            norms_l2k: norms,
            sup_v: sup(&slice.v),
            sup_vrho: sup(&slice.v_rho),
            growth_exponent_fit: None,
            cap_complete: slice.cap_complete,
            sobolev: if slice.cap_complete { Some(sobolev_check(slice)?) } else { None },
            interpolation_ratios: interpolation_ratios(&slice.v, h)?,
            forcing_sup: sup(&d2[2]) / rho2,
        })
    }
}

/// Least-squares slope of `ln ‖V‖_{L^{2,3}}` against `ln ρ` over the
/// full-cap reports, written back into each of them.
pub fn fit_growth_exponent(reports: &mut [EnergyReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.cap_complete && r.norms_l2k[3] > 0.0 && r.rho > 0.0)
        .map(|r| (r.rho.ln(), r.norms_l2k[3].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let q = sxy / sxx;
    for r in reports.iter_mut() {
        r.growth_exponent_fit = Some(q);
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn grid_values(f: impl Fn(f64) -> f64, a: f64, h: f64) -> Vec<f64> {
        let j = (a / h).round() as i64;
        (-j..=j).map(|i| f(i as f64 * h)).collect()
    }

    #[test]
    fn density_in_both_coordinate_systems_agrees() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..10_000 {
            let rho: f64 = rng.random_range(1.0..50.0);
            let y: f64 = rng.random_range(-4.0..4.0);
            let (u, ur, uy): (f64, f64, f64) =
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (t, x) = (rho * y.cosh(), rho * y.sinh());
            let ut = (t * ur - x * uy / rho) / rho;
            let ux = (-x * ur + t * uy / rho) / rho;
            let a = energy_density(rho, y, u, ut, ux);
            let b = energy_density_split(rho, y, u, ur, uy);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn fornberg_recovers_classical_weights() {
        let w = fornberg(1.0, &[0.0, 1.0, 2.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-14 && w[1][1].abs() < 1e-14 && (w[1][2] - 0.5).abs() < 1e-14);
        assert!((w[2][0] - 1.0).abs() < 1e-14 && (w[2][1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivatives_of_smooth_function() {
        let h = 0.01;
        let f = grid_values(|y| (2.0 * y).sin(), 2.0, h);
        let d = fd_derivatives(&f, h, 3);
        for (i, y) in (-200..=200).map(|j| j as f64 * h).enumerate() {
            assert!((d[1][i] - 2.0 * (2.0 * y).cos()).abs() < 1e-9);
            assert!((d[2][i] + 4.0 * (2.0 * y).sin()).abs() < 1e-7);
            assert!((d[3][i] + 8.0 * (2.0 * y).cos()).abs() < 1e-4, "{i}");
        }
    }

    #[test]
    fn norm_closed_form() {
        // ‖1‖_{L²} over [−A, A] with weight e^{|y|} is sqrt(2(e^A − 1)).
        let a = 3.0;
        let ones = grid_values(|_| 1.0, a, 0.001);
        let n = weighted_norm_values(&ones, 0.001, NormOrder::P(2), 0).unwrap();
        let exact = (2.0 * (a.exp() - 1.0)).sqrt();
        assert!((n / exact - 1.0).abs() < 1e-6);
        // Derivatives of a constant add nothing.
        let n3 = weighted_norm_values(&ones, 0.001, NormOrder::P(2), 3).unwrap();
        assert!((n3 / n - 1.0).abs() < 1e-9);
        assert_eq!(weighted_norm_values(&ones, 0.001, NormOrder::Inf, 0).unwrap(), 1.0);
    }

    #[test]
    fn norm_rejects_bad_orders() {
        let f = vec![0.0; 5];
        assert!(weighted_norm_values(&f, 0.1, NormOrder::P(5), 0).is_err());
        assert!(weighted_norm_values(&f, 0.1, NormOrder::P(2), 4).is_err());
        let mut s = HyperboloidSlice::new(3.0, 0.1, 0.2, true);
        assert!(matches!(weighted_norm(&s, NormOrder::P(2), 0), Err(Error::State(_))));
        assert!(hyperboloid_energy(&s).is_err());
        for i in 0..s.len() {
            s.fill(i, 0.0, 0.0, 0.0);
        }
        assert_eq!(weighted_norm(&s, NormOrder::P(2), 0).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_on_zero_and_gaussian() {
        let mut s = HyperboloidSlice::new(3.0, 0.01, 3.0, true);
        for i in 0..s.len() {
            s.fill(i, 0.0, 0.0, 0.0);
        }
        assert!(sobolev_check(&s).unwrap().holds);
        for i in 0..s.len() {
            let y = s.y(i);
            s.v[i] = (-y * y).exp();
            s.v_y[i] = -2.0 * y * (-y * y).exp();
        }
        let c = sobolev_check(&s).unwrap();
        assert!(c.holds && c.lhs > 0.99);
    }

    #[test]
    fn growth_fit_recovers_power() {
        let mut reports: Vec<EnergyReport> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&rho: &f64| EnergyReport {
                rho,
                energy: Some(1.0),
                norms_l2k: [1.0, 1.0, 1.0, 3.0 * rho.powf(0.25)],
                sup_v: 1.0,
                sup_vrho: 1.0,
                growth_exponent_fit: None,
                cap_complete: true,
                sobolev: None,
                interpolation_ratios: [0.0; 3],
                forcing_sup: 0.0,
            })
            .collect();
        let q = fit_growth_exponent(&mut reports).unwrap();
        assert!((q - 0.25).abs() < 1e-12);
        assert_eq!(reports[0].growth_exponent_fit, Some(q));
    }

    proptest! {
        #[test]
        fn norms_are_monotone_in_k(c in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let f = grid_values(|y| c[0] + c[1] * y.sin() + c[2] * (-y * y).exp() + c[3] * (y / 2.0).cos(), 2.0, 0.02);
            let mut prev = 0.0;
            for k in 0..=3 {
                let n = weighted_norm_values(&f, 0.02, NormOrder::P(2), k).unwrap();
                prop_assert!(n >= prev);
                prev = n;
            }
        }

        #[test]
        fn energy_density_is_nonnegative(rho in 1.0f64..100.0, y in -5.0f64..5.0,
                                         u in -1.0f64..1.0, ut in -1.0f64..1.0, ux in -1.0f64..1.0) {
            prop_assert!(energy_density(rho, y, u, ut, ux) >= -1e-12);
        }
    }
}
