//! Dispersion (Kramers-Kronig) transform of tabulated optical data to the
//! imaginary frequency axis:
//!
//!   ε(iξ) = 1 + (2/π) ∫₀^∞ ω ε″(ω) / (ω² + ξ²) dω,   ε″ = 2 n k.
//!
//! Inside the table span the integral is done adaptively in u = ln ω with n
//! and k interpolated log-log; outside it the tails are closed forms: below
//! the table either zero or a Drude-like tail (ε″·ω held constant), above it
//! an ε″ ∝ ω⁻³ decay.

use std::f64::consts::PI;

use super::{MaterialError, OpticalDataTable, PermittivityModel, TabulatedEps};
use crate::quad;

/// Extrapolation of ε″ below the lowest tabulated frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowFreqTail {
    /// No absorption below the table (insulators).
    Zero,
    /// ε″(ω)·ω frozen at its lowest-frequency value (free carriers).
    DrudeLike,
}

const KK_REL_TOL: f64 = 1e-6;
const KK_MAX_SUBDIVISIONS: usize = 20_000;

struct Interpolant {
    ln_omega: Vec<f64>,
    ln_n: Vec<f64>,
    k: Vec<f64>,
    /// ln k where k > 0 at both segment ends; NAN marks linear fallback.
    ln_k: Vec<f64>,
}

impl Interpolant {
    fn new(table: &OpticalDataTable) -> Self {
        let omegas = table.omegas();
        let ln_omega: Vec<f64> = omegas.iter().map(|w| w.ln()).collect();
        let ln_n = table.rows().iter().map(|r| r.n.ln()).collect();
        let k: Vec<f64> = table.rows().iter().map(|r| r.k).collect();
        let ln_k = k.iter().map(|&k| if k > 0.0 { k.ln() } else { f64::NAN }).collect();
        Self {
            ln_omega,
            ln_n,
            k,
            ln_k,
        }
    }

    /// ε″(ω) = 2 n(ω) k(ω) for ω inside the table span.
    fn eps2(&self, ln_w: f64) -> f64 {
        let m = self.ln_omega.len();
        let hi = self
            .ln_omega
            .partition_point(|&x| x < ln_w)
            .clamp(1, m - 1);
        let lo = hi - 1;
        let f = (ln_w - self.ln_omega[lo]) / (self.ln_omega[hi] - self.ln_omega[lo]);
        let n = (self.ln_n[lo] + f * (self.ln_n[hi] - self.ln_n[lo])).exp();
        let k = if self.ln_k[lo].is_nan() || self.ln_k[hi].is_nan() {
            self.k[lo] + f * (self.k[hi] - self.k[lo])
        } else {
            (self.ln_k[lo] + f * (self.ln_k[hi] - self.ln_k[lo])).exp()
        };
        2.0 * n * k
    }
}

/// Low-frequency tail ∫₀^ω₁ A/(ω² + ξ²) dω with A = ε″(ω₁)·ω₁.
fn low_tail(a: f64, omega1: f64, xi: f64) -> f64 {
    a / xi * (omega1 / xi).atan()
}

/// High-frequency tail ∫_ωN^∞ B / (ω²(ω² + ξ²)) dω with B = ε″(ωN)·ωN³.
fn high_tail(b: f64, omega_n: f64, xi: f64) -> f64 {
    let r = xi / omega_n;
    if r < 1e-4 {
        // Series in r avoids the 1/W - atan(r)/xi cancellation.
        b / omega_n.powi(3) * (1.0 / 3.0 - r * r / 5.0)
    } else {
        b / (xi * xi) * (1.0 / omega_n - r.atan() / xi)
    }
}

/// Transform a table to ε(iξ) samples on the given positive ascending grid.
pub fn kk_transform(
    table: &OpticalDataTable,
    xi_grid: &[f64],
    low: LowFreqTail,
) -> Result<PermittivityModel, MaterialError> {
    if xi_grid.is_empty() || xi_grid[0] <= 0.0 || xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MaterialError::InvalidXiGrid);
    }
    let interp = Interpolant::new(table);
    let omegas = table.omegas();
    let (w_lo, w_hi) = (omegas[0], omegas[omegas.len() - 1]);
    let eps2_lo = 2.0 * table.rows()[0].n * table.rows()[0].k;
    let last = table.rows()[table.rows().len() - 1];
    let eps2_hi = 2.0 * last.n * last.k;

    let mut samples = Vec::with_capacity(xi_grid.len());
    for &xi in xi_grid {
        // u = ln w, dω = ω du: integrand ω² ε″(ω) / (ω² + ξ²).
        let f = |u: f64| {
            let w = u.exp();
            w * w * interp.eps2(u) / (w * w + xi * xi)
        };
        let mid = quad::integrate(&f, w_lo.ln(), w_hi.ln(), KK_REL_TOL, KK_MAX_SUBDIVISIONS)
            .map_err(|e| MaterialError::KkNotConverged {
                xi,
                achieved: e.achieved,
                requested: e.requested,
            })?;
        let mut integral = mid.value + high_tail(eps2_hi * w_hi.powi(3), w_hi, xi);
        if low == LowFreqTail::DrudeLike {
            integral += low_tail(eps2_lo * w_lo, w_lo, xi);
        }
        samples.push(1.0 + 2.0 / PI * integral);
    }
    Ok(PermittivityModel::Tabulated(TabulatedEps::new(
        xi_grid.to_vec(),
        samples,
        table.source_label(),
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{OpticalDataTable, OpticalRow};
    use approx::assert_relative_eq;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    /// Table rows from a complex ε(ω): n + ik = sqrt(ε).
    fn table_from_eps(
        omegas: &[f64],
        eps: impl Fn(f64) -> (f64, f64),
        label: &str,
    ) -> OpticalDataTable {
        let rows = omegas
            .iter()
            .map(|&w| {
                let (e1, e2) = eps(w);
                let modulus = (e1 * e1 + e2 * e2).sqrt();
                OpticalRow {
                    energy_ev: w * crate::constants::HBAR / crate::constants::E_CHARGE,
                    n: ((modulus + e1) / 2.0).sqrt(),
                    k: ((modulus - e1) / 2.0).sqrt(),
                }
            })
            .collect();
        OpticalDataTable::new(rows, label).unwrap()
    }

    #[test]
    fn oscillator_table_recovers_analytic_form() {
        // ε(ω) = 1 + S/(ω₀² − ω² − iγω);   ε(iξ) = 1 + S/(ω₀² + ξ² + γξ)
        let (s, w0, g) = (10.0 * 6.6e15f64.powi(2), 6.6e15, 6.0e14);
        // Dense grid: the Lorentzian peak (width γ ≪ ω₀) needs many samples
        // per width for the interpolated table to carry its full weight.
        let table = table_from_eps(&log_grid(1e13, 1e18, 4000), |w| {
            let d_re = w0 * w0 - w * w;
            let d_im = -g * w;
            let den = d_re * d_re + d_im * d_im;
            (1.0 + s * d_re / den, s * g * w / den)
        }, "oscillator");
        let xi_grid = log_grid(1e13, 3e16, 40);
        let model = kk_transform(&table, &xi_grid, LowFreqTail::Zero).unwrap();
        for &xi in &xi_grid {
            let expect = 1.0 + s / (w0 * w0 + xi * xi + g * xi);
            assert_relative_eq!(model.eps_imag_axis(xi).unwrap(), expect, max_relative = 5e-3);
        }
    }

    #[test]
    fn zero_absorption_gives_vacuum() {
        let rows = vec![
            OpticalRow { energy_ev: 0.1, n: 2.0, k: 0.0 },
            OpticalRow { energy_ev: 1.0, n: 1.5, k: 0.0 },
            OpticalRow { energy_ev: 10.0, n: 1.1, k: 0.0 },
        ];
        let table = OpticalDataTable::new(rows, "transparent").unwrap();
        let model = kk_transform(&table, &log_grid(1e14, 1e16, 10), LowFreqTail::Zero).unwrap();
        for xi in [1e14, 1e15, 1e16] {
            assert_relative_eq!(model.eps_imag_axis(xi).unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn drude_table_recovers_analytic_form() {
        // ε(ω) = 1 − ωp²/(ω(ω + iγ)):  ε′ = 1 − ωp²/(ω²+γ²), ε″ = ωp²γ/(ω(ω²+γ²))
        let (wp, g) = (2.0e15f64, 2.4e14f64);
        let table = table_from_eps(&log_grid(1e11, 1e18, 800), |w| {
            let den = w * w + g * g;
            (1.0 - wp * wp / den, wp * wp * g / (w * den))
        }, "drude");
        let xi_grid = log_grid(1e13, 1e17, 30);
        let model = kk_transform(&table, &xi_grid, LowFreqTail::DrudeLike).unwrap();
        for &xi in &xi_grid {
            let expect = 1.0 + wp * wp / (xi * (xi + g));
            assert_relative_eq!(model.eps_imag_axis(xi).unwrap(), expect, max_relative = 1e-2);
        }
    }

    #[test]
    fn bad_xi_grid_rejected() {
        let rows = vec![
            OpticalRow { energy_ev: 0.1, n: 2.0, k: 0.1 },
            OpticalRow { energy_ev: 1.0, n: 1.5, k: 0.1 },
        ];
        let table = OpticalDataTable::new(rows, "x").unwrap();
        assert!(kk_transform(&table, &[], LowFreqTail::Zero).is_err());
        assert!(kk_transform(&table, &[0.0, 1e14], LowFreqTail::Zero).is_err());
        assert!(kk_transform(&table, &[1e15, 1e14], LowFreqTail::Zero).is_err());
    }
}
