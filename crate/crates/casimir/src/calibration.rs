//! Electrostatic calibration: sphere-plate Coulomb force, the deflection
//! signal model, and extraction of the residual potential V₀, force constant
//! km, separation on contact z₀, and deflection coefficient m from
//! voltage-sweep scans.
//!
//! The signal model is the implicit pair
//!
//!   S_def = X(z)(V − V₀)²/km + S₀(z),     z = z_piezo + m·S_def + z₀,
//!
//! with X(z) the exact sphere-plate capacitance-gradient series.

use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::constants::EPS0;
use crate::fit::{self, FitError};
use crate::stats::student_t_quantile;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("separation must satisfy 0 < z and z/R < 0.1, got z = {z_m:.4e} m, R = {radius_m:.4e} m")]
    OutOfRange { z_m: f64, radius_m: f64 },
    #[error("capacitance series did not converge within {0} terms (z too small numerically)")]
    SeriesNotConverged(usize),
    #[error("deflection iteration unstable (jump-to-contact regime) at z_piezo = {0:.4e} m")]
    Instability(f64),
    #[error("scan record: {0}")]
    InvalidScan(String),
    #[error("need at least 3 distinct voltages, got {0}")]
    TooFewVoltages(usize),
    #[error("scans share no common z_piezo grid")]
    GridMismatch,
    #[error("fit range [{0:.4e}, {1:.4e}] m excludes all data")]
    EmptyFitRange(f64, f64),
    #[error("calibration fit failed: {0}")]
    FitFailed(#[from] FitError),
    #[error("contact data degenerate: need >= 2 voltages with distinct deflections")]
    DegenerateContactData,
    #[error("scan CSV: {0}")]
    Parse(String),
}

/// Maximum capacitance-series length before declaring non-convergence.
const MAX_SERIES_TERMS: usize = 1_000_000;
const SERIES_REL_TOL: f64 = 1e-12;

/// Exact sphere-plate electrostatic coefficient X(z) (N/V²), so that the
/// attractive force magnitude is F_e = X(z)(V − V₀)²:
///
///   X(z) = 2πε₀ Σ_{n≥1} [n coth(nα) − coth α] / sinh(nα),  cosh α = 1 + z/R.
pub fn coulomb_coefficient(z: f64, radius: f64) -> Result<f64, CalibrationError> {
    if !(z > 0.0) || !(radius > 0.0) || z / radius >= 0.1 {
        return Err(CalibrationError::OutOfRange {
            z_m: z,
            radius_m: radius,
        });
    }
    let cosh_a = 1.0 + z / radius;
    let sinh_a = (cosh_a * cosh_a - 1.0).sqrt();
    let coth_a = cosh_a / sinh_a;

    // sinh(nα), cosh(nα) by recurrence.
    let (mut sn, mut cn) = (sinh_a, cosh_a);
    let mut sum = 0.0;
    for n in 1..=MAX_SERIES_TERMS {
        let term = (n as f64 * cn / sn - coth_a) / sn;
        sum += term;
        if n > 2 && term < SERIES_REL_TOL * sum {
            return Ok(2.0 * PI * EPS0 * sum);
        }
        let s_next = sn * cosh_a + cn * sinh_a;
        cn = cn * cosh_a + sn * sinh_a;
        sn = s_next;
    }
    Err(CalibrationError::SeriesNotConverged(MAX_SERIES_TERMS))
}

/// Calibration parameters in SI: V₀ (V), km (N per deflection unit), z₀ (m),
/// m (m per deflection unit).
#[derive(Debug, Clone, Copy)]
pub struct CalParams {
    pub v0: f64,
    pub km: f64,
    pub z0: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DeflectionPoint {
    pub s_def: f64,
    /// Actual separation solving the implicit pair.
    pub z: f64,
}

/// Solve the implicit deflection equations at one piezo position.
///
/// `casimir` optionally supplies a force-vs-separation evaluator (N) whose
/// signal F(z)/km is added as the voltage-independent offset S₀.
pub fn forward_deflection(
    params: &CalParams,
    radius: f64,
    voltage: f64,
    z_piezo: f64,
    casimir: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<DeflectionPoint, CalibrationError> {
    let mut s = 0.0;
    let mut z_prev = f64::INFINITY;
    for _ in 0..500 {
        let z = z_piezo + params.m * s + params.z0;
        if !(z > 0.0) || !z.is_finite() {
            return Err(CalibrationError::Instability(z_piezo));
        }
        if (z - z_prev).abs() < 1e-18 + 1e-14 * z.abs() {
            return Ok(DeflectionPoint { s_def: s, z });
        }
        z_prev = z;
        let dv = voltage - params.v0;
        let mut s_new = coulomb_coefficient(z, radius)? * dv * dv / params.km;
        if let Some(f) = casimir {
            s_new += f(z) / params.km;
        }
        // Half-step damping keeps the iteration contractive near instability.
        s += 0.5 * (s_new - s);
    }
    Err(CalibrationError::Instability(z_piezo))
}

/// One voltage sweep: deflection signal against piezo position at fixed V.
#[derive(Debug, Clone)]
pub struct ScanRecord {
    voltage: f64,
    z_piezo: Vec<f64>,
    deflection: Vec<f64>,
}

impl ScanRecord {
    pub fn new(voltage: f64, z_piezo: Vec<f64>, deflection: Vec<f64>) -> Result<Self, CalibrationError> {
        if z_piezo.len() != deflection.len() {
            return Err(CalibrationError::InvalidScan(
                "z_piezo and deflection lengths differ".to_string(),
            ));
        }
        if z_piezo.len() < 10 {
            return Err(CalibrationError::InvalidScan(format!(
                "need >= 10 samples, got {}",
                z_piezo.len()
            )));
        }
        let ascending = z_piezo.windows(2).all(|w| w[1] > w[0]);
        let descending = z_piezo.windows(2).all(|w| w[1] < w[0]);
        if !ascending && !descending {
            return Err(CalibrationError::InvalidScan(
                "z_piezo must be strictly monotone".to_string(),
            ));
        }
        Ok(Self {
            voltage,
            z_piezo,
            deflection,
        })
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn z_piezo(&self) -> &[f64] {
        &self.z_piezo
    }

    pub fn deflection(&self) -> &[f64] {
        &self.deflection
    }

    /// CSV: metadata line `# V=<volts>`, header `z_piezo_nm,S_def`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# V={}\nz_piezo_nm,S_def\n", self.voltage);
        for (z, s) in self.z_piezo.iter().zip(&self.deflection) {
            out.push_str(&format!("{},{}\n", crate::curve::sig6(z * 1e9), crate::curve::sig6(*s)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CalibrationError> {
        let mut voltage: Option<f64> = None;
        let mut z = Vec::new();
        let mut s = Vec::new();
        let mut saw_header = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("V=") {
                    voltage = Some(v.trim().parse::<f64>().map_err(|_| {
                        CalibrationError::Parse(format!("bad voltage \"{v}\""))
                    })?);
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line != "z_piezo_nm,S_def" {
                    return Err(CalibrationError::Parse(format!(
                        "expected header \"z_piezo_nm,S_def\", got \"{line}\""
                    )));
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(CalibrationError::Parse(format!("expected 2 columns in \"{line}\"")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| CalibrationError::Parse(format!("bad number \"{s}\"")))
            };
            z.push(num(fields[0])? * 1e-9);
            s.push(num(fields[1])?);
        }
        let voltage =
            voltage.ok_or_else(|| CalibrationError::Parse("missing `# V=` metadata".to_string()))?;
        Self::new(voltage, z, s)
    }
}

/// Per-separation quadratic fit of the deflection signal against voltage.
#[derive(Debug, Clone, Copy)]
pub struct ParabolaFit {
    pub z_piezo: f64,
    /// Vertex of the parabola (residual potential estimate at this z).
    pub v0: f64,
    /// Quadratic coefficient, equals X(z)/km.
    pub curvature: f64,
    /// Voltage-independent offset at this z.
    pub s0: f64,
    pub rms_residual: f64,
}

fn check_common_grid(scans: &[ScanRecord]) -> Result<(), CalibrationError> {
    let first = &scans[0];
    for s in &scans[1..] {
        if s.z_piezo.len() != first.z_piezo.len()
            || s.z_piezo
                .iter()
                .zip(&first.z_piezo)
                .any(|(a, b)| (a - b).abs() > 1e-13)
        {
            return Err(CalibrationError::GridMismatch);
        }
    }
    Ok(())
}

fn distinct_voltages(scans: &[ScanRecord]) -> usize {
    let mut vs: Vec<f64> = scans.iter().map(|s| s.voltage).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    vs.len()
}

/// Least-squares quadratic in V at every z_piezo grid point.
pub fn fit_parabola_per_z(scans: &[ScanRecord]) -> Result<Vec<ParabolaFit>, CalibrationError> {
    if scans.is_empty() {
        return Err(CalibrationError::TooFewVoltages(0));
    }
    let nv = distinct_voltages(scans);
    if nv < 3 {
        return Err(CalibrationError::TooFewVoltages(nv));
    }
    check_common_grid(scans)?;

    let ones: Vec<f64> = scans.iter().map(|_| 1.0).collect();
    let vs: Vec<f64> = scans.iter().map(|s| s.voltage).collect();
    let vs2: Vec<f64> = vs.iter().map(|v| v * v).collect();
    let design = vec![ones, vs.clone(), vs2];

    let mut out = Vec::with_capacity(scans[0].z_piezo.len());
    for j in 0..scans[0].z_piezo.len() {
        let y: Vec<f64> = scans.iter().map(|s| s.deflection[j]).collect();
        let c = fit::linear_least_squares(&design, &y)?;
        let rss: f64 = scans
            .iter()
            .map(|s| {
                let pred = c[0] + c[1] * s.voltage + c[2] * s.voltage * s.voltage;
                (s.deflection[j] - pred).powi(2)
            })
            .sum();
        out.push(ParabolaFit {
            z_piezo: scans[0].z_piezo[j],
            v0: -c[1] / (2.0 * c[2]),
            curvature: c[2],
            s0: c[0] - c[1] * c[1] / (4.0 * c[2]),
            rms_residual: (rss / scans.len() as f64).sqrt(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ValueWithError {
    pub value: f64,
    pub error: f64,
}

/// Handling of the voltage-independent offset during extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetMode {
    /// S₀ is a free nuisance parameter at every grid point (profiled out).
    FreePerPoint,
    /// S₀ forced to zero (offset subtracted beforehand).
    Zero,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub v0: ValueWithError,
    pub km: ValueWithError,
    pub z0: ValueWithError,
    pub m: ValueWithError,
    /// Per-separation parabola-vertex V₀ series (independence check).
    pub v0_per_z: Vec<f64>,
    /// Standard deviation of that series.
    pub v0_std: f64,
    /// Extracted voltage-independent offsets per selected grid point.
    pub s0_per_z: Vec<f64>,
    /// z_piezo of the selected grid points.
    pub z_piezo_selected: Vec<f64>,
    pub points_used: usize,
}

/// Fit the full signal model over the restricted separation range and extract
/// V₀, km, z₀ with confidence intervals from the fit covariance.
///
/// The deflection coefficient `m` is taken as known (see
/// [`estimate_deflection_coefficient`]) and passed through with its error.
pub fn extract_calibration(
    scans: &[ScanRecord],
    fit_range: (f64, f64),
    radius: f64,
    m: ValueWithError,
    mode: OffsetMode,
    confidence: f64,
) -> Result<CalibrationResult, CalibrationError> {
    if scans.is_empty() {
        return Err(CalibrationError::TooFewVoltages(0));
    }
    let nv = distinct_voltages(scans);
    if nv < 3 {
        return Err(CalibrationError::TooFewVoltages(nv));
    }
    check_common_grid(scans)?;

    let parabolas = fit_parabola_per_z(scans)?;
    let n_grid = parabolas.len();
    let n_scans = scans.len();

    // Initial values. V0 from parabola vertices; km and z0 from the
    // leading-order 1/C(z) linearity: 1/C = (km/pi eps0 R) (z_piezo + m S + z0).
    let v0_init = parabolas.iter().map(|p| p.v0).sum::<f64>() / n_grid as f64;
    let mean_s: Vec<f64> = (0..n_grid)
        .map(|j| scans.iter().map(|s| s.deflection[j]).sum::<f64>() / n_scans as f64)
        .collect();
    let xs: Vec<f64> = (0..n_grid)
        .map(|j| parabolas[j].z_piezo + m.value * mean_s[j])
        .collect();
    let keep_init: Vec<usize> = (0..n_grid)
        .filter(|&j| xs[j] >= fit_range.0 * 0.5 && parabolas[j].curvature > 0.0)
        .collect();
    if keep_init.is_empty() {
        return Err(CalibrationError::EmptyFitRange(fit_range.0, fit_range.1));
    }
    let design = vec![
        keep_init.iter().map(|_| 1.0).collect::<Vec<f64>>(),
        keep_init.iter().map(|&j| xs[j]).collect(),
    ];
    let invc: Vec<f64> = keep_init
        .iter()
        .map(|&j| 1.0 / parabolas[j].curvature)
        .collect();
    let coeffs = fit::linear_least_squares(&design, &invc)?;
    let slope = coeffs[1];
    let km_init = (slope * PI * EPS0 * radius).abs().max(1e-15);
    let z0_init = (coeffs[0] / slope).clamp(-1e-6, 1e-6);

    // Select grid points whose separations fall inside the fit range for
    // every voltage.
    let selected: Vec<usize> = (0..n_grid)
        .filter(|&j| {
            scans.iter().all(|s| {
                let z = s.z_piezo[j] + m.value * s.deflection[j] + z0_init;
                z >= fit_range.0 && z <= fit_range.1
            })
        })
        .collect();
    if selected.is_empty() {
        return Err(CalibrationError::EmptyFitRange(fit_range.0, fit_range.1));
    }

    let residuals = |p: &[f64]| -> Vec<f64> {
        let (v0, km, z0) = (p[0], p[1], p[2]);
        let mut out = Vec::with_capacity(selected.len() * n_scans);
        for &j in &selected {
            let mut base = Vec::with_capacity(n_scans);
            for s in scans {
                let z = s.z_piezo[j] + m.value * s.deflection[j] + z0;
                let dv = s.voltage - v0;
                let pred = match coulomb_coefficient(z, radius) {
                    Ok(x) => x * dv * dv / km,
                    Err(_) => 1e6,
                };
                base.push(s.deflection[j] - pred);
            }
            let offset = match mode {
                OffsetMode::FreePerPoint => base.iter().sum::<f64>() / n_scans as f64,
                OffsetMode::Zero => 0.0,
            };
            out.extend(base.iter().map(|b| b - offset));
        }
        out
    };

    let scales = [1e-7, km_init * 1e-7, 1e-13];
    let fit = fit::levenberg_marquardt(residuals, &[v0_init, km_init, z0_init], &scales, 200)?;
    let (v0, km, z0) = (fit.params[0], fit.params[1], fit.params[2]);

    // Confidence intervals from the profiled-fit covariance.
    let n_samples = selected.len() * n_scans;
    let nuisance = match mode {
        OffsetMode::FreePerPoint => selected.len(),
        OffsetMode::Zero => 0,
    };
    let dof = n_samples.saturating_sub(3 + nuisance).max(1);
    let s2 = fit.residual_sum_squares / dof as f64;
    let t = student_t_quantile((1.0 + confidence) / 2.0, dof as f64);
    let err = |i: usize| (fit.jtj_inverse[i][i].max(0.0) * s2).sqrt() * t;

    // Final per-point offsets and the parabola-vertex V0 series.
    let final_res = |j: usize| -> f64 {
        let sum: f64 = scans
            .iter()
            .map(|s| {
                let z = s.z_piezo[j] + m.value * s.deflection[j] + z0;
                let dv = s.voltage - v0;
                let pred = coulomb_coefficient(z, radius).map_or(1e6, |x| x * dv * dv / km);
                s.deflection[j] - pred
            })
            .sum();
        sum / n_scans as f64
    };
    let s0_per_z: Vec<f64> = selected.iter().map(|&j| final_res(j)).collect();
    let v0_per_z: Vec<f64> = selected.iter().map(|&j| parabolas[j].v0).collect();
    let v0_mean = v0_per_z.iter().sum::<f64>() / v0_per_z.len() as f64;
    let v0_std = if v0_per_z.len() > 1 {
        (v0_per_z.iter().map(|v| (v - v0_mean).powi(2)).sum::<f64>()
            / (v0_per_z.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };

    Ok(CalibrationResult {
        v0: ValueWithError { value: v0, error: err(0) },
        km: ValueWithError { value: km, error: err(1) },
        z0: ValueWithError { value: z0, error: err(2) },
        m,
        v0_per_z,
        v0_std,
        s0_per_z,
        z_piezo_selected: selected.iter().map(|&j| scans[0].z_piezo[j]).collect(),
        points_used: selected.len(),
    })
}

/// One contact event: applied voltage, piezo reading at contact, and the
/// deflection signal at contact.
#[derive(Debug, Clone, Copy)]
pub struct ContactPoint {
    pub voltage: f64,
    pub z_piezo_contact: f64,
    pub deflection_contact: f64,
}

/// Deflection coefficient from the voltage dependence of the contact
/// position: regressing contact z_piezo on the deflection signal has slope −m.
pub fn estimate_deflection_coefficient(
    points: &[ContactPoint],
    confidence: f64,
) -> Result<ValueWithError, CalibrationError> {
    if points.len() < 2 {
        return Err(CalibrationError::DegenerateContactData);
    }
    let n = points.len() as f64;
    let mean_s = points.iter().map(|p| p.deflection_contact).sum::<f64>() / n;
    let mean_z = points.iter().map(|p| p.z_piezo_contact).sum::<f64>() / n;
    let sxx: f64 = points
        .iter()
        .map(|p| (p.deflection_contact - mean_s).powi(2))
        .sum();
    let scale: f64 = points
        .iter()
        .map(|p| p.deflection_contact.abs())
        .fold(0.0, f64::max)
        .max(1e-30);
    if sxx <= (1e-12 * scale).powi(2) {
        return Err(CalibrationError::DegenerateContactData);
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.deflection_contact - mean_s) * (p.z_piezo_contact - mean_z))
        .sum();
    let slope = sxy / sxx;
    let m = -slope;
    let error = if points.len() > 2 {
        let rss: f64 = points
            .iter()
            .map(|p| {
                let pred = mean_z + slope * (p.deflection_contact - mean_s);
                (p.z_piezo_contact - pred).powi(2)
            })
            .sum();
        let dof = points.len() as f64 - 2.0;
        let se = (rss / dof / sxx).sqrt();
        student_t_quantile((1.0 + confidence) / 2.0, dof) * se
    } else {
        0.0
    };
    Ok(ValueWithError { value: m, error })
}

/// Generate a synthetic voltage-sweep set with the forward model; Gaussian
/// noise of standard deviation `noise_sigma` (deflection units) is added to
/// S_def when positive.
pub fn synthesize_sweep_set<R: Rng>(
    params: &CalParams,
    radius: f64,
    voltages: &[f64],
    z_piezo_grid: &[f64],
    casimir: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Vec<ScanRecord>, CalibrationError> {
    let mut scans = Vec::with_capacity(voltages.len());
    for &v in voltages {
        let mut s_def = Vec::with_capacity(z_piezo_grid.len());
        for &zp in z_piezo_grid {
            let point = forward_deflection(params, radius, v, zp, casimir)?;
            let noise = if noise_sigma > 0.0 {
                noise_sigma * gaussian(rng)
            } else {
                0.0
            };
            s_def.push(point.s_def + noise);
        }
        scans.push(ScanRecord::new(v, z_piezo_grid.to_vec(), s_def)?);
    }
    Ok(scans)
}

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}
