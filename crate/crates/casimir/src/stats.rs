//! Statistical reduction of repeated force scans: mean curves, Student-t
//! random errors, error-combination rules, theory error budgets, confidence
//! bands on the theory-experiment difference, and significance of the
//! difference between two measurements.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::curve::{CurveMetadata, ForceCurve};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("repetition rows must share the grid length")]
    RaggedRows,
    #[error("grids do not match")]
    GridMismatch,
    #[error("unknown combination rule \"{0}\"; known: quadrature, direct-sum, dominant")]
    UnknownRule(String),
    #[error("need at least 3 grid points for a numerical slope, got {0}")]
    GridTooCoarse(usize),
    #[error("confidence level must be in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("scans CSV: {0}")]
    Parse(String),
    #[error("curve: {0}")]
    Curve(#[from] crate::curve::CurveError),
}

/// Two-sided Student-t quantile: returns t such that CDF(t; dof) = p.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("valid t distribution")
        .inverse_cdf(p)
}

/// Repeated force scans on a common separation grid (SI units internally).
#[derive(Debug, Clone)]
pub struct RepeatedScans {
    z: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl RepeatedScans {
    pub fn new(z: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::TooFewRepetitions(rows.len()));
        }
        if rows.iter().any(|r| r.len() != z.len()) || z.is_empty() {
            return Err(StatsError::RaggedRows);
        }
        Ok(Self { z, rows })
    }

    /// Stack individually gridded curves, linearly interpolating all of them
    /// onto the first curve's grid (points outside any overlap are dropped).
    pub fn from_curves(curves: &[ForceCurve]) -> Result<Self, StatsError> {
        if curves.len() < 2 {
            return Err(StatsError::TooFewRepetitions(curves.len()));
        }
        let base = &curves[0];
        let mut grid = Vec::new();
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); curves.len()];
        'outer: for (i, &z) in base.z().iter().enumerate() {
            let mut vals = Vec::with_capacity(curves.len());
            vals.push(base.force()[i]);
            for c in &curves[1..] {
                match c.interpolate(z) {
                    Some(f) => vals.push(f),
                    None => continue 'outer,
                }
            }
            grid.push(z);
            for (row, v) in rows.iter_mut().zip(vals) {
                row.push(v);
            }
        }
        if grid.is_empty() {
            return Err(StatsError::GridMismatch);
        }
        Self::new(grid, rows)
    }

    pub fn repetitions(&self) -> usize {
        self.rows.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// CSV: first column `z_nm`, then one `F_pN_rep<k>` column per repetition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_nm");
        for k in 0..self.rows.len() {
            out.push_str(&format!(",F_pN_rep{}", k + 1));
        }
        out.push('\n');
        for (i, &z) in self.z.iter().enumerate() {
            out.push_str(&crate::curve::sig6(z * 1e9));
            for row in &self.rows {
                out.push(',');
                out.push_str(&crate::curve::sig6(row[i] * 1e12));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| StatsError::Parse("empty file".to_string()))?;
        if !header.starts_with("z_nm,F_pN_rep") {
            return Err(StatsError::Parse(format!("unexpected header \"{header}\"")));
        }
        let ncols = header.split(',').count();
        let mut z = Vec::new();
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); ncols - 1];
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != ncols {
                return Err(StatsError::Parse(format!(
                    "expected {ncols} columns, got {} in \"{line}\"",
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| StatsError::Parse(format!("bad number \"{s}\"")))
            };
            z.push(num(fields[0])? * 1e-9);
            for (k, row) in rows.iter_mut().enumerate() {
                row.push(num(fields[k + 1])? * 1e-12);
            }
        }
        Self::new(z, rows)
    }
}

/// Pointwise arithmetic mean of the repetitions.
pub fn mean_curve(scans: &RepeatedScans) -> ForceCurve {
    let n = scans.rows.len() as f64;
    let mean: Vec<f64> = (0..scans.z.len())
        .map(|i| scans.rows.iter().map(|r| r[i]).sum::<f64>() / n)
        .collect();
    ForceCurve::new(
        scans.z.clone(),
        mean,
        None,
        CurveMetadata::default(),
    )
    .expect("validated grid")
}

/// Per-point random error at the given confidence:
/// t_{(1+conf)/2, N−1} · s(z)/√N.
pub fn student_t_random_error(
    scans: &RepeatedScans,
    confidence: f64,
) -> Result<Vec<f64>, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence(confidence));
    }
    let n = scans.rows.len();
    if n < 2 {
        return Err(StatsError::TooFewRepetitions(n));
    }
    let t = student_t_quantile((1.0 + confidence) / 2.0, (n - 1) as f64);
    Ok((0..scans.z.len())
        .map(|i| {
            let mean = scans.rows.iter().map(|r| r[i]).sum::<f64>() / n as f64;
            let var = scans
                .rows
                .iter()
                .map(|r| (r[i] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            t * (var / n as f64).sqrt()
        })
        .collect())
}

/// How random and systematic errors are merged into a total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineRule {
    Quadrature,
    DirectSum,
    /// max(random, systematic) pointwise.
    Dominant,
}

impl CombineRule {
    pub fn parse(s: &str) -> Result<Self, StatsError> {
        match s {
            "quadrature" => Ok(Self::Quadrature),
            "direct-sum" => Ok(Self::DirectSum),
            "dominant" => Ok(Self::Dominant),
            other => Err(StatsError::UnknownRule(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadrature => "quadrature",
            Self::DirectSum => "direct-sum",
            Self::Dominant => "dominant",
        }
    }

    pub fn apply(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Quadrature => (a * a + b * b).sqrt(),
            Self::DirectSum => a + b,
            Self::Dominant => a.max(b),
        }
    }
}

/// Combine per-point random errors with a constant systematic error.
pub fn combine_random_systematic(
    random: &[f64],
    systematic: f64,
    rule: CombineRule,
) -> Vec<f64> {
    random.iter().map(|&r| rule.apply(r, systematic)).collect()
}

/// Theory error from separation uncertainty and optical-data variation,
/// combined in quadrature: √((|dF/dz|·Δz)² + (fraction·|F|)²).
pub fn theory_error(
    curve: &ForceCurve,
    delta_z: f64,
    optical_fraction: f64,
) -> Result<Vec<f64>, StatsError> {
    let n = curve.len();
    if n < 3 {
        return Err(StatsError::GridTooCoarse(n));
    }
    let z = curve.z();
    let f = curve.force();
    Ok((0..n)
        .map(|i| {
            let slope = if i == 0 {
                (f[1] - f[0]) / (z[1] - z[0])
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / (z[n - 1] - z[n - 2])
            } else {
                (f[i + 1] - f[i - 1]) / (z[i + 1] - z[i - 1])
            };
            let grad_term = slope.abs() * delta_z;
            let optical_term = optical_fraction * f[i].abs();
            (grad_term * grad_term + optical_term * optical_term).sqrt()
        })
        .collect())
}

/// Half-width Ξ(z) of the confidence interval on theory minus experiment.
#[derive(Debug, Clone)]
pub struct ConfidenceBand {
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
    pub confidence: f64,
    pub rule: CombineRule,
}

/// Merge theory and experiment errors into the band half-width per rule.
pub fn confidence_band(
    z: &[f64],
    theory_err: &[f64],
    experiment_err: &[f64],
    rule: CombineRule,
    confidence: f64,
) -> Result<ConfidenceBand, StatsError> {
    if z.len() != theory_err.len() || z.len() != experiment_err.len() {
        return Err(StatsError::GridMismatch);
    }
    Ok(ConfidenceBand {
        z: z.to_vec(),
        xi: theory_err
            .iter()
            .zip(experiment_err)
            .map(|(&t, &e)| rule.apply(t, e))
            .collect(),
        confidence,
        rule,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ConsistencyReport {
    /// Fraction of grid points with |F_theor − F_expt| ≤ Ξ.
    pub fraction_inside: f64,
    /// Separation (m) of the worst point by |difference|/Ξ.
    pub worst_z: f64,
    pub worst_ratio: f64,
    pub consistent: bool,
}

/// Fraction of points where the theory-experiment difference stays within the
/// band; consistency is declared at `threshold` (0.95 by convention).
pub fn consistency_report(
    theory: &ForceCurve,
    experiment: &ForceCurve,
    band: &ConfidenceBand,
    threshold: f64,
) -> Result<ConsistencyReport, StatsError> {
    let n = theory.len();
    if experiment.len() != n || band.z.len() != n {
        return Err(StatsError::GridMismatch);
    }
    let mut inside = 0usize;
    let mut worst_ratio = 0.0;
    let mut worst_z = band.z[0];
    for i in 0..n {
        let diff = (theory.force()[i] - experiment.force()[i]).abs();
        let ratio = diff / band.xi[i].max(1e-300);
        if ratio <= 1.0 {
            inside += 1;
        }
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_z = band.z[i];
        }
    }
    let fraction_inside = inside as f64 / n as f64;
    Ok(ConsistencyReport {
        fraction_inside,
        worst_z,
        worst_ratio,
        consistent: fraction_inside >= threshold,
    })
}

#[derive(Debug, Clone)]
pub struct DifferenceSignificance {
    pub difference: ForceCurve,
    /// Maximal contiguous separation range (m) where |diff| strictly exceeds
    /// the combined error; None when nowhere significant.
    pub significant_range: Option<(f64, f64)>,
}

/// Difference of two mean curves with quadrature-combined errors and the
/// maximal contiguous significance range.
pub fn difference_significance(
    mean_a: &ForceCurve,
    err_a: &[f64],
    mean_b: &ForceCurve,
    err_b: &[f64],
) -> Result<DifferenceSignificance, StatsError> {
    let n = mean_a.len();
    if mean_b.len() != n || err_a.len() != n || err_b.len() != n {
        return Err(StatsError::GridMismatch);
    }
    if mean_a
        .z()
        .iter()
        .zip(mean_b.z())
        .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()))
    {
        return Err(StatsError::GridMismatch);
    }
    let diff: Vec<f64> = mean_b
        .force()
        .iter()
        .zip(mean_a.force())
        .map(|(b, a)| b - a)
        .collect();
    let err: Vec<f64> = err_a
        .iter()
        .zip(err_b)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();

    // Longest run of strictly significant points.
    let mut best: Option<(usize, usize)> = None;
    let mut start: Option<usize> = None;
    for i in 0..=n {
        let sig = i < n && diff[i].abs() > err[i];
        match (sig, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let len = i - s;
                if best.map_or(true, |(bs, be)| be - bs < len) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    let significant_range = best.map(|(s, e)| (mean_a.z()[s], mean_a.z()[e]));
    let difference = ForceCurve::new(
        mean_a.z().to_vec(),
        diff,
        Some(err),
        CurveMetadata::default(),
    )?;
    Ok(DifferenceSignificance {
        difference,
        significant_range,
    })
}
