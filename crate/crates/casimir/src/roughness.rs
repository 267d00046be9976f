//! Additive roughness correction: the force is averaged over the discrete
//! distribution of combined surface-height deviations,
//! F_rough(z) = Σ_k p_k F(z + δ_k).
//!
//! Separations are measured between mean (zero-level) surfaces, so
//! distributions are re-centered to zero mean on construction.

use thiserror::Error;

use crate::curve::{CurveMetadata, ForceCurve};

#[derive(Debug, Error)]
pub enum RoughnessError {
    #[error("height distribution: {0}")]
    InvalidDistribution(String),
    #[error("need at least 2 height samples, got {0}")]
    TooFewSamples(usize),
    #[error("bin count must be >= 1")]
    ZeroBins,
    #[error("separation {z_m:.4e} m with offset {offset_m:.4e} m gives non-positive local separation")]
    Touching { z_m: f64, offset_m: f64 },
    #[error("topography CSV: {0}")]
    Parse(String),
    #[error("curve: {0}")]
    Curve(#[from] crate::curve::CurveError),
}

/// Re-binning threshold for combined distributions.
const MAX_SUPPORT: usize = 4096;
const REBIN_TO: usize = 256;

/// Discrete zero-mean probability distribution of surface-height offsets (m).
#[derive(Debug, Clone)]
pub struct HeightDistribution {
    offsets: Vec<f64>,
    probabilities: Vec<f64>,
}

impl HeightDistribution {
    /// Normalizes, re-centers to zero mean, sorts, and merges duplicate offsets.
    pub fn new(offsets: Vec<f64>, probabilities: Vec<f64>) -> Result<Self, RoughnessError> {
        if offsets.len() != probabilities.len() || offsets.is_empty() {
            return Err(RoughnessError::InvalidDistribution(
                "offsets and probabilities must be equal-length and non-empty".to_string(),
            ));
        }
        if probabilities.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(RoughnessError::InvalidDistribution(
                "probabilities must be non-negative and finite".to_string(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if !(total > 0.0) {
            return Err(RoughnessError::InvalidDistribution(
                "probabilities sum to zero".to_string(),
            ));
        }
        let mean: f64 = offsets
            .iter()
            .zip(&probabilities)
            .map(|(d, p)| d * p)
            .sum::<f64>()
            / total;

        let mut pairs: Vec<(f64, f64)> = offsets
            .into_iter()
            .zip(probabilities)
            .filter(|&(_, p)| p > 0.0)
            .map(|(d, p)| (d - mean, p / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (d, p) in pairs {
            match merged.last_mut() {
                Some(last) if (last.0 - d).abs() < 1e-15 => last.1 += p,
                _ => merged.push((d, p)),
            }
        }
        Ok(Self {
            offsets: merged.iter().map(|x| x.0).collect(),
            probabilities: merged.iter().map(|x| x.1).collect(),
        })
    }

    /// Degenerate distribution: all mass at zero offset.
    pub fn delta() -> Self {
        Self {
            offsets: vec![0.0],
            probabilities: vec![1.0],
        }
    }

    /// Symmetric discretization of a zero-mean Gaussian with standard
    /// deviation `sigma` (m) on `points` nodes spanning ±4σ.
    pub fn gaussian(sigma: f64, points: usize) -> Result<Self, RoughnessError> {
        if !(sigma > 0.0) || points < 2 {
            return Err(RoughnessError::InvalidDistribution(
                "gaussian needs sigma > 0 and >= 2 points".to_string(),
            ));
        }
        let half_width = 4.0 * sigma;
        let step = 2.0 * half_width / (points - 1) as f64;
        let offsets: Vec<f64> = (0..points).map(|i| -half_width + step * i as f64).collect();
        let probabilities = offsets
            .iter()
            .map(|d| (-0.5 * (d / sigma).powi(2)).exp())
            .collect();
        Self::new(offsets, probabilities)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn min_offset(&self) -> f64 {
        self.offsets[0]
    }

    pub fn variance(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.probabilities)
            .map(|(d, p)| d * d * p)
            .sum()
    }

    /// Parse topography CSV: either raw heights (`height_nm` column) or a
    /// binned distribution (`height_nm,probability`).
    pub fn from_csv(text: &str, bin_count: usize) -> Result<Self, RoughnessError> {
        let mut data_lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = data_lines
            .next()
            .ok_or_else(|| RoughnessError::Parse("empty file".to_string()))?;
        let binned = match header {
            "height_nm" => false,
            "height_nm,probability" => true,
            other => {
                return Err(RoughnessError::Parse(format!(
                    "expected header \"height_nm\" or \"height_nm,probability\", got \"{other}\""
                )))
            }
        };
        let mut heights = Vec::new();
        let mut probs = Vec::new();
        for line in data_lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| RoughnessError::Parse(format!("bad number \"{s}\"")))
            };
            if binned {
                if fields.len() != 2 {
                    return Err(RoughnessError::Parse(format!("expected 2 columns in \"{line}\"")));
                }
                heights.push(num(fields[0])? * 1e-9);
                probs.push(num(fields[1])?);
            } else {
                if fields.len() != 1 {
                    return Err(RoughnessError::Parse(format!("expected 1 column in \"{line}\"")));
                }
                heights.push(num(fields[0])? * 1e-9);
            }
        }
        if binned {
            Self::new(heights, probs)
        } else {
            distribution_from_samples(&heights, bin_count)
        }
    }
}

/// Histogram of raw height samples, re-centered to zero mean. All-equal
/// samples collapse to the single-point distribution.
pub fn distribution_from_samples(
    heights: &[f64],
    bin_count: usize,
) -> Result<HeightDistribution, RoughnessError> {
    if heights.len() < 2 {
        return Err(RoughnessError::TooFewSamples(heights.len()));
    }
    if bin_count == 0 {
        return Err(RoughnessError::ZeroBins);
    }
    let min = heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(HeightDistribution::delta());
    }
    let width = (max - min) / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    let mut sums = vec![0.0; bin_count];
    for &h in heights {
        let idx = (((h - min) / width) as usize).min(bin_count - 1);
        counts[idx] += 1;
        sums[idx] += h;
    }
    // Each bin sits at the mean of its samples, which keeps low moments exact
    // for coarse binnings.
    let mut offsets = Vec::new();
    let mut probs = Vec::new();
    for i in 0..bin_count {
        if counts[i] > 0 {
            offsets.push(sums[i] / counts[i] as f64);
            probs.push(counts[i] as f64);
        }
    }
    HeightDistribution::new(offsets, probs)
}

/// Distribution of the combined deviation δ = −(h_sphere + h_plate) assuming
/// independent surfaces; re-binned when the product support grows too large.
pub fn combine(
    sphere: &HeightDistribution,
    plate: &HeightDistribution,
) -> Result<HeightDistribution, RoughnessError> {
    let mut offsets = Vec::with_capacity(sphere.offsets.len() * plate.offsets.len());
    let mut probs = Vec::with_capacity(offsets.capacity());
    for (ds, ps) in sphere.offsets.iter().zip(&sphere.probabilities) {
        for (dp, pp) in plate.offsets.iter().zip(&plate.probabilities) {
            offsets.push(-(ds + dp));
            probs.push(ps * pp);
        }
    }
    let dist = HeightDistribution::new(offsets, probs)?;
    if dist.offsets.len() > MAX_SUPPORT {
        rebin(&dist, REBIN_TO)
    } else {
        Ok(dist)
    }
}

fn rebin(dist: &HeightDistribution, bins: usize) -> Result<HeightDistribution, RoughnessError> {
    let min = dist.offsets[0];
    let max = dist.offsets[dist.offsets.len() - 1];
    if min == max {
        return Ok(HeightDistribution::delta());
    }
    let width = (max - min) / bins as f64;
    let mut probs = vec![0.0; bins];
    let mut sums = vec![0.0; bins];
    for (&d, &p) in dist.offsets.iter().zip(&dist.probabilities) {
        let idx = (((d - min) / width) as usize).min(bins - 1);
        probs[idx] += p;
        sums[idx] += p * d;
    }
    let mut offsets = Vec::new();
    let mut kept = Vec::new();
    for i in 0..bins {
        if probs[i] > 0.0 {
            offsets.push(sums[i] / probs[i]);
            kept.push(probs[i]);
        }
    }
    HeightDistribution::new(offsets, kept)
}

/// Average a force evaluator over the height distribution on the given grid.
pub fn roughness_correct<F>(
    force_fn: F,
    grid: &[f64],
    dist: &HeightDistribution,
) -> Result<ForceCurve, RoughnessError>
where
    F: Fn(f64) -> f64 + Sync,
{
    for &z in grid {
        let local = z + dist.min_offset();
        if local <= 0.0 {
            return Err(RoughnessError::Touching {
                z_m: z,
                offset_m: dist.min_offset(),
            });
        }
    }
    use rayon::prelude::*;
    let forces: Vec<f64> = grid
        .par_iter()
        .map(|&z| {
            dist.offsets
                .iter()
                .zip(&dist.probabilities)
                .map(|(d, p)| p * force_fn(z + d))
                .sum()
        })
        .collect();
    Ok(ForceCurve::new(
        grid.to_vec(),
        forces,
        None,
        CurveMetadata {
            roughness_applied: true,
            ..CurveMetadata::default()
        },
    )?)
}
