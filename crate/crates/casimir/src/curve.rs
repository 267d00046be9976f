//! Force-vs-separation curves with provenance metadata and CSV interchange.
//!
//! Internally everything is SI (separations in m, forces in N, negative =
//! attractive); the CSV schema is `z_nm,F_pN[,err_pN]` at 6 significant
//! digits, with `#` comment lines for metadata.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve grids have mismatched lengths")]
    LengthMismatch,
    #[error("separations must be positive and ascending")]
    BadGrid,
    #[error("curve CSV: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Default)]
pub struct CurveMetadata {
    pub sphere_label: String,
    pub plate_label: String,
    pub quadrature_note: String,
    pub roughness_applied: bool,
    pub synthetic: bool,
}

#[derive(Debug, Clone)]
pub struct ForceCurve {
    z: Vec<f64>,
    force: Vec<f64>,
    error: Option<Vec<f64>>,
    pub metadata: CurveMetadata,
}

impl ForceCurve {
    pub fn new(
        z: Vec<f64>,
        force: Vec<f64>,
        error: Option<Vec<f64>>,
        metadata: CurveMetadata,
    ) -> Result<Self, CurveError> {
        if z.len() != force.len() || error.as_ref().is_some_and(|e| e.len() != z.len()) {
            return Err(CurveError::LengthMismatch);
        }
        if z.is_empty() || z[0] <= 0.0 || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CurveError::BadGrid);
        }
        Ok(Self {
            z,
            force,
            error,
            metadata,
        })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn error(&self) -> Option<&[f64]> {
        self.error.as_deref()
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Linear interpolation of the force at separation `z`; None outside the grid.
    pub fn interpolate(&self, z: f64) -> Option<f64> {
        if z < self.z[0] || z > self.z[self.z.len() - 1] {
            return None;
        }
        let hi = self.z.partition_point(|&x| x < z).clamp(1, self.z.len() - 1);
        let lo = hi - 1;
        let f = (z - self.z[lo]) / (self.z[hi] - self.z[lo]);
        Some(self.force[lo] + f * (self.force[hi] - self.force[lo]))
    }

    /// CSV body (header comments supplied by the caller).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.error.is_some() {
            out.push_str("z_nm,F_pN,err_pN\n");
        } else {
            out.push_str("z_nm,F_pN\n");
        }
        for i in 0..self.z.len() {
            let z_nm = self.z[i] * 1e9;
            let f_pn = self.force[i] * 1e12;
            match &self.error {
                Some(e) => out.push_str(&format!(
                    "{},{},{}\n",
                    sig6(z_nm),
                    sig6(f_pn),
                    sig6(e[i] * 1e12)
                )),
                None => out.push_str(&format!("{},{}\n", sig6(z_nm), sig6(f_pn))),
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CurveError> {
        let mut z = Vec::new();
        let mut force = Vec::new();
        let mut error: Option<Vec<f64>> = None;
        let mut synthetic = false;
        let mut saw_header = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                if line.contains("synthetic = true") {
                    synthetic = true;
                }
                continue;
            }
            if !saw_header {
                // column header row
                saw_header = true;
                if !line.starts_with("z_nm") {
                    return Err(CurveError::Parse(format!("unexpected header \"{line}\"")));
                }
                if line.contains("err_pN") {
                    error = Some(Vec::new());
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let want = if error.is_some() { 3 } else { 2 };
            if fields.len() != want {
                return Err(CurveError::Parse(format!(
                    "expected {want} columns, got {} in \"{line}\"",
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| CurveError::Parse(format!("bad number \"{s}\"")))
            };
            z.push(num(fields[0])? * 1e-9);
            force.push(num(fields[1])? * 1e-12);
            if let Some(err) = error.as_mut() {
                err.push(num(fields[2])? * 1e-12);
            }
        }
        ForceCurve::new(
            z,
            force,
            error,
            CurveMetadata {
                synthetic,
                ..CurveMetadata::default()
            },
        )
    }
}

/// Format with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    if mag >= 6 || mag < -4 {
        format!("{:.5e}", x)
    } else {
        format!("{:.*}", decimals, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roundtrip_with_errors() {
        let c = ForceCurve::new(
            vec![60e-9, 70e-9, 80e-9],
            vec![-400e-12, -280e-12, -200e-12],
            Some(vec![8e-12, 6e-12, 4e-12]),
            CurveMetadata::default(),
        )
        .unwrap();
        let text = format!("# comment\n{}", c.to_csv());
        let back = ForceCurve::from_csv(&text).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back.z()[i], c.z()[i], max_relative = 1e-5);
            assert_relative_eq!(back.force()[i], c.force()[i], max_relative = 1e-5);
            assert_relative_eq!(back.error().unwrap()[i], c.error().unwrap()[i], max_relative = 1e-5);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ForceCurve::new(vec![], vec![], None, CurveMetadata::default()).is_err());
        assert!(
            ForceCurve::new(vec![2e-9, 1e-9], vec![0.0, 0.0], None, CurveMetadata::default())
                .is_err()
        );
        assert!(
            ForceCurve::new(vec![1e-9], vec![0.0, 0.0], None, CurveMetadata::default()).is_err()
        );
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(61.19), "61.1900");
        assert_eq!(sig6(-402.358128), "-402.358");
        assert_eq!(sig6(0.00123456789), "0.00123457");
    }
}
