//! Run configuration: a line-oriented `[section]` / `key = value` format in
//! which every physical quantity carries an explicit unit suffix in its key
//! name. Presets `sample_a` and `sample_b` encode the full published parameter
//! sets; explicit keys override preset values. Unknown sections or keys are
//! rejected.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::OffsetMode;
use crate::constants::ev_to_rad_s;
use crate::lifshitz::QuadratureSpec;
use crate::materials::{
    builtin_model, drude_from_carriers, kk_transform, si_intrinsic_surrogate, CarrierSpec,
    LowFreqTail, OpticalDataTable, PermittivityModel,
};
use crate::roughness::HeightDistribution;
use crate::stats::CombineRule;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("line {0}: expected `[section]` or `key = value`, got \"{1}\"")]
    Syntax(usize, String),
    #[error("line {0}: unknown section [{1}]")]
    UnknownSection(usize, String),
    #[error("line {0}: unknown key \"{1}\" in section [{2}]")]
    UnknownKey(usize, String, String),
    #[error("line {0}: bad value for \"{1}\": {2}")]
    BadValue(usize, String, String),
    #[error("unknown preset \"{0}\"; known: sample_a, sample_b")]
    UnknownPreset(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("material \"{0}\" requires key \"{1}\"")]
    IncompleteMaterial(String, String),
    #[error("material: {0}")]
    Material(#[from] crate::materials::MaterialError),
    #[error("quadrature: {0}")]
    Quadrature(#[from] crate::lifshitz::LifshitzError),
    #[error("roughness: {0}")]
    Roughness(#[from] crate::roughness::RoughnessError),
    #[error("statistics: {0}")]
    Stats(#[from] crate::stats::StatsError),
}

/// How one body's permittivity is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialChoice {
    /// Catalog name: gold_surrogate, si_intrinsic_surrogate, si_doped_b,
    /// ideal_metal.
    Builtin(String),
    /// Plasma model with configurable ωp (eV).
    Plasma { wp_ev: f64 },
    /// Intrinsic-silicon surrogate plus a Drude term from carriers.
    DopedSi(CarrierSpec),
    /// Tabulated optical data transformed onto the imaginary axis.
    Table { path: PathBuf, tail: LowFreqTail },
}

impl MaterialChoice {
    pub fn resolve(&self) -> Result<PermittivityModel, ConfigError> {
        match self {
            MaterialChoice::Builtin(name) => Ok(builtin_model(name)?),
            MaterialChoice::Plasma { wp_ev } => Ok(PermittivityModel::Plasma {
                plasma_frequency: ev_to_rad_s(*wp_ev),
            }),
            MaterialChoice::DopedSi(spec) => {
                let drude = drude_from_carriers(spec)?;
                Ok(PermittivityModel::Sum(vec![
                    si_intrinsic_surrogate(),
                    PermittivityModel::Drude(drude),
                ]))
            }
            MaterialChoice::Table { path, tail } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Io(path.clone(), e))?;
                let table = OpticalDataTable::parse(&text, path.display().to_string())?;
                let grid = log_grid(1e13, 1e18, 200);
                Ok(kk_transform(&table, &grid, *tail)?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MaterialChoice::Builtin(name) => name.clone(),
            MaterialChoice::Plasma { wp_ev } => format!("plasma({wp_ev} eV)"),
            MaterialChoice::DopedSi(s) => format!("si_doped(n={:.3e} m^-3)", s.density),
            MaterialChoice::Table { path, .. } => format!("table({})", path.display()),
        }
    }
}

/// Logarithmically spaced grid, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone)]
pub struct GeometryConfig {
    pub radius_m: f64,
    pub z_min_m: f64,
    pub z_step_m: f64,
    pub z_points: usize,
}

impl GeometryConfig {
    pub fn grid(&self) -> Vec<f64> {
        (0..self.z_points)
            .map(|i| self.z_min_m + i as f64 * self.z_step_m)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MaterialsConfig {
    pub sphere: MaterialChoice,
    pub plate: MaterialChoice,
}

#[derive(Debug, Clone)]
pub struct RoughnessConfig {
    pub enabled: bool,
    pub sphere_sigma_m: f64,
    pub plate_sigma_m: f64,
    pub sphere_file: Option<PathBuf>,
    pub plate_file: Option<PathBuf>,
    /// Discretization points for Gaussian distributions.
    pub points: usize,
}

impl RoughnessConfig {
    /// Combined sphere+plate separation distribution for the force average.
    pub fn distribution(&self) -> Result<HeightDistribution, ConfigError> {
        let side = |file: &Option<PathBuf>, sigma: f64| -> Result<HeightDistribution, ConfigError> {
            if let Some(path) = file {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Io(path.clone(), e))?;
                Ok(HeightDistribution::from_csv(&text, 64)?)
            } else if sigma > 0.0 {
                Ok(HeightDistribution::gaussian(sigma, self.points)?)
            } else {
                Ok(HeightDistribution::delta())
            }
        };
        let sphere = side(&self.sphere_file, self.sphere_sigma_m)?;
        let plate = side(&self.plate_file, self.plate_sigma_m)?;
        Ok(crate::roughness::combine(&sphere, &plate)?)
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub fit_min_m: f64,
    pub fit_max_m: f64,
    pub v0_volt: f64,
    /// Force per deflection unit (N/unit).
    pub km_n_per_unit: f64,
    pub z0_m: f64,
    /// Cantilever motion per deflection unit (m/unit).
    pub m_m_per_unit: f64,
    pub m_err_m_per_unit: f64,
    pub voltage_min_volt: f64,
    pub voltage_max_volt: f64,
    pub voltage_count: usize,
    pub scan_z_min_m: f64,
    pub scan_z_max_m: f64,
    pub scan_points: usize,
    /// Gaussian noise on the deflection signal (deflection units).
    pub noise_sigma: f64,
    pub offset_mode: OffsetMode,
}

impl CalibrationConfig {
    pub fn voltages(&self) -> Vec<f64> {
        let n = self.voltage_count;
        (0..n)
            .map(|i| {
                self.voltage_min_volt
                    + (self.voltage_max_volt - self.voltage_min_volt) * i as f64
                        / (n - 1).max(1) as f64
            })
            .collect()
    }

    pub fn z_piezo_grid(&self) -> Vec<f64> {
        let n = self.scan_points;
        (0..n)
            .map(|i| {
                self.scan_z_min_m
                    + (self.scan_z_max_m - self.scan_z_min_m) * i as f64 / (n - 1).max(1) as f64
            })
            .collect()
    }

    pub fn true_params(&self) -> crate::calibration::CalParams {
        crate::calibration::CalParams {
            v0: self.v0_volt,
            km: self.km_n_per_unit,
            z0: self.z0_m,
            m: self.m_m_per_unit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatisticsConfig {
    pub confidence: f64,
    pub combine_rule: CombineRule,
    /// Constant systematic experimental error (N).
    pub systematic_n: f64,
    /// Absolute separation uncertainty feeding the theory error (m).
    pub delta_z_m: f64,
    /// Fractional theory error from optical-data variation.
    pub optical_fraction: f64,
    pub consistency_threshold: f64,
    pub repetitions: usize,
    /// Per-point Gaussian noise for synthetic force scans (N).
    pub scan_noise_n: f64,
}

#[derive(Debug, Clone)]
pub struct DifferenceConfig {
    pub plate_a: MaterialChoice,
    pub plate_b: MaterialChoice,
}

/// Inputs for the theory-experiment comparison; when a file is absent the
/// corresponding data set is generated synthetically from the rest of the
/// config (and flagged as such in all outputs).
#[derive(Debug, Clone, Default)]
pub struct CompareConfig {
    pub theory_file: Option<PathBuf>,
    pub scans_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateKind {
    /// Electrostatic voltage-sweep files (one per voltage).
    Sweeps,
    /// Repeated noisy force scans around the theory curve.
    Scans,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    pub quadrature: QuadratureSpec,
    pub roughness: RoughnessConfig,
    pub calibration: CalibrationConfig,
    pub statistics: StatisticsConfig,
    pub difference: DifferenceConfig,
    pub compare: CompareConfig,
    pub simulate_kind: SimulateKind,
    pub output_dir: Option<PathBuf>,
    /// Hex SHA-256 of the raw config text, embedded in output headers.
    pub sha256: String,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "sample_a" => Ok(Self::sample_a()),
            "sample_b" => Ok(Self::sample_b()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    /// Higher-resistivity sample: gold sphere over near-intrinsic silicon.
    pub fn sample_a() -> Self {
        RunConfig {
            geometry: GeometryConfig {
                radius_m: 100.9e-6,
                z_min_m: 61.19e-9,
                z_step_m: 0.17e-9,
                z_points: 400,
            },
            materials: MaterialsConfig {
                sphere: MaterialChoice::Builtin("gold_surrogate".to_string()),
                plate: MaterialChoice::Builtin("si_intrinsic_surrogate".to_string()),
            },
            quadrature: QuadratureSpec::default(),
            roughness: RoughnessConfig {
                enabled: false,
                sphere_sigma_m: 0.0,
                plate_sigma_m: 0.0,
                sphere_file: None,
                plate_file: None,
                points: 41,
            },
            calibration: CalibrationConfig {
                fit_min_m: 300e-9,
                fit_max_m: 2.5e-6,
                v0_volt: -0.341,
                km_n_per_unit: 1.646e-9,
                z0_m: 32.4e-9,
                m_m_per_unit: 47.8e-9,
                m_err_m_per_unit: 0.2e-9,
                voltage_min_volt: -0.712,
                voltage_max_volt: -0.008,
                voltage_count: 29,
                scan_z_min_m: 150e-9,
                scan_z_max_m: 2.8e-6,
                scan_points: 120,
                noise_sigma: 0.0,
                offset_mode: OffsetMode::FreePerPoint,
            },
            statistics: StatisticsConfig {
                confidence: 0.95,
                combine_rule: CombineRule::Quadrature,
                systematic_n: 1.2e-12,
                delta_z_m: 1.0e-9,
                optical_fraction: 0.01,
                consistency_threshold: 0.95,
                repetitions: 40,
                scan_noise_n: 8.0e-12,
            },
            difference: DifferenceConfig {
                plate_a: MaterialChoice::Builtin("si_intrinsic_surrogate".to_string()),
                plate_b: MaterialChoice::Builtin("si_doped_b".to_string()),
            },
            compare: CompareConfig::default(),
            simulate_kind: SimulateKind::Sweeps,
            output_dir: None,
            sha256: String::new(),
        }
    }

    /// Lower-resistivity (doped) sample.
    pub fn sample_b() -> Self {
        let mut cfg = Self::sample_a();
        cfg.geometry.z_min_m = 60.51e-9;
        cfg.materials.plate = MaterialChoice::Builtin("si_doped_b".to_string());
        cfg.calibration.fit_min_m = 100e-9;
        cfg.calibration.v0_volt = -0.337;
        cfg.calibration.km_n_per_unit = 1.700e-9;
        cfg.calibration.z0_m = 32.3e-9;
        cfg.calibration.m_m_per_unit = 47.9e-9;
        cfg.calibration.voltage_min_volt = -0.611;
        cfg.calibration.voltage_count = 25;
        cfg.statistics.repetitions = 39;
        cfg
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_str_named(&text, path.parent())
    }

    /// Parse config text; relative file references resolve against `base`.
    pub fn from_str_named(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, String, String, String)> = Vec::new();
        let mut section = String::new();
        let mut preset: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = name.trim().to_string();
                const SECTIONS: [&str; 10] = [
                    "geometry",
                    "materials",
                    "quadrature",
                    "roughness",
                    "calibration",
                    "statistics",
                    "difference",
                    "compare",
                    "simulate",
                    "output",
                ];
                if !SECTIONS.contains(&section.as_str()) {
                    return Err(ConfigError::UnknownSection(lineno, section));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax(lineno, line.to_string()))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if section.is_empty() && key == "preset" {
                preset = Some(value);
                continue;
            }
            if section.is_empty() {
                return Err(ConfigError::Syntax(lineno, line.to_string()));
            }
            entries.push((lineno, section.clone(), key, value));
        }

        let mut cfg = match preset.as_deref() {
            Some(name) => Self::preset(name)?,
            None => Self::sample_a(),
        };
        for (lineno, section, key, value) in entries {
            cfg.apply(lineno, &section, &key, &value, base)?;
        }
        cfg.validate_files()?;
        cfg.sha256 = hex_sha256(text.as_bytes());
        Ok(cfg)
    }

    fn apply(
        &mut self,
        lineno: usize,
        section: &str,
        key: &str,
        value: &str,
        base: Option<&Path>,
    ) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::BadValue(lineno, key.to_string(), msg);
        let f = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("not a number: \"{v}\"")))
        };
        let u = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| bad(format!("not a count: \"{v}\"")))
        };
        let b = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad(format!("not a boolean: \"{v}\""))),
        };
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match (p.is_relative(), base) {
                (true, Some(dir)) => dir.join(p),
                _ => p,
            }
        };
        let unknown = || {
            Err(ConfigError::UnknownKey(
                lineno,
                key.to_string(),
                section.to_string(),
            ))
        };
        match section {
            "geometry" => match key {
                "radius_um" => self.geometry.radius_m = f(value)? * 1e-6,
                "z_min_nm" => self.geometry.z_min_m = f(value)? * 1e-9,
                "z_step_nm" => self.geometry.z_step_m = f(value)? * 1e-9,
                "z_points" => self.geometry.z_points = u(value)?,
                _ => return unknown(),
            },
            "materials" => {
                let parse_side =
                    |current: &mut MaterialChoice, field: &str| -> Result<bool, ConfigError> {
                        match field {
                            "model" => {
                                *current = match value {
                                    "plasma" => MaterialChoice::Plasma { wp_ev: 1.0e5 },
                                    "si_doped_custom" => {
                                        MaterialChoice::DopedSi(CarrierSpec {
                                            density: 0.0,
                                            effective_mass_ratio: 0.26,
                                            resistivity: 0.0,
                                        })
                                    }
                                    name => MaterialChoice::Builtin(name.to_string()),
                                };
                                Ok(true)
                            }
                            "plasma_wp_ev" => {
                                if let MaterialChoice::Plasma { wp_ev } = current {
                                    *wp_ev = f(value)?;
                                    Ok(true)
                                } else {
                                    Err(bad("plasma_wp_ev requires model = plasma".to_string()))
                                }
                            }
                            "carrier_density_per_m3"
                            | "effective_mass_ratio"
                            | "resistivity_ohm_m" => {
                                if let MaterialChoice::DopedSi(spec) = current {
                                    match field {
                                        "carrier_density_per_m3" => spec.density = f(value)?,
                                        "effective_mass_ratio" => {
                                            spec.effective_mass_ratio = f(value)?
                                        }
                                        _ => spec.resistivity = f(value)?,
                                    }
                                    Ok(true)
                                } else {
                                    Err(bad(format!(
                                        "{field} requires model = si_doped_custom"
                                    )))
                                }
                            }
                            "table_path" => {
                                *current = MaterialChoice::Table {
                                    path: path(value),
                                    tail: LowFreqTail::Zero,
                                };
                                Ok(true)
                            }
                            "low_freq_tail" => {
                                if let MaterialChoice::Table { tail, .. } = current {
                                    *tail = match value {
                                        "zero" => LowFreqTail::Zero,
                                        "drude" => LowFreqTail::DrudeLike,
                                        other => {
                                            return Err(bad(format!(
                                                "unknown tail \"{other}\"; known: zero, drude"
                                            )))
                                        }
                                    };
                                    Ok(true)
                                } else {
                                    Err(bad(
                                        "low_freq_tail requires a preceding table_path".to_string(),
                                    ))
                                }
                            }
                            _ => Ok(false),
                        }
                    };
                if let Some(field) = key.strip_prefix("sphere_") {
                    let mut side = self.materials.sphere.clone();
                    if !parse_side(&mut side, field)? {
                        return unknown();
                    }
                    self.materials.sphere = side;
                } else if let Some(field) = key.strip_prefix("plate_") {
                    let mut side = self.materials.plate.clone();
                    if !parse_side(&mut side, field)? {
                        return unknown();
                    }
                    self.materials.plate = side;
                } else {
                    return unknown();
                }
            }
            "quadrature" => {
                let mut q = self.quadrature;
                match key {
                    "relative_tolerance" => q.relative_tolerance = f(value)?,
                    "xi_cutoff_factor" => q.xi_cutoff_factor = f(value)?,
                    "y_cutoff" => q.y_cutoff = f(value)?,
                    "max_subdivisions" => q.max_subdivisions = u(value)?,
                    _ => return unknown(),
                }
                self.quadrature = QuadratureSpec::new(
                    q.relative_tolerance,
                    q.xi_cutoff_factor,
                    q.y_cutoff,
                    q.max_subdivisions,
                )?;
            }
            "roughness" => match key {
                "enabled" => self.roughness.enabled = b(value)?,
                "sphere_sigma_nm" => self.roughness.sphere_sigma_m = f(value)? * 1e-9,
                "plate_sigma_nm" => self.roughness.plate_sigma_m = f(value)? * 1e-9,
                "sphere_file" => self.roughness.sphere_file = Some(path(value)),
                "plate_file" => self.roughness.plate_file = Some(path(value)),
                "points" => self.roughness.points = u(value)?,
                _ => return unknown(),
            },
            "calibration" => match key {
                "fit_min_nm" => self.calibration.fit_min_m = f(value)? * 1e-9,
                "fit_max_nm" => self.calibration.fit_max_m = f(value)? * 1e-9,
                "v0_volt" => self.calibration.v0_volt = f(value)?,
                "km_nn_per_unit" => self.calibration.km_n_per_unit = f(value)? * 1e-9,
                "z0_nm" => self.calibration.z0_m = f(value)? * 1e-9,
                "m_nm_per_unit" => self.calibration.m_m_per_unit = f(value)? * 1e-9,
                "m_err_nm_per_unit" => self.calibration.m_err_m_per_unit = f(value)? * 1e-9,
                "voltage_min_volt" => self.calibration.voltage_min_volt = f(value)?,
                "voltage_max_volt" => self.calibration.voltage_max_volt = f(value)?,
                "voltage_count" => self.calibration.voltage_count = u(value)?,
                "scan_z_min_nm" => self.calibration.scan_z_min_m = f(value)? * 1e-9,
                "scan_z_max_nm" => self.calibration.scan_z_max_m = f(value)? * 1e-9,
                "scan_points" => self.calibration.scan_points = u(value)?,
                "noise_sigma" => self.calibration.noise_sigma = f(value)?,
                "offset_mode" => {
                    self.calibration.offset_mode = match value {
                        "free" => OffsetMode::FreePerPoint,
                        "zero" => OffsetMode::Zero,
                        other => {
                            return Err(bad(format!(
                                "unknown offset mode \"{other}\"; known: free, zero"
                            )))
                        }
                    }
                }
                _ => return unknown(),
            },
            "statistics" => match key {
                "confidence" => {
                    let c = f(value)?;
                    if !(c > 0.0 && c < 1.0) {
                        return Err(bad(format!("confidence must be in (0, 1), got {c}")));
                    }
                    self.statistics.confidence = c;
                }
                "combine_rule" => self.statistics.combine_rule = CombineRule::parse(value)?,
                "systematic_pn" => self.statistics.systematic_n = f(value)? * 1e-12,
                "delta_z_nm" => self.statistics.delta_z_m = f(value)? * 1e-9,
                "optical_fraction" => self.statistics.optical_fraction = f(value)?,
                "consistency_threshold" => self.statistics.consistency_threshold = f(value)?,
                "repetitions" => self.statistics.repetitions = u(value)?,
                "scan_noise_pn" => self.statistics.scan_noise_n = f(value)? * 1e-12,
                _ => return unknown(),
            },
            "difference" => match key {
                "plate_a" => {
                    self.difference.plate_a = MaterialChoice::Builtin(value.to_string())
                }
                "plate_b" => {
                    self.difference.plate_b = MaterialChoice::Builtin(value.to_string())
                }
                _ => return unknown(),
            },
            "compare" => match key {
                "theory_file" => self.compare.theory_file = Some(path(value)),
                "scans_file" => self.compare.scans_file = Some(path(value)),
                _ => return unknown(),
            },
            "simulate" => match key {
                "kind" => {
                    self.simulate_kind = match value {
                        "sweeps" => SimulateKind::Sweeps,
                        "scans" => SimulateKind::Scans,
                        other => {
                            return Err(bad(format!(
                                "unknown simulate kind \"{other}\"; known: sweeps, scans"
                            )))
                        }
                    }
                }
                _ => return unknown(),
            },
            "output" => match key {
                "directory" => self.output_dir = Some(path(value)),
                _ => return unknown(),
            },
            other => return Err(ConfigError::UnknownSection(lineno, other.to_string())),
        }
        Ok(())
    }

    fn validate_files(&self) -> Result<(), ConfigError> {
        let check = |p: &Option<PathBuf>| -> Result<(), ConfigError> {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::MissingFile(p.clone()));
                }
            }
            Ok(())
        };
        check(&self.roughness.sphere_file)?;
        check(&self.roughness.plate_file)?;
        check(&self.compare.theory_file)?;
        check(&self.compare.scans_file)?;
        for side in [&self.materials.sphere, &self.materials.plate] {
            if let MaterialChoice::Table { path, .. } = side {
                if !path.exists() {
                    return Err(ConfigError::MissingFile(path.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Hex-encoded SHA-256 digest.
pub fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preset_values() {
        let a = RunConfig::sample_a();
        assert_relative_eq!(a.geometry.radius_m, 100.9e-6);
        assert_relative_eq!(a.geometry.z_min_m, 61.19e-9);
        assert_relative_eq!(a.geometry.z_step_m, 0.17e-9);
        assert_eq!(a.calibration.voltage_count, 29);
        assert_eq!(a.statistics.repetitions, 40);
        assert_relative_eq!(a.calibration.fit_min_m, 300e-9);

        let b = RunConfig::sample_b();
        assert_relative_eq!(b.geometry.z_min_m, 60.51e-9);
        assert_eq!(b.calibration.voltage_count, 25);
        assert_eq!(b.statistics.repetitions, 39);
        assert_relative_eq!(b.calibration.fit_min_m, 100e-9);
        assert_relative_eq!(b.calibration.km_n_per_unit, 1.700e-9);
        assert!(matches!(
            &b.materials.plate,
            MaterialChoice::Builtin(n) if n == "si_doped_b"
        ));

        assert!(RunConfig::preset("sample_c").is_err());
    }

    #[test]
    fn parse_overrides_and_units() {
        let text = "\
preset = sample_a

[geometry]
radius_um = 50.0   # comment after value
z_points = 10

[quadrature]
relative_tolerance = 1e-4

[statistics]
combine_rule = direct-sum
systematic_pn = 2.5
";
        let cfg = RunConfig::from_str_named(text, None).unwrap();
        assert_relative_eq!(cfg.geometry.radius_m, 50e-6);
        assert_eq!(cfg.geometry.z_points, 10);
        assert_relative_eq!(cfg.geometry.z_min_m, 61.19e-9); // preset survives
        assert_relative_eq!(cfg.quadrature.relative_tolerance, 1e-4);
        assert_eq!(cfg.statistics.combine_rule, CombineRule::DirectSum);
        assert_relative_eq!(cfg.statistics.systematic_n, 2.5e-12);
        assert_eq!(cfg.sha256.len(), 64);
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        assert!(matches!(
            RunConfig::from_str_named("[geometry]\nradius_m = 1\n", None),
            Err(ConfigError::UnknownKey(2, _, _))
        ));
        assert!(matches!(
            RunConfig::from_str_named("[geometryy]\n", None),
            Err(ConfigError::UnknownSection(1, _))
        ));
        assert!(matches!(
            RunConfig::from_str_named("[geometry]\njust a line\n", None),
            Err(ConfigError::Syntax(2, _))
        ));
        assert!(matches!(
            RunConfig::from_str_named("preset = nope\n", None),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn missing_referenced_file_rejected() {
        let text = "[roughness]\nsphere_file = /nonexistent/rough.csv\n";
        assert!(matches!(
            RunConfig::from_str_named(text, None),
            Err(ConfigError::MissingFile(_))
        ));
        let tbl = "[materials]\nplate_table_path = /nonexistent/optics.csv\n";
        assert!(matches!(
            RunConfig::from_str_named(tbl, None),
            Err(ConfigError::MissingFile(_))
        ));
    }

    #[test]
    fn material_choices_resolve() {
        let text = "\
[materials]
sphere_model = plasma
sphere_plasma_wp_ev = 1e5
plate_model = si_doped_custom
plate_carrier_density_per_m3 = 3.2e26
plate_effective_mass_ratio = 0.26
plate_resistivity_ohm_m = 6.7e-6
";
        let cfg = RunConfig::from_str_named(text, None).unwrap();
        let sphere = cfg.materials.sphere.resolve().unwrap();
        assert!(sphere.has_free_carriers());
        let plate = cfg.materials.plate.resolve().unwrap();
        let builtin = builtin_model("si_doped_b").unwrap();
        for &xi in &[1e13, 1e15, 1e17] {
            assert_relative_eq!(
                plate.eps_imag_axis(xi).unwrap(),
                builtin.eps_imag_axis(xi).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn grids_and_voltages() {
        let cfg = RunConfig::sample_a();
        let grid = cfg.geometry.grid();
        assert_eq!(grid.len(), 400);
        assert_relative_eq!(grid[1] - grid[0], 0.17e-9, max_relative = 1e-12);
        let v = cfg.calibration.voltages();
        assert_eq!(v.len(), 29);
        assert_relative_eq!(v[0], -0.712);
        assert_relative_eq!(v[28], -0.008, max_relative = 1e-12);
    }

    #[test]
    fn sha_is_stable_and_content_sensitive() {
        let a = RunConfig::from_str_named("[geometry]\nz_points = 5\n", None).unwrap();
        let b = RunConfig::from_str_named("[geometry]\nz_points = 5\n", None).unwrap();
        let c = RunConfig::from_str_named("[geometry]\nz_points = 6\n", None).unwrap();
        assert_eq!(a.sha256, b.sha256);
        assert_ne!(a.sha256, c.sha256);
    }
}
