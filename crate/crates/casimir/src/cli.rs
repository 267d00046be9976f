//! Command-line surface: six subcommands that turn a run configuration into
//! plot-ready CSV tables and text reports. Every output file carries a header
//! comment block with the config hash, units, and rule choices; re-running
//! with identical config and seed reproduces byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calibration::{
    estimate_deflection_coefficient, extract_calibration, synthesize_sweep_set, ContactPoint,
    ScanRecord, ValueWithError,
};
use crate::config::{log_grid, RunConfig, SimulateKind};
use crate::curve::{sig6, CurveMetadata, ForceCurve};
use crate::lifshitz::{difference_force, lifshitz_force, lifshitz_force_at, SpherePlateGeometry};
use crate::materials::builtin_model;
use crate::roughness::roughness_correct;
use crate::stats::{
    combine_random_systematic, confidence_band, consistency_report, mean_curve,
    student_t_random_error, theory_error, RepeatedScans,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("material: {0}")]
    Material(#[from] crate::materials::MaterialError),
    #[error("lifshitz: {0}")]
    Lifshitz(#[from] crate::lifshitz::LifshitzError),
    #[error("roughness: {0}")]
    Roughness(#[from] crate::roughness::RoughnessError),
    #[error("calibration: {0}")]
    Calibration(#[from] crate::calibration::CalibrationError),
    #[error("stats: {0}")]
    Stats(#[from] crate::stats::StatsError),
    #[error("curve: {0}")]
    Curve(#[from] crate::curve::CurveError),
    #[error("io: {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    /// Stable machine-parsable code for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "E_CONFIG",
            CliError::Material(_) => "E_MATERIAL",
            CliError::Lifshitz(_) => "E_LIFSHITZ",
            CliError::Roughness(_) => "E_ROUGHNESS",
            CliError::Calibration(_) => "E_CALIBRATION",
            CliError::Stats(_) => "E_STATS",
            CliError::Curve(_) => "E_CURVE",
            CliError::Io(..) => "E_IO",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "casimir",
    about = "Casimir force pipeline: permittivities, Lifshitz forces, roughness, \
             electrostatic calibration, and theory-experiment statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (defaults to the config's [output] directory, else ".").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for synthetic-data generation (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate ε(iξ) for the built-in material catalog.
    Permittivity(CommonArgs),
    /// Compute the sphere-plate force curve (optionally roughness-corrected).
    Force(CommonArgs),
    /// Difference of force curves for two plate materials.
    Difference(CommonArgs),
    /// Run the electrostatic calibration pipeline on synthetic sweeps.
    Calibrate(CommonArgs),
    /// Compare theory with (measured or synthetic) repeated scans.
    Compare(CommonArgs),
    /// Emit synthetic data sets (voltage sweeps or repeated force scans).
    Simulate(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Permittivity(a)
            | Command::Force(a)
            | Command::Difference(a)
            | Command::Calibrate(a)
            | Command::Compare(a)
            | Command::Simulate(a) => a,
        }
    }
}

/// Execute the parsed command; returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let args = cli.command.args();
    let cfg = RunConfig::from_file(&args.config)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(out_dir.clone(), e))?;
    let seed = args.seed.unwrap_or(0);
    match &cli.command {
        Command::Permittivity(_) => cmd_permittivity(&cfg, &out_dir),
        Command::Force(_) => cmd_force(&cfg, &out_dir),
        Command::Difference(_) => cmd_difference(&cfg, &out_dir),
        Command::Calibrate(_) => cmd_calibrate(&cfg, &out_dir, seed),
        Command::Compare(_) => cmd_compare(&cfg, &out_dir, seed),
        Command::Simulate(_) => cmd_simulate(&cfg, &out_dir, seed),
    }
}

fn header(cfg: &RunConfig, units: &str, extra: &[(&str, String)]) -> String {
    let mut h = format!("# config_sha256 = {}\n# units = {units}\n", cfg.sha256);
    for (k, v) in extra {
        let _ = writeln!(h, "# {k} = {v}");
    }
    h
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn cmd_permittivity(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let gold = builtin_model("gold_surrogate")?;
    let si_a = builtin_model("si_intrinsic_surrogate")?;
    let si_b = builtin_model("si_doped_b")?;
    let grid = log_grid(1e13, 1e18, 120);
    let mut body = String::from("xi_rad_s,eps_gold,eps_si_a,eps_si_b\n");
    for &xi in &grid {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            sig6(xi),
            sig6(gold.eps_imag_axis(xi)?),
            sig6(si_a.eps_imag_axis(xi)?),
            sig6(si_b.eps_imag_axis(xi)?)
        );
    }
    let path = out.join("permittivity.csv");
    write_file(
        &path,
        &format!(
            "{}{}",
            header(cfg, "xi:rad/s, eps:dimensionless", &[]),
            body
        ),
    )?;
    Ok(vec![path])
}

/// Theory curve per the config's geometry/materials/quadrature, with the
/// roughness average applied when enabled.
pub fn theory_curve(cfg: &RunConfig) -> Result<ForceCurve, CliError> {
    let sphere = cfg.materials.sphere.resolve()?;
    let plate = cfg.materials.plate.resolve()?;
    let geometry = SpherePlateGeometry::new(cfg.geometry.radius_m, cfg.geometry.grid())?;
    let mut curve = if cfg.roughness.enabled {
        let dist = cfg.roughness.distribution()?;
        let radius = cfg.geometry.radius_m;
        let spec = cfg.quadrature;
        let rough = roughness_correct(
            |z| lifshitz_force_at(z, radius, &sphere, &plate, &spec).unwrap_or(f64::NAN),
            geometry.separations(),
            &dist,
        )?;
        if rough.force().iter().any(|f| f.is_nan()) {
            return Err(CliError::Lifshitz(crate::lifshitz::LifshitzError::BadGrid));
        }
        rough
    } else {
        lifshitz_force(&geometry, &sphere, &plate, &cfg.quadrature)?
    };
    curve.metadata.sphere_label = cfg.materials.sphere.label();
    curve.metadata.plate_label = cfg.materials.plate.label();
    Ok(curve)
}

fn cmd_force(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let curve = theory_curve(cfg)?;
    let path = out.join("force.csv");
    write_file(
        &path,
        &format!(
            "{}{}",
            header(
                cfg,
                "z:nm, F:pN",
                &[
                    ("sphere", curve.metadata.sphere_label.clone()),
                    ("plate", curve.metadata.plate_label.clone()),
                    ("roughness", cfg.roughness.enabled.to_string()),
                ],
            ),
            curve.to_csv()
        ),
    )?;
    Ok(vec![path])
}

fn cmd_difference(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sphere = cfg.materials.sphere.resolve()?;
    let plate_a = cfg.difference.plate_a.resolve()?;
    let plate_b = cfg.difference.plate_b.resolve()?;
    let geometry = SpherePlateGeometry::new(cfg.geometry.radius_m, cfg.geometry.grid())?;
    let fa = lifshitz_force(&geometry, &sphere, &plate_a, &cfg.quadrature)?;
    let fb = lifshitz_force(&geometry, &sphere, &plate_b, &cfg.quadrature)?;
    let diff = difference_force(&fb, &fa)?;
    let path = out.join("difference.csv");
    write_file(
        &path,
        &format!(
            "{}{}",
            header(
                cfg,
                "z:nm, F:pN",
                &[
                    ("plate_a", cfg.difference.plate_a.label()),
                    ("plate_b", cfg.difference.plate_b.label()),
                ],
            ),
            diff.to_csv()
        ),
    )?;
    Ok(vec![path])
}

/// Synthetic contact points for the deflection-coefficient estimate: the
/// contact piezo position depends linearly on the contact deflection with
/// slope −m and intercept −z₀.
fn synthetic_contact_points(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<ContactPoint> {
    let cal = &cfg.calibration;
    cal.voltages()
        .iter()
        .map(|&v| {
            let s_contact = 0.2 + (v - cal.v0_volt).powi(2);
            let noise = if cal.noise_sigma > 0.0 {
                cal.noise_sigma * crate::calibration::gaussian(rng)
            } else {
                0.0
            };
            ContactPoint {
                voltage: v,
                z_piezo_contact: -(cal.m_m_per_unit * (s_contact + noise) + cal.z0_m),
                deflection_contact: s_contact,
            }
        })
        .collect()
}

fn cmd_calibrate(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let cal = &cfg.calibration;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scans = synthesize_sweep_set(
        &cal.true_params(),
        cfg.geometry.radius_m,
        &cal.voltages(),
        &cal.z_piezo_grid(),
        None,
        cal.noise_sigma,
        &mut rng,
    )?;
    let contacts = synthetic_contact_points(cfg, &mut rng);
    let m = estimate_deflection_coefficient(&contacts, cfg.statistics.confidence)?;
    let result = extract_calibration(
        &scans,
        (cal.fit_min_m, cal.fit_max_m),
        cfg.geometry.radius_m,
        m,
        cal.offset_mode,
        cfg.statistics.confidence,
    )?;

    let line = |v: ValueWithError, scale: f64| format!("{} +/- {}", sig6(v.value * scale), sig6(v.error * scale));
    let mut report = header(
        cfg,
        "V0:V, km:nN/unit, z0:nm, m:nm/unit",
        &[
            ("synthetic", "true".to_string()),
            ("confidence", format!("{}", cfg.statistics.confidence)),
        ],
    );
    let _ = writeln!(report, "v0_volt = {}", line(result.v0, 1.0));
    let _ = writeln!(report, "km_nn_per_unit = {}", line(result.km, 1e9));
    let _ = writeln!(report, "z0_nm = {}", line(result.z0, 1e9));
    let _ = writeln!(report, "m_nm_per_unit = {}", line(result.m, 1e9));
    let _ = writeln!(report, "v0_std_volt = {}", sig6(result.v0_std));
    let _ = writeln!(report, "points_used = {}", result.points_used);
    let path = out.join("calibration.txt");
    write_file(&path, &report)?;
    Ok(vec![path])
}

/// Seeded synthetic experiment: repeated scans equal to the theory curve plus
/// Gaussian noise of the configured magnitude.
fn synthetic_scans(
    cfg: &RunConfig,
    theory: &ForceCurve,
    rng: &mut ChaCha8Rng,
) -> Result<RepeatedScans, CliError> {
    let sigma = cfg.statistics.scan_noise_n;
    let rows: Vec<Vec<f64>> = (0..cfg.statistics.repetitions)
        .map(|_| {
            theory
                .force()
                .iter()
                .map(|&f| f + sigma * crate::calibration::gaussian(rng))
                .collect()
        })
        .collect();
    Ok(RepeatedScans::new(theory.z().to_vec(), rows)?)
}

fn cmd_compare(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let theory = match &cfg.compare.theory_file {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            ForceCurve::from_csv(&text)?
        }
        None => theory_curve(cfg)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (scans, scans_synthetic) = match &cfg.compare.scans_file {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            (RepeatedScans::from_csv(&text)?, false)
        }
        None => (synthetic_scans(cfg, &theory, &mut rng)?, true),
    };

    // Align theory onto the scan grid when the grids differ.
    let theory = if theory.z() == scans.z() {
        theory
    } else {
        let mut z = Vec::new();
        let mut f = Vec::new();
        for &zi in scans.z() {
            if let Some(fi) = theory.interpolate(zi) {
                z.push(zi);
                f.push(fi);
            }
        }
        ForceCurve::new(z, f, None, theory.metadata.clone())?
    };
    if theory.z() != scans.z() {
        return Err(CliError::Stats(crate::stats::StatsError::GridMismatch));
    }

    let stats = &cfg.statistics;
    let mean = mean_curve(&scans);
    let random = student_t_random_error(&scans, stats.confidence)?;
    let expt_err = combine_random_systematic(&random, stats.systematic_n, stats.combine_rule);
    let theor_err = theory_error(&theory, stats.delta_z_m, stats.optical_fraction)?;
    let band = confidence_band(
        theory.z(),
        &theor_err,
        &expt_err,
        stats.combine_rule,
        stats.confidence,
    )?;
    let report = consistency_report(&theory, &mean, &band, stats.consistency_threshold)?;

    let extras = vec![
        ("combine_rule", stats.combine_rule.name().to_string()),
        ("confidence", format!("{}", stats.confidence)),
        ("synthetic", scans_synthetic.to_string()),
    ];
    let mut body = String::from("z_nm,F_theor_pN,F_expt_pN,diff_pN,xi_pN\n");
    for i in 0..theory.len() {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            sig6(theory.z()[i] * 1e9),
            sig6(theory.force()[i] * 1e12),
            sig6(mean.force()[i] * 1e12),
            sig6((theory.force()[i] - mean.force()[i]) * 1e12),
            sig6(band.xi[i] * 1e12)
        );
    }
    let band_path = out.join("band.csv");
    write_file(
        &band_path,
        &format!("{}{}", header(cfg, "z:nm, F:pN", &extras), body),
    )?;

    let mut rep = header(cfg, "z:nm", &extras);
    let _ = writeln!(rep, "fraction_inside = {}", sig6(report.fraction_inside));
    let _ = writeln!(rep, "worst_z_nm = {}", sig6(report.worst_z * 1e9));
    let _ = writeln!(rep, "worst_ratio = {}", sig6(report.worst_ratio));
    let _ = writeln!(rep, "consistent = {}", report.consistent);
    let report_path = out.join("consistency.txt");
    write_file(&report_path, &rep)?;
    Ok(vec![band_path, report_path])
}

fn cmd_simulate(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.simulate_kind {
        SimulateKind::Sweeps => {
            let cal = &cfg.calibration;
            let scans: Vec<ScanRecord> = synthesize_sweep_set(
                &cal.true_params(),
                cfg.geometry.radius_m,
                &cal.voltages(),
                &cal.z_piezo_grid(),
                None,
                cal.noise_sigma,
                &mut rng,
            )?;
            let mut written = Vec::with_capacity(scans.len());
            let h = header(
                cfg,
                "z_piezo:nm, S_def:deflection units",
                &[("synthetic", "true".to_string())],
            );
            for (i, scan) in scans.iter().enumerate() {
                let path = out.join(format!("sweep_{i:02}.csv"));
                write_file(&path, &format!("{h}{}", scan.to_csv()))?;
                written.push(path);
            }
            Ok(written)
        }
        SimulateKind::Scans => {
            let mut theory = theory_curve(cfg)?;
            theory.metadata = CurveMetadata {
                synthetic: true,
                ..theory.metadata
            };
            let scans = synthetic_scans(cfg, &theory, &mut rng)?;
            let path = out.join("scans.csv");
            write_file(
                &path,
                &format!(
                    "{}{}",
                    header(
                        cfg,
                        "z:nm, F:pN",
                        &[
                            ("synthetic", "true".to_string()),
                            ("noise_pn", sig6(cfg.statistics.scan_noise_n * 1e12)),
                        ],
                    ),
                    scans.to_csv()
                ),
            )?;
            Ok(vec![path])
        }
    }
}
