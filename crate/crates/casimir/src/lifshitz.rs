//! Zero-temperature Lifshitz force for a sphere above a plate.
//!
//! The force at separation z is
//!
//!   F(z) = (ħR/2π) ∫₀^∞ k⊥ dk⊥ ∫₀^∞ dξ Σ_{TM,TE} ln[1 − r⁽¹⁾ r⁽²⁾ e^{−2zq}]
//!
//! with q² = k⊥² + ξ²/c² and the Fresnel coefficients at imaginary frequency.
//! Integration uses the dimensionless variables t = 2zξ/c and y = 2zq, in
//! which the integrand damps as e^{−y} and both cutoffs are conservative:
//!
//!   F(z) = ħRc/(16π z³) ∫₀^{t_max} dt ∫_t^{y_max} dy  y Σ ln[1 − r r e^{−y}].

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{C, HBAR};
use crate::curve::{CurveMetadata, ForceCurve};
use crate::materials::PermittivityModel;
use crate::quad;

#[derive(Debug, Error)]
pub enum LifshitzError {
    #[error("sphere radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("separation grid must be positive and ascending")]
    BadGrid,
    #[error("quadrature spec: {0}")]
    BadQuadratureSpec(String),
    #[error("reflection coefficient needs eps >= 1 on the imaginary axis, got {0}")]
    EpsBelowOne(f64),
    #[error("reflection coefficient undefined at xi = 0, k_perp = 0")]
    ZeroWavevector,
    #[error(
        "force quadrature did not converge at z = {z_m:.4e} m: achieved relative error {achieved:.3e}, requested {requested:.3e}"
    )]
    NotConverged {
        z_m: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("material: {0}")]
    Material(#[from] crate::materials::MaterialError),
    #[error("curve: {0}")]
    Curve(#[from] crate::curve::CurveError),
    #[error("force difference requires overlapping separation grids")]
    DisjointGrids,
}

/// Sphere radius and the separations at which forces are evaluated.
#[derive(Debug, Clone)]
pub struct SpherePlateGeometry {
    radius: f64,
    separations: Vec<f64>,
    pfa_questionable: bool,
}

impl SpherePlateGeometry {
    pub fn new(radius: f64, separations: Vec<f64>) -> Result<Self, LifshitzError> {
        if !(radius > 0.0) {
            return Err(LifshitzError::BadRadius(radius));
        }
        if separations.is_empty()
            || separations[0] <= 0.0
            || separations.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(LifshitzError::BadGrid);
        }
        let max_z = separations[separations.len() - 1];
        Ok(Self {
            radius,
            separations,
            pfa_questionable: max_z / radius > 0.01,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn separations(&self) -> &[f64] {
        &self.separations
    }

    /// Set when max(z)/R exceeds 0.01 and the proximity approximation is suspect.
    pub fn pfa_questionable(&self) -> bool {
        self.pfa_questionable
    }
}

/// Integration controls for the double quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    /// Outer cutoff: ξ_max = factor · c/(2z), i.e. t_max = factor.
    pub xi_cutoff_factor: f64,
    /// Inner cutoff on y = 2zq.
    pub y_cutoff: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(
        relative_tolerance: f64,
        xi_cutoff_factor: f64,
        y_cutoff: f64,
        max_subdivisions: usize,
    ) -> Result<Self, LifshitzError> {
        if !(relative_tolerance > 0.0 && relative_tolerance <= 1e-2) {
            return Err(LifshitzError::BadQuadratureSpec(format!(
                "relative tolerance must be in (0, 1e-2], got {relative_tolerance}"
            )));
        }
        if !(xi_cutoff_factor > 10.0) || !(y_cutoff > 10.0) {
            return Err(LifshitzError::BadQuadratureSpec(
                "cutoffs must exceed 10".to_string(),
            ));
        }
        if max_subdivisions == 0 {
            return Err(LifshitzError::BadQuadratureSpec(
                "max_subdivisions must be positive".to_string(),
            ));
        }
        Ok(Self {
            relative_tolerance,
            xi_cutoff_factor,
            y_cutoff,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-6,
            xi_cutoff_factor: 50.0,
            y_cutoff: 60.0,
            max_subdivisions: 4000,
        }
    }
}

/// TM (∥) Fresnel coefficient at imaginary frequency:
/// r = (εq − k)/(εq + k), q² = k⊥² + ξ²/c², k² = k⊥² + εξ²/c².
pub fn reflection_tm(eps: f64, xi: f64, k_perp: f64) -> Result<f64, LifshitzError> {
    check_reflection_args(eps, xi, k_perp)?;
    let q = (k_perp * k_perp + xi * xi / (C * C)).sqrt();
    let k = (k_perp * k_perp + eps * xi * xi / (C * C)).sqrt();
    Ok((eps * q - k) / (eps * q + k))
}

/// TE (⊥) Fresnel coefficient at imaginary frequency: r = (q − k)/(q + k).
pub fn reflection_te(eps: f64, xi: f64, k_perp: f64) -> Result<f64, LifshitzError> {
    check_reflection_args(eps, xi, k_perp)?;
    let q = (k_perp * k_perp + xi * xi / (C * C)).sqrt();
    let k = (k_perp * k_perp + eps * xi * xi / (C * C)).sqrt();
    Ok((q - k) / (q + k))
}

fn check_reflection_args(eps: f64, xi: f64, k_perp: f64) -> Result<(), LifshitzError> {
    if eps < 1.0 || !eps.is_finite() {
        return Err(LifshitzError::EpsBelowOne(eps));
    }
    if xi == 0.0 && k_perp == 0.0 {
        return Err(LifshitzError::ZeroWavevector);
    }
    Ok(())
}

/// Both coefficients in the scaled variables (t = 2zξ/c, y = 2zq):
/// s = √(y² + (ε−1)t²), r_TM = (εy − s)/(εy + s), r_TE = (y − s)/(y + s).
#[inline]
fn reflections_scaled(eps: f64, t: f64, y: f64) -> (f64, f64) {
    let s = (y * y + (eps - 1.0) * t * t).sqrt();
    ((eps * y - s) / (eps * y + s), (y - s) / (y + s))
}

/// Σ_{TM,TE} ln(1 − r⁽¹⁾r⁽²⁾ e^{−y}) for one (t, y) node.
#[inline]
fn log_terms(eps1: f64, eps2: f64, t: f64, y: f64) -> f64 {
    let (tm1, te1) = reflections_scaled(eps1, t, y);
    let (tm2, te2) = reflections_scaled(eps2, t, y);
    let damp = (-y).exp();
    (1.0 - tm1 * tm2 * damp).ln() + (1.0 - te1 * te2 * damp).ln()
}

/// Dimensionless double integral ∫₀^{t_max} dt ∫_t^{y_max} dy y Σ ln(...);
/// the force is this times ħRc/(16π z³).
fn reduced_integral(
    sphere: &PermittivityModel,
    plate: &PermittivityModel,
    z: f64,
    quad_spec: &QuadratureSpec,
) -> Result<f64, LifshitzError> {
    let xi_scale = C / (2.0 * z);
    let inner_tol = quad_spec.relative_tolerance * 0.1;
    let map_err = |e: quad::QuadFailure| LifshitzError::NotConverged {
        z_m: z,
        achieved: e.achieved,
        requested: e.requested,
    };

    let outer = |t: f64| {
        let xi = t * xi_scale;
        let eps1 = sphere
            .eps_imag_axis(xi)
            .expect("quadrature nodes are interior, xi > 0");
        let eps2 = plate
            .eps_imag_axis(xi)
            .expect("quadrature nodes are interior, xi > 0");
        quad::integrate(
            &|y: f64| y * log_terms(eps1, eps2, t, y),
            t,
            quad_spec.y_cutoff,
            inner_tol,
            quad_spec.max_subdivisions,
        )
        // Inner failure at one node: keep the best estimate; the outer error
        // control rejects the point if it matters.
        .map_or_else(|e| e.value, |r| r.value)
    };

    quad::integrate(
        &outer,
        0.0,
        quad_spec.xi_cutoff_factor,
        quad_spec.relative_tolerance,
        quad_spec.max_subdivisions,
    )
    .map(|r| r.value)
    .map_err(map_err)
}

/// Single-point sphere-plate Lifshitz force (N, negative = attractive).
pub fn lifshitz_force_at(
    z: f64,
    radius: f64,
    sphere: &PermittivityModel,
    plate: &PermittivityModel,
    quad_spec: &QuadratureSpec,
) -> Result<f64, LifshitzError> {
    if !(radius > 0.0) {
        return Err(LifshitzError::BadRadius(radius));
    }
    if !(z > 0.0) {
        return Err(LifshitzError::BadGrid);
    }
    let reduced = reduced_integral(sphere, plate, z, quad_spec)?;
    Ok(HBAR * radius * C / (16.0 * PI * z * z * z) * reduced)
}

/// Lifshitz force over a separation grid; grid points run in parallel and the
/// result is independent of evaluation order for a fixed quadrature spec.
pub fn lifshitz_force(
    geometry: &SpherePlateGeometry,
    sphere: &PermittivityModel,
    plate: &PermittivityModel,
    quad_spec: &QuadratureSpec,
) -> Result<ForceCurve, LifshitzError> {
    let forces: Result<Vec<f64>, LifshitzError> = geometry
        .separations()
        .par_iter()
        .map(|&z| lifshitz_force_at(z, geometry.radius(), sphere, plate, quad_spec))
        .collect();
    Ok(ForceCurve::new(
        geometry.separations().to_vec(),
        forces?,
        None,
        CurveMetadata {
            quadrature_note: format!(
                "rel_tol={:.1e} t_max={} y_max={}",
                quad_spec.relative_tolerance, quad_spec.xi_cutoff_factor, quad_spec.y_cutoff
            ),
            ..CurveMetadata::default()
        },
    )?)
}

/// Closed-form perfect-reflector limit −π³ħcR/(360 z³).
pub fn ideal_metal_force(radius: f64, z: f64) -> f64 {
    assert!(z > 0.0, "separation must be positive");
    assert!(radius >= 0.0, "radius must be non-negative");
    -PI.powi(3) * HBAR * C * radius / (360.0 * z * z * z)
}

/// Pointwise F_b − F_a. Identical grids are used directly; otherwise curve `a`
/// is interpolated onto the overlapping part of `b`'s grid. Errors, when both
/// present, combine in quadrature.
pub fn difference_force(b: &ForceCurve, a: &ForceCurve) -> Result<ForceCurve, LifshitzError> {
    let same_grid = b.len() == a.len()
        && b.z()
            .iter()
            .zip(a.z())
            .all(|(&zb, &za)| (zb - za).abs() <= 1e-12 * zb.abs().max(za.abs()));

    let (z, diff, err): (Vec<f64>, Vec<f64>, Option<Vec<f64>>) = if same_grid {
        let diff = b.force().iter().zip(a.force()).map(|(fb, fa)| fb - fa).collect();
        let err = match (b.error(), a.error()) {
            (Some(eb), Some(ea)) => Some(
                eb.iter()
                    .zip(ea)
                    .map(|(x, y)| (x * x + y * y).sqrt())
                    .collect(),
            ),
            _ => None,
        };
        (b.z().to_vec(), diff, err)
    } else {
        let mut z = Vec::new();
        let mut diff = Vec::new();
        for (i, &zb) in b.z().iter().enumerate() {
            if let Some(fa) = a.interpolate(zb) {
                z.push(zb);
                diff.push(b.force()[i] - fa);
            }
        }
        if z.is_empty() {
            return Err(LifshitzError::DisjointGrids);
        }
        (z, diff, None)
    };

    Ok(ForceCurve::new(
        z,
        diff,
        err,
        CurveMetadata {
            sphere_label: b.metadata.sphere_label.clone(),
            plate_label: format!(
                "({}) - ({})",
                b.metadata.plate_label, a.metadata.plate_label
            ),
            ..CurveMetadata::default()
        },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::builtin_model;
    use approx::assert_relative_eq;

    #[test]
    fn reflection_vacuum_is_zero() {
        assert_eq!(reflection_tm(1.0, 1e15, 1e7).unwrap(), 0.0);
        assert_eq!(reflection_te(1.0, 1e15, 1e7).unwrap(), 0.0);
    }

    #[test]
    fn reflection_ideal_metal_limit() {
        let tm = reflection_tm(1e12, 1e15, 1e7).unwrap();
        let te = reflection_te(1e12, 1e15, 1e7).unwrap();
        assert!(tm > 0.999, "tm = {tm}");
        assert!(te < -0.999, "te = {te}");
    }

    #[test]
    fn reflection_closed_form_case() {
        // eps = 2, k_perp = xi/c: q = sqrt(2) xi/c, k = sqrt(3) xi/c
        let xi = 1e15;
        let k_perp = xi / C;
        let expect = (2.0 * 2f64.sqrt() - 3f64.sqrt()) / (2.0 * 2f64.sqrt() + 3f64.sqrt());
        assert_relative_eq!(
            reflection_tm(2.0, xi, k_perp).unwrap(),
            expect,
            max_relative = 1e-12
        );
        let expect_te = (2f64.sqrt() - 3f64.sqrt()) / (2f64.sqrt() + 3f64.sqrt());
        assert_relative_eq!(
            reflection_te(2.0, xi, k_perp).unwrap(),
            expect_te,
            max_relative = 1e-12
        );
        // Ranges: r_TM in [0,1), r_TE in (-1,0]
        assert!((0.0..1.0).contains(&reflection_tm(5.0, xi, 3e6).unwrap()));
        assert!((-1.0..=0.0).contains(&reflection_te(5.0, xi, 3e6).unwrap()));
    }

    #[test]
    fn reflection_domain_errors() {
        assert!(matches!(
            reflection_tm(0.5, 1e15, 1e7),
            Err(LifshitzError::EpsBelowOne(_))
        ));
        assert!(matches!(
            reflection_te(2.0, 0.0, 0.0),
            Err(LifshitzError::ZeroWavevector)
        ));
    }

    #[test]
    fn ideal_metal_closed_form() {
        let f = ideal_metal_force(100.9e-6, 100e-9);
        assert_relative_eq!(f, -2.75e-10, max_relative = 2e-3);
        // z^-3 scaling and degenerate radius
        assert_relative_eq!(
            ideal_metal_force(100.9e-6, 200e-9),
            f / 8.0,
            max_relative = 1e-12
        );
        assert_eq!(ideal_metal_force(0.0, 100e-9), 0.0);
    }

    #[test]
    fn plasma_pair_approaches_ideal_metal() {
        let metal = builtin_model("ideal_metal").unwrap();
        let spec = QuadratureSpec::default();
        let z = 100e-9;
        let f = lifshitz_force_at(z, 100.9e-6, &metal, &metal, &spec).unwrap();
        assert_relative_eq!(f, ideal_metal_force(100.9e-6, z), max_relative = 2e-3);
    }

    #[test]
    fn geometry_flags_pfa_validity() {
        let ok = SpherePlateGeometry::new(100.9e-6, vec![60e-9, 100e-9]).unwrap();
        assert!(!ok.pfa_questionable());
        let wide = SpherePlateGeometry::new(100.9e-6, vec![60e-9, 2e-6]).unwrap();
        assert!(wide.pfa_questionable());
        assert!(SpherePlateGeometry::new(-1.0, vec![60e-9]).is_err());
        assert!(SpherePlateGeometry::new(1e-4, vec![60e-9, 50e-9]).is_err());
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(1e-6, 50.0, 60.0, 100).is_ok());
        assert!(QuadratureSpec::new(0.1, 50.0, 60.0, 100).is_err());
        assert!(QuadratureSpec::new(1e-6, 5.0, 60.0, 100).is_err());
        assert!(QuadratureSpec::new(1e-6, 50.0, 60.0, 0).is_err());
    }

    #[test]
    fn difference_identical_curves_is_zero() {
        let gold = builtin_model("gold_surrogate").unwrap();
        let si = builtin_model("si_intrinsic_surrogate").unwrap();
        let geom = SpherePlateGeometry::new(100.9e-6, vec![80e-9, 100e-9]).unwrap();
        let spec = QuadratureSpec {
            relative_tolerance: 1e-4,
            ..QuadratureSpec::default()
        };
        let c = lifshitz_force(&geom, &gold, &si, &spec).unwrap();
        let d = difference_force(&c, &c).unwrap();
        assert!(d.force().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn difference_power_law_arithmetic() {
        let z: Vec<f64> = (0..20).map(|i| (60.0 + 5.0 * i as f64) * 1e-9).collect();
        let a_amp = 2.4e-34;
        let b_amp = 3.1e-34;
        let fa: Vec<f64> = z.iter().map(|&z| -a_amp / (z * z * z)).collect();
        let fb: Vec<f64> = z.iter().map(|&z| -b_amp / (z * z * z)).collect();
        let ca = ForceCurve::new(z.clone(), fa, None, CurveMetadata::default()).unwrap();
        let cb = ForceCurve::new(z.clone(), fb, None, CurveMetadata::default()).unwrap();
        let d = difference_force(&cb, &ca).unwrap();
        for (i, &zi) in z.iter().enumerate() {
            assert_relative_eq!(
                d.force()[i],
                -(b_amp - a_amp) / (zi * zi * zi),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn difference_disjoint_grids_errors() {
        let ca = ForceCurve::new(
            vec![60e-9, 70e-9],
            vec![-1e-12, -2e-12],
            None,
            CurveMetadata::default(),
        )
        .unwrap();
        let cb = ForceCurve::new(
            vec![200e-9, 300e-9],
            vec![-1e-12, -2e-12],
            None,
            CurveMetadata::default(),
        )
        .unwrap();
        assert!(matches!(
            difference_force(&cb, &ca),
            Err(LifshitzError::DisjointGrids)
        ));
    }

    #[test]
    fn difference_combines_errors_in_quadrature() {
        let ca = ForceCurve::new(
            vec![60e-9, 70e-9],
            vec![-1e-12, -2e-12],
            Some(vec![3e-12, 3e-12]),
            CurveMetadata::default(),
        )
        .unwrap();
        let cb = ForceCurve::new(
            vec![60e-9, 70e-9],
            vec![-4e-12, -5e-12],
            Some(vec![4e-12, 4e-12]),
            CurveMetadata::default(),
        )
        .unwrap();
        let d = difference_force(&cb, &ca).unwrap();
        assert_relative_eq!(d.error().unwrap()[0], 5e-12, max_relative = 1e-12);
    }
}
