//! Cross-checks of the adaptive Lifshitz engine against an independent
//! fixed-grid evaluation of the same double integral, plus physical property
//! suites over the built-in materials.

use casimir::constants::{C, HBAR};
use casimir::lifshitz::{
    ideal_metal_force, lifshitz_force, lifshitz_force_at, reflection_te, reflection_tm,
    QuadratureSpec, SpherePlateGeometry,
};
use casimir::materials::{builtin_model, PermittivityModel};
use proptest::prelude::*;
use std::f64::consts::PI;

const RADIUS: f64 = 100.9e-6;

/// Independent oracle: midpoint rule in t (avoids the ξ = 0 free-carrier
/// singularity), trapezoid in y, on the reduced form
/// F = ħRc/(16πz³) ∫dt ∫_t dy · y Σ ln(1 − r₁r₂ e^(−y)).
fn fixed_grid_force(
    z: f64,
    sphere: &PermittivityModel,
    plate: &PermittivityModel,
    nt: usize,
    ny: usize,
) -> f64 {
    let (t_max, y_max) = (50.0, 60.0);
    let dt = t_max / nt as f64;
    let mut outer = 0.0;
    for j in 0..nt {
        let t = (j as f64 + 0.5) * dt;
        let xi = t * C / (2.0 * z);
        let eps1 = sphere.eps_imag_axis(xi).unwrap();
        let eps2 = plate.eps_imag_axis(xi).unwrap();
        let dy = (y_max - t) / ny as f64;
        let mut inner = 0.0;
        for i in 0..=ny {
            let y = t + i as f64 * dy;
            // y = 2zq with q² = k⊥² + ξ²/c²  =>  k⊥ = √(y² − t²)/(2z).
            let k_perp = (y * y - t * t).max(0.0).sqrt() / (2.0 * z);
            let r1_tm = reflection_tm(eps1, xi, k_perp).unwrap();
            let r2_tm = reflection_tm(eps2, xi, k_perp).unwrap();
            let r1_te = reflection_te(eps1, xi, k_perp).unwrap();
            let r2_te = reflection_te(eps2, xi, k_perp).unwrap();
            let e = (-y).exp();
            let f = y
                * ((1.0 - r1_tm * r2_tm * e).ln() + (1.0 - r1_te * r2_te * e).ln());
            let w = if i == 0 || i == ny { 0.5 } else { 1.0 };
            inner += w * f * dy;
        }
        outer += inner * dt;
    }
    HBAR * RADIUS * C / (16.0 * PI * z * z * z) * outer
}

#[test]
fn adaptive_matches_fixed_grid_oracle() {
    let gold = builtin_model("gold_surrogate").unwrap();
    let si_b = builtin_model("si_doped_b").unwrap();
    let spec = QuadratureSpec::default();
    for &z in &[60e-9, 100e-9, 150e-9] {
        let adaptive = lifshitz_force_at(z, RADIUS, &gold, &si_b, &spec).unwrap();
        let oracle = fixed_grid_force(z, &gold, &si_b, 2000, 2000);
        let rel = (adaptive / oracle - 1.0).abs();
        assert!(
            rel < 1e-3,
            "z = {} nm: adaptive {adaptive:e} vs oracle {oracle:e} (rel {rel:e})",
            z * 1e9
        );
    }
}

#[test]
fn forces_attractive_and_decaying() {
    let gold = builtin_model("gold_surrogate").unwrap();
    let spec = QuadratureSpec::default();
    for plate_name in ["si_intrinsic_surrogate", "si_doped_b", "ideal_metal"] {
        let plate = builtin_model(plate_name).unwrap();
        let grid: Vec<f64> = (0..12).map(|i| (60.0 + 15.0 * i as f64) * 1e-9).collect();
        let geom = SpherePlateGeometry::new(RADIUS, grid).unwrap();
        let curve = lifshitz_force(&geom, &gold, &plate, &spec).unwrap();
        for w in curve.force().windows(2) {
            assert!(w[0] < 0.0 && w[1] < 0.0, "{plate_name}: force not attractive");
            assert!(w[0] < w[1], "{plate_name}: |F| not decreasing in z");
        }
    }
}

#[test]
fn magnitude_bounded_by_ideal_metal() {
    let gold = builtin_model("gold_surrogate").unwrap();
    let spec = QuadratureSpec::default();
    for plate_name in ["si_intrinsic_surrogate", "si_doped_b"] {
        let plate = builtin_model(plate_name).unwrap();
        for &z in &[60e-9, 100e-9, 200e-9] {
            let f = lifshitz_force_at(z, RADIUS, &gold, &plate, &spec).unwrap();
            assert!(f.abs() < ideal_metal_force(RADIUS, z).abs());
        }
    }
}

#[test]
fn doped_plate_attracts_more_strongly() {
    let gold = builtin_model("gold_surrogate").unwrap();
    let si_a = builtin_model("si_intrinsic_surrogate").unwrap();
    let si_b = builtin_model("si_doped_b").unwrap();
    let spec = QuadratureSpec::default();
    for &z in &[60e-9, 80e-9, 100e-9, 150e-9, 250e-9] {
        let fa = lifshitz_force_at(z, RADIUS, &gold, &si_a, &spec).unwrap();
        let fb = lifshitz_force_at(z, RADIUS, &gold, &si_b, &spec).unwrap();
        assert!(fb < fa, "z = {} nm: expected |F_b| > |F_a|", z * 1e9);
    }
}

#[test]
fn tolerance_refinement_is_stable() {
    let gold = builtin_model("gold_surrogate").unwrap();
    let si_b = builtin_model("si_doped_b").unwrap();
    let loose = QuadratureSpec::new(1e-5, 50.0, 60.0, 4000).unwrap();
    let tight = QuadratureSpec::new(5e-6, 50.0, 60.0, 4000).unwrap();
    for &z in &[70e-9, 140e-9] {
        let a = lifshitz_force_at(z, RADIUS, &gold, &si_b, &loose).unwrap();
        let b = lifshitz_force_at(z, RADIUS, &gold, &si_b, &tight).unwrap();
        assert!((a / b - 1.0).abs() < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Fresnel coefficients at imaginary frequency stay in [−1, 1] and the TM
    /// one is non-negative for ε ≥ 1.
    #[test]
    fn reflection_coefficients_bounded(
        log_eps in 0.0..12.0f64,
        log_xi in 28.0..41.0f64,   // ln ξ over 1e13..8e17 rad/s
        log_k in 10.0..20.0f64,    // ln k⊥ over ~2e4..5e8 m⁻¹
    ) {
        let eps = 1.0 + log_eps.exp2();
        let xi = log_xi.exp();
        let k_perp = log_k.exp();
        let tm = reflection_tm(eps, xi, k_perp).unwrap();
        let te = reflection_te(eps, xi, k_perp).unwrap();
        prop_assert!((0.0..=1.0).contains(&tm));
        prop_assert!((-1.0..=0.0).contains(&te));
    }
}
