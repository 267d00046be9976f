//! Physical constants (SI, 2018 CODATA exact values where defined).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 2.997_924_58e8;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Electron mass, kg.
pub const M_ELECTRON: f64 = 9.109_383_701_5e-31;

/// Angular frequency (rad/s) corresponding to a photon energy in eV.
pub fn ev_to_rad_s(energy_ev: f64) -> f64 {
    energy_ev * E_CHARGE / HBAR
}
