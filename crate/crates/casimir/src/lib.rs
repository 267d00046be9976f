//! Desk-scale reproduction of a difference-Casimir-force pipeline: imaginary-axis
//! permittivities for gold and doped/undoped silicon, the zero-temperature Lifshitz
//! sphere-plate force, roughness averaging, electrostatic calibration fits, and the
//! statistical comparison of theory against repeated force scans.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod constants;
pub mod curve;
pub mod fit;
pub mod lifshitz;
pub mod materials;
pub mod quad;
pub mod roughness;
pub mod stats;
