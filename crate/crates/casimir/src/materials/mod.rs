//! Dielectric permittivities along the imaginary frequency axis.
//!
//! Models are composable: tabulated optical data turned into ε(iξ) samples by
//! the dispersion relation ([`kk::kk_transform`]), Lorentz oscillator sets,
//! free-carrier (Drude) terms derived from carrier specs, the dissipationless
//! plasma limit, and additive sums of the above. Every model evaluates to a
//! finite real value ≥ 1 at ξ > 0 and is non-increasing in ξ.

mod kk;

pub use kk::{kk_transform, LowFreqTail};

use thiserror::Error;

use crate::constants::{ev_to_rad_s, EPS0, E_CHARGE, M_ELECTRON};

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("optical data table: {0}")]
    InvalidTable(String),
    #[error("carrier spec: {0}")]
    InvalidCarrierSpec(String),
    #[error("Drude term requires relaxation > 0 when plasma frequency > 0")]
    InvalidDrudeTerm,
    #[error("permittivity evaluation requires xi >= 0, got {0}")]
    NegativeFrequency(f64),
    #[error("free-carrier permittivity diverges at xi = 0; evaluate at xi > 0")]
    ZeroFrequencyDivergence,
    #[error("dispersion integral did not converge at xi = {xi:.3e} rad/s: achieved relative error {achieved:.3e}, requested {requested:.3e}")]
    KkNotConverged {
        xi: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("xi grid must be positive and ascending")]
    InvalidXiGrid,
    #[error("unknown material \"{0}\"; known: {1}")]
    UnknownMaterial(String, String),
}

/// Tabulated complex refractive index n + ik against photon energy.
#[derive(Debug, Clone)]
pub struct OpticalDataTable {
    rows: Vec<OpticalRow>,
    source_label: String,
}

#[derive(Debug, Clone, Copy)]
pub struct OpticalRow {
    pub energy_ev: f64,
    pub n: f64,
    pub k: f64,
}

impl OpticalDataTable {
    pub fn new(rows: Vec<OpticalRow>, source_label: impl Into<String>) -> Result<Self, MaterialError> {
        if rows.len() < 2 {
            return Err(MaterialError::InvalidTable(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        for pair in rows.windows(2) {
            if !(pair[1].energy_ev > pair[0].energy_ev) {
                return Err(MaterialError::InvalidTable(format!(
                    "photon energies must be strictly increasing ({} then {})",
                    pair[0].energy_ev, pair[1].energy_ev
                )));
            }
        }
        for r in &rows {
            if !(r.energy_ev > 0.0) || !r.energy_ev.is_finite() {
                return Err(MaterialError::InvalidTable(format!(
                    "photon energy must be positive, got {}",
                    r.energy_ev
                )));
            }
            if !(r.n > 0.0) || r.k < 0.0 || !r.n.is_finite() || !r.k.is_finite() {
                return Err(MaterialError::InvalidTable(format!(
                    "need n > 0 and k >= 0, got n={} k={} at {} eV",
                    r.n, r.k, r.energy_ev
                )));
            }
        }
        Ok(Self {
            rows,
            source_label: source_label.into(),
        })
    }

    /// Parse the plain-text interchange format: three columns
    /// (photon_energy_eV, n, k), comma- or whitespace-separated, lines starting
    /// with '#' ignored.
    pub fn parse(text: &str, source_label: impl Into<String>) -> Result<Self, MaterialError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 3 {
                return Err(MaterialError::InvalidTable(format!(
                    "line {}: expected 3 columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64, MaterialError> {
                s.parse::<f64>().map_err(|_| {
                    MaterialError::InvalidTable(format!("line {}: bad number \"{}\"", lineno + 1, s))
                })
            };
            rows.push(OpticalRow {
                energy_ev: parse(fields[0])?,
                n: parse(fields[1])?,
                k: parse(fields[2])?,
            });
        }
        Self::new(rows, source_label)
    }

    pub fn rows(&self) -> &[OpticalRow] {
        &self.rows
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// Angular frequencies (rad/s) of the table rows.
    pub fn omegas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| ev_to_rad_s(r.energy_ev)).collect()
    }
}

/// Free-carrier parameters of a doped sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierSpec {
    /// Carrier density, m⁻³.
    pub density: f64,
    /// Effective mass in units of the electron mass.
    pub effective_mass_ratio: f64,
    /// Resistivity, Ω·m.
    pub resistivity: f64,
}

impl CarrierSpec {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if self.density < 0.0 || !self.density.is_finite() {
            return Err(MaterialError::InvalidCarrierSpec(format!(
                "density must be >= 0, got {}",
                self.density
            )));
        }
        if !(self.effective_mass_ratio > 0.0) {
            return Err(MaterialError::InvalidCarrierSpec(format!(
                "effective mass ratio must be > 0, got {}",
                self.effective_mass_ratio
            )));
        }
        if !(self.resistivity > 0.0) {
            return Err(MaterialError::InvalidCarrierSpec(format!(
                "resistivity must be > 0, got {}",
                self.resistivity
            )));
        }
        Ok(())
    }
}

/// Drude plasma frequency and relaxation parameter, rad/s.
#[derive(Debug, Clone, Copy)]
pub struct DrudeTerm {
    plasma_frequency: f64,
    relaxation: f64,
}

impl DrudeTerm {
    pub fn new(plasma_frequency: f64, relaxation: f64) -> Result<Self, MaterialError> {
        if plasma_frequency < 0.0 || (plasma_frequency > 0.0 && !(relaxation > 0.0)) {
            return Err(MaterialError::InvalidDrudeTerm);
        }
        Ok(Self {
            plasma_frequency,
            relaxation,
        })
    }

    pub fn plasma_frequency(&self) -> f64 {
        self.plasma_frequency
    }

    pub fn relaxation(&self) -> f64 {
        self.relaxation
    }
}

/// ωp = e√n / √(ε₀ m*) and γ = ε₀ ρ ωp².
///
/// Zero carrier density yields the empty Drude term (ωp = γ = 0).
pub fn drude_from_carriers(spec: &CarrierSpec) -> Result<DrudeTerm, MaterialError> {
    spec.validate()?;
    if spec.density == 0.0 {
        return DrudeTerm::new(0.0, 0.0);
    }
    let mass = spec.effective_mass_ratio * M_ELECTRON;
    let wp = E_CHARGE * (spec.density / (EPS0 * mass)).sqrt();
    let gamma = EPS0 * spec.resistivity * wp * wp;
    DrudeTerm::new(wp, gamma)
}

/// One Lorentz oscillator; on the imaginary axis it contributes
/// strength · ω₀² / (ω₀² + ξ² + damping·ξ).
#[derive(Debug, Clone, Copy)]
pub struct Oscillator {
    pub strength: f64,
    pub resonance: f64,
    pub damping: f64,
}

/// ε(iξ) sampled on a fixed grid, as produced by the dispersion transform.
#[derive(Debug, Clone)]
pub struct TabulatedEps {
    xi: Vec<f64>,
    eps: Vec<f64>,
    source_label: String,
}

impl TabulatedEps {
    pub fn new(xi: Vec<f64>, eps: Vec<f64>, source_label: impl Into<String>) -> Result<Self, MaterialError> {
        if xi.len() != eps.len() || xi.is_empty() {
            return Err(MaterialError::InvalidXiGrid);
        }
        if xi[0] <= 0.0 || xi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MaterialError::InvalidXiGrid);
        }
        Ok(Self {
            xi,
            eps,
            source_label: source_label.into(),
        })
    }

    pub fn xi_grid(&self) -> &[f64] {
        &self.xi
    }

    pub fn samples(&self) -> &[f64] {
        &self.eps
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// Log-log interpolation of ε − 1; ξ⁻² extrapolation above the grid,
    /// clamped below it.
    fn eval(&self, xi: f64) -> f64 {
        let chi_last = self.eps[self.eps.len() - 1] - 1.0;
        let n = self.xi.len();
        if xi <= self.xi[0] {
            return self.eps[0];
        }
        if xi >= self.xi[n - 1] {
            let ratio = self.xi[n - 1] / xi;
            return 1.0 + chi_last.max(0.0) * ratio * ratio;
        }
        let hi = self.xi.partition_point(|&x| x < xi).min(n - 1);
        let lo = hi - 1;
        let chi_lo = self.eps[lo] - 1.0;
        let chi_hi = self.eps[hi] - 1.0;
        if chi_lo <= 0.0 || chi_hi <= 0.0 {
            // Degenerate (vacuum-like) samples; fall back to linear.
            let f = (xi - self.xi[lo]) / (self.xi[hi] - self.xi[lo]);
            return self.eps[lo] + f * (self.eps[hi] - self.eps[lo]);
        }
        let f = (xi.ln() - self.xi[lo].ln()) / (self.xi[hi].ln() - self.xi[lo].ln());
        1.0 + (chi_lo.ln() + f * (chi_hi.ln() - chi_lo.ln())).exp()
    }
}

/// Composable model of ε(iξ).
#[derive(Debug, Clone)]
pub enum PermittivityModel {
    Tabulated(TabulatedEps),
    Oscillators(Vec<Oscillator>),
    Drude(DrudeTerm),
    /// Dissipationless free-electron limit ε = 1 + ωp²/ξ² (ideal-metal surrogate).
    Plasma { plasma_frequency: f64 },
    Sum(Vec<PermittivityModel>),
}

impl PermittivityModel {
    /// Evaluate ε(iξ). ξ = 0 is permitted only for models without a
    /// free-carrier term.
    pub fn eps_imag_axis(&self, xi: f64) -> Result<f64, MaterialError> {
        if xi < 0.0 || !xi.is_finite() {
            return Err(MaterialError::NegativeFrequency(xi));
        }
        Ok(1.0 + self.susceptibility(xi)?)
    }

    /// ε(iξ) − 1 (the additive part under `Sum`).
    fn susceptibility(&self, xi: f64) -> Result<f64, MaterialError> {
        match self {
            PermittivityModel::Tabulated(t) => Ok(t.eval(xi) - 1.0),
            PermittivityModel::Oscillators(set) => Ok(set
                .iter()
                .map(|o| {
                    o.strength * o.resonance * o.resonance
                        / (o.resonance * o.resonance + xi * xi + o.damping * xi)
                })
                .sum()),
            PermittivityModel::Drude(d) => {
                if d.plasma_frequency == 0.0 {
                    return Ok(0.0);
                }
                if xi == 0.0 {
                    return Err(MaterialError::ZeroFrequencyDivergence);
                }
                Ok(d.plasma_frequency * d.plasma_frequency / (xi * (xi + d.relaxation)))
            }
            PermittivityModel::Plasma { plasma_frequency } => {
                if *plasma_frequency == 0.0 {
                    return Ok(0.0);
                }
                if xi == 0.0 {
                    return Err(MaterialError::ZeroFrequencyDivergence);
                }
                Ok(plasma_frequency * plasma_frequency / (xi * xi))
            }
            PermittivityModel::Sum(parts) => {
                let mut chi = 0.0;
                for p in parts {
                    chi += p.susceptibility(xi)?;
                }
                Ok(chi)
            }
        }
    }

    /// True when the model contains a free-carrier (Drude or plasma) term,
    /// i.e. diverges at ξ = 0.
    pub fn has_free_carriers(&self) -> bool {
        match self {
            PermittivityModel::Drude(d) => d.plasma_frequency > 0.0,
            PermittivityModel::Plasma { plasma_frequency } => *plasma_frequency > 0.0,
            PermittivityModel::Sum(parts) => parts.iter().any(|p| p.has_free_carriers()),
            _ => false,
        }
    }
}

/// Sample-b carrier parameters (lower-resistivity doped silicon).
pub fn sample_b_carriers() -> CarrierSpec {
    CarrierSpec {
        density: 3.2e26,             // 3.2e20 cm^-3
        effective_mass_ratio: 0.26,
        resistivity: 6.7e-6,         // 6.7e-4 Ohm cm
    }
}

/// Gold Drude surrogate; defaults ωp = 9.0 eV, γ = 0.035 eV.
pub fn gold_surrogate(plasma_ev: f64, relaxation_ev: f64) -> Result<PermittivityModel, MaterialError> {
    Ok(PermittivityModel::Drude(DrudeTerm::new(
        ev_to_rad_s(plasma_ev),
        ev_to_rad_s(relaxation_ev),
    )?))
}

/// Intrinsic-silicon surrogate: two undamped oscillators, static limit 11.66.
pub fn si_intrinsic_surrogate() -> PermittivityModel {
    PermittivityModel::Oscillators(vec![
        Oscillator {
            strength: 10.4,
            resonance: 6.6e15,
            damping: 0.0,
        },
        Oscillator {
            strength: 0.26,
            resonance: 2.7e16,
            damping: 0.0,
        },
    ])
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "gold_surrogate",
    "si_intrinsic_surrogate",
    "si_doped_b",
    "ideal_metal",
];

/// Named model catalog.
pub fn builtin_model(name: &str) -> Result<PermittivityModel, MaterialError> {
    match name {
        "gold_surrogate" => gold_surrogate(9.0, 0.035),
        "si_intrinsic_surrogate" => Ok(si_intrinsic_surrogate()),
        "si_doped_b" => {
            let drude = drude_from_carriers(&sample_b_carriers())?;
            Ok(PermittivityModel::Sum(vec![
                si_intrinsic_surrogate(),
                PermittivityModel::Drude(drude),
            ]))
        }
        "ideal_metal" => Ok(PermittivityModel::Plasma {
            plasma_frequency: ev_to_rad_s(1.0e5),
        }),
        other => Err(MaterialError::UnknownMaterial(
            other.to_string(),
            BUILTIN_NAMES.join(", "),
        )),
    }
}
