//! Unit system: meV, ps, ps⁻¹.

/// Reduced Planck constant in meV·ps.
pub const HBAR: f64 = 0.658_211_956_9;

/// μeV per meV conversion factor.
pub const UEV_TO_MEV: f64 = 1e-3;

/// Physical constants carried as a value, for callers that want them in a
/// struct rather than as free constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
}

impl PhysicalConstants {
    pub const SI_DERIVED: PhysicalConstants = PhysicalConstants { hbar: HBAR };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI_DERIVED
    }
}

#[inline]
pub fn uev_to_mev(e: f64) -> f64 {
    e * UEV_TO_MEV
}
