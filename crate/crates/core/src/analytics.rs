//! Closed-form concurrence estimates for the two-photon resonant cascade.
//!
//! These are the regression baselines for the full numerics. Estimates are
//! never clamped here; clamping is a reporting concern.

use core::f64::consts::PI;

use crate::units::{uev_to_mev, HBAR};

/// Inputs shared by every estimate in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticInputs {
    /// Exciton decay rate (ps⁻¹).
    pub gamma_x: f64,
    /// Biexciton decay rate (ps⁻¹).
    pub gamma_b: f64,
    /// Fine-structure splitting (μeV).
    pub delta: f64,
    /// Pulse FWHM (ps).
    pub fwhm: f64,
    /// `H` component of the laser polarization.
    pub alpha_h: f64,
}

/// Concurrence of a prepared biexciton with fine-structure splitting
/// `delta` (μeV).
pub fn c0(gamma_x: f64, delta: f64) -> f64 {
    let ratio = uev_to_mev(delta) / (HBAR * gamma_x);
    1.0 / libm::sqrt(1.0 + ratio * ratio)
}

/// Fraction of biexciton photons emitted while the pulse is still on.
pub fn f_factor(gamma_b: f64, fwhm: f64) -> f64 {
    let x = gamma_b * fwhm;
    x / 8.0 * libm::exp(-x / 4.0)
}

/// Concurrence estimate at vanishing fine-structure splitting.
pub fn c_estimate_fss0(gamma_b: f64, fwhm: f64) -> f64 {
    1.0 - 2.0 * f_factor(gamma_b, fwhm)
}

/// Polarization factor; 1 for `H` or `V`, 0 for diagonal.
pub fn g_factor(alpha_h: f64) -> f64 {
    let s = 1.0 - 2.0 * alpha_h * alpha_h;
    s * s
}

/// Combined estimate for finite splitting and pulse duration.
pub fn c_full_estimate(inp: &AnalyticInputs) -> f64 {
    let c0 = c0(inp.gamma_x, inp.delta);
    let f = f_factor(inp.gamma_b, inp.fwhm);
    let g = g_factor(inp.alpha_h);
    c0 * (1.0 - f * (1.0 + g)) - f * (1.0 - g)
}

/// Expected concurrence advantage of horizontal over diagonal polarization.
pub fn delta_c_estimate(inp: &AnalyticInputs) -> f64 {
    f_factor(inp.gamma_b, inp.fwhm) * (1.0 - c0(inp.gamma_x, inp.delta))
}

/// Scale of the laser-induced exciton splitting for a two-photon π pulse
/// (meV).
pub fn stark_shift_scale(fwhm: f64) -> f64 {
    HBAR * PI / fwhm
}
