//! Entanglement measures of two-photon polarization states.

use crate::error::{Error, Result};
use crate::linalg::{eigh4, sqrt_psd, Mat4, C64};
use crate::tomography::TwoPhotonMatrix;

/// Slack allowed above 1 before clamping the concurrence.
const CLAMP_SLACK: f64 = 1e-9;

/// Off-X magnitude tolerated by [`concurrence_x_oracle`].
pub const X_SHAPE_TOL: f64 = 1e-10;

fn sigma_y_sigma_y() -> Mat4 {
    let mut m = Mat4::zero();
    m.0[0][3] = C64::new(-1.0, 0.0);
    m.0[1][2] = C64::new(1.0, 0.0);
    m.0[2][1] = C64::new(1.0, 0.0);
    m.0[3][0] = C64::new(-1.0, 0.0);
    m
}

/// Wootters concurrence.
///
/// The spectrum of `ρ·ρ̃` is taken from the Hermitian, positive matrix
/// `√ρ·ρ̃·√ρ`, which has the same eigenvalues and stays well behaved near
/// `C = 0`.
pub fn concurrence(m: &TwoPhotonMatrix) -> Result<f64> {
    m.validate_normalized()?;
    let rho = m.entries();
    let yy = sigma_y_sigma_y();
    let flipped = yy * rho.conj() * yy;
    let s = sqrt_psd(rho);
    let r = s * flipped * s;
    let (mu, _) = eigh4(&r);
    let mut lambda = mu.map(|x| libm::sqrt(x.max(0.0)));
    lambda.sort_by(|a, b| b.total_cmp(a));
    let c = lambda[0] - lambda[1] - lambda[2] - lambda[3];
    if c > 1.0 + CLAMP_SLACK {
        return Err(Error::NotADensityMatrix { reason: "concurrence exceeds one" });
    }
    Ok(c.clamp(0.0, 1.0))
}

/// Largest magnitude outside the diagonal and the two anti-diagonal pairs.
pub fn off_x_leakage(rho: &Mat4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if i == j || i + j == 3 {
                continue;
            }
            worst = worst.max(rho.0[i][j].norm());
        }
    }
    worst
}

/// Closed-form concurrence of an X-shaped matrix, an oracle for
/// [`concurrence`].
pub fn concurrence_x_oracle(m: &TwoPhotonMatrix) -> Result<f64> {
    let rho = m.entries();
    let leakage = off_x_leakage(rho);
    if leakage >= X_SHAPE_TOL {
        return Err(Error::NotXShaped { leakage });
    }
    let p = |i: usize| rho.0[i][i].re.max(0.0);
    let outer = rho.0[0][3].norm() - libm::sqrt(p(1) * p(2));
    let inner = rho.0[1][2].norm() - libm::sqrt(p(0) * p(3));
    Ok(2.0 * outer.max(inner).max(0.0))
}

/// Overlap `⟨Φ₊|ρ|Φ₊⟩` with `|Φ₊⟩ = (|HH⟩ + |VV⟩)/√2`.
pub fn fidelity_phi_plus(m: &TwoPhotonMatrix) -> f64 {
    let rho = m.entries();
    0.5 * (rho.0[0][0].re + rho.0[3][3].re) + rho.0[0][3].re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cexp, ONE, ZERO};

    fn phi_plus() -> TwoPhotonMatrix {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
        TwoPhotonMatrix::from_normalized(Mat4::projector(&psi))
    }

    #[test]
    fn bell_state() {
        let m = phi_plus();
        assert!((concurrence(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!((concurrence_x_oracle(&m).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity_phi_plus(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed() {
        let m = TwoPhotonMatrix::from_normalized(Mat4::identity().scale_re(0.25));
        assert!(concurrence(&m).unwrap() < 1e-12);
        assert_eq!(concurrence_x_oracle(&m).unwrap(), 0.0);
        assert!((fidelity_phi_plus(&m) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn x_matrix_closed_form_example() {
        let mut rho = Mat4::from_diag([0.5, 0.0, 0.0, 0.5]);
        rho.0[0][3] = C64::new(0.3, 0.0);
        rho.0[3][0] = C64::new(0.3, 0.0);
        let m = TwoPhotonMatrix::from_normalized(rho);
        assert!((concurrence(&m).unwrap() - 0.6).abs() < 1e-9);
        assert!((concurrence_x_oracle(&m).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn diagonal_polarization_signature() {
        let mut rho = Mat4::from_diag([0.45, 0.05, 0.05, 0.45]);
        rho.0[0][3] = C64::new(0.45, 0.0);
        rho.0[3][0] = C64::new(0.45, 0.0);
        let m = TwoPhotonMatrix::from_normalized(rho);
        assert!((concurrence_x_oracle(&m).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn dephased_bell_state_fidelity() {
        // |Φ_τ⟩ with accumulated exciton phase φ.
        let fid = |phi: f64| {
            let s = core::f64::consts::FRAC_1_SQRT_2;
            let psi = [C64::new(s, 0.0), ZERO, ZERO, cexp(C64::new(0.0, phi)) * s];
            fidelity_phi_plus(&TwoPhotonMatrix::from_normalized(Mat4::projector(&psi)))
        };
        assert!(fid(core::f64::consts::PI).abs() < 1e-15);
        assert!((fid(core::f64::consts::FRAC_PI_2) - 0.5).abs() < 1e-15);
        assert!((fid(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_input() {
        let unnormalized = TwoPhotonMatrix::from_normalized(Mat4::identity());
        assert!(concurrence(&unnormalized).is_err());
        let mut indefinite = Mat4::from_diag([0.7, -0.2, 0.3, 0.2]);
        indefinite.0[0][0] = C64::new(0.7, 0.0);
        assert!(concurrence(&TwoPhotonMatrix::from_normalized(indefinite)).is_err());
        let mut off_x = Mat4::identity().scale_re(0.25);
        off_x.0[0][1] = ONE * 0.1;
        off_x.0[1][0] = ONE * 0.1;
        assert!(matches!(
            concurrence_x_oracle(&TwoPhotonMatrix::from_normalized(off_x)),
            Err(Error::NotXShaped { .. })
        ));
    }
}
