use std::f64::consts::FRAC_1_SQRT_2;

use cascade_core::calibration::{calibrate_pi_area, CalibrationOptions};
use cascade_core::entanglement::concurrence;
use cascade_core::linalg::{c, Mat2};
use cascade_core::tomography::analyze;
use cascade_core::{PulseSpec, QdParams, TomographyConfig};

fn calibrated(p: &QdParams, fwhm: f64) -> PulseSpec {
    let template = PulseSpec::gaussian(fwhm, 0.0);
    let cal = calibrate_pi_area(p, &template, &CalibrationOptions::default()).unwrap();
    assert!(!cal.endpoint_touch, "fwhm {fwhm}");
    template.with_area(cal.area)
}

#[test]
fn halving_the_pulse_step_leaves_concurrence_unchanged() {
    let p = QdParams::default().with_fss(1.5);
    let pulse = calibrated(&p, 6.0);
    let coarse = TomographyConfig::default();
    let fine = coarse.with_dt_pulse(coarse.dt_pulse / 2.0);
    let a = concurrence(&analyze(&p, &pulse, &coarse).unwrap().normalized).unwrap();
    let b = concurrence(&analyze(&p, &pulse, &fine).unwrap().normalized).unwrap();
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
}

/// At zero splitting a diagonal pulse is a horizontal one seen in the
/// rotated exciton basis, so both photons rotate by the same `U`.
#[test]
fn diagonal_drive_is_rotated_horizontal_drive() {
    let p = QdParams::default();
    let pulse = calibrated(&p, 6.0);
    let cfg = TomographyConfig::default();
    let h = analyze(&p, &pulse, &cfg).unwrap().normalized;
    let d = analyze(&p, &pulse.with_alpha_h(FRAC_1_SQRT_2), &cfg).unwrap().normalized;
    let s = FRAC_1_SQRT_2;
    let u = Mat2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0));
    let rotated = h.transformed(&u.kron(&u));
    assert!(rotated.entries().max_abs_diff(d.entries()) < 1e-4);
    assert!((concurrence(&h).unwrap() - concurrence(&d).unwrap()).abs() < 1e-6);
}

#[test]
fn calibrated_area_varies_smoothly() {
    let p = QdParams::default();
    let areas: Vec<f64> = (5..=8).map(|w| calibrated(&p, w as f64).area).collect();
    for pair in areas.windows(2) {
        assert!(pair[1] > pair[0]);
        assert!((pair[1] / pair[0] - 1.0).abs() < 0.15, "{pair:?}");
    }
}

#[test]
fn horizontal_drive_keeps_mixed_photons_out() {
    let p = QdParams::default();
    let out = analyze(&p, &calibrated(&p, 10.0), &TomographyConfig::default()).unwrap();
    let m = out.normalized.entries();
    assert!(m.0[1][1].re + m.0[2][2].re < 1e-3);
    assert!(m.0[0][3].norm() < 0.5);
    assert!(out.normalized.off_x_leakage() < 1e-10);
    assert!((out.yields.biexciton - 1.0).abs() < 0.1);
}
