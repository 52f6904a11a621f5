//! Single-point pipeline and ordered parallel sweeps.

use std::time::Instant;

use cascade_core::analytics::{c0, c_full_estimate, AnalyticInputs};
use cascade_core::calibration::{calibrate_pi_area, CalibrationOptions};
use cascade_core::entanglement::{concurrence, fidelity_phi_plus};
use cascade_core::tomography::{analyze, analyze_initial_value};
use cascade_core::{Horizon, Mat4, PulseShape, PulseSpec, TomographyConfig, TomographyOutput};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};

/// One sweep point. Measured quantities are `None` when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fwhm_ps: f64,
    pub fss_uev: f64,
    pub alpha_h: f64,
    pub theta_rad: Option<f64>,
    pub concurrence_numeric: Option<f64>,
    pub concurrence_full_estimate: f64,
    pub concurrence_c0: f64,
    pub fidelity: Option<f64>,
    pub pair_yield_b: Option<f64>,
    pub pair_yield_x: Option<f64>,
    pub method: String,
    pub runtime_ms: f64,
    pub pulse_shape: String,
    pub status: String,
}

/// Column order of [`SweepRow`] in CSV output.
pub const FIELDS: [&str; 14] = [
    "fwhm_ps",
    "fss_uev",
    "alpha_h",
    "theta_rad",
    "concurrence_numeric",
    "concurrence_full_estimate",
    "concurrence_c0",
    "fidelity",
    "pair_yield_b",
    "pair_yield_x",
    "method",
    "runtime_ms",
    "pulse_shape",
    "status",
];

pub const STATUS_OK: &str = "ok";

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Zero in initial-value mode.
    pub fwhm: f64,
    pub fss: f64,
    pub alpha_h: f64,
    /// `None` in initial-value mode.
    pub shape: Option<PulseShape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub row: SweepRow,
    /// Normalized two-photon matrix in `HH, HV, VH, VV` order.
    pub matrix: Option<Mat4>,
}

/// Rounds to 12 significant digits, the precision of every emitted number.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn shape_label(shape: Option<PulseShape>) -> &'static str {
    match shape {
        Some(PulseShape::Gaussian) => "gaussian",
        Some(PulseShape::SmoothedRectangular) => "smoothed-rectangular",
        None => "none",
    }
}

/// Sweep points in emission order: shape, then splitting, then
/// polarization, then FWHM.
pub fn points(cfg: &RunConfig) -> Vec<Point> {
    let mut out = Vec::new();
    match cfg.mode {
        Mode::Tpe => {
            for &shape in &cfg.shapes {
                for &fss in &cfg.fss_uev {
                    for &alpha_h in &cfg.alpha_h {
                        for &fwhm in &cfg.fwhm {
                            out.push(Point { fwhm, fss, alpha_h, shape: Some(shape) });
                        }
                    }
                }
            }
        }
        Mode::InitialValue => {
            for &fss in &cfg.fss_uev {
                for &alpha_h in &cfg.alpha_h {
                    out.push(Point { fwhm: 0.0, fss, alpha_h, shape: None });
                }
            }
        }
    }
    out
}

pub fn tomography_config(cfg: &RunConfig) -> TomographyConfig {
    let mut t = TomographyConfig::default().with_method(cfg.method).with_dt_pulse(cfg.dt_pulse);
    t.dt_free = t.dt_free.max(cfg.dt_pulse);
    t.window = cfg.window;
    if let Some(tau) = cfg.tau_window_ps {
        t = t.with_tau_max(Horizon::Finite(tau));
    }
    if let Some(t_max) = cfg.t_max {
        t = t.with_t_max(Horizon::Finite(t_max));
    }
    t
}

struct Measured {
    theta: Option<f64>,
    out: TomographyOutput,
    concurrence: f64,
}

fn measure(cfg: &RunConfig, pt: &Point) -> Result<Measured, cascade_core::Error> {
    let p = cfg.params.with_fss(pt.fss);
    let tcfg = tomography_config(cfg);
    let (theta, out) = match pt.shape {
        None => (None, analyze_initial_value(&p, &tcfg)?),
        Some(shape) => {
            let template = PulseSpec { shape, ..PulseSpec::gaussian(pt.fwhm, 0.0) }.with_alpha_h(pt.alpha_h);
            let theta = match cfg.theta {
                Some(t) => t,
                None => {
                    let opts = CalibrationOptions { dt_pulse: cfg.dt_pulse, ..CalibrationOptions::default() };
                    calibrate_pi_area(&p, &template, &opts)?.area
                }
            };
            (Some(theta), analyze(&p, &template.with_area(theta), &tcfg)?)
        }
    };
    let concurrence = concurrence(&out.normalized)?;
    Ok(Measured { theta, out, concurrence })
}

/// Calibrate, run the tomography, and evaluate entanglement and the
/// closed-form estimates for one point.
pub fn run_single(cfg: &RunConfig, pt: &Point) -> PointResult {
    let start = Instant::now();
    let measured = measure(cfg, pt);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let inputs = AnalyticInputs {
        gamma_x: cfg.params.gamma_x,
        gamma_b: cfg.params.gamma_b,
        delta: pt.fss,
        fwhm: pt.fwhm,
        alpha_h: pt.alpha_h,
    };
    let mut row = SweepRow {
        fwhm_ps: sig12(pt.fwhm),
        fss_uev: sig12(pt.fss),
        alpha_h: sig12(pt.alpha_h),
        theta_rad: None,
        concurrence_numeric: None,
        concurrence_full_estimate: sig12(c_full_estimate(&inputs).clamp(0.0, 1.0)),
        concurrence_c0: sig12(c0(inputs.gamma_x, pt.fss).clamp(0.0, 1.0)),
        fidelity: None,
        pair_yield_b: None,
        pair_yield_x: None,
        method: cfg.method.label().to_string(),
        runtime_ms: if cfg.omit_timing { 0.0 } else { (elapsed * 1e3).round() / 1e3 },
        pulse_shape: shape_label(pt.shape).to_string(),
        status: STATUS_OK.to_string(),
    };
    if pt.shape.is_none() {
        row.method = "spectral".to_string();
    }
    match measured {
        Ok(m) => {
            row.theta_rad = m.theta.map(sig12);
            row.concurrence_numeric = Some(sig12(m.concurrence));
            row.fidelity = Some(sig12(fidelity_phi_plus(&m.out.normalized)));
            row.pair_yield_b = Some(sig12(m.out.yields.biexciton));
            row.pair_yield_x = Some(sig12(m.out.yields.exciton));
            PointResult { row, matrix: Some(*m.out.normalized.entries()) }
        }
        Err(e) => {
            row.status = format!("failed: {e}");
            PointResult { row, matrix: None }
        }
    }
}

/// Runs every point of `cfg` on a pool of `cfg.threads` workers. Results come
/// back in [`points`] order whatever the scheduling.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<PointResult>, rayon::ThreadPoolBuildError> {
    let pts = points(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    Ok(pool.install(|| pts.par_iter().map(|pt| run_single(cfg, pt)).collect()))
}

/// Indices of successful rows whose numeric concurrence is further than
/// `bound` from the closed-form estimate.
pub fn bound_violations(rows: &[SweepRow], bound: f64) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.concurrence_numeric.is_some_and(|c| (c - r.concurrence_full_estimate).abs() > bound))
        .map(|(i, _)| i)
        .collect()
}
