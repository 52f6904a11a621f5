//! End-to-end acceptance gate. Prints one line per criterion and exits
//! non-zero when a criterion's outcome differs from the expectation below.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use cascade_cli::config::{Mode, RunConfig};
use cascade_cli::sweep::{run_single, run_sweep, Point, PointResult};
use cascade_core::entanglement::{concurrence, concurrence_x_oracle};
use cascade_core::linalg::{c, eigh4, Mat4, C64};
use cascade_core::{Method, PulseShape, PulseSpec, QdParams, State4, TimeGrid, TwoPhotonMatrix};
use rand::{Rng, SeedableRng};

/// Criteria that currently fail at their stated tolerance. They still print
/// FAIL; a pass here makes the gate fail so the list gets updated.
const KNOWN_RED: &[u8] = &[4, 7];

const HBAR: f64 = 0.6582119569;
const GAMMA_X: f64 = 0.005;
const GAMMA_B: f64 = 0.010;

fn c0_oracle(delta_uev: f64) -> f64 {
    let r = delta_uev * 1e-3 / (HBAR * GAMMA_X);
    1.0 / (1.0 + r * r).sqrt()
}

fn f_oracle(fwhm: f64) -> f64 {
    let x = GAMMA_B * fwhm;
    x / 8.0 * (-x / 4.0).exp()
}

fn full_estimate_oracle(delta_uev: f64, fwhm: f64, alpha_h: f64) -> f64 {
    let g = (1.0 - 2.0 * alpha_h * alpha_h).powi(2);
    let f = f_oracle(fwhm);
    c0_oracle(delta_uev) * (1.0 - f * (1.0 + g)) - f * (1.0 - g)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn numeric(r: &PointResult) -> f64 {
    r.row.concurrence_numeric.unwrap_or_else(|| panic!("point failed: {}", r.row.status))
}

fn find(rows: &[PointResult], fss: f64, alpha_h: f64, fwhm: f64) -> &PointResult {
    rows.iter()
        .find(|r| r.row.fss_uev == fss && (r.row.alpha_h - alpha_h).abs() < 1e-9 && r.row.fwhm_ps == fwhm)
        .expect("sweep point present")
}

fn initial_value(fss: f64) -> (f64, f64) {
    let cfg = RunConfig { mode: Mode::InitialValue, omit_timing: true, ..RunConfig::default() };
    let t = Instant::now();
    let r = run_single(&cfg, &Point { fwhm: 0.0, fss, alpha_h: 1.0, shape: None });
    (numeric(&r), t.elapsed().as_secs_f64())
}

fn criterion_1() -> Outcome {
    let (cn, secs) = initial_value(0.0);
    outcome((cn - 1.0).abs() < 1e-3 && secs < 1.0, format!("C = {cn:.6}, {secs:.3} s"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (fss, quoted) in [(1.5, 0.910), (3.0, 0.739)] {
        let (cn, _) = initial_value(fss);
        let want = c0_oracle(fss);
        pass &= (cn / want - 1.0).abs() < 0.01 && (cn / quoted - 1.0).abs() < 0.01;
        detail.push(format!("δ={fss}: C = {cn:.5} vs {want:.5}"));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 5.0;
    outcome(pass, format!("{}, {secs:.3} s", detail.join("; ")))
}

fn criterion_3() -> Outcome {
    let cfg = RunConfig { omit_timing: true, ..RunConfig::default() };
    let t = Instant::now();
    let r = run_single(&cfg, &Point { fwhm: 10.0, fss: 0.0, alpha_h: 1.0, shape: Some(PulseShape::Gaussian) });
    let secs = t.elapsed().as_secs_f64();
    let cn = numeric(&r);
    outcome((cn - 0.975).abs() <= 0.005 && secs < 60.0, format!("C = {cn:.5} at 10 ps, {secs:.2} s"))
}

fn criterion_4(sweep: &[PointResult], fwhm: &[f64]) -> Outcome {
    let mut worst: (f64, f64) = (0.0, 0.0);
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for &w in fwhm {
        let cn = numeric(find(sweep, 0.0, 1.0, w));
        let dev = (cn - (1.0 - 2.0 * f_oracle(w))).abs();
        if dev > worst.0 {
            worst = (dev, w);
        }
        monotone &= cn <= prev;
        prev = cn;
    }
    outcome(
        worst.0 < 0.01 && monotone,
        format!("max |C − (1−2f)| = {:.5} at {} ps, monotone = {monotone}", worst.0, worst.1),
    )
}

fn criterion_5(sweep: &[PointResult], fwhm: &[f64]) -> Outcome {
    let worst = fwhm
        .iter()
        .map(|&w| (numeric(find(sweep, 0.0, 1.0, w)) - numeric(find(sweep, 0.0, FRAC_1_SQRT_2, w))).abs())
        .fold(0.0, f64::max);
    outcome(worst < 1e-3, format!("max |C(H) − C(D)| = {worst:.2e}"))
}

fn criterion_6(sweep: &[PointResult], fwhm: &[f64]) -> Outcome {
    let mut worst_dev = 0.0f64;
    let mut ordered = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for fss in [1.5, 3.0] {
        for &w in fwhm {
            let ch = numeric(find(sweep, fss, 1.0, w));
            let cd = numeric(find(sweep, fss, FRAC_1_SQRT_2, w));
            worst_dev = worst_dev
                .max((ch - full_estimate_oracle(fss, w, 1.0)).abs())
                .max((cd - full_estimate_oracle(fss, w, FRAC_1_SQRT_2)).abs());
            if w >= 5.0 {
                ordered &= ch >= cd;
                let ratio = (ch - cd) / (f_oracle(w) * (1.0 - c0_oracle(fss)));
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
    }
    outcome(
        worst_dev < 0.02 && ordered && lo >= 0.5 && hi <= 2.0,
        format!("max |C − estimate| = {worst_dev:.5}; C(H) ≥ C(D): {ordered}; gap ratio in [{lo:.3}, {hi:.3}]"),
    )
}

fn leakage(m: &Mat4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if i != j && i + j != 3 {
                worst = worst.max(m.0[i][j].norm());
            }
        }
    }
    worst
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig { omit_timing: true, ..RunConfig::default() };
    let point = |alpha_h| Point { fwhm: 10.0, fss: 0.0, alpha_h, shape: Some(PulseShape::Gaussian) };
    let h = run_single(&cfg, &point(1.0)).matrix.expect("H point");
    let d = run_single(&cfg, &point(FRAC_1_SQRT_2)).matrix.expect("D point");
    let re = |m: &Mat4, i: usize| m.0[i][i].re;
    let (lh, ld) = (leakage(&h), leakage(&d));
    let h_pops = re(&h, 1) + re(&h, 2);
    let h_corner = h.0[0][3].norm();
    let d_equal = (re(&d, 1) - re(&d, 2)).abs() < 1e-3 && re(&d, 1) > 0.0;
    let d_corner = (re(&d, 0) - d.0[0][3].norm()).abs();
    let pass = lh < 1e-4 && ld < 1e-4 && h_pops < 1e-3 && h_corner < 0.5 && d_equal && d_corner < 1e-3;
    outcome(
        pass,
        format!(
            "leakage H {lh:.1e}, D {ld:.1e}; H: ρHV,HV+ρVH,VH = {h_pops:.1e}, |ρHH,VV| = {h_corner:.4}; \
             D: ρHV,HV = {:.5}, ρVH,VH = {:.5}, |ρHH,HH − |ρHH,VV|| = {d_corner:.1e}",
            re(&d, 1),
            re(&d, 2)
        ),
    )
}

fn criterion_8() -> Outcome {
    let grid: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
    let cfg = RunConfig { fwhm: grid, fss_uev: vec![0.0], alpha_h: vec![1.0], omit_timing: true, ..RunConfig::default() };
    let rows = run_sweep(&cfg).expect("pool");
    let nb: Vec<f64> = rows.iter().map(|r| r.row.pair_yield_b.expect("point ok")).collect();
    let (lo, hi) = nb.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    outcome(lo >= 0.9 && hi <= 1.1, format!("biexciton photons in [{lo:.4}, {hi:.4}] over 2..20 ps"))
}

fn criterion_9(gauss: &[PointResult], fwhm: &[f64]) -> Outcome {
    let cfg = RunConfig {
        fwhm: fwhm.to_vec(),
        fss_uev: vec![0.0],
        alpha_h: vec![1.0],
        shapes: vec![PulseShape::SmoothedRectangular],
        omit_timing: true,
        ..RunConfig::default()
    };
    let rect = run_sweep(&cfg).expect("pool");
    let mut worst = (0.0f64, 0.0);
    for r in &rect {
        let d = (numeric(r) - numeric(find(gauss, 0.0, 1.0, r.row.fwhm_ps))).abs();
        if d > worst.0 {
            worst = (d, r.row.fwhm_ps);
        }
    }
    outcome(worst.0 < 0.01, format!("max |ΔC| = {:.5} at {} ps", worst.0, worst.1))
}

fn random_x_matrix(rng: &mut impl Rng) -> Mat4 {
    let p: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>());
    let tr: f64 = p.iter().sum();
    let d = p.map(|x| x / tr);
    let mut m = Mat4::from_diag(d);
    let outer = C64::from_polar(rng.gen::<f64>() * (d[0] * d[3]).sqrt(), rng.gen::<f64>() * 6.3);
    let inner = C64::from_polar(rng.gen::<f64>() * (d[1] * d[2]).sqrt(), rng.gen::<f64>() * 6.3);
    m.0[0][3] = outer;
    m.0[3][0] = outer.conj();
    m.0[1][2] = inner;
    m.0[2][1] = inner.conj();
    m
}

fn random_density_matrix(rng: &mut impl Rng) -> Mat4 {
    let a = Mat4(std::array::from_fn(|_| std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))));
    let m = a * a.adjoint();
    m.scale_re(1.0 / m.trace().re)
}

fn criterion_10() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20260101);
    let mut parts = Vec::new();
    let mut pass = true;

    let oracle_gap = (0..1000)
        .map(|_| {
            let m = TwoPhotonMatrix::from_normalized(random_x_matrix(&mut rng));
            (concurrence(&m).unwrap() - concurrence_x_oracle(&m).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    pass &= oracle_gap < 1e-9;
    parts.push(format!("Wootters vs X oracle {oracle_gap:.1e}"));

    let bell = Mat4::projector(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
    let werner_gap = (0..=100)
        .map(|k| {
            let p = k as f64 / 100.0;
            let m = bell.scale_re(p) + Mat4::identity().scale_re((1.0 - p) / 4.0);
            let got = concurrence(&TwoPhotonMatrix::from_normalized(m)).unwrap();
            (got - ((3.0 * p - 1.0) / 2.0).max(0.0)).abs()
        })
        .fold(0.0, f64::max);
    pass &= werner_gap < 1e-9;
    parts.push(format!("Werner {werner_gap:.1e}"));

    let base = RunConfig {
        fwhm: vec![4.0, 10.0],
        fss_uev: vec![0.0, 3.0],
        alpha_h: vec![1.0, FRAC_1_SQRT_2],
        omit_timing: true,
        ..RunConfig::default()
    };
    let fast = run_sweep(&base).expect("pool");
    let slow = run_sweep(&RunConfig { method: Method::BruteForce, ..base }).expect("pool");
    let route_gap = fast
        .iter()
        .zip(&slow)
        .map(|(a, b)| a.matrix.expect("spectral point").max_abs_diff(&b.matrix.expect("brute-force point")))
        .fold(0.0, f64::max);
    pass &= route_gap < 1e-4;
    parts.push(format!("spectral vs brute-force {route_gap:.1e}"));

    let mut violations = 0;
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let p = QdParams::default()
            .with_fss(rng.gen_range(0.0..8.0))
            .with_rates(rng.gen_range(0.001..0.02), rng.gen_range(0.001..0.03));
        let shape = if rng.gen() { PulseShape::Gaussian } else { PulseShape::SmoothedRectangular };
        let pulse = PulseSpec { shape, ..PulseSpec::gaussian(rng.gen_range(0.5..3.0), rng.gen_range(0.0..14.0)) }
            .with_alpha_h(rng.gen_range(-1.0..=1.0));
        let rho = random_density_matrix(&mut rng);
        let grid = TimeGrid::new(0.0, pulse.support(3.0).1 + rng.gen_range(0.0..50.0));
        let traj = cascade_core::propagator::evolve(&p, &pulse, &State4(rho), &grid).unwrap();
        let m = traj.final_state().matrix();
        let tr = (m.trace() - c(1.0, 0.0)).norm();
        let herm = m.hermiticity_error();
        let neg = -eigh4(m).0[0];
        worst = [worst[0].max(tr), worst[1].max(herm), worst[2].max(neg)];
        if tr >= 1e-10 || herm >= 1e-12 || neg > 1e-9 {
            violations += 1;
        }
    }
    pass &= violations == 0;
    parts.push(format!(
        "propagation invariants {violations}/1000 violations (trace {:.0e}, herm {:.0e}, min eig {:.0e})",
        worst[0], worst[1], -worst[2]
    ));
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = RunConfig { omit_timing: true, ..RunConfig::default() };
    let fwhm = cfg.fwhm.clone();
    let sweep = run_sweep(&cfg).expect("pool");
    for r in &sweep {
        assert!(r.row.ok(), "sweep point failed: {:?}", r.row);
    }

    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "prepared-biexciton Bell limit", criterion_1()),
        (2, "C0 regression", criterion_2()),
        (3, "headline concurrence at 10 ps", criterion_3()),
        (4, "zero-splitting FWHM curve", criterion_4(&sweep, &fwhm)),
        (5, "polarization equivalence at zero splitting", criterion_5(&sweep, &fwhm)),
        (6, "finite-splitting estimate tracking", criterion_6(&sweep, &fwhm)),
        (7, "density-matrix signatures", criterion_7()),
        (8, "pair yield", criterion_8()),
        (9, "pulse-shape robustness", criterion_9(&sweep, &fwhm)),
        (10, "oracle and property suites", criterion_10()),
    ];

    let mut unexpected = 0;
    for (id, name, o) in &results {
        let known = KNOWN_RED.contains(id);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, known) {
            (false, true) => " (known)",
            (true, true) => " (expected FAIL; update KNOWN_RED)",
            _ => "",
        };
        if o.pass == known {
            unexpected += 1;
        }
        println!("criterion {id:>2} {verdict}{note} {name}: {}", o.detail);
    }
    let passed = results.iter().filter(|(_, _, o)| o.pass).count();
    println!("acceptance: {passed}/{} passed, {unexpected} unexpected, {:.1} s", results.len(), start.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
