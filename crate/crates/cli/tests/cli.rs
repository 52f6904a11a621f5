use std::fs;
use std::path::Path;
use std::process::Command;

use cascade_cli::config::{Mode, RunConfig};
use cascade_cli::output::{csv_string, emit_outputs, json_string};
use cascade_cli::sweep::{run_single, run_sweep, Point, SweepRow, FIELDS};

const HEADER: &str = "fwhm_ps,fss_uev,alpha_h,theta_rad,concurrence_numeric,concurrence_full_estimate,concurrence_c0,fidelity,pair_yield_b,pair_yield_x,method,runtime_ms,pulse_shape,status";

fn cascade() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = cascade().args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn initial_value_row(fss: f64) -> SweepRow {
    let cfg = RunConfig { mode: Mode::InitialValue, omit_timing: true, ..RunConfig::default() };
    run_single(&cfg, &Point { fwhm: 0.0, fss, alpha_h: 1.0, shape: None }).row
}

fn read_rows(dir: &Path) -> Vec<SweepRow> {
    serde_json::from_str(&fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap()
}

#[test]
fn header_matches_row_fields() {
    assert_eq!(FIELDS.join(","), HEADER);
    let csv = csv_string(&[]).unwrap();
    assert_eq!(csv, format!("{HEADER}\n"));
}

#[test]
fn one_row_gives_two_lines() {
    let csv = csv_string(&[initial_value_row(0.0)]).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
}

#[test]
fn json_round_trip_is_bitwise() {
    let rows = vec![initial_value_row(0.0), initial_value_row(1.5), initial_value_row(3.0)];
    let back: Vec<SweepRow> = serde_json::from_str(&json_string(&rows).unwrap()).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        let bits = |r: &SweepRow| {
            [
                Some(r.fwhm_ps),
                Some(r.fss_uev),
                Some(r.alpha_h),
                r.theta_rad,
                r.concurrence_numeric,
                Some(r.concurrence_full_estimate),
                Some(r.concurrence_c0),
                r.fidelity,
                r.pair_yield_b,
                r.pair_yield_x,
                Some(r.runtime_ms),
            ]
            .map(|x| x.map(f64::to_bits))
        };
        assert_eq!(bits(a), bits(b));
        assert_eq!(a, b);
    }
    let text = csv_string(&rows).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let from_csv: Vec<SweepRow> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(from_csv, rows);
}

#[test]
fn concurrence_fields_in_range() {
    let cfg = RunConfig { fwhm: vec![2.0, 6.0], fss_uev: vec![0.0, 3.0], omit_timing: true, ..RunConfig::default() };
    for r in run_sweep(&cfg).unwrap() {
        let row = r.row;
        assert!(row.ok(), "{}", row.status);
        for c in [row.concurrence_numeric.unwrap(), row.concurrence_full_estimate, row.concurrence_c0] {
            assert!((0.0..=1.0 + 1e-9).contains(&c), "{c}");
        }
        let m = r.matrix.unwrap();
        let tr: f64 = (0..4).map(|i| m.0[i][i].re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
    }
}

#[test]
fn emits_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { mode: Mode::InitialValue, alpha_h: vec![1.0], omit_timing: true, ..RunConfig::default() };
    let results = run_sweep(&cfg).unwrap();
    emit_outputs(&results, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), HEADER);
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(read_rows(dir.path()).len(), 3);
    let matrices: Vec<_> = fs::read_dir(dir.path().join("matrices")).unwrap().collect();
    assert_eq!(matrices.len(), 3);
    let first = fs::read_dir(dir.path().join("matrices")).unwrap().next().unwrap().unwrap().path();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(first).unwrap()).unwrap();
    let m = v["matrix"].as_array().unwrap();
    assert_eq!(m.len(), 4);
    assert!(m.iter().all(|row| row.as_array().unwrap().iter().all(|z| z.as_array().unwrap().len() == 2)));
    let svg = fs::read_to_string(dir.path().join("fig2.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["--no-such-flag"]).0, 1);
    assert_eq!(run(&["--mode", "sideways"]).0, 1);
    assert_eq!(run(&["--fwhm-grid", "5:1:1"]).0, 1);
    assert_eq!(run(&["--fwhm", "1", "--fwhm-grid", "1:3:1"]).0, 1);
    assert_eq!(run(&["--threads", "0"]).0, 1);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["--fwhm", "1,2,3", "--fss-uev", "0,3", "--polarization", "H,D", "--omit-timing"];
    let mut args_a: Vec<&str> = common.to_vec();
    let pa = a.path().to_str().unwrap();
    let pb = b.path().to_str().unwrap();
    args_a.extend(["--threads", "1", "--out", pa]);
    let mut args_b: Vec<&str> = common.to_vec();
    args_b.extend(["--threads", "4", "--out", pb]);
    assert_eq!(run(&args_a).0, 0);
    assert_eq!(run(&args_b).0, 0);
    for f in ["sweep.csv", "sweep.json", "fig2.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rows = read_rows(a.path());
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.runtime_ms == 0.0 && r.ok()));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(&cfg, format!("mode = initial-value\nfss-uev = 3\nout = {}\n", out.display())).unwrap();
    let (code, _, err) = run(&["--config", cfg.to_str().unwrap(), "--fss-uev", "0,1.5"]);
    assert_eq!(code, 0, "{err}");
    let rows = read_rows(&out);
    assert_eq!(rows.iter().map(|r| r.fss_uev).collect::<Vec<_>>(), vec![0.0, 1.5]);
    assert!(rows.iter().all(|r| r.pulse_shape == "none"));
}

#[test]
fn failed_point_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, err) = run(&[
        "--fwhm", "2,400", "--fss-uev", "0", "--polarization", "H", "--theta", "1", "--t-max", "2000", "--out", out,
    ]);
    assert_eq!(code, 2, "{err}");
    let rows = read_rows(dir.path());
    assert!(rows[0].ok());
    assert!(rows[1].status.starts_with("failed"));
    assert_eq!(rows[1].concurrence_numeric, None);
}

#[test]
fn regression_bound_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let base = ["--fwhm", "4", "--fss-uev", "0", "--polarization", "H", "--out", out];
    let mut tight = base.to_vec();
    tight.extend(["--max-deviation", "0"]);
    assert_eq!(run(&tight).0, 2);
    let mut loose = base.to_vec();
    loose.extend(["--max-deviation", "0.01"]);
    assert_eq!(run(&loose).0, 0);
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&["--mode", "initial-value", "--out", blocker.to_str().unwrap()]).0, 3);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["--config", missing.to_str().unwrap()]).0, 3);
}
