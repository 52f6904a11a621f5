use std::process::ExitCode;

use cascade_cli::config::{self, Cli, ConfigError};
use cascade_cli::exit;
use cascade_cli::output::emit_outputs;
use cascade_cli::sweep::{bound_violations, run_sweep, SweepRow};
use clap::Parser;

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn report(row: &SweepRow) {
    println!(
        "{:<21} fwhm {:>6} ps  fss {:>4} ueV  alpha_h {:>7.4}  C {}  est {:.6}  F {}  {}",
        row.pulse_shape,
        row.fwhm_ps,
        row.fss_uev,
        row.alpha_h,
        fmt_opt(row.concurrence_numeric),
        row.concurrence_full_estimate,
        fmt_opt(row.fidelity),
        row.status,
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match config::resolve(cli) {
        Ok(c) => c,
        Err(e @ ConfigError::Usage(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::USAGE);
        }
        Err(e @ ConfigError::Io(..)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::IO);
        }
    };
    let results = match run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(exit::USAGE);
        }
    };
    for r in &results {
        report(&r.row);
    }
    if let Err(e) = emit_outputs(&results, &cfg.out) {
        eprintln!("error: writing {}: {e}", cfg.out.display());
        return ExitCode::from(exit::IO);
    }

    let rows: Vec<SweepRow> = results.into_iter().map(|r| r.row).collect();
    let failed = rows.iter().filter(|r| !r.ok()).count();
    let violations = cfg.max_deviation.map(|b| bound_violations(&rows, b)).unwrap_or_default();
    if failed > 0 {
        eprintln!("{failed} of {} points failed", rows.len());
    }
    if let (Some(b), false) = (cfg.max_deviation, violations.is_empty()) {
        eprintln!("{} points deviate from the closed-form estimate by more than {b}", violations.len());
    }
    if failed > 0 || !violations.is_empty() {
        return ExitCode::from(exit::POINT_FAILURE);
    }
    ExitCode::from(exit::OK)
}
