//! `sweep.csv`, `sweep.json`, per-point matrices and the concurrence figure.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use cascade_core::Mat4;
use serde::Serialize;

use crate::sweep::{sig12, PointResult, SweepRow, FIELDS};

pub fn csv_string(rows: &[SweepRow]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(FIELDS)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    String::from_utf8(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn json_string(rows: &[SweepRow]) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(rows)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct MatrixFile<'a> {
    fwhm_ps: f64,
    fss_uev: f64,
    alpha_h: f64,
    pulse_shape: &'a str,
    basis: [&'static str; 4],
    matrix: [[[f64; 2]; 4]; 4],
}

fn nested_pairs(m: &Mat4) -> [[[f64; 2]; 4]; 4] {
    m.0.map(|row| row.map(|z| [sig12(z.re), sig12(z.im)]))
}

/// Stable file name for the matrix of row `index`.
pub fn matrix_file_name(index: usize, row: &SweepRow) -> String {
    format!(
        "{index:04}_{}_fwhm{}_fss{}_ah{}.json",
        row.pulse_shape, row.fwhm_ps, row.fss_uev, row.alpha_h
    )
}

pub fn emit_outputs(results: &[PointResult], out: &Path) -> io::Result<()> {
    let rows: Vec<SweepRow> = results.iter().map(|r| r.row.clone()).collect();
    let matrices = out.join("matrices");
    fs::create_dir_all(&matrices)?;
    fs::write(out.join("sweep.csv"), csv_string(&rows)?)?;
    fs::write(out.join("sweep.json"), json_string(&rows)?)?;
    for (i, r) in results.iter().enumerate() {
        let Some(m) = &r.matrix else { continue };
        let file = MatrixFile {
            fwhm_ps: r.row.fwhm_ps,
            fss_uev: r.row.fss_uev,
            alpha_h: r.row.alpha_h,
            pulse_shape: &r.row.pulse_shape,
            basis: ["HH", "HV", "VH", "VV"],
            matrix: nested_pairs(m),
        };
        let mut text = serde_json::to_string(&file)?;
        text.push('\n');
        fs::write(matrices.join(matrix_file_name(i, &r.row)), text)?;
    }
    fs::write(out.join("fig2.svg"), svg(&rows))?;
    Ok(())
}

const COLORS: [&str; 8] = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Concurrence against FWHM: markers and a solid line for the numerics, a
/// dashed line for the closed-form estimate, one colour per series.
pub fn svg(rows: &[SweepRow]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 220.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let mut series: Vec<(String, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let key = format!("δ={} μeV, αH={:.3}, {}", r.fss_uev, r.alpha_h, r.pulse_shape);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => series.push((key, vec![r])),
        }
    }
    let x_max = rows.iter().map(|r| r.fwhm_ps).fold(1.0f64, f64::max);
    let y_min = rows
        .iter()
        .flat_map(|r| [r.concurrence_numeric.unwrap_or(1.0), r.concurrence_full_estimate])
        .fold(1.0f64, f64::min);
    let y_lo = ((y_min - 0.02) * 20.0).floor() / 20.0;
    let y_lo = y_lo.clamp(0.0, 0.95);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - (y - y_lo) / (1.0 - y_lo));

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let x = x_max * k as f64 / 5.0;
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#, sx(x), top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.1}</text>"#, sx(x), top + ph + 20.0, x);
    }
    for k in 0..=5 {
        let y = y_lo + (1.0 - y_lo) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/>"#, left - 5.0, sy(y), left);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#, left - 8.0, sy(y) + 4.0, y);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">FWHM (ps)</text>"#, left + pw / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">concurrence</text>"#, top + ph / 2.0);

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let numeric: Vec<(f64, f64)> =
            pts.iter().filter_map(|r| r.concurrence_numeric.map(|c| (r.fwhm_ps, c))).collect();
        let estimate: Vec<(f64, f64)> = pts.iter().map(|r| (r.fwhm_ps, r.concurrence_full_estimate)).collect();
        let poly = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="6 4"/>"#, poly(&estimate));
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, poly(&numeric));
        for &(x, y) in &numeric {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = w - right + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{label}</text>"#, lx + 25.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
