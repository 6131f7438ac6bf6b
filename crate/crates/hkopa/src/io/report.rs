//! CSV emission for fit reports, comparison curves, and simulation cells.
//!
//! Every file starts with a schema comment line and a provenance comment
//! line, then a header row. Numbers use shortest-round-trip formatting, so
//! identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baseline::ComparisonCurve;
use crate::bench::CellResult;
use crate::fit::FitReport;
use crate::Result;

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-term fit report; `provenance` entries land on the second comment line
/// as space-separated key=value pairs.
pub fn render_fit_report(report: &FitReport, provenance: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str("# hkopa-report v1\n");
    render_provenance(&mut out, provenance, report);
    out.push_str(
        "k,a_rows,a_cols,lambda,ic_value,overall_ic,cpv,residual_fro,ic_count,report_count,stopped_by\n",
    );
    let last = report.rows.len();
    for (idx, row) in report.rows.iter().enumerate() {
        let stopped = if idx + 1 == last {
            report.stopped_by.label()
        } else {
            "none"
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.k,
            row.config.a_rows(),
            row.config.a_cols(),
            row.lambda,
            fmt_opt(row.ic_value),
            fmt_opt(row.overall_ic),
            row.cpv,
            row.residual_fro,
            row.ic_count,
            row.report_count,
            stopped,
        )
        .expect("formatting into String cannot fail");
    }
    out
}

fn render_provenance(out: &mut String, provenance: &[(String, String)], report: &FitReport) {
    out.push('#');
    for (k, v) in provenance {
        write!(out, " {k}={v}").expect("formatting into String cannot fail");
    }
    write!(
        out,
        " stopped_by={} k_hat={}",
        report.stopped_by.label(),
        report.rows.len()
    )
    .expect("formatting into String cannot fail");
    if report.refined {
        out.push_str(" refined=true");
    }
    out.push('\n');
}

pub fn write_fit_report(
    report: &FitReport,
    provenance: &[(String, String)],
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, render_fit_report(report, provenance))?;
    Ok(())
}

/// Error-versus-parameters curve for both methods.
pub fn render_comparison(curve: &ComparisonCurve, provenance: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str("# hkopa-compare v1\n");
    out.push('#');
    for (k, v) in provenance {
        write!(out, " {k}={v}").expect("formatting into String cannot fail");
    }
    if let Some(k) = curve.hkopa_stopped_at {
        write!(out, " hkopa_stopped_at={k}").expect("formatting into String cannot fail");
    }
    out.push('\n');
    out.push_str("method,terms,params,rse_clean,rse_input\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.method.label(),
            p.terms,
            p.params,
            p.rse_clean,
            p.rse_input
        )
        .expect("formatting into String cannot fail");
    }
    out
}

pub fn write_comparison(
    curve: &ComparisonCurve,
    provenance: &[(String, String)],
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, render_comparison(curve, provenance))?;
    Ok(())
}

/// Wide per-round trace of one simulation cell.
pub fn render_cell(cell: &CellResult) -> String {
    let mut out = String::new();
    out.push_str("# hkopa-bench v1\n");
    writeln!(
        out,
        "# alpha={} sigma0={} seed={}",
        cell.alpha, cell.sigma0, cell.seed
    )
    .expect("formatting into String cannot fail");
    out.push_str("iter,err_y,err_A1,err_A2,err_B1,err_B2,err_lambda1,err_lambda2\n");
    for r in &cell.rounds {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter, r.err_y, r.err_a1, r.err_a2, r.err_b1, r.err_b2, r.err_lambda1, r.err_lambda2
        )
        .expect("formatting into String cannot fail");
    }
    out
}

pub fn write_cell(cell: &CellResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_cell(cell))?;
    Ok(())
}

/// Long-format table over many cells: one row per (round, metric).
pub fn render_long(cells: &[CellResult]) -> String {
    let mut out = String::new();
    out.push_str("# hkopa-bench-long v1\n");
    out.push_str("alpha,sigma0,seed,iter,metric,value\n");
    for cell in cells {
        for round in &cell.rounds {
            for (metric, value) in round.metrics() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    cell.alpha, cell.sigma0, cell.seed, round.iter, metric, value
                )
                .expect("formatting into String cannot fail");
            }
        }
    }
    out
}

pub fn write_long(cells: &[CellResult], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_long(cells))?;
    Ok(())
}
