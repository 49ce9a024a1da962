//! Sweep CSVs, per-step error files, the rate summary and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::diagnostics::{Comparand, VariableSet};
use crate::error::{Error, Result};
use crate::harness::config::{SweepConfig, SweepMode};
use crate::harness::rates::{rate_targets, MonotoneCheck, RateCheck, MONOTONE_ALLOWANCE};
use crate::harness::sweep::{classify_regime, CellResult, CellStatus, Regime, SweepTable};

pub const SWEEP_HEADER: [&str; 9] = [
    "eps",
    "dt",
    "lambda",
    "regime",
    "variable_set",
    "comparand",
    "l1_error",
    "max_fp_residual",
    "status",
];

pub const PER_STEP_ERROR_HEADER: [&str; 6] = ["eps", "dt", "variable_set", "comparand", "n", "error"];

pub const PER_STEP_STATE_HEADER: [&str; 12] = [
    "n",
    "t",
    "x1",
    "x2",
    "e",
    "w1",
    "w2",
    "xgc1",
    "xgc2",
    "egc",
    "fp_iterations",
    "fp_residual",
];

/// Scientific notation with the shortest round-tripping mantissa.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_owned(),
        source,
    }
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))
}

pub fn sweep_csv_name(mode: SweepMode) -> String {
    format!("{}.csv", mode.label())
}

pub fn per_step_csv_name(mode: SweepMode) -> String {
    format!("{}.per_step.csv", mode.label())
}

pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err(path))?;
    for r in &table.rows {
        w.write_record([
            sci(r.eps),
            sci(r.dt),
            sci(r.lambda),
            r.regime.label().to_owned(),
            r.variable_set.label().to_owned(),
            r.comparand.label().to_owned(),
            sci(r.l1_error),
            sci(r.max_fp_residual),
            r.status.label().to_owned(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_per_step_errors(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(PER_STEP_ERROR_HEADER).map_err(csv_err(path))?;
    for r in &table.rows {
        for (i, e) in r.per_step_errors.iter().enumerate() {
            w.write_record([
                sci(r.eps),
                sci(r.dt),
                r.variable_set.label().to_owned(),
                r.comparand.label().to_owned(),
                (i + 1).to_string(),
                sci(*e),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Config(format!(
            "{}: cannot parse column {} value {raw:?}",
            path.display(),
            SWEEP_HEADER.get(i).unwrap_or(&"?")
        ))
    })
}

/// Reads a sweep CSV back into rows. Per-step errors, messages and
/// iteration counts are not part of the schema and come back empty.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let eps: f64 = parse_field(&rec, 0, path)?;
        let dt: f64 = parse_field(&rec, 1, path)?;
        let regime: Regime = parse_field(&rec, 3, path)?;
        if regime != classify_regime(eps, dt) {
            return Err(Error::Config(format!(
                "{}: regime {regime} inconsistent with eps = {eps}, dt = {dt}",
                path.display()
            )));
        }
        rows.push(CellResult {
            eps,
            dt,
            lambda: parse_field(&rec, 2, path)?,
            regime,
            variable_set: parse_field::<VariableSet>(&rec, 4, path)?,
            comparand: parse_field::<Comparand>(&rec, 5, path)?,
            l1_error: parse_field(&rec, 6, path)?,
            max_fp_residual: parse_field(&rec, 7, path)?,
            max_fp_iterations: 0,
            status: parse_field::<CellStatus>(&rec, 8, path)?,
            message: None,
            per_step_errors: Vec::new(),
        });
    }
    Ok(rows)
}

pub fn mode_for(comparand: Comparand) -> SweepMode {
    match comparand {
        Comparand::ReferenceStiff => SweepMode::Convergence,
        Comparand::LimitScheme => SweepMode::AsymptoticDiscrete,
        Comparand::LimitReference => SweepMode::AsymptoticContinuous,
    }
}

/// Splits rows into one table per sweep mode, keeping file order.
pub fn tables_from_rows(rows: Vec<CellResult>) -> Vec<SweepTable> {
    let mut tables: Vec<SweepTable> = Vec::new();
    for row in rows {
        let mode = mode_for(row.comparand);
        match tables.iter_mut().find(|t| t.mode == mode) {
            Some(t) => t.rows.push(row),
            None => tables.push(SweepTable {
                mode,
                rows: vec![row],
            }),
        }
    }
    tables.sort_by_key(|t| t.mode);
    tables
}

/// Plain-text rate summary, one line per check.
pub fn rates_text(checks: &[RateCheck], monotone: &[MonotoneCheck]) -> String {
    let mut out = String::new();
    if checks.is_empty() {
        out.push_str("no rate fits: no grid line has 3 usable cells in a fit window\n");
    }
    for c in checks {
        out.push_str(&c.summary());
        out.push('\n');
    }
    for m in monotone {
        out.push_str(&format!(
            "convergence {} monotone in eps at dt={:e}: worst ratio {:.3} (allow {MONOTONE_ALLOWANCE}) {}\n",
            m.variable_set,
            m.dt,
            m.worst_ratio,
            if m.passed { "PASS" } else { "FAIL" }
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed).count()
        + monotone.iter().filter(|m| !m.passed).count();
    out.push_str(&format!(
        "{} checks, {} failed\n",
        checks.len() + monotone.len(),
        failed
    ));
    out
}

#[derive(Serialize)]
struct CellDiagnostics<'a> {
    eps: f64,
    dt: f64,
    variable_set: VariableSet,
    comparand: Comparand,
    status: CellStatus,
    max_fp_iterations: usize,
    max_fp_residual: Option<f64>,
    message: Option<&'a str>,
}

/// Paths written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub sweep_csvs: Vec<PathBuf>,
    pub per_step_csvs: Vec<PathBuf>,
    pub rates: PathBuf,
    pub manifest: PathBuf,
}

/// Writes every table, the rate summary and `manifest.json` into `dest`.
pub fn emit_reports(
    tables: &[SweepTable],
    checks: &[RateCheck],
    monotone: &[MonotoneCheck],
    cfg: Option<&SweepConfig>,
    dest: &Path,
) -> Result<ReportPaths> {
    fs::create_dir_all(dest).map_err(io_err(dest))?;
    let mut sweep_csvs = Vec::new();
    let mut per_step_csvs = Vec::new();
    for table in tables {
        let path = dest.join(sweep_csv_name(table.mode));
        write_sweep_csv(table, &path)?;
        sweep_csvs.push(path);
        let path = dest.join(per_step_csv_name(table.mode));
        write_per_step_errors(table, &path)?;
        per_step_csvs.push(path);
    }

    let rates = dest.join("rates.txt");
    fs::write(&rates, rates_text(checks, monotone)).map_err(io_err(&rates))?;

    let windows: Vec<_> = tables
        .iter()
        .map(|t| {
            json!({
                "mode": t.mode,
                "targets": rate_targets(t.mode)
                    .iter()
                    .map(|r| json!({
                        "variable_set": r.variable_set,
                        "axis": r.axis,
                        "target": r.target,
                        "accept": [r.lo, r.hi],
                        "cells": r.cells.label(),
                    }))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let cells: Vec<_> = tables
        .iter()
        .flat_map(|t| &t.rows)
        .map(|r| CellDiagnostics {
            eps: r.eps,
            dt: r.dt,
            variable_set: r.variable_set,
            comparand: r.comparand,
            status: r.status,
            max_fp_iterations: r.max_fp_iterations,
            max_fp_residual: r.max_fp_residual.is_finite().then_some(r.max_fp_residual),
            message: r.message.as_deref(),
        })
        .collect();
    let manifest_value = json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "norm": {
            "l1": "mean over n = 1..N of the per-step error",
            "x-e": "euclidean norm of the concatenated vector (x1, x2, e)",
            "xgc-egc": "euclidean norm of (xgc1, xgc2, egc); x_gc = x - eps w_perp / b, e_gc = e + (eps / b) E_perp . w",
            "w": "absolute difference of the norms of w and v",
        },
        "regimes": {
            "stiff-resolved": "dt <= eps^3",
            "ap-plateau": "eps^3 < dt <= eps^(1/2)",
            "coarse": "dt > eps^(1/2)",
        },
        "rate_windows": windows,
        "rate_checks": checks,
        "monotone_checks": monotone,
        "cells": cells,
    });
    let manifest = dest.join("manifest.json");
    let mut f = fs::File::create(&manifest).map_err(io_err(&manifest))?;
    let text = serde_json::to_string_pretty(&manifest_value)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(io_err(&manifest))?;

    Ok(ReportPaths {
        sweep_csvs,
        per_step_csvs,
        rates,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let table = SweepTable {
            mode: SweepMode::Convergence,
            rows: vec![],
        };
        write_sweep_csv(&table, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{}\n", SWEEP_HEADER.join(",")));
        assert!(read_sweep_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn scientific_format_round_trips() {
        for x in [0.5, 2f64.powi(-14), 1.0 / 3.0, 6.02e23, 0.0] {
            assert_eq!(sci(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sci(0.5), "5e-1");
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_sweep_csv(&path), Err(Error::Config(_))));
        assert!(matches!(
            read_sweep_csv(&dir.path().join("missing.csv")),
            Err(Error::Csv { .. })
        ));
    }
}
