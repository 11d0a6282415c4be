//! Experiment output files and their re-derivation from `records.csv`.
//!
//! `records.csv` keeps full precision so that summaries and tolerable ratios
//! re-derived from it match the originals byte for byte.

use std::path::Path;

use serde::Serialize;
use ubemval_core::harness::{
    summarize_records, tolerable_missingness, ConvergenceStats, ExperimentResult, Method, Record, SummaryRow,
    TolerableRow,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{fmt6, out_err, write_json, writer};

pub const SUMMARY: &str = "summary.csv";
pub const RECORDS: &str = "records.csv";
pub const TOLERABLE: &str = "tolerable.csv";
pub const REFERENCES: &str = "references.csv";
pub const FAILURES: &str = "failures.csv";
pub const REPORT: &str = "report.json";

/// Label of the sample-level row in `tolerable.csv`.
pub const ALL_SUBSTATIONS: &str = "ALL";

#[derive(Debug, Serialize)]
struct Seeds {
    master: Option<u64>,
    experiment: u64,
}

#[derive(Debug, Serialize)]
struct TolerableEntry<'a> {
    method: Method,
    substation: &'a str,
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    config: serde_json::Value,
    seeds: Seeds,
    substations: &'a [String],
    ratios: &'a [f64],
    records: usize,
    failures: usize,
    convergence: &'a [ConvergenceStats],
    tolerable: Vec<TolerableEntry<'a>>,
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| out_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    write_rows(
        path,
        &["method", "ratio", "rmse", "median", "ci_low", "ci_high", "n"],
        rows.iter().map(|r| {
            let mut row = vec![r.method.to_string(), fmt6(r.ratio)];
            match &r.summary {
                Some(s) => row.extend([
                    fmt6(s.rmse),
                    fmt6(s.median),
                    fmt6(s.ci95_low),
                    fmt6(s.ci95_high),
                    s.n_estimates.to_string(),
                ]),
                None => row.extend(["", "", "", "", "0"].map(String::from)),
            }
            row
        }),
    )
}

fn substation_label(ids: &[String], s: Option<usize>) -> &str {
    s.map_or(ALL_SUBSTATIONS, |s| ids[s].as_str())
}

pub fn write_tolerable(path: &Path, rows: &[TolerableRow], ids: &[String]) -> Result<(), CliError> {
    write_rows(
        path,
        &["method", "substation", "ratio"],
        rows.iter()
            .map(|r| vec![r.method.to_string(), substation_label(ids, r.substation).into(), fmt6(r.ratio)]),
    )
}

pub fn write_records(path: &Path, records: &[Record], ids: &[String], ratios: &[f64]) -> Result<(), CliError> {
    write_rows(
        path,
        &["substation", "combination", "method", "ratio", "repetition", "start", "estimate", "reference"],
        records.iter().map(|r| {
            vec![
                ids[r.substation].clone(),
                r.combination.to_string(),
                r.method.to_string(),
                ratios[r.ratio_index].to_string(),
                r.repetition.to_string(),
                r.start.to_string(),
                r.estimate.to_string(),
                r.reference.to_string(),
            ]
        }),
    )
}

/// Writes every output of an experiment into `dir`.
pub fn emit_report(result: &ExperimentResult, cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let ids = &result.substations;
    write_summary(&dir.join(SUMMARY), &result.summaries)?;
    write_records(&dir.join(RECORDS), &result.records, ids, &result.ratios)?;
    write_tolerable(&dir.join(TOLERABLE), &result.tolerable, ids)?;
    write_rows(
        &dir.join(REFERENCES),
        &["substation", "combination", "nmbe", "cvrmse", "gof"],
        result.references.iter().map(|r| {
            vec![
                ids[r.substation].clone(),
                r.combination.to_string(),
                fmt6(r.nmbe),
                fmt6(r.cvrmse),
                fmt6(r.gof),
            ]
        }),
    )?;
    write_rows(
        &dir.join(FAILURES),
        &["substation", "method", "ratio", "repetition", "reason"],
        result.failures.iter().map(|f| {
            vec![
                ids[f.substation].clone(),
                f.method.to_string(),
                fmt6(result.ratios[f.ratio_index]),
                f.repetition.to_string(),
                f.reason.clone(),
            ]
        }),
    )?;
    let report = ReportJson {
        config: cfg.to_json(),
        seeds: Seeds {
            master: cfg.seed,
            experiment: cfg.experiment.seed,
        },
        substations: ids,
        ratios: &result.ratios,
        records: result.records.len(),
        failures: result.failures.len(),
        convergence: &result.convergence,
        tolerable: result
            .tolerable
            .iter()
            .map(|t| TolerableEntry {
                method: t.method,
                substation: substation_label(ids, t.substation),
                ratio: t.ratio,
            })
            .collect(),
    };
    write_json(&dir.join(REPORT), &report)
}

/// Parses `records.csv` back into records indexed against `ids` and the
/// configured ratio grid.
pub fn read_records(path: &Path, ids: &[String], ratios: &[f64]) -> Result<Vec<Record>, CliError> {
    let bad = |line: usize, what: &str| CliError::Data(format!("{}: line {line}: {what}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if row.len() != 8 {
            return Err(bad(line, "expected 8 fields"));
        }
        let substation = ids
            .iter()
            .position(|id| id == &row[0])
            .ok_or_else(|| bad(line, "unknown substation"))?;
        let ratio: f64 = row[3].parse().map_err(|_| bad(line, "bad ratio"))?;
        let ratio_index = ratios
            .iter()
            .position(|&r| r == ratio)
            .ok_or_else(|| bad(line, "ratio not in the configured grid"))?;
        let int = |i: usize| row[i].parse::<usize>().map_err(|_| bad(line, "bad integer"));
        let float = |i: usize| row[i].parse::<f64>().map_err(|_| bad(line, "bad number"));
        records.push(Record {
            substation,
            combination: int(1)?,
            method: row[2].parse().map_err(|_| bad(line, "unknown method"))?,
            ratio_index,
            repetition: int(4)?,
            start: int(5)?,
            estimate: float(6)?,
            reference: float(7)?,
        });
    }
    Ok(records)
}

/// Recomputes `summary.csv` and `tolerable.csv` of a finished run in `run`
/// and writes them to `out`.
pub fn rederive(run: &Path, out: &Path) -> Result<(), CliError> {
    let report_path = run.join(REPORT);
    let text = std::fs::read_to_string(&report_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", report_path.display())))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", report_path.display())))?;
    let ids: Vec<String> = serde_json::from_value(json["substations"].clone())
        .map_err(|e| CliError::Data(format!("{}: substations: {e}", report_path.display())))?;
    let cfg = RunConfig::load(&report_path)?;
    cfg.validate()?;
    let exp = &cfg.experiment;
    let records = read_records(&run.join(RECORDS), &ids, &exp.ratios)?;
    let summaries = summarize_records(&records, &exp.methods, &exp.ratios);
    let tolerable = tolerable_missingness(
        &records,
        &exp.methods,
        &exp.ratios,
        ids.len(),
        exp.rel_tolerance,
        exp.coverage,
    );
    write_summary(&out.join(SUMMARY), &summaries)?;
    write_tolerable(&out.join(TOLERABLE), &tolerable, &ids)
}
