//! Run metrics records and their on-disk formats.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::pr::{fmt_metric, PrCell, PrTable};
use crate::error::{Error, Result};

/// Metrics at one evaluation point of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub loss_s: f64,
    pub loss_u: f64,
    pub loss_total: f64,
    /// Gated fraction of this iteration's unlabeled batch.
    pub mask_rate: f64,
    /// Pseudo-label quality over the window since the previous record.
    pub pr: PrTable,
    /// OOD samples gated so far in the run.
    pub ood_included: u64,
    pub acc_raw: f64,
    pub acc_ema: f64,
}

pub const RECORD_HEADER: &str = "iteration,loss_s,loss_u,loss_total,mask_rate,\
precision_overall,recall_overall,precision_head,recall_head,precision_body,recall_body,\
precision_tail,recall_tail,ood_included,acc_raw,acc_ema";

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunRecord {
    pub fn to_csv_line(&self) -> String {
        let p = &self.pr;
        [
            self.iteration.to_string(),
            f17(self.loss_s),
            f17(self.loss_u),
            f17(self.loss_total),
            f17(self.mask_rate),
            fmt_metric(p.overall.precision),
            fmt_metric(p.overall.recall),
            fmt_metric(p.head.precision),
            fmt_metric(p.head.recall),
            fmt_metric(p.body.precision),
            fmt_metric(p.body.recall),
            fmt_metric(p.tail.precision),
            fmt_metric(p.tail.recall),
            self.ood_included.to_string(),
            f17(self.acc_raw),
            f17(self.acc_ema),
        ]
        .join(",")
    }

    pub fn parse_csv_line(line: &str, source_name: &str, lineno: usize) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(Error::parse(source_name, lineno, format!("expected 16 fields, got {}", f.len())));
        }
        let bad = |i: usize| Error::parse(source_name, lineno, format!("bad field {} `{}`", i + 1, f[i]));
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(i));
        let opt = |i: usize| -> Result<Option<f64>> {
            if f[i] == "undef" {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let cell = |i: usize| -> Result<PrCell> {
            Ok(PrCell {
                precision: opt(i)?,
                recall: opt(i + 1)?,
            })
        };
        Ok(RunRecord {
            iteration: f[0].parse().map_err(|_| bad(0))?,
            loss_s: num(1)?,
            loss_u: num(2)?,
            loss_total: num(3)?,
            mask_rate: num(4)?,
            pr: PrTable {
                overall: cell(5)?,
                head: cell(7)?,
                body: cell(9)?,
                tail: cell(11)?,
            },
            ood_included: f[13].parse().map_err(|_| bad(13))?,
            acc_raw: num(14)?,
            acc_ema: num(15)?,
        })
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    w.flush()
}

pub fn read_records<R: BufRead>(r: R, source_name: &str) -> Result<Vec<RunRecord>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == RECORD_HEADER => {}
        Some(Ok(h)) => return Err(Error::parse(source_name, 1, format!("unexpected header `{h}`"))),
        Some(Err(e)) => return Err(Error::parse(source_name, 1, e.to_string())),
        None => return Err(Error::parse(source_name, 1, "empty file")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::parse(source_name, i + 2, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(RunRecord::parse_csv_line(line.trim(), source_name, i + 2)?);
    }
    Ok(out)
}

/// Final metrics plus the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub strategy: String,
    pub iterations: usize,
    pub final_acc_ema: f64,
    pub final_acc_raw: f64,
    pub final_pr: PrTable,
    /// Pseudo-label quality over the whole run.
    pub run_pr: PrTable,
    pub ood_included: u64,
    pub gated_total: u64,
    pub config: serde_json::Map<String, serde_json::Value>,
}

/// Writes the records as CSV to `path` and the summary as a single JSON
/// object to `summary_path`.
pub fn export(records: &[RunRecord], summary: &RunSummary, path: &Path, summary_path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to export".into()));
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(BufWriter::new(f), records).map_err(|e| Error::io(path, e))?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(summary_path, json + "\n").map_err(|e| Error::io(summary_path, e))
}

pub fn import(path: &Path) -> Result<Vec<RunRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(f), &path.display().to_string())
}
