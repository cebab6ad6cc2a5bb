//! `trace.jsonl`, `results.csv` and `report.json`.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use semsched_core::{RequestRecord, RunReport, Trace, TraceEvent};
use serde::{Deserialize, Serialize};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const RESULTS_FILE: &str = "results.csv";
pub const REPORT_FILE: &str = "report.json";

/// One line per event.
pub fn write_trace(out: impl Write, trace: &Trace) -> Result<()> {
    let mut w = BufWriter::new(out);
    for e in &trace.events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events(input: impl BufRead) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).with_context(|| format!("trace line {}", i + 1))?);
    }
    Ok(events)
}

/// Per-request records carried by completion events.
pub fn completed_records(events: &[TraceEvent]) -> Vec<RequestRecord> {
    events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Complete { record, .. } => Some(record.clone()),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub profile: String,
    pub axis: String,
    pub axis_value: String,
    pub urgency: u8,
    pub norm_wait_s_per_tok: f64,
    pub avg_wait_s: f64,
    pub violations: u64,
    pub evictions: u64,
    pub seed: u64,
}

/// One row per urgency level. Run-wide counts repeat on every row.
pub fn rows(report: &RunReport, axis: &str, axis_value: &str) -> Vec<ResultRow> {
    report
        .levels
        .iter()
        .map(|l| ResultRow {
            policy: report.policy.clone(),
            profile: report.profile.clone(),
            axis: axis.to_owned(),
            axis_value: axis_value.to_owned(),
            urgency: l.urgency,
            norm_wait_s_per_tok: l.norm_wait_s_per_tok,
            avg_wait_s: l.avg_wait_s,
            violations: report.violations,
            evictions: report.evictions,
            seed: report.seed,
        })
        .collect()
}

pub fn write_results(out: impl Write, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(input: impl Read) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn create(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::create(&path).with_context(|| format!("creating {}", path.display()))
}

/// Writes the three output files for a single run.
pub fn write_run(dir: &Path, trace: &Trace, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trace(create(dir, TRACE_FILE)?, trace)?;
    write_results(create(dir, RESULTS_FILE)?, &rows(report, "none", ""))?;
    write_json(create(dir, REPORT_FILE)?, report)
}

pub fn write_json<T: Serialize>(out: impl Write, value: &T) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn open(path: &Path) -> Result<io::BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(io::BufReader::new(f))
}
