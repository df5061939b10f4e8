//! Trace, event and audit files.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use microgrid_core::engine::{energy_audit, AuditReport, TraceLog};

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.json";
pub const AUDIT_FILE: &str = "audit.json";

/// Writes the trace as CSV: header row, `t` first, shortest round-trip decimals.
pub fn write_trace_csv<W: Write>(trace: &TraceLog, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    header.extend(trace.signals().iter().map(String::as_str));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (t, row) in trace.rows() {
        rec.clear();
        rec.push(t.to_string());
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV trace written by [`write_trace_csv`]. Events are not part of
/// the CSV and come back empty.
pub fn read_trace_csv<R: Read>(input: R) -> Result<TraceLog, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0) != Some("t") {
        return Err("first column must be `t`".into());
    }
    let mut trace = TraceLog::new(header.iter().skip(1).map(String::from).collect());
    let mut prev = f64::NEG_INFINITY;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("row {}: {e}", line + 2))?;
        if vals.len() != trace.signals().len() + 1 || vals[0] <= prev {
            return Err(format!("row {}: bad width or non-increasing time", line + 2));
        }
        prev = vals[0];
        trace.push_row(vals[0], &vals[1..]);
    }
    Ok(trace)
}

pub fn trace_csv_bytes(trace: &TraceLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).expect("writing to memory");
    buf
}

/// The three files of a finished run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunFiles {
    pub trace: PathBuf,
    pub events: PathBuf,
    pub audit: PathBuf,
}

pub fn write_run(dir: &Path, trace: &TraceLog) -> io::Result<(RunFiles, AuditReport)> {
    fs::create_dir_all(dir)?;
    let files = RunFiles {
        trace: dir.join(TRACE_FILE),
        events: dir.join(EVENTS_FILE),
        audit: dir.join(AUDIT_FILE),
    };
    fs::write(&files.trace, trace_csv_bytes(trace))?;
    fs::write(&files.events, serde_json::to_vec_pretty(&trace.events)?)?;
    let audit = energy_audit(trace);
    fs::write(&files.audit, serde_json::to_vec_pretty(&audit)?)?;
    Ok((files, audit))
}
