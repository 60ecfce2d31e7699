//! Writing a run's artifacts to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kernel::{QoeRow, SimReport};

pub const SUMMARY_FILE: &str = "summary.json";
pub const QOE_SERIES_FILE: &str = "qoe_series.csv";
pub const DB_DUMP_FILE: &str = "db_dump.json";
pub const QOE_SERIES_HEADER: &str = "time_ms,flow_id,mos,q_bw,q_delay,q_loss,q_stall";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
}

/// Renders rows as CSV, ordered by time then flow id.
pub fn qoe_series_csv(rows: &[QoeRow]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| (r.time_ms, r.flow_id));
    let mut out = String::with_capacity(64 * (sorted.len() + 1));
    out.push_str(QOE_SERIES_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.time_ms, r.flow_id, r.mos, r.q_bw, r.q_delay, r.q_loss, r.q_stall
        );
    }
    out
}

/// Writes `summary.json`, `qoe_series.csv` and `db_dump.json` into
/// `out_dir` (created if needed) and returns the paths written.
pub fn write_report(report: &SimReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::IoFailure { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let files = [
        (SUMMARY_FILE, to_json(&report.summary)),
        (QOE_SERIES_FILE, qoe_series_csv(&report.qoe_series)),
        (DB_DUMP_FILE, to_json(&report.db_dump)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Reads back the QoE series of a previous run, optionally for one flow.
pub fn read_qoe_series(out_dir: &Path, flow: Option<u64>) -> Result<Vec<QoeRow>, ReportError> {
    let path = out_dir.join(QOE_SERIES_FILE);
    let bad = |message: String| ReportError::Unreadable { path: path.clone(), message };
    let text = fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some(QOE_SERIES_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let parse_err = || bad(format!("malformed row {}", i + 1));
        if f.len() != 7 {
            return Err(parse_err());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err());
        let row = QoeRow {
            time_ms: f[0].parse().map_err(|_| parse_err())?,
            flow_id: f[1].parse().map_err(|_| parse_err())?,
            mos: num(f[2])?,
            q_bw: num(f[3])?,
            q_delay: num(f[4])?,
            q_loss: num(f[5])?,
            q_stall: num(f[6])?,
        };
        if flow.map_or(true, |id| id == row.flow_id) {
            rows.push(row);
        }
    }
    Ok(rows)
}
