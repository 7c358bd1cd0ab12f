//! Append-only JSONL file of per-session metric snapshots. Counts only.

use std::fs::OpenOptions;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use literacy_core::tallies::SessionMetricsReport;
use serde_json::Value;

#[derive(Debug)]
pub struct MetricsFile {
    path: PathBuf,
    lock: Mutex<()>,
}

impl MetricsFile {
    pub fn new(path: PathBuf) -> Self {
        Self {
            path,
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line per call; concurrent callers never interleave.
    pub fn append(&self, report: &SessionMetricsReport) -> io::Result<()> {
        let mut line = serde_json::to_string(report).map_err(io::Error::other)?;
        line.push('\n');
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(line.as_bytes())
    }
}

/// The most recent snapshot recorded for `session_id`, if any. Unreadable
/// lines are skipped.
pub fn latest_snapshot(path: &Path, session_id: &str) -> io::Result<Option<Value>> {
    let file = std::fs::File::open(path)?;
    let mut latest = None;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Ok(value) = serde_json::from_str::<Value>(&line) else {
            continue;
        };
        if value.get("session_id").and_then(Value::as_str) == Some(session_id) {
            latest = Some(value);
        }
    }
    Ok(latest)
}
