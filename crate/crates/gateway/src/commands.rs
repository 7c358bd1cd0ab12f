//! Offline subcommands: `redact`, `analyze`, `metrics`.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use literacy_core::config::load_config;
use literacy_core::disclosure::{DisclosureMonitor, RuleSet};
use literacy_core::harness::{compute_metrics, load_transcript, Annotator};
use literacy_core::{PromptCoach, TriggerPatterns};

use crate::metrics_file::latest_snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RedactFormat {
    /// One JSON disclosure report per input line.
    Jsonl,
    /// Redacted text only.
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Classifies and redacts each non-blank input line.
pub fn redact(
    rules: Option<&Path>,
    format: RedactFormat,
    input: impl BufRead,
    mut out: impl Write,
) -> Result<()> {
    let monitor = match rules {
        Some(p) => DisclosureMonitor::new(
            RuleSet::load(p).with_context(|| format!("loading rules {}", p.display()))?,
        ),
        None => DisclosureMonitor::bundled(),
    };
    for line in input.lines() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        let report = monitor.build_report(&line);
        match format {
            RedactFormat::Jsonl => writeln!(out, "{}", serde_json::to_string(&report)?)?,
            RedactFormat::Text => writeln!(out, "{}", report.redacted_text)?,
        }
    }
    Ok(())
}

/// Replays a transcript and writes the metrics report.
pub fn analyze(config: &Path, transcript: &Path, out: &Path, format: ReportFormat) -> Result<()> {
    let config = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    let annotator = Annotator::new(
        DisclosureMonitor::from_config(&config)?,
        PromptCoach::from_config(&config)?,
        TriggerPatterns::from_config(&config)?,
        config,
    );
    let turns = load_transcript(transcript)?;
    let report = compute_metrics(&annotator.annotate(&turns))?;
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

/// Prints the latest recorded snapshot for a session.
pub fn metrics(metrics_file: &Path, session: &str, mut out: impl Write) -> Result<()> {
    let snapshot = latest_snapshot(metrics_file, session)
        .with_context(|| format!("reading {}", metrics_file.display()))?;
    let Some(snapshot) = snapshot else {
        bail!("no metrics recorded for session {session:?}");
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&snapshot)?)?;
    Ok(())
}
