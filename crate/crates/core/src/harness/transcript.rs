//! JSONL transcript loading.
//!
//! One JSON object per line:
//! `{"session_id", "turn_index", "speaker": "user"|"assistant", "text",
//! "condition": "baseline"|"literacy", "gold_label"?, "gold_clarity"?}`.
//! Blank lines are skipped. Line numbers are 1-based.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::DisclosureLabel;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot read transcript {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: field {field:?}: {message}")]
    SchemaError {
        line: usize,
        field: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Literacy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptTurn {
    pub session_id: String,
    pub turn_index: u64,
    pub speaker: Speaker,
    pub text: String,
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<DisclosureLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_clarity: Option<u8>,
    #[serde(skip)]
    pub line: usize,
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> TranscriptError {
    TranscriptError::SchemaError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn string_field<'a>(
    obj: &'a Map<String, Value>,
    line: usize,
    field: &str,
) -> Result<&'a str, TranscriptError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(schema(line, field, "expected a string")),
        None => Err(schema(line, field, "missing")),
    }
}

fn parse_line(line: usize, raw: &str) -> Result<TranscriptTurn, TranscriptError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| TranscriptError::ParseError {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(schema(line, "<root>", "expected a JSON object"));
    };
    let session_id = string_field(&obj, line, "session_id")?.to_string();
    let turn_index = match obj.get("turn_index") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| schema(line, "turn_index", "expected a non-negative integer"))?,
        None => return Err(schema(line, "turn_index", "missing")),
    };
    let speaker = match string_field(&obj, line, "speaker")? {
        "user" => Speaker::User,
        "assistant" => Speaker::Assistant,
        other => return Err(schema(line, "speaker", format!("unknown speaker {other:?}"))),
    };
    let text = string_field(&obj, line, "text")?.to_string();
    if speaker == Speaker::User && text.trim().is_empty() {
        return Err(schema(line, "text", "user text must not be blank"));
    }
    let condition = match string_field(&obj, line, "condition")? {
        "baseline" => Condition::Baseline,
        "literacy" => Condition::Literacy,
        other => {
            return Err(schema(line, "condition", format!("unknown condition {other:?}")))
        }
    };
    let gold_label = match obj.get("gold_label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(match s.as_str() {
            "safe" => DisclosureLabel::Safe,
            "personal" => DisclosureLabel::Personal,
            "high_risk" => DisclosureLabel::HighRisk,
            other => return Err(schema(line, "gold_label", format!("unknown label {other:?}"))),
        }),
        Some(_) => return Err(schema(line, "gold_label", "expected a string")),
    };
    let gold_clarity = match obj.get("gold_clarity") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(n @ 1..=5) => Some(n as u8),
            _ => return Err(schema(line, "gold_clarity", "expected an integer from 1 to 5")),
        },
    };
    if speaker == Speaker::Assistant {
        if gold_label.is_some() {
            return Err(schema(line, "gold_label", "only user turns carry gold labels"));
        }
        if gold_clarity.is_some() {
            return Err(schema(line, "gold_clarity", "only user turns carry gold labels"));
        }
    }
    Ok(TranscriptTurn {
        session_id,
        turn_index,
        speaker,
        text,
        condition,
        gold_label,
        gold_clarity,
        line,
    })
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptTurn>, TranscriptError> {
    let mut turns = Vec::new();
    let mut conditions: HashMap<String, Condition> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let turn = parse_line(line, raw)?;
        let first = *conditions
            .entry(turn.session_id.clone())
            .or_insert(turn.condition);
        if first != turn.condition {
            return Err(schema(
                line,
                "condition",
                format!("session {:?} mixes conditions", turn.session_id),
            ));
        }
        turns.push(turn);
    }
    Ok(turns)
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptTurn>, TranscriptError> {
    let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_transcript(&text)
}
