//! Disclosure monitor: finds sensitive spans, assigns the three-class
//! disclosure label, redacts, and builds reflection and referral
//! interventions.

mod rules;

use std::sync::{Arc, OnceLock};

use regex::Regex;
use thiserror::Error;

use crate::config::GatewayConfig;
use crate::model::{
    DisclosureLabel, DisclosureReport, Intervention, InterventionKind, InterventionOption,
    OptionAction, SensitiveSpan, SpanCategory,
};

pub use rules::{CrisisLexicon, DetectionRule, Matcher, RuleError, RuleSet, CRISIS_RULE_ID};

/// Reflection cue shown for personal and high-risk messages.
pub const REFLECTION_CUE: &str =
    "This message may include personal details. Would you like to rephrase or continue?";

pub const CRISIS_MESSAGE: &str = "It sounds like you might be going through something very hard \
     right now. You do not have to handle it alone. These services can help:";

pub const LIFE_EVENT_RULE_ID: &str = "life-event-sentence";

/// Source of candidate spans. Candidates may overlap; the monitor merges
/// them. A learned tagger can be plugged in by implementing this trait.
pub trait SpanDetector: Send + Sync {
    fn detect(&self, text: &str) -> Vec<SensitiveSpan>;
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RedactError {
    #[error("span {start}..{end} is out of bounds or splits a codepoint in a text of {len} bytes")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("spans {first:?} and {second:?} overlap")]
    OverlappingSpans {
        first: (usize, usize),
        second: (usize, usize),
    },
}

/// Resolves overlapping candidates: higher severity first, then the longer
/// span, then the earlier start. Output is sorted by start offset.
pub fn merge_spans(mut candidates: Vec<SensitiveSpan>) -> Vec<SensitiveSpan> {
    candidates.sort_by(|a, b| {
        b.category
            .severity()
            .cmp(&a.category.severity())
            .then_with(|| b.len().cmp(&a.len()))
            .then_with(|| a.start.cmp(&b.start))
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.rule_id.cmp(&b.rule_id))
    });
    let mut kept: Vec<SensitiveSpan> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if cand.is_empty() {
            continue;
        }
        if kept.iter().all(|k| !k.overlaps(&cand)) {
            kept.push(cand);
        }
    }
    kept.sort_by_key(|s| s.start);
    kept
}

/// Safe when nothing was found, HighRisk when any crisis indicator was
/// found, otherwise Personal.
pub fn classify(_text: &str, spans: &[SensitiveSpan]) -> DisclosureLabel {
    spans
        .iter()
        .map(|s| s.category.severity())
        .max()
        .unwrap_or(DisclosureLabel::Safe)
}

/// Replaces each span with its category placeholder. Bytes outside spans
/// are copied unchanged.
pub fn redact(text: &str, spans: &[SensitiveSpan]) -> Result<String, RedactError> {
    let mut ordered: Vec<&SensitiveSpan> = spans.iter().collect();
    ordered.sort_by_key(|s| (s.start, s.end));
    for s in &ordered {
        if s.start >= s.end
            || s.end > text.len()
            || !text.is_char_boundary(s.start)
            || !text.is_char_boundary(s.end)
        {
            return Err(RedactError::SpanOutOfBounds {
                start: s.start,
                end: s.end,
                len: text.len(),
            });
        }
    }
    for pair in ordered.windows(2) {
        if pair[0].end > pair[1].start {
            return Err(RedactError::OverlappingSpans {
                first: (pair[0].start, pair[0].end),
                second: (pair[1].start, pair[1].end),
            });
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for s in ordered {
        out.push_str(&text[cursor..s.start]);
        out.push_str(s.category.placeholder());
        cursor = s.end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

fn first_person() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:i|i'm|i've|me|my|we|our|us)\b").unwrap())
}

fn past_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(?:was|were|went|got|had|did|left|lost|broke|came|took|met|saw|told|fell|began|\w{2,}ed)\b",
        )
        .unwrap()
    })
}

/// Byte ranges of sentences, trimmed of surrounding whitespace and
/// terminal punctuation.
fn sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let push = |out: &mut Vec<(usize, usize)>, s: usize, e: usize| {
        let piece = &text[s..e];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece
            .trim_end()
            .trim_end_matches(['.', '!', '?', '\u{2026}'])
            .trim_end();
        let end = s + trimmed.len();
        if s + lead < end {
            out.push((s + lead, end));
        }
    };
    for (i, ch) in text.char_indices() {
        if matches!(ch, '.' | '!' | '?' | '\n' | '\u{2026}') {
            let next = i + ch.len_utf8();
            let at_break = text[next..]
                .chars()
                .next()
                .is_none_or(|c| c.is_whitespace());
            if at_break {
                push(&mut out, start, next);
                start = next;
            }
        }
    }
    if start < text.len() {
        push(&mut out, start, text.len());
    }
    out
}

/// Flags first-person past-event sentences that mention both a date and a
/// place.
fn life_event_sentences(text: &str, candidates: &[SensitiveSpan]) -> Vec<SensitiveSpan> {
    let within = |s: &SensitiveSpan, (a, b): (usize, usize)| s.start >= a && s.end <= b;
    sentences(text)
        .into_iter()
        .filter(|&range| {
            let sentence = &text[range.0..range.1];
            first_person().is_match(sentence)
                && past_marker().is_match(sentence)
                && candidates
                    .iter()
                    .any(|s| s.category == SpanCategory::DateOfEvent && within(s, range))
                && candidates
                    .iter()
                    .any(|s| s.category == SpanCategory::Location && within(s, range))
        })
        .map(|(start, end)| SensitiveSpan {
            start,
            end,
            category: SpanCategory::LifeEventDetail,
            matched_text: text[start..end].to_string(),
            rule_id: LIFE_EVENT_RULE_ID.to_string(),
        })
        .collect()
}

/// Rule-based disclosure monitor. Immutable after construction.
#[derive(Clone)]
pub struct DisclosureMonitor {
    detectors: Vec<Arc<dyn SpanDetector>>,
    life_events: bool,
}

impl std::fmt::Debug for DisclosureMonitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DisclosureMonitor")
            .field("detectors", &self.detectors.len())
            .field("life_events", &self.life_events)
            .finish()
    }
}

impl DisclosureMonitor {
    pub fn new(rules: RuleSet) -> Self {
        Self {
            detectors: vec![Arc::new(rules)],
            life_events: true,
        }
    }

    pub fn bundled() -> Self {
        Self::new(RuleSet::bundled())
    }

    /// Loads the rule set named in `[lexicons].rules`, or the bundled one.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, RuleError> {
        match &config.lexicons.rules {
            Some(path) => Ok(Self::new(RuleSet::load(path)?)),
            None => Ok(Self::bundled()),
        }
    }

    pub fn with_detector(mut self, detector: Arc<dyn SpanDetector>) -> Self {
        self.detectors.push(detector);
        self
    }

    pub fn without_life_event_sentences(mut self) -> Self {
        self.life_events = false;
        self
    }

    /// Merged, non-overlapping spans sorted by start offset.
    pub fn detect_spans(&self, text: &str) -> Vec<SensitiveSpan> {
        let mut candidates: Vec<SensitiveSpan> =
            self.detectors.iter().flat_map(|d| d.detect(text)).collect();
        if self.life_events {
            let extra = life_event_sentences(text, &candidates);
            candidates.extend(extra);
        }
        merge_spans(candidates)
    }

    pub fn build_report(&self, text: &str) -> DisclosureReport {
        let spans = self.detect_spans(text);
        let label = classify(text, &spans);
        let redacted_text =
            redact(text, &spans).expect("merged detector spans are valid for their text");
        let rationale = rationale(label, &spans);
        DisclosureReport {
            label,
            spans,
            rationale,
            redacted_text,
        }
    }
}

fn rationale(label: DisclosureLabel, spans: &[SensitiveSpan]) -> String {
    if spans.is_empty() {
        return "no sensitive details detected".to_string();
    }
    let mut ids: Vec<&str> = Vec::new();
    for s in spans {
        if !ids.contains(&s.rule_id.as_str()) {
            ids.push(&s.rule_id);
        }
    }
    let what = match label {
        DisclosureLabel::HighRisk => "crisis-related content",
        _ => "personal details",
    };
    format!("{what} detected by rules: {}", ids.join(", "))
}

/// Reflection and referral interventions for a report, in display order.
pub fn interventions_for(report: &DisclosureReport, config: &GatewayConfig) -> Vec<Intervention> {
    if report.label == DisclosureLabel::Safe {
        return Vec::new();
    }
    let high_risk = report.label == DisclosureLabel::HighRisk;
    let mut options = Vec::with_capacity(3);
    if !(high_risk && config.limits.block_high_risk_forwarding) {
        options.push(InterventionOption {
            label: "Continue".to_string(),
            action: OptionAction::Continue,
        });
    }
    options.push(InterventionOption {
        label: "Use suggested rephrase".to_string(),
        action: OptionAction::RephraseWith(report.redacted_text.clone()),
    });
    options.push(InterventionOption {
        label: "Edit it myself".to_string(),
        action: OptionAction::FreeRephrase,
    });
    let mut out = vec![
        Intervention::new(InterventionKind::DisclosureReflection, REFLECTION_CUE)
            .with_options(options),
    ];
    if high_risk {
        out.push(
            Intervention::new(InterventionKind::CrisisReferral, CRISIS_MESSAGE)
                .with_referrals(config.referral_links()),
        );
    }
    out
}
