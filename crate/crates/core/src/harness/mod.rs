//! Offline evaluation: replays transcripts through the literacy pipeline and
//! computes disclosure proportions, clarity trajectories and agreement with
//! hand labels. Never touches the network.

mod transcript;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coach::PromptCoach;
use crate::config::GatewayConfig;
use crate::disclosure::{interventions_for, DisclosureMonitor};
use crate::model::{DisclosureLabel, InterventionKind, SensitiveSpan, SkillProfile, UserTurn};
use crate::tallies::{proportions_or_no_data, InterventionCounts, LabelCounts, Proportions};
use crate::transparency::{detect_trigger, maybe_emit, CooldownState, TriggerPatterns};

pub use transcript::{
    load_transcript, parse_transcript, Condition, Speaker, TranscriptError, TranscriptTurn,
};

/// Width of the turn-position buckets used for clarity trajectories.
pub const BUCKET_WIDTH: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarnessError {
    #[error("transcript has no user turns")]
    NoUserTurns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserAnnotation {
    pub label: DisclosureLabel,
    pub spans: Vec<SensitiveSpan>,
    pub clarity: u8,
    /// Ordinal of this user turn within its session, from 0.
    pub position: usize,
    pub interventions: Vec<InterventionKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedTurn {
    pub turn: TranscriptTurn,
    pub annotation: Option<UserAnnotation>,
}

/// The engines a replay runs through.
#[derive(Debug, Clone)]
pub struct Annotator {
    pub monitor: DisclosureMonitor,
    pub coach: PromptCoach,
    pub triggers: TriggerPatterns,
    pub config: GatewayConfig,
}

impl Annotator {
    pub fn new(
        monitor: DisclosureMonitor,
        coach: PromptCoach,
        triggers: TriggerPatterns,
        config: GatewayConfig,
    ) -> Self {
        Self {
            monitor,
            coach,
            triggers,
            config,
        }
    }

    /// Re-applies the disclosure monitor, prompt coach and transparency
    /// engine to every user turn, session by session, as if each turn had
    /// been forwarded. Output is in input order.
    pub fn annotate(&self, turns: &[TranscriptTurn]) -> Vec<AnnotatedTurn> {
        let mut sessions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, t) in turns.iter().enumerate() {
            sessions.entry(t.session_id.as_str()).or_default().push(i);
        }
        let per_session: Vec<Vec<(usize, Option<UserAnnotation>)>> = sessions
            .into_par_iter()
            .map(|(_, idx)| self.annotate_session(turns, &idx))
            .collect();
        let mut slots: Vec<Option<UserAnnotation>> = vec![None; turns.len()];
        for (i, a) in per_session.into_iter().flatten() {
            slots[i] = a;
        }
        turns
            .iter()
            .cloned()
            .zip(slots)
            .map(|(turn, annotation)| AnnotatedTurn { turn, annotation })
            .collect()
    }

    fn annotate_session(
        &self,
        turns: &[TranscriptTurn],
        idx: &[usize],
    ) -> Vec<(usize, Option<UserAnnotation>)> {
        let mut skill = SkillProfile::default();
        let mut cooldown = CooldownState::default();
        let mut position = 0usize;
        let mut out = Vec::with_capacity(idx.len());
        for &i in idx {
            let t = &turns[i];
            if t.speaker != Speaker::User {
                out.push((i, None));
                continue;
            }
            let report = self.monitor.build_report(&t.text);
            let clarity = self.coach.assess(&t.text, &skill);
            let mut kinds: Vec<InterventionKind> = Vec::new();
            if self.config.limits.disclosure_monitor {
                kinds.extend(interventions_for(&report, &self.config).iter().map(|iv| iv.kind));
            }
            kinds.extend(clarity.hints.iter().map(|_| InterventionKind::PromptHint));
            let user_turn = UserTurn {
                session_id: t.session_id.clone(),
                turn_index: position as u64,
                text: t.text.clone(),
                received_at: 0,
            };
            let topic = detect_trigger(&user_turn, &report, &self.triggers);
            let (note, next) = maybe_emit(topic, &cooldown, position as u64, &self.config);
            cooldown = next;
            if let Some(note) = note {
                kinds.push(note.kind);
            }
            skill = self.coach.update_skill(&skill, clarity.score);
            out.push((
                i,
                Some(UserAnnotation {
                    label: report.label,
                    spans: report.spans,
                    clarity: clarity.score,
                    position,
                    interventions: kinds,
                }),
            ));
            position += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBucket {
    pub first_position: usize,
    pub last_position: usize,
    pub turns: u64,
    pub mean_clarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionMetrics {
    pub sessions: u64,
    pub user_turns: u64,
    pub label_counts: LabelCounts,
    #[serde(serialize_with = "proportions_or_no_data")]
    pub proportions: Option<Proportions>,
    pub mean_clarity: Option<f64>,
    pub clarity_trajectory: Vec<TrajectoryBucket>,
    pub intervention_counts: InterventionCounts,
    /// Non-safe turns whose next user turn in the session was classified
    /// as less severe, over all non-safe turns.
    pub rephrase_acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub gold_labeled_turns: u64,
    pub label_agreement: Option<f64>,
    /// `confusion[gold][predicted]`.
    pub confusion: BTreeMap<DisclosureLabel, BTreeMap<DisclosureLabel, u64>>,
    pub gold_clarity_turns: u64,
    pub clarity_mae: Option<f64>,
}

impl Agreement {
    pub fn confusions(&self, gold: DisclosureLabel, predicted: DisclosureLabel) -> u64 {
        self.confusion
            .get(&gold)
            .and_then(|row| row.get(&predicted))
            .copied()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub conditions: BTreeMap<Condition, ConditionMetrics>,
    pub agreement: Agreement,
}

impl MetricsReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Transcript metrics\n\n");
        out.push_str("## Disclosure\n\n");
        out.push_str(
            "| condition | sessions | user turns | safe | personal | high risk | mean clarity | rephrase rate |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for (cond, m) in &self.conditions {
            let (s, p, h) = match m.proportions {
                Some(p) => (
                    format!("{:.3}", p.safe),
                    format!("{:.3}", p.personal),
                    format!("{:.3}", p.high_risk),
                ),
                None => ("no data".into(), "no data".into(), "no data".into()),
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {s} | {p} | {h} | {} | {} |",
                condition_name(*cond),
                m.sessions,
                m.user_turns,
                fmt_opt(m.mean_clarity),
                fmt_opt(m.rephrase_acceptance_rate),
            );
        }
        out.push_str("\n## Interventions\n\n");
        out.push_str("| condition | prompt hint | reflection | transparency | referral |\n");
        out.push_str("|---|---|---|---|---|\n");
        for (cond, m) in &self.conditions {
            let c = &m.intervention_counts;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                condition_name(*cond),
                c.prompt_hint,
                c.disclosure_reflection,
                c.transparency_note,
                c.crisis_referral
            );
        }
        out.push_str("\n## Clarity trajectory\n\n");
        out.push_str("| condition | positions | turns | mean clarity |\n|---|---|---|---|\n");
        for (cond, m) in &self.conditions {
            for b in &m.clarity_trajectory {
                let _ = writeln!(
                    out,
                    "| {} | {}-{} | {} | {:.3} |",
                    condition_name(*cond),
                    b.first_position,
                    b.last_position,
                    b.turns,
                    b.mean_clarity
                );
            }
        }
        let a = &self.agreement;
        out.push_str("\n## Agreement with gold labels\n\n");
        let _ = writeln!(out, "- gold-labeled turns: {}", a.gold_labeled_turns);
        let _ = writeln!(out, "- label agreement: {}", fmt_opt(a.label_agreement));
        let _ = writeln!(out, "- gold clarity turns: {}", a.gold_clarity_turns);
        let _ = writeln!(out, "- clarity MAE: {}", fmt_opt(a.clarity_mae));
        if a.gold_labeled_turns > 0 {
            out.push_str("\n| gold \\ predicted | safe | personal | high_risk |\n|---|---|---|---|\n");
            for g in DisclosureLabel::ALL {
                let _ = writeln!(
                    out,
                    "| {g} | {} | {} | {} |",
                    a.confusions(g, DisclosureLabel::Safe),
                    a.confusions(g, DisclosureLabel::Personal),
                    a.confusions(g, DisclosureLabel::HighRisk)
                );
            }
        }
        out
    }
}

fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::Baseline => "baseline",
        Condition::Literacy => "literacy",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

#[derive(Default)]
struct ConditionAcc {
    sessions: BTreeMap<String, Vec<(DisclosureLabel, u8)>>,
    labels: LabelCounts,
    clarity_sum: u64,
    buckets: BTreeMap<usize, (u64, u64)>,
    interventions: InterventionCounts,
}

pub fn compute_metrics(annotated: &[AnnotatedTurn]) -> Result<MetricsReport, HarnessError> {
    let mut per_condition: BTreeMap<Condition, ConditionAcc> = BTreeMap::new();
    let mut gold_labeled = 0u64;
    let mut gold_agree = 0u64;
    let mut confusion: BTreeMap<DisclosureLabel, BTreeMap<DisclosureLabel, u64>> = BTreeMap::new();
    let mut gold_clarity_turns = 0u64;
    let mut abs_err_sum = 0u64;

    for a in annotated {
        let Some(ann) = &a.annotation else { continue };
        let acc = per_condition.entry(a.turn.condition).or_default();
        acc.sessions
            .entry(a.turn.session_id.clone())
            .or_default()
            .push((ann.label, ann.clarity));
        acc.labels.record(ann.label);
        acc.clarity_sum += u64::from(ann.clarity);
        let bucket = acc.buckets.entry(ann.position / BUCKET_WIDTH).or_default();
        bucket.0 += 1;
        bucket.1 += u64::from(ann.clarity);
        for kind in &ann.interventions {
            acc.interventions.record(*kind);
        }
        if let Some(gold) = a.turn.gold_label {
            gold_labeled += 1;
            if gold == ann.label {
                gold_agree += 1;
            }
            *confusion.entry(gold).or_default().entry(ann.label).or_default() += 1;
        }
        if let Some(gold) = a.turn.gold_clarity {
            gold_clarity_turns += 1;
            abs_err_sum += u64::from(gold.abs_diff(ann.clarity));
        }
    }
    if per_condition.is_empty() {
        return Err(HarnessError::NoUserTurns);
    }

    let conditions = per_condition
        .into_iter()
        .map(|(cond, acc)| {
            let user_turns = acc.labels.total();
            let mut held = 0u64;
            let mut accepted = 0u64;
            for turns in acc.sessions.values() {
                for (i, (label, _)) in turns.iter().enumerate() {
                    if *label == DisclosureLabel::Safe {
                        continue;
                    }
                    held += 1;
                    if turns.get(i + 1).is_some_and(|(next, _)| next < label) {
                        accepted += 1;
                    }
                }
            }
            let clarity_trajectory = acc
                .buckets
                .iter()
                .map(|(&b, &(n, sum))| TrajectoryBucket {
                    first_position: b * BUCKET_WIDTH,
                    last_position: b * BUCKET_WIDTH + BUCKET_WIDTH - 1,
                    turns: n,
                    mean_clarity: sum as f64 / n as f64,
                })
                .collect();
            let metrics = ConditionMetrics {
                sessions: acc.sessions.len() as u64,
                user_turns,
                label_counts: acc.labels,
                proportions: acc.labels.proportions(),
                mean_clarity: (user_turns > 0).then(|| acc.clarity_sum as f64 / user_turns as f64),
                clarity_trajectory,
                intervention_counts: acc.interventions,
                rephrase_acceptance_rate: (held > 0).then(|| accepted as f64 / held as f64),
            };
            (cond, metrics)
        })
        .collect();

    Ok(MetricsReport {
        conditions,
        agreement: Agreement {
            gold_labeled_turns: gold_labeled,
            label_agreement: (gold_labeled > 0).then(|| gold_agree as f64 / gold_labeled as f64),
            confusion,
            gold_clarity_turns,
            clarity_mae: (gold_clarity_turns > 0)
                .then(|| abs_err_sum as f64 / gold_clarity_turns as f64),
        },
    })
}
