//! Count-only metrics shared by the gateway and the evaluation harness.
//! Nothing here ever holds message text.

use serde::{Deserialize, Serialize, Serializer};

use crate::model::{DisclosureLabel, InterventionKind, SkillProfile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub safe: u64,
    pub personal: u64,
    pub high_risk: u64,
}

impl LabelCounts {
    pub fn record(&mut self, label: DisclosureLabel) {
        match label {
            DisclosureLabel::Safe => self.safe += 1,
            DisclosureLabel::Personal => self.personal += 1,
            DisclosureLabel::HighRisk => self.high_risk += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.safe + self.personal + self.high_risk
    }

    /// `None` when nothing has been counted.
    pub fn proportions(&self) -> Option<Proportions> {
        let total = self.total();
        (total > 0).then(|| {
            let t = total as f64;
            Proportions {
                safe: self.safe as f64 / t,
                personal: self.personal as f64 / t,
                high_risk: self.high_risk as f64 / t,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub safe: f64,
    pub personal: f64,
    pub high_risk: f64,
}

impl Proportions {
    pub fn sum(&self) -> f64 {
        self.safe + self.personal + self.high_risk
    }
}

/// Serializes `None` as the string `"no data"`.
pub(crate) fn proportions_or_no_data<S: Serializer>(
    value: &Option<Proportions>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match value {
        Some(p) => p.serialize(s),
        None => s.serialize_str("no data"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionCounts {
    pub prompt_hint: u64,
    pub disclosure_reflection: u64,
    pub transparency_note: u64,
    pub crisis_referral: u64,
}

impl InterventionCounts {
    pub fn record(&mut self, kind: InterventionKind) {
        match kind {
            InterventionKind::PromptHint => self.prompt_hint += 1,
            InterventionKind::DisclosureReflection => self.disclosure_reflection += 1,
            InterventionKind::TransparencyNote => self.transparency_note += 1,
            InterventionKind::CrisisReferral => self.crisis_referral += 1,
        }
    }

    pub fn get(&self, kind: InterventionKind) -> u64 {
        match kind {
            InterventionKind::PromptHint => self.prompt_hint,
            InterventionKind::DisclosureReflection => self.disclosure_reflection,
            InterventionKind::TransparencyNote => self.transparency_note,
            InterventionKind::CrisisReferral => self.crisis_referral,
        }
    }
}

/// Running per-session tallies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTallies {
    pub labels: LabelCounts,
    pub clarity_sum: u64,
    pub clarity_count: u64,
    pub interventions: InterventionCounts,
    pub rephrase_accepted: u64,
    pub continue_chosen: u64,
}

impl MetricsTallies {
    pub fn record_turn(&mut self, label: DisclosureLabel, clarity: u8) {
        self.labels.record(label);
        self.clarity_sum += u64::from(clarity);
        self.clarity_count += 1;
    }

    pub fn mean_clarity(&self) -> Option<f64> {
        (self.clarity_count > 0).then(|| self.clarity_sum as f64 / self.clarity_count as f64)
    }
}

/// Exported per-session report: counts and ratios only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionMetricsReport {
    pub session_id: String,
    pub classified_turns: u64,
    pub label_counts: LabelCounts,
    #[serde(serialize_with = "proportions_or_no_data")]
    pub proportions: Option<Proportions>,
    pub mean_clarity: Option<f64>,
    pub intervention_counts: InterventionCounts,
    pub rephrase_accepted: u64,
    pub continue_chosen: u64,
    pub skill: SkillProfile,
}

impl SessionMetricsReport {
    pub fn from_tallies(session_id: &str, tallies: &MetricsTallies, skill: SkillProfile) -> Self {
        Self {
            session_id: session_id.to_string(),
            classified_turns: tallies.labels.total(),
            label_counts: tallies.labels,
            proportions: tallies.labels.proportions(),
            mean_clarity: tallies.mean_clarity(),
            intervention_counts: tallies.interventions,
            rephrase_accepted: tallies.rephrase_accepted,
            continue_chosen: tallies.continue_chosen,
            skill,
        }
    }
}
