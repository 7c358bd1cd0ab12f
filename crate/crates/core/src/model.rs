//! Shared domain types: turns, the disclosure taxonomy, sensitive spans,
//! clarity assessments, skill profiles and interventions.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One inbound user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTurn {
    pub session_id: String,
    pub turn_index: u64,
    pub text: String,
    /// Local clock, milliseconds since the Unix epoch.
    pub received_at: u64,
}

/// Three-class disclosure sensitivity scale.
///
/// The derived ordering is the severity order `Safe < Personal < HighRisk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisclosureLabel {
    Safe,
    Personal,
    HighRisk,
}

impl DisclosureLabel {
    pub const ALL: [DisclosureLabel; 3] = [Self::Safe, Self::Personal, Self::HighRisk];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Safe => "safe",
            Self::Personal => "personal",
            Self::HighRisk => "high_risk",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Self::Safe => 0,
            Self::Personal => 1,
            Self::HighRisk => 2,
        }
    }
}

impl fmt::Display for DisclosureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Join of two labels under the severity order.
pub fn severity_max(a: DisclosureLabel, b: DisclosureLabel) -> DisclosureLabel {
    a.max(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanCategory {
    PersonName,
    Location,
    ContactInfo,
    DateOfEvent,
    Identifier,
    LifeEventDetail,
    CrisisIndicator,
}

impl SpanCategory {
    pub const ALL: [SpanCategory; 7] = [
        Self::PersonName,
        Self::Location,
        Self::ContactInfo,
        Self::DateOfEvent,
        Self::Identifier,
        Self::LifeEventDetail,
        Self::CrisisIndicator,
    ];

    /// Placeholder token substituted for a span of this category.
    pub fn placeholder(&self) -> &'static str {
        match self {
            Self::PersonName => "[NAME]",
            Self::Location => "[PLACE]",
            Self::ContactInfo => "[CONTACT]",
            Self::DateOfEvent => "[DATE]",
            Self::Identifier => "[ID]",
            Self::LifeEventDetail => "[DETAIL]",
            Self::CrisisIndicator => "[CRISIS]",
        }
    }

    /// Label a span of this category forces on its message on its own.
    pub fn severity(&self) -> DisclosureLabel {
        match self {
            Self::CrisisIndicator => DisclosureLabel::HighRisk,
            _ => DisclosureLabel::Personal,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PersonName => "person_name",
            Self::Location => "location",
            Self::ContactInfo => "contact_info",
            Self::DateOfEvent => "date_of_event",
            Self::Identifier => "identifier",
            Self::LifeEventDetail => "life_event_detail",
            Self::CrisisIndicator => "crisis_indicator",
        }
    }
}

/// A detected sensitive region of a message. Offsets are byte offsets on
/// codepoint boundaries; `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveSpan {
    pub start: usize,
    pub end: usize,
    pub category: SpanCategory,
    pub matched_text: String,
    pub rule_id: String,
}

impl SensitiveSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &SensitiveSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureReport {
    pub label: DisclosureLabel,
    pub spans: Vec<SensitiveSpan>,
    pub rationale: String,
    pub redacted_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthBand {
    TooShort,
    Ok,
    TooLong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClarityFeatures {
    pub has_topic: bool,
    pub has_goal: bool,
    pub specificity_hits: u32,
    pub length_band: LengthBand,
    pub ambiguity_flags: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarityAssessment {
    /// Always in `1..=5`.
    pub score: u8,
    pub features: ClarityFeatures,
    pub hints: Vec<String>,
    pub rephrase_options: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceLevel {
    Structured,
    Moderate,
    Subtle,
}

impl GuidanceLevel {
    pub const ALL: [GuidanceLevel; 3] = [Self::Structured, Self::Moderate, Self::Subtle];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub rolling_clarity: f64,
    pub turns_observed: u64,
    pub guidance_level: GuidanceLevel,
}

impl Default for SkillProfile {
    fn default() -> Self {
        Self {
            rolling_clarity: 1.0,
            turns_observed: 0,
            guidance_level: GuidanceLevel::Structured,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    PromptHint,
    DisclosureReflection,
    TransparencyNote,
    CrisisReferral,
}

impl InterventionKind {
    pub const ALL: [InterventionKind; 4] = [
        Self::PromptHint,
        Self::DisclosureReflection,
        Self::TransparencyNote,
        Self::CrisisReferral,
    ];

    pub fn is_blocking(&self) -> bool {
        matches!(self, Self::DisclosureReflection | Self::CrisisReferral)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PromptHint => "prompt_hint",
            Self::DisclosureReflection => "disclosure_reflection",
            Self::TransparencyNote => "transparency_note",
            Self::CrisisReferral => "crisis_referral",
        }
    }
}

/// What choosing an intervention option does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "text", rename_all = "snake_case")]
pub enum OptionAction {
    Continue,
    RephraseWith(String),
    FreeRephrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionOption {
    pub label: String,
    #[serde(flatten)]
    pub action: OptionAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReferralLink {
    pub name: String,
    pub url: String,
}

/// A literacy event shown to the user.
///
/// Construct through [`Intervention::new`] so that `blocking` always agrees
/// with `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub kind: InterventionKind,
    pub message: String,
    pub blocking: bool,
    pub options: Vec<InterventionOption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub referral_links: Vec<ReferralLink>,
}

impl Intervention {
    pub fn new(kind: InterventionKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            blocking: kind.is_blocking(),
            options: Vec::new(),
            referral_links: Vec::new(),
        }
    }

    pub fn with_options(mut self, options: Vec<InterventionOption>) -> Self {
        self.options = options;
        self
    }

    pub fn with_referrals(mut self, links: Vec<ReferralLink>) -> Self {
        self.referral_links = links;
        self
    }
}
