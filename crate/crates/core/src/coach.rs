//! Prompt coach: additive clarity rubric, adaptive hints and skill tracking.
//!
//! The score is `1 + has_topic + has_goal + (specificity_hits >= 1) +
//! (length_band == Ok)`, lowered by one when two or more ambiguity flags
//! fire, and clamped to `1..=5`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GatewayConfig, RubricConfig};
use crate::lexicon::{LexiconError, PhraseMatcher};
use crate::model::{ClarityAssessment, ClarityFeatures, GuidanceLevel, LengthBand, SkillProfile};

#[derive(Debug, Error)]
pub enum CoachError {
    #[error("rubric: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("rubric: {0}")]
    Invalid(String),
    #[error("hint templates are missing ({0:?}, {1:?})")]
    MissingTemplate(GuidanceLevel, MissingFeature),
}

/// Compiled matchers for the clarity rubric.
#[derive(Debug, Clone)]
pub struct ClarityRubric {
    topics: Vec<(String, PhraseMatcher)>,
    goal: PhraseMatcher,
    specificity: PhraseMatcher,
    hedges: PhraseMatcher,
    too_short_max_words: u32,
    too_long_min_words: u32,
}

fn words_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}]+(?:['\u{2019}][\p{L}]+)*").unwrap())
}

fn digits_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+\b").unwrap())
}

/// Words that do not give "it" an antecedent.
const FUNCTION_WORDS: &[&str] = &[
    "about", "also", "been", "can't", "could", "does", "doesn't", "don't", "explain", "from",
    "have", "help", "into", "just", "know", "like", "make", "please", "really", "should", "tell",
    "than", "that", "them", "then", "there", "they", "think", "this", "want", "what", "when",
    "where", "which", "will", "with", "would", "your",
];

impl ClarityRubric {
    pub fn from_config(rubric: &RubricConfig) -> Result<Self, CoachError> {
        if rubric.too_short_max_words >= rubric.too_long_min_words {
            return Err(CoachError::Invalid(
                "too_short_max_words must be below too_long_min_words".into(),
            ));
        }
        let topics = rubric
            .topic_keywords
            .iter()
            .filter(|(_, words)| !words.is_empty())
            .map(|(topic, words)| Ok((topic.clone(), PhraseMatcher::new(topic, words, false)?)))
            .collect::<Result<Vec<_>, LexiconError>>()?;
        if topics.is_empty() {
            return Err(CoachError::Invalid("topic_keywords must not be empty".into()));
        }
        let specificity: Vec<&String> = rubric
            .time_markers
            .iter()
            .chain(&rubric.quantity_markers)
            .chain(&rubric.activity_markers)
            .collect();
        Ok(Self {
            topics,
            goal: PhraseMatcher::new("goal_markers", &rubric.goal_markers, false)?,
            specificity: PhraseMatcher::new("specificity_markers", &specificity, false)?,
            hedges: PhraseMatcher::new("hedge_words", &rubric.hedge_words, false)?,
            too_short_max_words: rubric.too_short_max_words,
            too_long_min_words: rubric.too_long_min_words,
        })
    }

    pub fn bundled() -> Self {
        Self::from_config(&RubricConfig::default()).expect("default rubric is valid")
    }

    /// Topics whose keywords occur in `text`, in rubric order.
    pub fn matched_topics(&self, text: &str) -> Vec<&str> {
        self.topics
            .iter()
            .filter(|(_, m)| m.is_match(text))
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn features(&self, text: &str) -> ClarityFeatures {
        let words: Vec<&str> = words_re().find_iter(text).map(|m| m.as_str()).collect();
        let count = words.len() as u32;
        let length_band = if count <= self.too_short_max_words {
            LengthBand::TooShort
        } else if count >= self.too_long_min_words {
            LengthBand::TooLong
        } else {
            LengthBand::Ok
        };
        let specificity_hits = (self.specificity.count(text) + digits_re().find_iter(text).count())
            as u32;
        ClarityFeatures {
            has_topic: self.topics.iter().any(|(_, m)| m.is_match(text)),
            has_goal: self.goal.is_match(text),
            specificity_hits,
            length_band,
            ambiguity_flags: self.hedges.count(text) as u32 + dangling_it(&words),
        }
    }
}

/// Counts occurrences of "it" with no content word earlier in the turn.
fn dangling_it(words: &[&str]) -> u32 {
    let mut seen_content = false;
    let mut flags = 0;
    for w in words {
        let lower = w.to_lowercase();
        if lower == "it" {
            if !seen_content {
                flags += 1;
            }
        } else if lower.chars().count() >= 4 && !FUNCTION_WORDS.contains(&lower.as_str()) {
            seen_content = true;
        }
    }
    flags
}

/// The rubric score for a feature vector.
pub fn score_features(f: &ClarityFeatures) -> u8 {
    let raw = 1
        + u8::from(f.has_topic)
        + u8::from(f.has_goal)
        + u8::from(f.specificity_hits >= 1)
        + u8::from(f.length_band == LengthBand::Ok);
    let penalised = if f.ambiguity_flags >= 2 { raw - 1 } else { raw };
    penalised.clamp(1, 5)
}

/// Scores `text`. Hints are left empty; see [`generate_hints`].
pub fn assess_clarity(text: &str, rubric: &ClarityRubric) -> ClarityAssessment {
    let features = rubric.features(text);
    ClarityAssessment {
        score: score_features(&features),
        features,
        hints: Vec::new(),
        rephrase_options: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingFeature {
    Topic,
    Goal,
    Specificity,
    TooShort,
    TooLong,
    Ambiguity,
}

impl MissingFeature {
    pub const ALL: [MissingFeature; 6] = [
        Self::Topic,
        Self::Goal,
        Self::Specificity,
        Self::TooShort,
        Self::TooLong,
        Self::Ambiguity,
    ];

    /// Gaps in a feature vector, most important first.
    pub fn of(f: &ClarityFeatures) -> Vec<MissingFeature> {
        let mut out = Vec::new();
        if !f.has_topic {
            out.push(Self::Topic);
        }
        if !f.has_goal {
            out.push(Self::Goal);
        }
        if f.specificity_hits == 0 {
            out.push(Self::Specificity);
        }
        match f.length_band {
            LengthBand::TooShort => out.push(Self::TooShort),
            LengthBand::TooLong => out.push(Self::TooLong),
            LengthBand::Ok => {}
        }
        if f.ambiguity_flags >= 2 {
            out.push(Self::Ambiguity);
        }
        out
    }
}

/// The topic-menu question, with topics joined as "a, b, or c".
pub const TOPIC_TEMPLATE: &str = "Would you like to focus on {topics}?";

/// Hint text per (guidance level, missing feature). Templates may use the
/// `{topics}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HintTemplateSet {
    templates: BTreeMap<(GuidanceLevel, MissingFeature), String>,
    topics: Vec<String>,
}

impl HintTemplateSet {
    pub fn new(
        templates: BTreeMap<(GuidanceLevel, MissingFeature), String>,
        topics: Vec<String>,
    ) -> Result<Self, CoachError> {
        for level in GuidanceLevel::ALL {
            for feature in MissingFeature::ALL {
                if !templates.contains_key(&(level, feature)) {
                    return Err(CoachError::MissingTemplate(level, feature));
                }
            }
        }
        Ok(Self { templates, topics })
    }

    pub fn with_topics(topics: Vec<String>) -> Self {
        use GuidanceLevel::*;
        use MissingFeature::*;
        let rows: [(MissingFeature, [&str; 3]); 6] = [
            (Topic, [TOPIC_TEMPLATE, TOPIC_TEMPLATE, TOPIC_TEMPLATE]),
            (
                Goal,
                [
                    "Try saying what you would like from me, for example \"Can you explain why \
                     this happens?\" or \"Can you give me two tips?\"",
                    "Say what you would like from me, such as an explanation or a few tips.",
                    "What would you like from me?",
                ],
            ),
            (
                Specificity,
                [
                    "Add one concrete detail, such as when it happens (\"this week\", \"before \
                     exams\") or how often.",
                    "A concrete detail, like when it happens, would help.",
                    "Any detail on when or how often?",
                ],
            ),
            (
                TooShort,
                [
                    "Your message is very short. Try a full sentence about what is going on and \
                     what you need.",
                    "A little more detail would help me understand.",
                    "Could you say a bit more?",
                ],
            ),
            (
                TooLong,
                [
                    "That is a lot at once. Try picking the one part you most want help with \
                     first.",
                    "Consider starting with your main question.",
                    "What is the main question?",
                ],
            ),
            (
                Ambiguity,
                [
                    "Words like \"something\" or \"stuff\" are hard to act on. Try naming the \
                     specific thing you mean.",
                    "Try naming what \"it\" or \"stuff\" refers to.",
                    "Can you name it more specifically?",
                ],
            ),
        ];
        let mut templates = BTreeMap::new();
        for (feature, texts) in rows {
            for (level, text) in [Structured, Moderate, Subtle].into_iter().zip(texts) {
                templates.insert((level, feature), text.to_string());
            }
        }
        Self { templates, topics }
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn render(&self, level: GuidanceLevel, feature: MissingFeature) -> String {
        self.templates[&(level, feature)].replace("{topics}", &join_menu(&self.topics))
    }
}

impl Default for HintTemplateSet {
    fn default() -> Self {
        Self::with_topics(crate::config::TopicMenu::default().menu)
    }
}

/// "a", "a or b", "a, b, or c".
pub fn join_menu(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} or {b}"),
        [rest @ .., last] => format!("{}, or {last}", rest.join(", ")),
    }
}

const GOAL_ASKS: [&str; 3] = [
    "Can you explain what might be going on?",
    "Can you suggest two small steps I could try?",
    "Can you help me think this through?",
];

const FOCUS_ASKS: [&str; 3] = [
    "Can you give me two concrete tips?",
    "Can you keep it to a few short steps?",
    "Can you explain it in simple terms?",
];

fn with_terminal(text: &str) -> String {
    let t = text.trim();
    if t.ends_with(['.', '!', '?', '\u{2026}']) {
        t.to_string()
    } else {
        format!("{t}.")
    }
}

fn first_sentence(text: &str) -> &str {
    let t = text.trim();
    t.find(['.', '!', '?'])
        .map(|i| &t[..=i])
        .unwrap_or(t)
}

/// Suggested rewrites built from the user's own words plus a topic or an
/// explicit ask.
fn rephrase_options(text: &str, f: &ClarityFeatures, topics: &[String], max: usize) -> Vec<String> {
    let base = if f.length_band == LengthBand::TooLong {
        with_terminal(first_sentence(text))
    } else {
        with_terminal(text)
    };
    if !f.has_topic {
        topics
            .iter()
            .take(max)
            .map(|t| format!("{base} I'd like to focus on {t}."))
            .collect()
    } else if !f.has_goal {
        GOAL_ASKS.iter().take(max).map(|a| format!("{base} {a}")).collect()
    } else {
        FOCUS_ASKS.iter().take(max).map(|a| format!("{base} {a}")).collect()
    }
}

/// Hints and rephrase options for an assessment, sized by guidance level.
/// Both lists are empty when `score >= threshold`.
pub fn generate_hints(
    text: &str,
    assessment: &ClarityAssessment,
    skill: &SkillProfile,
    templates: &HintTemplateSet,
    threshold: u8,
) -> (Vec<String>, Vec<String>) {
    if assessment.score >= threshold {
        return (Vec::new(), Vec::new());
    }
    let (max_hints, max_options) = match skill.guidance_level {
        GuidanceLevel::Structured => (3, 3),
        GuidanceLevel::Moderate => (2, 1),
        GuidanceLevel::Subtle => (1, 0),
    };
    // any score below 5 has at least one gap
    let missing = MissingFeature::of(&assessment.features);
    debug_assert!(!missing.is_empty());
    let hints = missing
        .iter()
        .take(max_hints)
        .map(|&m| templates.render(skill.guidance_level, m))
        .collect();
    let options = rephrase_options(text, &assessment.features, templates.topics(), max_options);
    (hints, options)
}

/// EMA weight and guidance thresholds for skill tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkillParams {
    pub ema_weight: f64,
    pub structured_below: f64,
    pub moderate_below: f64,
}

impl Default for SkillParams {
    fn default() -> Self {
        Self {
            ema_weight: 0.3,
            structured_below: 2.5,
            moderate_below: 3.75,
        }
    }
}

impl SkillParams {
    pub fn from_rubric(r: &RubricConfig) -> Self {
        Self {
            ema_weight: r.ema_weight,
            structured_below: r.structured_below,
            moderate_below: r.moderate_below,
        }
    }

    pub fn level_for(&self, rolling: f64) -> GuidanceLevel {
        if rolling < self.structured_below {
            GuidanceLevel::Structured
        } else if rolling < self.moderate_below {
            GuidanceLevel::Moderate
        } else {
            GuidanceLevel::Subtle
        }
    }
}

pub fn update_skill(profile: &SkillProfile, score: u8, params: &SkillParams) -> SkillProfile {
    let score = f64::from(score.clamp(1, 5));
    let w = params.ema_weight;
    let rolling = ((1.0 - w) * profile.rolling_clarity + w * score).clamp(1.0, 5.0);
    SkillProfile {
        rolling_clarity: rolling,
        turns_observed: profile.turns_observed + 1,
        guidance_level: params.level_for(rolling),
    }
}

/// Rubric, templates and thresholds bundled for the gateway and harness.
#[derive(Debug, Clone)]
pub struct PromptCoach {
    pub rubric: ClarityRubric,
    pub templates: HintTemplateSet,
    pub threshold: u8,
    pub skill_params: SkillParams,
}

impl PromptCoach {
    pub fn from_config(config: &GatewayConfig) -> Result<Self, CoachError> {
        Ok(Self {
            rubric: ClarityRubric::from_config(&config.rubric)?,
            templates: HintTemplateSet::with_topics(config.topics.menu.clone()),
            threshold: config.limits.clarity_hint_threshold,
            skill_params: SkillParams::from_rubric(&config.rubric),
        })
    }

    pub fn bundled() -> Self {
        Self {
            rubric: ClarityRubric::bundled(),
            templates: HintTemplateSet::default(),
            threshold: 4,
            skill_params: SkillParams::default(),
        }
    }

    /// Score plus hints for the given skill level.
    pub fn assess(&self, text: &str, skill: &SkillProfile) -> ClarityAssessment {
        let mut a = assess_clarity(text, &self.rubric);
        let (hints, options) = generate_hints(text, &a, skill, &self.templates, self.threshold);
        a.hints = hints;
        a.rephrase_options = options;
        a
    }

    pub fn update_skill(&self, profile: &SkillProfile, score: u8) -> SkillProfile {
        update_skill(profile, score, &self.skill_params)
    }
}
