//! Gateway configuration file.
//!
//! The file is TOML with the sections `[upstream]`, `[[referrals]]`,
//! `[topics]`, `[rubric]`, `[transparency]`, `[limits]`, `[lexicons]` and
//! `[metrics]`. Everything except `[upstream].endpoint` and at least one
//! referral entry has a default. Relative paths are resolved against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::model::ReferralLink;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    MissingFile(PathBuf),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {field}: {reason}")]
    ValidationError { field: &'static str, reason: String },
    #[error("cannot serialize config: {0}")]
    Serialize(String),
}

impl ConfigError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Self::ValidationError {
            field,
            reason: reason.into(),
        }
    }
}

/// A string that never shows up in `Debug` output.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub upstream: UpstreamConfig,
    #[serde(default)]
    pub referrals: Vec<ReferralEntry>,
    #[serde(default)]
    pub topics: TopicMenu,
    #[serde(default)]
    pub rubric: RubricConfig,
    #[serde(default)]
    pub transparency: TransparencyTemplates,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub lexicons: LexiconPaths,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamConfig {
    pub endpoint: Url,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<Secret>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_model() -> String {
    "default".to_string()
}

fn default_timeout_secs() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferralEntry {
    pub name: String,
    pub url: String,
    #[serde(default)]
    pub region: String,
}

impl From<&ReferralEntry> for ReferralLink {
    fn from(entry: &ReferralEntry) -> Self {
        ReferralLink {
            name: entry.name.clone(),
            url: entry.url.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicMenu {
    pub menu: Vec<String>,
}

impl Default for TopicMenu {
    fn default() -> Self {
        Self {
            menu: vec![
                "stress".into(),
                "relationships".into(),
                "study pressure".into(),
            ],
        }
    }
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Word lists and thresholds behind the clarity rubric and skill tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RubricConfig {
    pub goal_markers: Vec<String>,
    pub time_markers: Vec<String>,
    pub quantity_markers: Vec<String>,
    pub activity_markers: Vec<String>,
    pub hedge_words: Vec<String>,
    pub too_short_max_words: u32,
    pub too_long_min_words: u32,
    pub ema_weight: f64,
    pub structured_below: f64,
    pub moderate_below: f64,
    pub topic_keywords: BTreeMap<String, Vec<String>>,
}

impl Default for RubricConfig {
    fn default() -> Self {
        let mut topic_keywords = BTreeMap::new();
        topic_keywords.insert(
            "stress".to_string(),
            words(&[
                "stress", "stressed", "stressful", "stresses", "anxious", "anxiety", "worry",
                "worried", "worrying", "overwhelmed", "panic", "nervous", "burnout", "tired",
                "exhausted", "sleep", "sleeping", "calm", "overthinking", "sad", "lonely",
                "guilty", "unmotivated", "mood",
            ]),
        );
        topic_keywords.insert(
            "relationships".to_string(),
            words(&[
                "friend", "friends", "friendship", "partner", "boyfriend", "girlfriend",
                "relationship", "relationships", "family", "parents", "mom", "dad", "sister",
                "brother", "roommate", "breakup", "argued", "argument", "someone", "people",
            ]),
        );
        topic_keywords.insert(
            "study pressure".to_string(),
            words(&[
                "exam", "exams", "study", "studying", "class", "classes", "grades", "assignment",
                "assignments", "deadline", "deadlines", "school", "university", "homework",
                "midterm", "semester", "presentation", "professor", "course",
            ]),
        );
        Self {
            goal_markers: words(&[
                "help me", "explain", "how do i", "how can i", "how should i", "what can i",
                "what should i", "can you", "could you", "would you", "tips", "advice",
                "suggest", "ways to", "how to", "tell me", "what are some", "what does",
                "is it normal",
            ]),
            time_markers: words(&[
                "today", "tonight", "tomorrow", "yesterday", "this week", "next week",
                "last week", "this weekend", "this semester", "every day", "each day",
                "in the morning", "at night", "before bed", "lately", "most evenings",
                "this month", "right now",
            ]),
            quantity_markers: words(&[
                "one", "two", "three", "four", "five", "a few", "a couple", "several",
                "minutes", "hours", "once", "twice", "short",
            ]),
            activity_markers: words(&[
                "presentation", "exam", "midterm", "breathing exercise", "journaling",
                "running", "walking", "meditation", "sleep schedule", "studying", "work shift",
                "interview", "talk in class",
            ]),
            hedge_words: words(&[
                "something", "stuff", "things", "thing", "whatever", "somehow", "kind of",
                "sort of", "idk",
            ]),
            too_short_max_words: 3,
            too_long_min_words: 120,
            ema_weight: 0.3,
            structured_below: 2.5,
            moderate_below: 3.75,
            topic_keywords,
        }
    }
}

/// One template per transparency topic. Templates may use the slots
/// `{upstream_host}` and `{pending_ttl_minutes}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransparencyTemplates {
    pub data_collected: String,
    pub data_use: String,
    pub data_not_stored: String,
    pub system_behavior: String,
}

impl Default for TransparencyTemplates {
    fn default() -> Self {
        Self {
            data_collected: "What we collect: the text of the message you type. It is held on \
                             this device while your message is being checked."
                .into(),
            data_use: "How it is used: your message is checked on this device to offer tips and \
                       privacy reminders. It is only sent to the chat model at {upstream_host} \
                       after any check-in you are asked to confirm."
                .into(),
            data_not_stored: "What is not stored: your words are not saved after this session. \
                              A message waiting for your choice is erased after \
                              {pending_ttl_minutes} minutes. We only keep counts, such as how \
                              many tips were shown."
                .into(),
            system_behavior: "How this works: a helper on this device reads each message before \
                              it goes to the chat model at {upstream_host}. It may suggest \
                              clearer wording or ask before sharing personal details. The chat \
                              model writes the replies."
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub cooldown_turns: u32,
    pub clarity_hint_threshold: u8,
    pub block_high_risk_forwarding: bool,
    pub pending_ttl_secs: u64,
    pub disclosure_monitor: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            cooldown_turns: 5,
            clarity_hint_threshold: 4,
            block_high_risk_forwarding: true,
            pending_ttl_secs: 30 * 60,
            disclosure_monitor: true,
        }
    }
}

/// Optional replacements for the bundled lexicons.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy_triggers: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_triggers: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub path: PathBuf,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("literacy-metrics.jsonl"),
        }
    }
}

impl GatewayConfig {
    /// A valid config with every default and the given endpoint and
    /// referrals.
    pub fn with_defaults(endpoint: Url, referrals: Vec<ReferralEntry>) -> Self {
        Self {
            upstream: UpstreamConfig {
                endpoint,
                api_key: None,
                model: default_model(),
                timeout_secs: default_timeout_secs(),
            },
            referrals,
            topics: TopicMenu::default(),
            rubric: RubricConfig::default(),
            transparency: TransparencyTemplates::default(),
            limits: Limits::default(),
            lexicons: LexiconPaths::default(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn referral_links(&self) -> Vec<ReferralLink> {
        self.referrals.iter().map(ReferralLink::from).collect()
    }

    /// Checks every invariant, naming the first one violated.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.upstream.endpoint.scheme(), "http" | "https") {
            return Err(ConfigError::invalid(
                "upstream.endpoint",
                "scheme must be http or https",
            ));
        }
        if self.upstream.timeout_secs == 0 {
            return Err(ConfigError::invalid("upstream.timeout_secs", "must be >= 1"));
        }
        if self.limits.disclosure_monitor && self.referrals.is_empty() {
            return Err(ConfigError::invalid(
                "referral_registry",
                "at least one referral entry is required while the disclosure monitor is enabled",
            ));
        }
        for r in &self.referrals {
            if r.name.trim().is_empty() || r.url.trim().is_empty() {
                return Err(ConfigError::invalid(
                    "referral_registry",
                    "referral entries need a name and a url",
                ));
            }
        }
        if self.limits.cooldown_turns < 1 {
            return Err(ConfigError::invalid("cooldown_turns", "must be >= 1"));
        }
        if !(1..=5).contains(&self.limits.clarity_hint_threshold) {
            return Err(ConfigError::invalid(
                "clarity_hint_threshold",
                "must be between 1 and 5",
            ));
        }
        if self.topics.menu.is_empty() || self.topics.menu.iter().any(|t| t.trim().is_empty()) {
            return Err(ConfigError::invalid("topics", "menu needs non-blank topics"));
        }
        let r = &self.rubric;
        if r.topic_keywords.is_empty() || r.topic_keywords.values().all(Vec::is_empty) {
            return Err(ConfigError::invalid("rubric.topic_keywords", "must not be empty"));
        }
        if r.too_short_max_words >= r.too_long_min_words {
            return Err(ConfigError::invalid(
                "rubric.length_bands",
                "too_short_max_words must be below too_long_min_words",
            ));
        }
        if !(r.ema_weight > 0.0 && r.ema_weight <= 1.0) {
            return Err(ConfigError::invalid("rubric.ema_weight", "must be in (0, 1]"));
        }
        if !(1.0..=5.0).contains(&r.structured_below)
            || !(1.0..=5.0).contains(&r.moderate_below)
            || r.structured_below >= r.moderate_below
        {
            return Err(ConfigError::invalid(
                "rubric.guidance_thresholds",
                "need 1 <= structured_below < moderate_below <= 5",
            ));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.lexicons.rules,
            &mut self.lexicons.privacy_triggers,
            &mut self.lexicons.system_triggers,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut self.metrics.path);
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }
}

/// Parses config text without touching the filesystem. Relative paths are
/// resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<GatewayConfig, ConfigError> {
    let mut config: GatewayConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_column(text, span.start))
            .unwrap_or((0, 0));
        ConfigError::ParseError {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    config.resolve_paths(base_dir);
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<GatewayConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ConfigError::MissingFile(path.to_path_buf())
        } else {
            ConfigError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    parse_config(&text, &base)
}

pub fn write_config(config: &GatewayConfig, path: &Path) -> Result<(), ConfigError> {
    let text = config.to_toml_string()?;
    std::fs::write(path, text).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map(|i| before[i + 1..].chars().count())
        .unwrap_or_else(|| before.chars().count())
        + 1;
    (line, column)
}
